"""Binary persistence for rendered samples.

Format: 16-byte header (4-byte magic, u32 modality code, u32 d0, u32 d1,
little-endian) followed by d0*d1 float32 values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .types import AUDIO_LEN

MAGIC = b"AME1"
_HEADER = struct.Struct("<4sIII")
MODALITY_CODES = {"image": 1, "audio": 2}
_CODE_TO_MODALITY = {v: k for k, v in MODALITY_CODES.items()}
_DIMS = {"image": (256, 3), "audio": (AUDIO_LEN, 1)}


def sample_bytes(arr: np.ndarray, modality: str) -> bytes:
    d0, d1 = _DIMS[modality]
    flat = np.ascontiguousarray(arr, dtype="<f4").reshape(-1)
    if flat.size != d0 * d1:
        raise ValueError(f"{modality} sample has {flat.size} values, expected {d0 * d1}")
    return _HEADER.pack(MAGIC, MODALITY_CODES[modality], d0, d1) + flat.tobytes()


def sample_from_bytes(data: bytes) -> tuple[np.ndarray, str]:
    magic, code, d0, d1 = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    modality = _CODE_TO_MODALITY.get(code)
    if modality is None or (d0, d1) != _DIMS[modality]:
        raise ValueError(f"bad header: code={code} dims=({d0},{d1})")
    flat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    if flat.size != d0 * d1:
        raise ValueError(f"payload has {flat.size} values, expected {d0 * d1}")
    shape = (16, 16, 3) if modality == "image" else (AUDIO_LEN,)
    return flat.reshape(shape).copy(), modality


def write_sample(path: str | Path, arr: np.ndarray, modality: str) -> None:
    Path(path).write_bytes(sample_bytes(arr, modality))


def read_sample(path: str | Path) -> tuple[np.ndarray, str]:
    return sample_from_bytes(Path(path).read_bytes())
