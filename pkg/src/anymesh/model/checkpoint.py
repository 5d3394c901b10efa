"""Named-tensor binary container and checkpoint directories.

Layout: magic "AMT1", u64 manifest length, manifest JSON (name/dtype/shape/
offset per tensor), then raw little-endian payloads. Checkpoints are
directories holding config.json, params.bin and optimizer.bin.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

MAGIC = b"AMT1"
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}


class MissingCheckpoint(FileNotFoundError):
    pass


def save_tensors(path: str | Path, tensors: dict[str, np.ndarray | torch.Tensor]) -> None:
    entries = []
    payloads = []
    offset = 0
    for name in sorted(tensors):
        t = tensors[name]
        if isinstance(t, torch.Tensor):
            t = t.detach().cpu().numpy()
        arr = np.asarray(t)
        if arr.dtype in (np.float32, np.float64, np.int64):
            dt = {np.dtype(np.float32): "<f4", np.dtype(np.float64): "<f8", np.dtype(np.int64): "<i8"}[arr.dtype]
        else:
            raise TypeError(f"unsupported dtype {arr.dtype} for tensor {name}")
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[dt]).tobytes()
        entries.append({"name": name, "dtype": dt, "shape": list(arr.shape), "offset": offset})
        payloads.append(raw)
        offset += len(raw)
    manifest = json.dumps({"tensors": entries}, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for raw in payloads:
            fh.write(raw)


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"bad magic in {path}")
    (mlen,) = struct.unpack_from("<Q", data, 4)
    manifest = json.loads(data[12 : 12 + mlen].decode("utf-8"))
    base = 12 + mlen
    out = {}
    for e in manifest["tensors"]:
        dt = _DTYPES[e["dtype"]]
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        arr = np.frombuffer(data, dtype=dt, count=count, offset=base + e["offset"])
        out[e["name"]] = arr.reshape(e["shape"]).copy()
    return out


def save_module(path: str | Path, module: torch.nn.Module) -> None:
    save_tensors(path, dict(module.state_dict()))


def load_module(path: str | Path, module: torch.nn.Module) -> None:
    tensors = load_tensors(path)
    state = {}
    for name, param in module.state_dict().items():
        if name not in tensors:
            raise KeyError(f"tensor {name} missing from {path}")
        state[name] = torch.from_numpy(tensors[name]).to(param.dtype).reshape(param.shape)
    module.load_state_dict(state)


def save_optimizer(path: str | Path, opt: torch.optim.Optimizer, named: dict[str, torch.nn.Parameter]) -> None:
    """Persist Adam moments keyed by parameter name."""
    by_param = {id(p): n for n, p in named.items()}
    tensors: dict[str, np.ndarray | torch.Tensor] = {}
    for group in opt.param_groups:
        for p in group["params"]:
            state = opt.state.get(p)
            if not state:
                continue
            name = by_param[id(p)]
            tensors[f"{name}/exp_avg"] = state["exp_avg"]
            tensors[f"{name}/exp_avg_sq"] = state["exp_avg_sq"]
            tensors[f"{name}/step"] = np.asarray(
                [int(state["step"]) if not isinstance(state["step"], torch.Tensor) else int(state["step"].item())],
                dtype=np.int64,
            )
    save_tensors(path, tensors)


def load_optimizer(path: str | Path, opt: torch.optim.Optimizer, named: dict[str, torch.nn.Parameter]) -> None:
    tensors = load_tensors(path)
    for group in opt.param_groups:
        for p in group["params"]:
            name = next(n for n, q in named.items() if q is p)
            key = f"{name}/exp_avg"
            if key not in tensors:
                continue
            opt.state[p] = {
                "step": torch.tensor(float(tensors[f"{name}/step"][0])),
                "exp_avg": torch.from_numpy(tensors[key]).to(p.dtype).reshape(p.shape),
                "exp_avg_sq": torch.from_numpy(tensors[f"{name}/exp_avg_sq"]).to(p.dtype).reshape(p.shape),
            }
