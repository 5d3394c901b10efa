"""Bit-exact JSONL persistence for episodes.

One JSON object per line. Feature matrices are base64 blobs carrying a
(L_f, d_f, modality-code) header followed by little-endian float32 rows; raw
samples live in sibling files referenced by relative path (content-addressed,
so shards may share them).
"""

from __future__ import annotations

import base64
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..synthworld.features import FeatureSeq
from ..synthworld.sampleio import read_sample, sample_bytes
from .episode import Episode, Segment

_FEAT_HEADER = struct.Struct("<III")
_MOD_CODES = {"image": 1, "audio": 2, "text": 3}
_CODE_MODS = {v: k for k, v in _MOD_CODES.items()}


class FormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


def feature_to_b64(feat: FeatureSeq) -> str:
    lf, df = feat.rows.shape
    blob = _FEAT_HEADER.pack(lf, df, _MOD_CODES[feat.modality])
    blob += np.ascontiguousarray(feat.rows, dtype="<f4").tobytes()
    return base64.b64encode(blob).decode("ascii")


def feature_from_b64(b64: str) -> FeatureSeq:
    blob = base64.b64decode(b64.encode("ascii"))
    lf, df, code = _FEAT_HEADER.unpack_from(blob)
    if code not in _CODE_MODS:
        raise ValueError(f"bad modality code {code}")
    rows = np.frombuffer(blob, dtype="<f4", offset=_FEAT_HEADER.size)
    if rows.size != lf * df:
        raise ValueError(f"feature payload has {rows.size} values, expected {lf * df}")
    return FeatureSeq(rows.reshape(lf, df).copy(), _CODE_MODS[code])


def _segment_to_dict(seg: Segment, sample_dir: Path | None, base: Path | None) -> dict:
    if seg.kind == "text":
        return {"type": "text", "words": list(seg.words)}
    d: dict = {"type": "feature", "feature": feature_to_b64(seg.feature), "sample_ref": None}
    if seg.sample is not None:
        if sample_dir is None:
            raise ValueError("segment carries a raw sample but no sample_dir given")
        payload = sample_bytes(seg.sample, seg.feature.modality)
        name = hashlib.sha256(payload).hexdigest()[:16] + ".bin"
        path = sample_dir / name
        if not path.exists():
            path.write_bytes(payload)
        d["sample_ref"] = str(path.relative_to(base))
    return d


def _segment_from_dict(d: dict, base: Path | None) -> Segment:
    if d.get("type") == "text":
        return Segment.text(d["words"])
    if d.get("type") == "feature":
        feat = feature_from_b64(d["feature"])
        sample = None
        ref = d.get("sample_ref")
        if ref is not None:
            if base is None:
                raise ValueError("record references a sample file but no base dir known")
            sample, modality = read_sample(base / ref)
            if modality != feat.modality:
                raise ValueError(f"sample modality {modality} != feature modality {feat.modality}")
        return Segment(kind="feature", feature=feat, sample=sample, sample_ref=ref)
    raise ValueError(f"unknown segment type {d.get('type')!r}")


def episode_to_dict(ep: Episode, sample_dir: Path | None = None, base: Path | None = None) -> dict:
    return {
        "task_family": ep.task_family,
        "rng_seed": ep.rng_seed,
        "meta": ep.meta,
        "turns": [
            {"role": role, "segments": [_segment_to_dict(s, sample_dir, base) for s in segs]}
            for role, segs in ep.turns
        ],
    }


def episode_from_dict(d: dict, base: Path | None = None) -> Episode:
    return Episode(
        turns=[
            (t["role"], [_segment_from_dict(s, base) for s in t["segments"]])
            for t in d["turns"]
        ],
        task_family=d["task_family"],
        rng_seed=d["rng_seed"],
        meta=d.get("meta", {}),
    )


def serialize(records: list[Episode], path: str | Path, sample_dirname: str = "samples") -> None:
    """Write records as UTF-8 JSONL next to a content-addressed sample directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    needs_samples = any(
        seg.kind == "feature" and seg.sample is not None
        for ep in records
        for _, segs in ep.turns
        for seg in segs
    )
    sample_dir = None
    if needs_samples:
        sample_dir = path.parent / sample_dirname
        sample_dir.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for ep in records:
            fh.write(json.dumps(episode_to_dict(ep, sample_dir, path.parent), sort_keys=True))
            fh.write("\n")


def deserialize(path: str | Path) -> list[Episode]:
    """Exact inverse of serialize; raises FormatError with the offending line number."""
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.endswith("\n"):
                raise FormatError("truncated final line (missing newline)", lineno)
            try:
                d = json.loads(line)
                records.append(episode_from_dict(d, base=path.parent))
            except FormatError:
                raise
            except Exception as e:
                raise FormatError(str(e), lineno) from e
    return records
