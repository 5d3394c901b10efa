"""Oracle-based evaluation metrics and the metrics report container."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..synthworld import (
    AudioSpec,
    EditOp,
    SceneSpec,
    UndecodableSample,
    decode_audio,
    decode_image,
)
from ..synthworld.edits import IMAGE_EDIT_KINDS, apply_edit, edit_targets
from ..synthworld.features import FeatureSeq


class DimensionError(ValueError):
    pass


def metric_feature_fidelity(pred, target) -> dict[str, float]:
    """Per-element MSE and mean per-row cosine between two feature matrices."""
    p = pred.rows if isinstance(pred, FeatureSeq) else np.asarray(pred, dtype=np.float64)
    t = target.rows if isinstance(target, FeatureSeq) else np.asarray(target, dtype=np.float64)
    p, t = np.asarray(p, dtype=np.float64), np.asarray(t, dtype=np.float64)
    if p.shape != t.shape:
        raise DimensionError(f"shape mismatch {p.shape} vs {t.shape}")
    mse = float(((p - t) ** 2).mean())
    pn = np.linalg.norm(p, axis=1)
    tn = np.linalg.norm(t, axis=1)
    denom = np.maximum(pn * tn, 1e-12)
    cos = float(((p * t).sum(axis=1) / denom).mean())
    return {"mse": mse, "mean_row_cosine": cos}


def _decode(sample: np.ndarray | None, modality: str):
    if sample is None:
        return None
    try:
        return decode_image(sample) if modality == "image" else decode_audio(sample)
    except UndecodableSample:
        return None


def metric_attr_accuracy(samples: list, specs: list, modality: str) -> float:
    """Fraction of samples whose oracle decode equals the target spec exactly.

    Undecodable or missing samples count as wrong.
    """
    if not specs:
        raise ValueError("empty eval set")
    hits = 0
    for sample, spec in zip(samples, specs):
        decoded = _decode(np.asarray(sample).reshape((16, 16, 3) if modality == "image" else (-1,))
                          if sample is not None else None, modality)
        hits += int(decoded == spec)
    return hits / len(specs)


def _tone_map(spec: AudioSpec | None) -> dict[str, float]:
    return {} if spec is None else {t.bin: t.amp for t in spec.tones}


def metric_edit_exactness(
    src_specs: list, ops: list[EditOp], generated: list, modality: str
) -> dict[str, float]:
    """edit_acc: targeted attribute matches the edited spec; preservation_acc:
    untargeted attributes match the source. Undecodable samples miss both."""
    if not src_specs:
        raise ValueError("empty eval set")
    edit_hits = keep_hits = 0
    for src, op, sample in zip(src_specs, ops, generated):
        decoded = _decode(
            np.asarray(sample).reshape((16, 16, 3) if modality == "image" else (-1,))
            if sample is not None else None,
            modality,
        )
        tgt = apply_edit(src, op)
        if op.kind in IMAGE_EDIT_KINDS:
            if not isinstance(decoded, SceneSpec) or len(decoded.glyphs) != len(src.glyphs):
                continue
            (fieldname,) = edit_targets(op)
            g, gs, gt = decoded.glyphs[0], src.glyphs[0], tgt.glyphs[0]
            edit_hits += int(getattr(g, fieldname) == getattr(gt, fieldname))
            others = [f for f in ("shape", "color", "size", "position") if f != fieldname]
            keep_hits += int(all(getattr(g, f) == getattr(gs, f) for f in others))
        else:
            if not isinstance(decoded, AudioSpec):
                continue
            targeted = set(edit_targets(op))
            dec_m, src_m, tgt_m = _tone_map(decoded), _tone_map(src), _tone_map(tgt)
            edit_hits += int(all(dec_m.get(b) == tgt_m.get(b) for b in targeted))
            from ..synthworld.types import TONE_BINS

            untargeted = [b for b in TONE_BINS if b not in targeted]
            keep_hits += int(all(dec_m.get(b) == src_m.get(b) for b in untargeted))
    n = len(src_specs)
    return {"edit_acc": edit_hits / n, "preservation_acc": keep_hits / n}


def metric_lsd(generated: np.ndarray, target: np.ndarray, floor: float = 1e-8) -> float:
    """Root-mean-square log10-magnitude spectral difference over one-sided bins."""
    x = np.asarray(generated, dtype=np.float64).reshape(-1)
    y = np.asarray(target, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch {x.shape} vs {y.shape}")
    gx = np.maximum(np.abs(np.fft.rfft(x)), floor)
    gy = np.maximum(np.abs(np.fft.rfft(y)), floor)
    d = np.log10(gx) - np.log10(gy)
    return float(np.sqrt((d**2).mean()))


@dataclass
class MetricsReport:
    task: str
    metrics: dict[str, float]
    manifest: list = field(default_factory=list)
    fingerprint: str = ""
    revision: str = ""

    def __post_init__(self):
        for name, value in self.metrics.items():
            if not np.isfinite(value):
                raise ValueError(f"metric {name} is not finite: {value}")

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "metrics": self.metrics,
            "manifest": self.manifest,
            "fingerprint": self.fingerprint,
            "revision": self.revision,
        }

    def write(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
