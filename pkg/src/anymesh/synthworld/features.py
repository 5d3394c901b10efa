"""Analytic feature encoder shared by all modalities.

Each spec maps to an L_f x d_f matrix of unit-norm rows (one row per
attribute slot) drawn from seeded embedding tables, so a sample, its spec and
its caption all encode to the identical matrix. This plays the role of an
aligned cross-modal encoder with exact oracles.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .captions import parse_caption, ParseError
from .decode import decode_image, decode_audio
from .types import (
    DEFAULT_DF,
    DEFAULT_LF,
    MODALITIES,
    AudioSpec,
    SceneSpec,
)

DEFAULT_ENCODER_SEED = 20240

_ABSENT = "<absent>"


@dataclass
class FeatureSeq:
    """L_f x d_f conditioning matrix with unit-norm float32 rows."""

    rows: np.ndarray
    modality: str

    def __post_init__(self):
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if self.rows.ndim != 2:
            raise ValueError(f"rows must be 2-D, got shape {self.rows.shape}")
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")

    def check_unit_norm(self, tol: float = 1e-6) -> None:
        norms = np.linalg.norm(self.rows, axis=1)
        if not np.all(np.abs(norms - 1.0) <= tol):
            raise ValueError(f"rows not unit-norm: {norms}")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FeatureSeq)
            and self.modality == other.modality
            and self.rows.shape == other.rows.shape
            and bool(np.array_equal(self.rows, other.rows))
        )


class FeatureEncoder:
    """Deterministic encoder: oracle-decode a sample, then look up seeded embeddings."""

    def __init__(self, seed: int = DEFAULT_ENCODER_SEED, lf: int = DEFAULT_LF, df: int = DEFAULT_DF):
        self.seed = seed
        self.lf = lf
        self.df = df
        self._cache: dict[tuple, np.ndarray] = {}

    def _vec(self, table: str, key: tuple) -> np.ndarray:
        ck = (table, key)
        if ck not in self._cache:
            digest = hashlib.sha256(repr((self.seed, self.df, table, key)).encode()).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            v = rng.standard_normal(self.df)
            self._cache[ck] = (v / np.linalg.norm(v)).astype(np.float32)
        return self._cache[ck]

    def _scene_rows(self, spec: SceneSpec) -> np.ndarray:
        keys = {
            "shape": tuple(g.shape for g in spec.glyphs),
            "color": tuple(g.color for g in spec.glyphs),
            "size": tuple(g.size for g in spec.glyphs),
            "position": tuple(g.position for g in spec.glyphs),
        }
        return np.stack([self._vec(f"img/{name}", key) for name, key in keys.items()])

    def _audio_rows(self, spec: AudioSpec) -> np.ndarray:
        rows = []
        for slot in range(3):
            if slot < len(spec.tones):
                t = spec.tones[slot]
                rows.append(self._vec(f"aud/tone{slot}", (t.bin, t.amp)))
            else:
                rows.append(self._vec(f"aud/tone{slot}", (_ABSENT,)))
        rows.append(self._vec("aud/count", (len(spec.tones),)))
        return np.stack(rows)

    def _phrase_rows(self, words: list[str]) -> np.ndarray:
        rows = np.zeros((self.lf, self.df), dtype=np.float64)
        for k in range(self.lf):
            for j, w in enumerate(words):
                rows[k] += self._vec("txt/word", (k, w, j))
            n = np.linalg.norm(rows[k])
            if n < 1e-6:
                rows[k] = self._vec("txt/fallback", (k, tuple(words)))
            else:
                rows[k] /= n
        return rows.astype(np.float32)

    def spec_rows(self, spec: SceneSpec | AudioSpec) -> np.ndarray:
        if isinstance(spec, SceneSpec):
            return self._scene_rows(spec)
        if isinstance(spec, AudioSpec):
            return self._audio_rows(spec)
        raise TypeError(f"not a spec: {type(spec)}")

    def encode(self, x, modality: str) -> FeatureSeq:
        """Encode a spec, a rendered sample, or caption/phrase tokens.

        Samples are first reduced to specs via the oracle decoders, so
        UndecodableSample propagates. Text that parses as a full caption
        encodes as its underlying spec (exact cross-modal alignment);
        any other in-vocabulary phrase gets a seeded phrase embedding.
        """
        if modality == "image":
            spec = x if isinstance(x, SceneSpec) else decode_image(np.asarray(x))
            return FeatureSeq(self._scene_rows(spec), "image")
        if modality == "audio":
            spec = x if isinstance(x, AudioSpec) else decode_audio(np.asarray(x))
            return FeatureSeq(self._audio_rows(spec), "audio")
        if modality == "text":
            words = x.split() if isinstance(x, str) else list(x)
            try:
                spec = parse_caption(words)
            except ParseError:
                return FeatureSeq(self._phrase_rows(words), "text")
            return FeatureSeq(self.spec_rows(spec), "text")
        raise ValueError(f"unknown modality {modality!r}")

    def negative_feature(self, modality: str) -> FeatureSeq:
        """Fixed degenerate (all-absent) feature matrix for CFG's unconditioned slot."""
        if modality == "image":
            rows = np.stack(
                [self._vec(f"img/{n}", (_ABSENT,)) for n in ("shape", "color", "size", "position")]
            )
        elif modality == "audio":
            rows = np.stack(
                [self._vec(f"aud/tone{s}", (_ABSENT, _ABSENT)) for s in range(3)]
                + [self._vec("aud/count", (_ABSENT,))]
            )
        elif modality == "text":
            rows = np.stack([self._vec("txt/absent", (k,)) for k in range(self.lf)])
        else:
            raise ValueError(f"unknown modality {modality!r}")
        return FeatureSeq(rows, modality)
