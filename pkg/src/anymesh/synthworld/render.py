"""Exact renderers for scene specs (16x16 RGB) and audio specs (512-sample waves)."""

from __future__ import annotations

import numpy as np

from .types import AUDIO_LEN, TONE_BINS, AudioSpec, SceneSpec, ToneSpec

# Top-left corner of the 5x5 glyph footprint inside each 8x8 quadrant/center
# cell. Footprints are pairwise disjoint, so glyphs at distinct positions
# never overlap.
FOOTPRINT = 5
ANCHORS = {"TL": (0, 0), "TR": (0, 11), "BL": (11, 0), "BR": (11, 11), "C": (5, 5)}

COLOR_RGB = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
}

_LARGE_ART = {
    "circle": (".XXX.", "XXXXX", "XXXXX", "XXXXX", ".XXX."),
    "square": ("XXXXX", "XXXXX", "XXXXX", "XXXXX", "XXXXX"),
    "triangle": ("..X..", ".XXX.", ".XXX.", "XXXXX", "XXXXX"),
    "cross": ("..X..", "..X..", "XXXXX", "..X..", "..X.."),
}
_SMALL_ART = {
    "circle": (".X.", "XXX", ".X."),
    "square": ("XXX", "XXX", "XXX"),
    "triangle": (".X.", "XXX", "XXX"),
    "cross": ("X.X", ".X.", "X.X"),
}


def _art_to_mask(art: tuple[str, ...]) -> np.ndarray:
    return np.array([[ch == "X" for ch in row] for row in art], dtype=bool)


SHAPE_MASKS = {
    "large": {name: _art_to_mask(a) for name, a in _LARGE_ART.items()},
    "small": {name: _art_to_mask(a) for name, a in _SMALL_ART.items()},
}


def glyph_mask(shape: str, size: str) -> np.ndarray:
    """Boolean 5x5 footprint mask (small shapes sit centered in the footprint)."""
    out = np.zeros((FOOTPRINT, FOOTPRINT), dtype=bool)
    m = SHAPE_MASKS[size][shape]
    off = (FOOTPRINT - m.shape[0]) // 2
    out[off : off + m.shape[0], off : off + m.shape[1]] = m
    return out


def render_image(spec: SceneSpec) -> np.ndarray:
    """Rasterize a scene onto a black 16x16x3 float32 canvas."""
    img = np.zeros((16, 16, 3), dtype=np.float32)
    for g in spec.glyphs:
        r0, c0 = ANCHORS[g.position]
        mask = glyph_mask(g.shape, g.size)
        patch = img[r0 : r0 + FOOTPRINT, c0 : c0 + FOOTPRINT]
        patch[mask] = np.asarray(COLOR_RGB[g.color], dtype=np.float32)
    return img


# Tone frequency = integer cycle count over the 512-sample frame, so every
# designated bin is an exact DFT bin.
CYCLES = {b: 4 * (i + 1) for i, b in enumerate(TONE_BINS)}

# Tone samples are quantized to multiples of 2^-20. Every such value (and any
# sum of up to three of them) is exactly representable in float32, which makes
# the waveform algebra a+b, (a+b)-b exact.
_QUANT = float(2**20)


def tone_wave(tone: ToneSpec) -> np.ndarray:
    n = np.arange(AUDIO_LEN, dtype=np.float64)
    w = tone.amp * np.sin(2.0 * np.pi * CYCLES[tone.bin] * n / AUDIO_LEN)
    return (np.round(w * _QUANT) / _QUANT).astype(np.float32)


def render_audio(spec: AudioSpec) -> np.ndarray:
    """Sum of quantized tone sinusoids, accumulated in canonical bin order."""
    wave = tone_wave(spec.tones[0])
    for t in spec.tones[1:]:
        wave = wave + tone_wave(t)
    return wave


def render(spec: SceneSpec | AudioSpec) -> np.ndarray:
    if isinstance(spec, SceneSpec):
        return render_image(spec)
    return render_audio(spec)
