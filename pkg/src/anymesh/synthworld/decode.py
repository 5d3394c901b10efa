"""Oracle decoders: exact inverses of the renderers, used to grade generations."""

from __future__ import annotations

import numpy as np

from .render import ANCHORS, CYCLES, FOOTPRINT, COLOR_RGB, glyph_mask
from .types import (
    AUDIO_LEN,
    COLORS,
    POSITIONS,
    SHAPES,
    SIZES,
    TONE_AMPS,
    TONE_BINS,
    AudioSpec,
    GlyphSpec,
    SceneSpec,
    ToneSpec,
)

TAU_DEC = 0.15  # max mean-abs pixel error for an accepted template match

# A tone is reported when its DFT magnitude clears half the smaller amplitude
# level; the same bar flags stray energy at non-designated bins.
_HALF_MIN_LEVEL = min(TONE_AMPS) / 2 * AUDIO_LEN / 2
_AMP_MIDPOINT = (TONE_AMPS[0] + TONE_AMPS[1]) / 2 * AUDIO_LEN / 2


class UndecodableSample(Exception):
    """The sample is not a recognizable render of any valid spec."""


def _candidate_patches() -> tuple[list[tuple[str, str, str]], np.ndarray]:
    combos = [(sh, co, si) for sh in SHAPES for co in COLORS for si in SIZES]
    patches = np.zeros((len(combos), FOOTPRINT, FOOTPRINT, 3), dtype=np.float32)
    for i, (sh, co, si) in enumerate(combos):
        patches[i][glyph_mask(sh, si)] = np.asarray(COLOR_RGB[co], dtype=np.float32)
    return combos, patches


_COMBOS, _PATCHES = _candidate_patches()

_OUTSIDE = np.ones((16, 16), dtype=bool)
for _r0, _c0 in ANCHORS.values():
    _OUTSIDE[_r0 : _r0 + FOOTPRINT, _c0 : _c0 + FOOTPRINT] = False


def decode_image(img: np.ndarray, tau: float = TAU_DEC) -> SceneSpec:
    """Nearest-spec decode by per-cell template matching.

    Raises UndecodableSample when any occupied cell's best match is worse
    than `tau` mean abs error, when off-footprint pixels are not black, or
    when the occupied cells do not form a valid scene.
    """
    img = np.asarray(img, dtype=np.float32)
    if img.shape != (16, 16, 3):
        raise ValueError(f"expected 16x16x3 image, got {img.shape}")
    if float(np.abs(img[_OUTSIDE]).mean()) > tau:
        raise UndecodableSample("energy outside glyph footprints")
    glyphs = []
    for pos in POSITIONS:
        r0, c0 = ANCHORS[pos]
        patch = img[r0 : r0 + FOOTPRINT, c0 : c0 + FOOTPRINT]
        errs = np.abs(_PATCHES - patch[None]).mean(axis=(1, 2, 3))
        black_err = float(np.abs(patch).mean())
        best = int(np.argmin(errs))
        if black_err <= errs[best]:
            continue
        if errs[best] > tau:
            raise UndecodableSample(f"no template within tau at {pos}")
        sh, co, si = _COMBOS[best]
        glyphs.append(GlyphSpec(sh, co, si, pos))
    if not glyphs:
        raise UndecodableSample("no glyph present")
    if len(glyphs) > 2:
        raise UndecodableSample(f"{len(glyphs)} occupied cells, max 2")
    return SceneSpec(tuple(glyphs))


def decode_audio(wave: np.ndarray) -> AudioSpec:
    """DFT peak-picking at the designated bins, amplitude quantized to levels."""
    wave = np.asarray(wave, dtype=np.float64)
    if wave.shape != (AUDIO_LEN,):
        raise ValueError(f"expected length-{AUDIO_LEN} wave, got {wave.shape}")
    mags = np.abs(np.fft.rfft(wave))
    designated = {CYCLES[b]: b for b in TONE_BINS}
    off = np.ones(mags.shape[0], dtype=bool)
    off[list(designated)] = False
    if float(mags[off].max()) > _HALF_MIN_LEVEL:
        raise UndecodableSample("energy at non-designated frequency")
    tones = []
    for k, b in designated.items():
        if mags[k] > _HALF_MIN_LEVEL:
            amp = TONE_AMPS[1] if mags[k] >= _AMP_MIDPOINT else TONE_AMPS[0]
            tones.append(ToneSpec(b, amp))
    if not tones:
        raise UndecodableSample("no tone present")
    if len(tones) > 3:
        raise UndecodableSample(f"{len(tones)} tones, max 3")
    return AudioSpec(tuple(tones))
