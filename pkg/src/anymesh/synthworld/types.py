"""Spec types for the two synthetic modalities.

A scene is 1-2 colored glyphs placed on a 16x16 canvas; an audio clip is
1-3 pure tones at designated DFT bins of a 512-sample frame. Specs are the
ground truth every renderer, decoder, captioner and encoder agrees on.
"""

from __future__ import annotations

from dataclasses import dataclass

SHAPES = ("circle", "square", "triangle", "cross")
COLORS = ("red", "green", "blue", "yellow")
SIZES = ("small", "large")
POSITIONS = ("TL", "TR", "BL", "BR", "C")

TONE_BINS = ("f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8")
TONE_AMPS = (0.15, 0.3)

IMAGE_SHAPE = (16, 16, 3)
AUDIO_LEN = 512

# Feature grid defaults: one row per attribute slot.
DEFAULT_LF = 4
DEFAULT_DF = 64

MODALITIES = ("image", "audio", "text")


class SpecError(ValueError):
    """Raised when a spec violates its invariants."""


@dataclass(frozen=True, order=True)
class GlyphSpec:
    shape: str
    color: str
    size: str
    position: str

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise SpecError(f"unknown shape {self.shape!r}")
        if self.color not in COLORS:
            raise SpecError(f"unknown color {self.color!r}")
        if self.size not in SIZES:
            raise SpecError(f"unknown size {self.size!r}")
        if self.position not in POSITIONS:
            raise SpecError(f"unknown position {self.position!r}")


@dataclass(frozen=True)
class SceneSpec:
    """1-2 glyphs at pairwise-distinct positions, stored in canonical position order."""

    glyphs: tuple[GlyphSpec, ...]

    def __post_init__(self):
        glyphs = tuple(self.glyphs)
        if not 1 <= len(glyphs) <= 2:
            raise SpecError(f"scene must have 1-2 glyphs, got {len(glyphs)}")
        positions = [g.position for g in glyphs]
        if len(set(positions)) != len(positions):
            raise SpecError(f"glyph positions must be distinct, got {positions}")
        glyphs = tuple(sorted(glyphs, key=lambda g: POSITIONS.index(g.position)))
        object.__setattr__(self, "glyphs", glyphs)


@dataclass(frozen=True, order=True)
class ToneSpec:
    bin: str
    amp: float

    def __post_init__(self):
        if self.bin not in TONE_BINS:
            raise SpecError(f"unknown tone bin {self.bin!r}")
        if self.amp not in TONE_AMPS:
            raise SpecError(f"amp must be one of {TONE_AMPS}, got {self.amp}")


@dataclass(frozen=True)
class AudioSpec:
    """1-3 tones at pairwise-distinct bins, stored sorted by bin index."""

    tones: tuple[ToneSpec, ...]

    def __post_init__(self):
        tones = tuple(self.tones)
        if not 1 <= len(tones) <= 3:
            raise SpecError(f"audio spec must have 1-3 tones, got {len(tones)}")
        bins = [t.bin for t in tones]
        if len(set(bins)) != len(bins):
            raise SpecError(f"tone bins must be distinct, got {bins}")
        if sum(t.amp for t in tones) > 0.9 + 1e-12:
            raise SpecError("total tone amplitude exceeds 0.9")
        tones = tuple(sorted(tones, key=lambda t: TONE_BINS.index(t.bin)))
        object.__setattr__(self, "tones", tones)


EDIT_KINDS = ("recolor", "reshape", "resize", "move", "tone_add", "tone_drop", "tone_replace")


@dataclass(frozen=True)
class EditOp:
    """One attribute-level edit. Image edits target glyph 0 of a scene.

    kind-specific payload:
      recolor/reshape/resize/move -> value (the new attribute value)
      tone_add                    -> tone
      tone_drop                   -> old_bin
      tone_replace                -> old_bin and tone (the replacement)
    """

    kind: str
    value: str | None = None
    tone: ToneSpec | None = None
    old_bin: str | None = None

    def __post_init__(self):
        if self.kind not in EDIT_KINDS:
            raise SpecError(f"unknown edit kind {self.kind!r}")
        domain = {"recolor": COLORS, "reshape": SHAPES, "resize": SIZES, "move": POSITIONS}
        if self.kind in domain:
            if self.value not in domain[self.kind]:
                raise SpecError(f"{self.kind} needs a value in {domain[self.kind]}")
            if self.tone is not None or self.old_bin is not None:
                raise SpecError(f"{self.kind} takes only a value")
        elif self.kind == "tone_add":
            if self.tone is None or self.value is not None or self.old_bin is not None:
                raise SpecError("tone_add takes only a tone")
        elif self.kind == "tone_drop":
            if self.old_bin not in TONE_BINS or self.value is not None or self.tone is not None:
                raise SpecError("tone_drop takes only old_bin")
        elif self.kind == "tone_replace":
            if self.old_bin not in TONE_BINS or self.tone is None or self.value is not None:
                raise SpecError("tone_replace takes old_bin and tone")


def all_glyphs() -> list[GlyphSpec]:
    """The full 160-glyph universe in deterministic order."""
    return [
        GlyphSpec(sh, co, si, po)
        for sh in SHAPES
        for co in COLORS
        for si in SIZES
        for po in POSITIONS
    ]


def all_single_scenes() -> list[SceneSpec]:
    return [SceneSpec((g,)) for g in all_glyphs()]


def all_audio_specs(max_tones: int = 3) -> list[AudioSpec]:
    """All valid audio specs with up to `max_tones` tones (576 for the default)."""
    from itertools import combinations, product

    out = []
    for k in range(1, max_tones + 1):
        for bins in combinations(TONE_BINS, k):
            for amps in product(TONE_AMPS, repeat=k):
                out.append(AudioSpec(tuple(ToneSpec(b, a) for b, a in zip(bins, amps))))
    return out


def spec_to_dict(spec: SceneSpec | AudioSpec) -> dict:
    if isinstance(spec, SceneSpec):
        return {
            "kind": "scene",
            "glyphs": [
                {"shape": g.shape, "color": g.color, "size": g.size, "position": g.position}
                for g in spec.glyphs
            ],
        }
    if isinstance(spec, AudioSpec):
        return {"kind": "audio", "tones": [{"bin": t.bin, "amp": t.amp} for t in spec.tones]}
    raise TypeError(f"not a spec: {type(spec)}")


def spec_from_dict(d: dict) -> SceneSpec | AudioSpec:
    if d.get("kind") == "scene":
        return SceneSpec(tuple(GlyphSpec(**g) for g in d["glyphs"]))
    if d.get("kind") == "audio":
        return AudioSpec(tuple(ToneSpec(**t) for t in d["tones"]))
    raise SpecError(f"unknown spec kind {d.get('kind')!r}")


def edit_to_dict(op: EditOp) -> dict:
    d: dict = {"kind": op.kind}
    if op.value is not None:
        d["value"] = op.value
    if op.tone is not None:
        d["tone"] = {"bin": op.tone.bin, "amp": op.tone.amp}
    if op.old_bin is not None:
        d["old_bin"] = op.old_bin
    return d


def edit_from_dict(d: dict) -> EditOp:
    tone = ToneSpec(**d["tone"]) if "tone" in d else None
    return EditOp(kind=d["kind"], value=d.get("value"), tone=tone, old_bin=d.get("old_bin"))
