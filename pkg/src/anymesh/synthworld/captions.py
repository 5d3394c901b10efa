"""Deterministic caption grammar and its exact inverse parser.

The grammar is bijective over canonical specs: a scene reads
"a large red circle at center" (two-glyph scenes join with "on"), an audio
spec reads "tone f3 loud and tone f7 soft" in bin order.
"""

from __future__ import annotations

from .types import (
    COLORS,
    SHAPES,
    SIZES,
    TONE_BINS,
    AudioSpec,
    GlyphSpec,
    SceneSpec,
    ToneSpec,
)

POSITION_WORDS = {
    "TL": ("top", "left"),
    "TR": ("top", "right"),
    "BL": ("bottom", "left"),
    "BR": ("bottom", "right"),
    "C": ("center",),
}
AMP_WORDS = {0.15: "soft", 0.3: "loud"}

IMAGE_WORDS = (
    ("a", "at", "on")
    + SIZES
    + COLORS
    + SHAPES
    + ("top", "bottom", "left", "right", "center")
)
AUDIO_WORDS = ("tone", "and", "loud", "soft") + TONE_BINS
CAPTION_WORDS = IMAGE_WORDS + AUDIO_WORDS


class ParseError(ValueError):
    """Token sequence is outside the caption grammar."""


def _glyph_words(g: GlyphSpec) -> list[str]:
    return ["a", g.size, g.color, g.shape, "at", *POSITION_WORDS[g.position]]


def caption_of(spec: SceneSpec | AudioSpec) -> list[str]:
    if isinstance(spec, SceneSpec):
        words = _glyph_words(spec.glyphs[0])
        for g in spec.glyphs[1:]:
            words += ["on", *_glyph_words(g)]
        return words
    if isinstance(spec, AudioSpec):
        words = ["tone", spec.tones[0].bin, AMP_WORDS[spec.tones[0].amp]]
        for t in spec.tones[1:]:
            words += ["and", "tone", t.bin, AMP_WORDS[t.amp]]
        return words
    raise TypeError(f"not a spec: {type(spec)}")


class _Cursor:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> str | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, expected: str | tuple[str, ...] | None = None) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of caption")
        if expected is not None:
            ok = tok == expected if isinstance(expected, str) else tok in expected
            if not ok:
                raise ParseError(f"unexpected token {tok!r} at {self.i}")
        self.i += 1
        return tok


def _parse_glyph(cur: _Cursor) -> GlyphSpec:
    cur.take("a")
    size = cur.take(SIZES)
    color = cur.take(COLORS)
    shape = cur.take(SHAPES)
    cur.take("at")
    first = cur.take(("top", "bottom", "center"))
    if first == "center":
        position = "C"
    else:
        second = cur.take(("left", "right"))
        position = {"top": "T", "bottom": "B"}[first] + second[0].upper()
    return GlyphSpec(shape, color, size, position)


def parse_caption(tokens: list[str]) -> SceneSpec | AudioSpec:
    """Exact inverse of caption_of; raises ParseError off-grammar."""
    cur = _Cursor(list(tokens))
    if cur.peek() == "a":
        glyphs = [_parse_glyph(cur)]
        while cur.peek() == "on":
            cur.take("on")
            glyphs.append(_parse_glyph(cur))
        if cur.peek() is not None:
            raise ParseError(f"trailing tokens after scene caption: {cur.tokens[cur.i:]}")
        try:
            return SceneSpec(tuple(glyphs))
        except ValueError as e:
            raise ParseError(str(e)) from e
    if cur.peek() == "tone":
        tones = []
        while True:
            cur.take("tone")
            b = cur.take(TONE_BINS)
            amp = {"loud": 0.3, "soft": 0.15}[cur.take(("loud", "soft"))]
            tones.append(ToneSpec(b, amp))
            if cur.peek() is None:
                break
            cur.take("and")
        try:
            return AudioSpec(tuple(tones))
        except ValueError as e:
            raise ParseError(str(e)) from e
    raise ParseError(f"caption must start with 'a' or 'tone', got {cur.peek()!r}")


def caption_constituents(spec: SceneSpec | AudioSpec) -> list[tuple[int, int]]:
    """(start, end) spans of the swappable grammar constituents in caption_of(spec).

    Scenes yield one noun-phrase span and one location span per glyph; audio
    captions yield one span per tone. Connector words stay outside all spans.
    """
    spans = []
    i = 0
    if isinstance(spec, SceneSpec):
        for k, g in enumerate(spec.glyphs):
            if k > 0:
                i += 1  # "on"
            spans.append((i, i + 4))  # a SIZE COLOR SHAPE
            loc = 1 + len(POSITION_WORDS[g.position])
            spans.append((i + 4, i + 4 + loc))  # at POS...
            i += 4 + loc
    else:
        for k, _t in enumerate(spec.tones):
            if k > 0:
                i += 1  # "and"
            spans.append((i, i + 3))  # tone BIN AMP
            i += 3
    return spans
