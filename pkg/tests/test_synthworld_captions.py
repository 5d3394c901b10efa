"""Caption grammar: fixed wording, bijectivity, strictness, constituents."""

import pytest

from anymesh.synthworld import (
    AudioSpec,
    GlyphSpec,
    ParseError,
    SceneSpec,
    ToneSpec,
    all_audio_specs,
    all_single_scenes,
    caption_constituents,
    caption_of,
    parse_caption,
)


def test_caption_wording_examples():
    spec = SceneSpec((GlyphSpec("square", "blue", "small", "TL"),))
    assert caption_of(spec) == ["a", "small", "blue", "square", "at", "top", "left"]
    aud = AudioSpec((ToneSpec("f3", 0.3), ToneSpec("f7", 0.15)))
    assert caption_of(aud) == ["tone", "f3", "loud", "and", "tone", "f7", "soft"]


def test_two_glyph_caption_uses_on_connector():
    spec = SceneSpec(
        (GlyphSpec("circle", "red", "large", "C"), GlyphSpec("square", "blue", "small", "TL"))
    )
    words = caption_of(spec)
    assert words.count("on") == 1
    left, right = " ".join(words).split(" on ")
    assert parse_caption(left.split()).glyphs[0] in spec.glyphs
    assert parse_caption(right.split()).glyphs[0] in spec.glyphs


def test_caption_roundtrip_all_scenes():
    for spec in all_single_scenes():
        assert parse_caption(caption_of(spec)) == spec


def test_caption_roundtrip_all_audio():
    for spec in all_audio_specs():
        assert parse_caption(caption_of(spec)) == spec


def test_caption_roundtrip_two_glyph_scenes():
    import numpy as np

    from anymesh.synthworld import all_glyphs

    rng = np.random.default_rng(11)
    glyphs = all_glyphs()
    done = 0
    while done < 100:
        g0 = glyphs[rng.integers(len(glyphs))]
        g1 = glyphs[rng.integers(len(glyphs))]
        if g0.position == g1.position:
            continue
        spec = SceneSpec((g0, g1))
        assert parse_caption(caption_of(spec)) == spec
        done += 1


@pytest.mark.parametrize(
    "bad",
    [
        ["a", "red", "red", "circle"],
        ["a", "large", "red", "circle"],  # missing location
        ["tone", "f9", "loud"],
        ["tone", "f1"],
        ["a", "large", "red", "circle", "at", "center", "extra"],
        [],
        ["circle"],
    ],
)
def test_parse_rejects_off_grammar(bad):
    with pytest.raises(ParseError):
        parse_caption(bad)


def test_vocabulary_closed():
    words = set()
    for spec in all_single_scenes() + all_audio_specs():
        words.update(caption_of(spec))
    assert len(words) <= 64


def test_constituents_tile_caption():
    for spec in (
        SceneSpec((GlyphSpec("cross", "green", "large", "BR"),)),
        SceneSpec((GlyphSpec("circle", "red", "small", "TL"), GlyphSpec("square", "blue", "small", "C"))),
        AudioSpec((ToneSpec("f1", 0.15), ToneSpec("f5", 0.3), ToneSpec("f8", 0.15))),
    ):
        caption = caption_of(spec)
        spans = caption_constituents(spec)
        for a, b in spans:
            assert 0 <= a < b <= len(caption)
        # spans are disjoint and ordered
        for (a1, b1), (a2, b2) in zip(spans, spans[1:]):
            assert b1 <= a2
