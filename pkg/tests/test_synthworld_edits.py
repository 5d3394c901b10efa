"""Edit algebra: inverses, no-ops, locality, applicability, inference."""

import pytest

from anymesh.synthworld import (
    AudioSpec,
    EditOp,
    GlyphSpec,
    InapplicableEdit,
    SceneSpec,
    ToneSpec,
    all_audio_specs,
    all_single_scenes,
    apply_edit,
    edit_targets,
    enumerate_edits,
    infer_edit,
)

SCENE = SceneSpec((GlyphSpec("circle", "red", "large", "C"),))
AUDIO = AudioSpec((ToneSpec("f2", 0.3), ToneSpec("f5", 0.15)))


def test_tone_add_then_drop_is_identity():
    for spec in all_audio_specs()[:50]:
        if len(spec.tones) >= 3:
            continue
        present = {t.bin for t in spec.tones}
        new = next(ToneSpec(b, 0.3) for b in ("f1", "f2", "f3", "f4") if b not in present)
        added = apply_edit(spec, EditOp("tone_add", tone=new))
        back = apply_edit(added, EditOp("tone_drop", old_bin=new.bin))
        assert back == spec


def test_recolor_noop_allowed():
    assert apply_edit(SCENE, EditOp("recolor", value="red")) == SCENE


def test_tone_replace_matches_paper_algebra():
    # a+b -> a+c
    a, b = ToneSpec("f1", 0.3), ToneSpec("f4", 0.15)
    c = ToneSpec("f6", 0.3)
    combined = AudioSpec((a, b))
    replaced = apply_edit(combined, EditOp("tone_replace", old_bin="f4", tone=c))
    assert replaced == AudioSpec((a, c))


def test_drop_absent_tone_inapplicable():
    with pytest.raises(InapplicableEdit):
        apply_edit(AUDIO, EditOp("tone_drop", old_bin="f8"))


def test_drop_last_tone_inapplicable():
    single = AudioSpec((ToneSpec("f1", 0.15),))
    with pytest.raises(InapplicableEdit):
        apply_edit(single, EditOp("tone_drop", old_bin="f1"))


def test_add_present_bin_inapplicable():
    with pytest.raises(InapplicableEdit):
        apply_edit(AUDIO, EditOp("tone_add", tone=ToneSpec("f2", 0.15)))


def test_add_fourth_tone_inapplicable():
    three = AudioSpec((ToneSpec("f1", 0.3), ToneSpec("f2", 0.3), ToneSpec("f3", 0.3)))
    with pytest.raises(InapplicableEdit):
        apply_edit(three, EditOp("tone_add", tone=ToneSpec("f8", 0.15)))


def test_move_to_occupied_position_inapplicable():
    two = SceneSpec(
        (GlyphSpec("circle", "red", "large", "TL"), GlyphSpec("square", "blue", "small", "C"))
    )
    with pytest.raises(InapplicableEdit):
        apply_edit(two, EditOp("move", value="C"))


def test_edit_locality_fieldwise_exhaustive():
    fields = ("shape", "color", "size", "position")
    for spec in all_single_scenes()[::11]:
        for op in enumerate_edits(spec, include_noop=True):
            out = apply_edit(spec, op)
            (target_field,) = edit_targets(op)
            for f in fields:
                if f == target_field:
                    assert getattr(out.glyphs[0], f) == op.value
                else:
                    assert getattr(out.glyphs[0], f) == getattr(spec.glyphs[0], f)


def test_audio_edit_locality():
    for spec in all_audio_specs()[::17]:
        src_map = {t.bin: t.amp for t in spec.tones}
        for op in enumerate_edits(spec):
            out = apply_edit(spec, op)
            out_map = {t.bin: t.amp for t in out.tones}
            targeted = set(edit_targets(op))
            for b in set(src_map) | set(out_map):
                if b not in targeted:
                    assert out_map.get(b) == src_map.get(b), (spec, op)


def test_infer_edit_recovers_op():
    for spec in all_single_scenes()[::23] + all_audio_specs()[::53]:
        for op in enumerate_edits(spec)[::3]:
            out = apply_edit(spec, op)
            inferred = infer_edit(spec, out)
            assert inferred is not None
            assert apply_edit(spec, inferred) == out


def test_enumerate_edits_excludes_noops_by_default():
    for op in enumerate_edits(SCENE):
        assert apply_edit(SCENE, op) != SCENE
