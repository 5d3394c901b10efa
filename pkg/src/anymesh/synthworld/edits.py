"""Attribute-level edit algebra over scene and audio specs."""

from __future__ import annotations

from dataclasses import replace

from .types import (
    COLORS,
    POSITIONS,
    SHAPES,
    SIZES,
    TONE_AMPS,
    TONE_BINS,
    AudioSpec,
    EditOp,
    SceneSpec,
    SpecError,
    ToneSpec,
)

IMAGE_EDIT_KINDS = ("recolor", "reshape", "resize", "move")
AUDIO_EDIT_KINDS = ("tone_add", "tone_drop", "tone_replace")

_FIELD = {"recolor": "color", "reshape": "shape", "resize": "size", "move": "position"}


class InapplicableEdit(Exception):
    """The edit's precondition fails on this spec."""


def apply_edit(spec: SceneSpec | AudioSpec, op: EditOp) -> SceneSpec | AudioSpec:
    """Apply one edit, changing exactly the targeted attribute/tone.

    Image edits target glyph 0. Raises InapplicableEdit when the op does not
    apply (dropping an absent tone, moving onto an occupied position, ...).
    """
    if op.kind in IMAGE_EDIT_KINDS:
        if not isinstance(spec, SceneSpec):
            raise InapplicableEdit(f"{op.kind} applies to scenes")
        target, rest = spec.glyphs[0], spec.glyphs[1:]
        if op.kind == "move" and any(g.position == op.value for g in rest):
            raise InapplicableEdit(f"position {op.value} already occupied")
        edited = replace(target, **{_FIELD[op.kind]: op.value})
        return SceneSpec((edited, *rest))

    if not isinstance(spec, AudioSpec):
        raise InapplicableEdit(f"{op.kind} applies to audio")
    bins = {t.bin: t for t in spec.tones}
    if op.kind == "tone_add":
        if op.tone.bin in bins:
            raise InapplicableEdit(f"bin {op.tone.bin} already present")
        if len(spec.tones) >= 3:
            raise InapplicableEdit("audio spec already has 3 tones")
        return AudioSpec((*spec.tones, op.tone))
    if op.kind == "tone_drop":
        if op.old_bin not in bins:
            raise InapplicableEdit(f"bin {op.old_bin} not present")
        if len(spec.tones) <= 1:
            raise InapplicableEdit("cannot drop the only tone")
        return AudioSpec(tuple(t for t in spec.tones if t.bin != op.old_bin))
    if op.kind == "tone_replace":
        if op.old_bin not in bins:
            raise InapplicableEdit(f"bin {op.old_bin} not present")
        if op.tone.bin != op.old_bin and op.tone.bin in bins:
            raise InapplicableEdit(f"bin {op.tone.bin} already present")
        kept = tuple(t for t in spec.tones if t.bin != op.old_bin)
        try:
            return AudioSpec((*kept, op.tone))
        except SpecError as e:
            raise InapplicableEdit(str(e)) from e
    raise InapplicableEdit(f"unknown edit kind {op.kind}")


def enumerate_edits(spec: SceneSpec | AudioSpec, include_noop: bool = False) -> list[EditOp]:
    """All edits applicable to `spec` (no-ops excluded by default)."""
    ops: list[EditOp] = []
    if isinstance(spec, SceneSpec):
        g = spec.glyphs[0]
        taken = {h.position for h in spec.glyphs[1:]}
        for kind, values in (
            ("recolor", COLORS),
            ("reshape", SHAPES),
            ("resize", SIZES),
            ("move", POSITIONS),
        ):
            current = getattr(g, _FIELD[kind])
            for v in values:
                if kind == "move" and v in taken:
                    continue
                if v == current and not include_noop:
                    continue
                ops.append(EditOp(kind, value=v))
        return ops
    bins = {t.bin: t for t in spec.tones}
    if len(spec.tones) < 3:
        for b in TONE_BINS:
            if b not in bins:
                for a in TONE_AMPS:
                    ops.append(EditOp("tone_add", tone=ToneSpec(b, a)))
    if len(spec.tones) > 1:
        for b in bins:
            ops.append(EditOp("tone_drop", old_bin=b))
    for old in bins:
        for b in TONE_BINS:
            if b != old and b in bins:
                continue
            for a in TONE_AMPS:
                new = ToneSpec(b, a)
                if new == bins[old] and not include_noop:
                    continue
                ops.append(EditOp("tone_replace", old_bin=old, tone=new))
    return ops


def infer_edit(before: SceneSpec | AudioSpec, after: SceneSpec | AudioSpec) -> EditOp | None:
    """The edit mapping `before` to `after`, or None if no single edit does."""
    for op in enumerate_edits(before, include_noop=True):
        try:
            if apply_edit(before, op) == after:
                return op
        except InapplicableEdit:  # pragma: no cover - enumerate only yields applicable
            continue
    return None


def edit_targets(op: EditOp) -> tuple[str, ...]:
    """The attribute fields (scene) or bins (audio) an edit is allowed to change."""
    if op.kind in IMAGE_EDIT_KINDS:
        return (_FIELD[op.kind],)
    if op.kind == "tone_add":
        return (op.tone.bin,)
    if op.kind == "tone_drop":
        return (op.old_bin,)
    return (op.old_bin, op.tone.bin)
