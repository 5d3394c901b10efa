"""Prompt template bank: per-family paraphrases with typed slots.

Slots are bracketed tokens: [CAP] caption words, [MOD]/[X0]/[X1]/[X2] feature
segments, [EDIT] an edit-instruction phrase, [SWAP] a caption with swapped-in
text-feature segments.
"""

from __future__ import annotations

import numpy as np

from ..synthworld.captions import AMP_WORDS, POSITION_WORDS
from ..synthworld.types import EditOp

FAMILIES = (
    "caption_to_modality",
    "modality_to_caption",
    "editing",
    "exemplar_icl",
    "composition",
    "text_swap",
    "multiround",
)

FAMILY_SLOTS = {
    "caption_to_modality": ("[CAP]",),
    "modality_to_caption": ("[MOD]",),
    "editing": ("[MOD]", "[EDIT]"),
    "exemplar_icl": ("[X0]", "[X1]", "[X2]"),
    "composition": ("[X0]", "[X1]"),
    "text_swap": ("[SWAP]",),
    "multiround": ("[EDIT]",),
}


def _t(*texts: str) -> list[tuple[str, ...]]:
    return [tuple(s.split()) for s in texts]


_BANK: dict[str, list[tuple[str, ...]]] = {
    "caption_to_modality": _t(
        "generate [CAP]",
        "produce [CAP]",
        "create [CAP]",
        "make [CAP]",
        "show [CAP]",
        "give [CAP]",
        "draw [CAP]",
        "please generate [CAP]",
        "please produce [CAP]",
        "please create [CAP]",
        "please make [CAP]",
        "generate [CAP] now",
        "produce [CAP] now",
        "create [CAP] now",
        "make [CAP] please",
        "now generate [CAP]",
        "now produce [CAP]",
        "now create [CAP]",
        "show [CAP] please",
        "give [CAP] please",
    ),
    "modality_to_caption": _t(
        "describe [MOD]",
        "caption [MOD]",
        "give the caption of [MOD]",
        "describe [MOD] please",
        "please describe [MOD]",
        "please caption [MOD]",
        "caption [MOD] now",
        "describe [MOD] now",
        "give a caption of [MOD]",
        "now describe [MOD]",
        "now caption [MOD]",
        "give the caption of [MOD] please",
        "produce the caption of [MOD]",
        "generate the caption of [MOD]",
        "create the caption of [MOD]",
        "produce a caption of [MOD]",
        "generate a caption of [MOD]",
        "caption [MOD] please",
        "please give the caption of [MOD]",
        "generate the caption of [MOD] now",
    ),
    "editing": _t(
        "given [MOD] [EDIT]",
        "[MOD] [EDIT]",
        "given [MOD] please [EDIT]",
        "[MOD] please [EDIT]",
        "[MOD] now [EDIT]",
        "given [MOD] now [EDIT]",
        "given [MOD] [EDIT] please",
        "[MOD] [EDIT] please",
        "[MOD] [EDIT] now",
        "given this [MOD] [EDIT]",
        "given this [MOD] please [EDIT]",
        "given this [MOD] [EDIT] please",
        "given this [MOD] [EDIT] now",
        "given this [MOD] now [EDIT]",
        "please [EDIT] given [MOD]",
        "now [EDIT] given [MOD]",
        "[EDIT] given [MOD]",
        "[EDIT] given this [MOD]",
        "please [EDIT] given this [MOD]",
        "now [EDIT] given this [MOD]",
    ),
    "exemplar_icl": _t(
        "given the transformation between [X0] and [X1] apply the same editing to [X2]",
        "given the transformation between [X0] and [X1] apply the same to [X2]",
        "given the change between [X0] and [X1] apply the same editing to [X2]",
        "given the editing between [X0] and [X1] apply the same to [X2]",
        "given the editing between [X0] and [X1] apply the same editing to [X2]",
        "given the change between [X0] and [X1] apply the same to [X2]",
        "between [X0] and [X1] apply the same transformation to [X2]",
        "between [X0] and [X1] apply the same editing to [X2]",
        "between [X0] and [X1] apply the same change to [X2]",
        "given the transformation between [X0] and [X1] apply the same change to [X2]",
        "given the transformation between [X0] and [X1] apply the same transformation to [X2]",
        "given the editing between [X0] and [X1] apply the same transformation to [X2]",
        "given the change between [X0] and [X1] apply the same change to [X2]",
        "please apply the transformation between [X0] and [X1] to [X2]",
        "apply the transformation between [X0] and [X1] to [X2]",
        "apply the editing between [X0] and [X1] to [X2]",
        "apply the change between [X0] and [X1] to [X2]",
        "now apply the transformation between [X0] and [X1] to [X2]",
        "please apply the editing between [X0] and [X1] to [X2]",
        "given the transformation between [X0] and [X1] please apply the same editing to [X2]",
    ),
    "composition": _t(
        "[X0] on [X1]",
        "put [X0] on [X1]",
        "create [X0] on [X1]",
        "make [X0] on [X1]",
        "generate [X0] on [X1]",
        "produce [X0] on [X1]",
        "draw [X0] on [X1]",
        "show [X0] on [X1]",
        "combine [X0] with [X1]",
        "please combine [X0] with [X1]",
        "please put [X0] on [X1]",
        "please create [X0] on [X1]",
        "please make [X0] on [X1]",
        "please generate [X0] on [X1]",
        "now put [X0] on [X1]",
        "now create [X0] on [X1]",
        "now combine [X0] with [X1]",
        "put [X0] on [X1] please",
        "combine [X0] with [X1] please",
        "combine [X0] with [X1] now",
    ),
    "text_swap": _t(
        "give the caption of [SWAP]",
        "describe [SWAP]",
        "caption [SWAP]",
        "describe [SWAP] please",
        "please describe [SWAP]",
        "please caption [SWAP]",
        "caption [SWAP] now",
        "describe [SWAP] now",
        "give a caption of [SWAP]",
        "now describe [SWAP]",
        "now caption [SWAP]",
        "give the caption of [SWAP] please",
        "produce the caption of [SWAP]",
        "generate the caption of [SWAP]",
        "create the caption of [SWAP]",
        "produce a caption of [SWAP]",
        "generate a caption of [SWAP]",
        "caption [SWAP] please",
        "please give the caption of [SWAP]",
        "generate the caption of [SWAP] now",
    ),
    "multiround": _t(
        "[EDIT]",
        "now [EDIT]",
        "and [EDIT]",
        "and now [EDIT]",
        "please [EDIT]",
        "now please [EDIT]",
        "and please [EDIT]",
        "[EDIT] please",
        "now [EDIT] please",
        "and [EDIT] please",
        "and now [EDIT] please",
        "[EDIT] now",
        "and [EDIT] now",
        "please [EDIT] now",
        "and please [EDIT] now",
        "then [EDIT]",
        "then [EDIT] please",
        "then [EDIT] now",
        "and then [EDIT]",
        "then please [EDIT]",
    ),
}

_SLOT_TOKENS = {s for slots in FAMILY_SLOTS.values() for s in slots}


class TemplateBank:
    """Validated per-family template lists (>= 20 paraphrases each)."""

    def __init__(self, bank: dict[str, list[tuple[str, ...]]] | None = None, min_size: int = 20):
        self.bank = dict(bank if bank is not None else _BANK)
        for family, templates in self.bank.items():
            if family not in FAMILY_SLOTS:
                raise ValueError(f"unknown family {family!r}")
            if len(templates) < min_size:
                raise ValueError(f"family {family} has {len(templates)} templates, needs {min_size}")
            expected = FAMILY_SLOTS[family]
            for tpl in templates:
                slots = tuple(tok for tok in tpl if tok in _SLOT_TOKENS)
                if tuple(sorted(slots)) != tuple(sorted(expected)):
                    raise ValueError(f"template {tpl} slots {slots} != family arity {expected}")

    def families(self) -> tuple[str, ...]:
        return tuple(self.bank)

    def templates(self, family: str) -> list[tuple[str, ...]]:
        if family not in self.bank:
            raise KeyError(f"unknown template family {family!r}")
        return self.bank[family]

    def sample(self, family: str, rng: np.random.Generator) -> tuple[str, ...]:
        """Uniform draw from the family's bank."""
        templates = self.templates(family)
        return templates[int(rng.integers(len(templates)))]


def sample_template(family: str, rng: np.random.Generator, bank: TemplateBank | None = None):
    return (bank or TemplateBank()).sample(family, rng)


def edit_phrase(op: EditOp) -> list[str]:
    """Canonical instruction wording for an edit op."""
    if op.kind == "recolor" or op.kind == "resize":
        return ["make", "this", op.value]
    if op.kind == "reshape":
        return ["make", "this", "a", op.value]
    if op.kind == "move":
        return ["move", "this", "to", *POSITION_WORDS[op.value]]
    if op.kind == "tone_add":
        return ["add", "tone", op.tone.bin, AMP_WORDS[op.tone.amp]]
    if op.kind == "tone_drop":
        return ["remove", "tone", op.old_bin]
    if op.kind == "tone_replace":
        return ["replace", "tone", op.old_bin, "with", "tone", op.tone.bin, AMP_WORDS[op.tone.amp]]
    raise ValueError(f"unknown edit kind {op.kind}")
