"""The seven dataset builders.

Every builder is pure in (n, seed, config): record i derives its own rng from
(seed, family, i), so shard k of a sharded build equals the corresponding
slice of an unsharded one. Prompt-side specs are drawn from a deterministic
hash split ("train" / "eval" / "all") so evaluation prompts never appear in
training data.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache

import numpy as np

from ..synthworld import (
    AudioSpec,
    FeatureEncoder,
    SceneSpec,
    all_audio_specs,
    all_single_scenes,
    apply_edit,
    caption_constituents,
    caption_of,
    edit_to_dict,
    enumerate_edits,
    render,
    spec_to_dict,
)
from .episode import Episode, Segment
from .templates import FAMILIES, TemplateBank, edit_phrase

EVAL_BUCKETS = (0, 1)  # sha bucket in 0..4; two buckets -> 40% eval pool


def is_eval_spec(spec: SceneSpec | AudioSpec) -> bool:
    h = hashlib.sha256(repr(spec_to_dict(spec)).encode()).digest()[0]
    return h % 5 in EVAL_BUCKETS


@lru_cache(maxsize=None)
def spec_pool(modality: str, split: str) -> tuple:
    """Deterministic spec pool per (modality, split)."""
    specs = all_single_scenes() if modality == "image" else all_audio_specs()
    if split == "all":
        return tuple(specs)
    if split == "train":
        return tuple(s for s in specs if not is_eval_spec(s))
    if split == "eval":
        return tuple(s for s in specs if is_eval_spec(s))
    raise ValueError(f"unknown split {split!r}")


def _record_rng(seed: int, family: str, index: int) -> np.random.Generator:
    digest = hashlib.sha256(repr((seed, family, index)).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _pick(pool: tuple, rng: np.random.Generator):
    return pool[int(rng.integers(len(pool)))]


def _fill(template: tuple[str, ...], slot_values: dict[str, list[Segment]]) -> list[Segment]:
    """Replace slot tokens with segments, merging adjacent plain words."""
    segs: list[Segment] = []
    words: list[str] = []
    for tok in template:
        if tok in slot_values:
            if words:
                segs.append(Segment.text(words))
                words = []
            segs.extend(slot_values[tok])
        else:
            words.append(tok)
    if words:
        segs.append(Segment.text(words))
    return segs


class DatasetBuilder:
    """Shared machinery: encoder, template bank, per-record rng derivation."""

    def __init__(self, encoder: FeatureEncoder | None = None, bank: TemplateBank | None = None):
        self.encoder = encoder or FeatureEncoder()
        self.bank = bank or TemplateBank()

    def _feat_seg(self, spec: SceneSpec | AudioSpec, modality: str) -> Segment:
        feature = self.encoder.encode(spec, modality)
        return Segment.feat(feature, sample=render(spec))

    # ------------------------------------------------------------------ paired
    def build_paired(
        self, n: int, seed: int, direction: str, modality: str, split: str = "all", start: int = 0
    ) -> list[Episode]:
        if direction not in ("to_modality", "to_caption"):
            raise ValueError(f"unknown direction {direction!r}")
        family = "caption_to_modality" if direction == "to_modality" else "modality_to_caption"
        pool = spec_pool(modality, split)
        out = []
        for i in range(start, start + n):
            rng = _record_rng(seed, f"{family}/{modality}", i)
            spec = _pick(pool, rng)
            template = self.bank.sample(family, rng)
            if direction == "to_modality":
                prompt = _fill(template, {"[CAP]": [Segment.text(caption_of(spec))]})
                target = [self._feat_seg(spec, modality)]
            else:
                prompt = _fill(template, {"[MOD]": [self._feat_seg(spec, modality)]})
                target = [Segment.text(caption_of(spec))]
            out.append(
                Episode(
                    turns=[("usr", prompt), ("asst", target)],
                    task_family=family,
                    rng_seed=i,
                    meta={"spec": spec_to_dict(spec), "modality": modality},
                )
            )
        return out

    # ----------------------------------------------------------------- editing
    def build_editing(
        self, n: int, seed: int, modality: str, split: str = "all", start: int = 0
    ) -> list[Episode]:
        pool = spec_pool(modality, split)
        out = []
        for i in range(start, start + n):
            rng = _record_rng(seed, f"editing/{modality}", i)
            src = _pick(pool, rng)
            ops = enumerate_edits(src)
            op = ops[int(rng.integers(len(ops)))]
            tgt = apply_edit(src, op)
            template = self.bank.sample("editing", rng)
            prompt = _fill(
                template,
                {"[MOD]": [self._feat_seg(src, modality)], "[EDIT]": [Segment.text(edit_phrase(op))]},
            )
            out.append(
                Episode(
                    turns=[("usr", prompt), ("asst", [self._feat_seg(tgt, modality)])],
                    task_family="editing",
                    rng_seed=i,
                    meta={
                        "src": spec_to_dict(src),
                        "op": edit_to_dict(op),
                        "tgt": spec_to_dict(tgt),
                        "modality": modality,
                    },
                )
            )
        return out

    # ------------------------------------------------------------ exemplar ICL
    def build_exemplar_icl(
        self,
        n: int,
        seed: int,
        modality: str,
        split: str = "all",
        heldout_ops: tuple[str, ...] = (),
        start: int = 0,
    ) -> list[Episode]:
        """Exemplar pair (x0 -> x1 = op(x0)) then apply the same op to x2 != x0."""
        pool = spec_pool(modality, split)
        out = []
        for i in range(start, start + n):
            rng = _record_rng(seed, f"exemplar_icl/{modality}", i)
            while True:
                x0 = _pick(pool, rng)
                ops = [o for o in enumerate_edits(x0) if o.kind not in heldout_ops]
                if not ops:
                    continue
                op = ops[int(rng.integers(len(ops)))]
                x2 = _pick(pool, rng)
                if x2 == x0:
                    continue
                try:
                    tgt = apply_edit(x2, op)
                except Exception:
                    continue
                break
            x1 = apply_edit(x0, op)
            template = self.bank.sample("exemplar_icl", rng)
            prompt = _fill(
                template,
                {
                    "[X0]": [self._feat_seg(x0, modality)],
                    "[X1]": [self._feat_seg(x1, modality)],
                    "[X2]": [self._feat_seg(x2, modality)],
                },
            )
            out.append(
                Episode(
                    turns=[("usr", prompt), ("asst", [self._feat_seg(tgt, modality)])],
                    task_family="exemplar_icl",
                    rng_seed=i,
                    meta={
                        "x0": spec_to_dict(x0),
                        "x2": spec_to_dict(x2),
                        "op": edit_to_dict(op),
                        "tgt": spec_to_dict(tgt),
                        "modality": modality,
                    },
                )
            )
        return out

    # ------------------------------------------------------------- composition
    def build_composition(self, n: int, seed: int, split: str = "all", start: int = 0) -> list[Episode]:
        pool = spec_pool("image", split)
        out = []
        for i in range(start, start + n):
            rng = _record_rng(seed, "composition", i)
            while True:
                s0, s1 = _pick(pool, rng), _pick(pool, rng)
                g0, g1 = s0.glyphs[0], s1.glyphs[0]
                if g0.position != g1.position:
                    break
            tgt = SceneSpec((g0, g1))
            template = self.bank.sample("composition", rng)
            prompt = _fill(
                template,
                {"[X0]": [self._feat_seg(s0, "image")], "[X1]": [self._feat_seg(s1, "image")]},
            )
            out.append(
                Episode(
                    turns=[("usr", prompt), ("asst", [self._feat_seg(tgt, "image")])],
                    task_family="composition",
                    rng_seed=i,
                    meta={"parts": [spec_to_dict(s0), spec_to_dict(s1)], "tgt": spec_to_dict(tgt)},
                )
            )
        return out

    # --------------------------------------------------------------- text swap
    def build_text_swap(self, n: int, seed: int, split: str = "all", start: int = 0) -> list[Episode]:
        """Captions with 1-2 constituent phrases swapped for text-feature segments."""
        pools = {"image": spec_pool("image", split), "audio": spec_pool("audio", split)}
        out = []
        for i in range(start, start + n):
            rng = _record_rng(seed, "text_swap", i)
            modality = "image" if rng.integers(2) == 0 else "audio"
            spec = _pick(pools[modality], rng)
            caption = caption_of(spec)
            spans = caption_constituents(spec)
            k = int(rng.integers(1, min(2, len(spans)) + 1))
            chosen = sorted(rng.choice(len(spans), size=k, replace=False).tolist())
            segs: list[Segment] = []
            cursor = 0
            for si in chosen:
                a, b = spans[si]
                if a > cursor:
                    segs.append(Segment.text(caption[cursor:a]))
                segs.append(Segment.feat(self.encoder.encode(caption[a:b], "text")))
                cursor = b
            if cursor < len(caption):
                segs.append(Segment.text(caption[cursor:]))
            template = self.bank.sample("text_swap", rng)
            prompt = _fill(template, {"[SWAP]": segs})
            out.append(
                Episode(
                    turns=[("usr", prompt), ("asst", [Segment.text(caption)])],
                    task_family="text_swap",
                    rng_seed=i,
                    meta={"spec": spec_to_dict(spec), "swapped": [list(spans[si]) for si in chosen]},
                )
            )
        return out

    # -------------------------------------------------------------- multiround
    def build_multiround(
        self, n: int, seed: int, modality: str, turns: int = 2, split: str = "all", start: int = 0
    ) -> list[Episode]:
        """Chained editing across 2-4 rounds; only the last response is supervised."""
        if not 2 <= turns <= 4:
            raise ValueError(f"turns must be in [2, 4], got {turns}")
        pool = spec_pool(modality, split)
        out = []
        for i in range(start, start + n):
            rng = _record_rng(seed, f"multiround/{modality}", i)
            spec = _pick(pool, rng)
            chain = [spec]
            ops = []
            convo: list[tuple[str, list[Segment]]] = []
            for r in range(turns):
                candidates = enumerate_edits(chain[-1])
                op = candidates[int(rng.integers(len(candidates)))]
                ops.append(op)
                nxt = apply_edit(chain[-1], op)
                chain.append(nxt)
                if r == 0:
                    template = self.bank.sample("editing", rng)
                    prompt = _fill(
                        template,
                        {
                            "[MOD]": [self._feat_seg(spec, modality)],
                            "[EDIT]": [Segment.text(edit_phrase(op))],
                        },
                    )
                else:
                    template = self.bank.sample("multiround", rng)
                    prompt = _fill(template, {"[EDIT]": [Segment.text(edit_phrase(op))]})
                convo.append(("usr", prompt))
                convo.append(("asst", [self._feat_seg(nxt, modality)]))
            out.append(
                Episode(
                    turns=convo,
                    task_family="multiround",
                    rng_seed=i,
                    meta={
                        "chain": [spec_to_dict(s) for s in chain],
                        "ops": [edit_to_dict(o) for o in ops],
                        "modality": modality,
                    },
                )
            )
        return out


def build_family(
    builder: DatasetBuilder,
    family: str,
    n: int,
    seed: int,
    modality: str = "image",
    split: str = "all",
    turns: int = 2,
    heldout_ops: tuple[str, ...] = (),
    start: int = 0,
) -> list[Episode]:
    """Uniform dispatch over the seven families (paired splits into two)."""
    if family == "caption_to_modality":
        return builder.build_paired(n, seed, "to_modality", modality, split, start)
    if family == "modality_to_caption":
        return builder.build_paired(n, seed, "to_caption", modality, split, start)
    if family == "editing":
        return builder.build_editing(n, seed, modality, split, start)
    if family == "exemplar_icl":
        return builder.build_exemplar_icl(n, seed, modality, split, heldout_ops, start)
    if family == "composition":
        return builder.build_composition(n, seed, split, start)
    if family == "text_swap":
        return builder.build_text_swap(n, seed, split, start)
    if family == "multiround":
        return builder.build_multiround(n, seed, modality, turns, split, start)
    raise ValueError(f"unknown family {family!r}; known: {FAMILIES}")
