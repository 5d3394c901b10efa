"""Interleaved episode data model and its expansion into a trainable sequence.

An episode alternates user/assistant turns of text and feature segments; the
final assistant turn is the supervision target. Assembly expands each feature
segment to [MOD_BEG, L_f feature rows, MOD_END] and attaches shifted loss
targets: cross-entropy for final-turn tokens (boundary tokens included),
mean-squared error for final-turn feature rows, nothing elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..synthworld.features import FeatureSeq
from .vocab import ASST, BOS, EOS, SEGMENT_BOUNDS, USR, Vocabulary

LOSS_NONE, LOSS_CE, LOSS_MSE = 0, 1, 2


@dataclass
class Segment:
    """Text tokens or a feature block (with the raw sample it encodes, if any)."""

    kind: str  # "text" | "feature"
    words: list[str] | None = None
    feature: FeatureSeq | None = None
    sample: np.ndarray | None = None
    sample_ref: str | None = None

    def __post_init__(self):
        if self.kind == "text":
            if not self.words:
                raise ValueError("text segment needs words")
        elif self.kind == "feature":
            if self.feature is None:
                raise ValueError("feature segment needs a FeatureSeq")
        else:
            raise ValueError(f"unknown segment kind {self.kind!r}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Segment) or self.kind != other.kind:
            return False
        if self.kind == "text":
            return self.words == other.words
        same_sample = (self.sample is None) == (other.sample is None) and (
            self.sample is None or np.array_equal(self.sample, other.sample)
        )
        return self.feature == other.feature and same_sample

    @staticmethod
    def text(words: list[str]) -> "Segment":
        return Segment(kind="text", words=list(words))

    @staticmethod
    def feat(feature: FeatureSeq, sample: np.ndarray | None = None) -> "Segment":
        return Segment(kind="feature", feature=feature, sample=sample)


@dataclass
class Episode:
    """Alternating (role, segments) turns; roles start at usr and end at asst."""

    turns: list[tuple[str, list[Segment]]]
    task_family: str
    rng_seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.turns:
            raise ValueError("episode needs at least one turn")
        for i, (role, segs) in enumerate(self.turns):
            expected = "usr" if i % 2 == 0 else "asst"
            if role != expected:
                raise ValueError(f"turn {i} role {role!r}, expected {expected!r}")
            if not segs:
                raise ValueError(f"turn {i} has no segments")
        if self.turns[-1][0] != "asst":
            raise ValueError("final turn must be asst (the supervision target)")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Episode)
            and self.task_family == other.task_family
            and self.rng_seed == other.rng_seed
            and self.meta == other.meta
            and len(self.turns) == len(other.turns)
            and all(
                r1 == r2 and s1 == s2
                for (r1, s1), (r2, s2) in zip(self.turns, other.turns)
            )
        )


@dataclass
class FeatureSpan:
    """Position range [start, end) of one feature segment's rows in a ModelSequence."""

    modality: str
    start: int
    end: int
    is_target: bool
    sample: np.ndarray | None = None


@dataclass
class ModelSequence:
    """Flat position-wise encoding of an episode.

    Position i holds either a token id (input_ids[i] >= 0) or a feature row
    (input_rows[i]). loss_kind[i] says what the model's output AT i must
    predict: the next token (CE) or the next feature row (MSE).
    """

    input_ids: np.ndarray
    input_rows: np.ndarray
    loss_kind: np.ndarray
    ce_target: np.ndarray
    mse_target: np.ndarray
    spans: list[FeatureSpan]

    def __len__(self) -> int:
        return int(self.input_ids.shape[0])

    @property
    def boundary_indices(self) -> list[int]:
        out = []
        for s in self.spans:
            out += [s.start - 1, s.end]  # the MOD_BEG / MOD_END token positions
        return out


def _expand(
    ep: Episode, vocab: Vocabulary, df: int
) -> tuple[list, list[FeatureSpan]]:
    """Flatten the episode to a list of ('tok', id) / ('row', vec) items plus spans."""
    items: list = [("tok", vocab.id(BOS))]
    spans: list[FeatureSpan] = []
    last = len(ep.turns) - 1
    for ti, (role, segs) in enumerate(ep.turns):
        items.append(("tok", vocab.id(USR if role == "usr" else ASST)))
        for seg in segs:
            if seg.kind == "text":
                items += [("tok", vocab.id(w)) for w in seg.words]
            else:
                feat = seg.feature
                if feat.rows.shape[1] != df:
                    raise ValueError(f"feature rows have d_f={feat.rows.shape[1]}, expected {df}")
                beg, end = SEGMENT_BOUNDS[feat.modality]
                items.append(("tok", vocab.id(beg)))
                start = len(items)
                items += [("row", row) for row in feat.rows]
                spans.append(
                    FeatureSpan(feat.modality, start, len(items), ti == last, seg.sample)
                )
                items.append(("tok", vocab.id(end)))
    items.append(("tok", vocab.id(EOS)))
    return items, spans


def assemble(ep: Episode, vocab: Vocabulary, df: int | None = None) -> ModelSequence:
    """Expand an episode into a ModelSequence with shifted loss targets."""
    if df is None:
        for _, segs in ep.turns:
            for seg in segs:
                if seg.kind == "feature":
                    df = seg.feature.rows.shape[1]
                    break
            if df is not None:
                break
        if df is None:
            df = 1
    items, spans = _expand(ep, vocab, df)
    L = len(items)
    input_ids = np.full(L, -1, dtype=np.int32)
    input_rows = np.zeros((L, df), dtype=np.float32)
    loss_kind = np.zeros(L, dtype=np.int8)
    ce_target = np.full(L, -1, dtype=np.int32)
    mse_target = np.zeros((L, df), dtype=np.float32)
    for i, (kind, val) in enumerate(items):
        if kind == "tok":
            input_ids[i] = val
        else:
            input_rows[i] = val

    # supervision covers everything after the final asst role token, EOS included
    target_from = _target_start(ep, vocab, items)
    for i in range(target_from, L):
        kind, val = items[i]
        if kind == "tok":
            loss_kind[i - 1] = LOSS_CE
            ce_target[i - 1] = val
        else:
            loss_kind[i - 1] = LOSS_MSE
            mse_target[i - 1] = val
    return ModelSequence(input_ids, input_rows, loss_kind, ce_target, mse_target, spans)


def _target_start(ep: Episode, vocab: Vocabulary, items: list) -> int:
    """Index of the first supervised item: right after the final asst role token."""
    asst_id = vocab.id(ASST)
    last_asst = max(i for i, (k, v) in enumerate(items) if k == "tok" and v == asst_id)
    return last_asst + 1


def assemble_prompt(ep: Episode, vocab: Vocabulary, df: int | None = None) -> ModelSequence:
    """The prompt prefix of an episode: everything through the final asst role token."""
    seq = assemble(ep, vocab, df)
    items_end = _prompt_end(seq, vocab)
    return ModelSequence(
        input_ids=seq.input_ids[:items_end],
        input_rows=seq.input_rows[:items_end],
        loss_kind=np.zeros(items_end, dtype=np.int8),
        ce_target=np.full(items_end, -1, dtype=np.int32),
        mse_target=np.zeros((items_end, seq.input_rows.shape[1]), dtype=np.float32),
        spans=[s for s in seq.spans if s.end <= items_end],
    )


def _prompt_end(seq: ModelSequence, vocab: Vocabulary) -> int:
    asst_id = vocab.id(ASST)
    idx = np.nonzero(seq.input_ids == asst_id)[0]
    if idx.size == 0:
        raise ValueError("sequence has no asst role token")
    return int(idx[-1]) + 1
