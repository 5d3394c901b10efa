"""Closed vocabulary: caption + instruction words plus sequence-control specials."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..synthworld.captions import CAPTION_WORDS

SPECIALS = (
    "<pad>",
    "<bos>",
    "<eos>",
    "<img>",
    "</img>",
    "<aud>",
    "</aud>",
    "<txf>",
    "</txf>",
    "<usr>",
    "<asst>",
)

PAD, BOS, EOS, IMG_BEG, IMG_END, AUD_BEG, AUD_END, TXF_BEG, TXF_END, USR, ASST = SPECIALS

INSTRUCTION_WORDS = (
    "make", "turn", "change", "to", "the", "this", "into", "draw", "show",
    "generate", "produce", "create", "give", "describe", "caption", "then",
    "add", "remove", "replace", "with", "move", "apply", "same", "editing",
    "transformation", "between", "given", "combine", "put", "picture",
    "sound", "of", "now", "please",
)

SEGMENT_BOUNDS = {"image": (IMG_BEG, IMG_END), "audio": (AUD_BEG, AUD_END), "text": (TXF_BEG, TXF_END)}
BEG_TOKENS = {IMG_BEG: "image", AUD_BEG: "audio", TXF_BEG: "text"}


class VocabMiss(KeyError):
    """Word not in the closed vocabulary."""


@dataclass
class Vocabulary:
    """Dense word<->id bijection with specials in the low id range."""

    words: tuple[str, ...]
    specials: tuple[str, ...] = SPECIALS
    _to_id: dict[str, int] = field(init=False, repr=False)
    _to_word: tuple[str, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.words) > 64:
            raise ValueError(f"at most 64 words allowed, got {len(self.words)}")
        if set(self.specials) & set(self.words):
            raise ValueError("specials must be disjoint from words")
        if len(set(self.words)) != len(self.words):
            raise ValueError("duplicate words")
        all_tokens = tuple(self.specials) + tuple(self.words)
        self._to_word = all_tokens
        self._to_id = {w: i for i, w in enumerate(all_tokens)}

    def __len__(self) -> int:
        return len(self._to_word)

    def id(self, word: str) -> int:
        try:
            return self._to_id[word]
        except KeyError:
            raise VocabMiss(f"word {word!r} not in vocabulary") from None

    def word(self, idx: int) -> str:
        return self._to_word[idx]

    def ids(self, words: list[str]) -> list[int]:
        return [self.id(w) for w in words]

    @property
    def pad_id(self) -> int:
        return self._to_id[PAD]


def default_vocabulary() -> Vocabulary:
    seen: list[str] = []
    for w in CAPTION_WORDS + INSTRUCTION_WORDS:
        if w not in seen:
            seen.append(w)
    return Vocabulary(words=tuple(sorted(seen)))
