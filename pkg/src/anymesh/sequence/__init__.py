"""Vocabulary, episodes, template bank, dataset builders and serialization."""

from .vocab import (
    ASST,
    AUD_BEG,
    AUD_END,
    BEG_TOKENS,
    BOS,
    EOS,
    IMG_BEG,
    IMG_END,
    PAD,
    SEGMENT_BOUNDS,
    SPECIALS,
    TXF_BEG,
    TXF_END,
    USR,
    VocabMiss,
    Vocabulary,
    default_vocabulary,
)
from .episode import (
    LOSS_CE,
    LOSS_MSE,
    LOSS_NONE,
    Episode,
    FeatureSpan,
    ModelSequence,
    Segment,
    assemble,
    assemble_prompt,
)
from .templates import FAMILIES, FAMILY_SLOTS, TemplateBank, edit_phrase, sample_template
from .builders import DatasetBuilder, build_family, is_eval_spec, spec_pool
from .serialize import (
    FormatError,
    deserialize,
    episode_from_dict,
    episode_to_dict,
    feature_from_b64,
    feature_to_b64,
    serialize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
