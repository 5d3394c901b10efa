"""Synthetic modalities: renderers, oracle decoders, captions, features, edits."""

from .types import (
    AUDIO_LEN,
    COLORS,
    DEFAULT_DF,
    DEFAULT_LF,
    EDIT_KINDS,
    IMAGE_SHAPE,
    MODALITIES,
    POSITIONS,
    SHAPES,
    SIZES,
    TONE_AMPS,
    TONE_BINS,
    AudioSpec,
    EditOp,
    GlyphSpec,
    SceneSpec,
    SpecError,
    ToneSpec,
    all_audio_specs,
    all_glyphs,
    all_single_scenes,
    edit_from_dict,
    edit_to_dict,
    spec_from_dict,
    spec_to_dict,
)
from .render import render, render_audio, render_image
from .decode import TAU_DEC, UndecodableSample, decode_audio, decode_image
from .captions import CAPTION_WORDS, ParseError, caption_constituents, caption_of, parse_caption
from .features import DEFAULT_ENCODER_SEED, FeatureEncoder, FeatureSeq
from .edits import (
    AUDIO_EDIT_KINDS,
    IMAGE_EDIT_KINDS,
    InapplicableEdit,
    apply_edit,
    edit_targets,
    enumerate_edits,
    infer_edit,
)
from .sampleio import read_sample, sample_bytes, sample_from_bytes, write_sample

__all__ = [name for name in dir() if not name.startswith("_")]
