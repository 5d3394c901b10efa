"""Causal transformer over interleaved token/feature sequences."""

from .config import ConfigError, ModelConfig
from .transformer import (
    FINETUNE,
    PRETRAIN,
    CausalSelfAttention,
    LoraLinear,
    MllmTransformer,
    ProjectionMLP,
    SequenceTooLong,
    init_model,
    parameter_count,
    set_trainable,
    trainable_parameters,
)
from .generate import (
    STOP_EOS,
    STOP_MALFORMED,
    STOP_MAX_LEN,
    GenerationOutput,
    GenerationParams,
    generate,
)
from .checkpoint import (
    MissingCheckpoint,
    load_module,
    load_optimizer,
    load_tensors,
    save_module,
    save_optimizer,
    save_tensors,
)

__all__ = [name for name in dir() if not name.startswith("_")]
