"""Combined loss, optimization loop, stage driver and gradient checker."""

from .losses import Batch, LossWeights, MissingRawTarget, collate, combined_loss
from .loop import NonFiniteLoss, OptState, PhaseSchedule, phase_next, train_step
from .stages import (
    LM_FAMILIES,
    PHASE_FAMILIES,
    STAGES,
    LossLog,
    autoencoder_dataset,
    dataset_file,
    dm_net_from_cfg,
    load_dm_nets,
    run_stage,
)
from .gradcheck import grad_check

__all__ = [name for name in dir() if not name.startswith("_")]
