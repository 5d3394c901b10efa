"""Feature-conditioned denoising diffusion decoder."""

from .schedule import ConfigError, NoiseSchedule, make_schedule
from .epsnet import DATA_DIMS, EpsNet, from_model_space, timestep_embedding, to_model_space
from .core import GuidanceParams, ModeMismatch, cfg_eps, dm_loss, forward_noise, sample
from .pretrain import AutoencoderData, pretrain_autoencoder

__all__ = [name for name in dir() if not name.startswith("_")]
