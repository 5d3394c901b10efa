"""Autoencoder pretraining: teach the diffusion net to invert the feature encoder.

Conditioning on a sample's own feature matrix must reconstruct the sample.
A fraction of batches swap the conditioning for the negative (degenerate)
features so the CFG unconditioned branch is trained too.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .core import dm_loss
from .epsnet import EpsNet
from .schedule import NoiseSchedule


@dataclass
class AutoencoderData:
    """Flattened training tensors: z0 in model space, cond flattened per row.

    For fidelity training, `fid` holds the source sample aligned with each row.
    """

    z0: torch.Tensor
    cond: torch.Tensor
    fid: torch.Tensor | None = None

    def __post_init__(self):
        if self.z0.shape[0] != self.cond.shape[0]:
            raise ValueError("z0 and cond must have matching batch dimension")
        if self.fid is not None and self.fid.shape != self.z0.shape:
            raise ValueError("fidelity tensor must match z0 shape")

    def __len__(self) -> int:
        return self.z0.shape[0]


def pretrain_autoencoder(
    net: EpsNet,
    data: AutoencoderData,
    sched: NoiseSchedule,
    steps: int,
    neg_cond: torch.Tensor | None = None,
    batch_size: int = 64,
    lr: float = 1e-3,
    cond_dropout: float = 0.1,
    cond_noise: float = 0.0,
    seed: int = 0,
    log_every: int = 500,
    log_fn=None,
) -> list[tuple[int, float]]:
    """Adam-train `net` on eps prediction; returns (step, running-loss) history.

    cond_dropout swaps conditioning for `neg_cond` (trains the CFG branch);
    cond_noise jitters the conditioning so the net tolerates the LM's
    slightly-off feature predictions at inference time.
    """
    if len(data) == 0:
        raise ValueError("empty autoencoder dataset")
    rng = torch.Generator().manual_seed(seed)
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    lr_sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=steps, eta_min=lr / 10)
    history: list[tuple[int, float]] = []
    running = None
    for step in range(steps):
        idx = torch.randint(0, len(data), (batch_size,), generator=rng)
        z0, cond = data.z0[idx], data.cond[idx].clone()
        fid = data.fid[idx] if data.fid is not None else None
        if cond_noise > 0:
            cond = cond + cond_noise * torch.randn(cond.shape, generator=rng, dtype=cond.dtype)
        if neg_cond is not None and cond_dropout > 0:
            drop = torch.rand(cond.shape[0], generator=rng) < cond_dropout
            cond[drop] = neg_cond.reshape(1, -1).to(cond.dtype)
        loss = dm_loss(net, z0, cond, sched, rng, fid)
        opt.zero_grad()
        loss.backward()
        opt.step()
        lr_sched.step()
        val = float(loss.detach())
        running = val if running is None else 0.98 * running + 0.02 * val
        if (step + 1) % log_every == 0:
            history.append((step + 1, running))
            if log_fn is not None:
                log_fn(step + 1, running)
    return history
