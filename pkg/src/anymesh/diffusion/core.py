"""Forward process, training loss, classifier-free guidance and ancestral sampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .epsnet import EpsNet, from_model_space
from .schedule import NoiseSchedule


class ModeMismatch(ValueError):
    """Fidelity input given to (or withheld from) a net of the other mode."""


@dataclass
class GuidanceParams:
    """CFG weight and the negative conditioning occupying the unconditioned slot."""

    w: float = 3.0
    c_neg: np.ndarray | torch.Tensor | None = None

    def __post_init__(self):
        if self.w < 0:
            raise ValueError(f"guidance weight must be >= 0, got {self.w}")


def _gather(sched: NoiseSchedule, t: torch.Tensor, like: torch.Tensor) -> tuple[torch.Tensor, ...]:
    beta, alpha, ab = sched.at(t.cpu().numpy())
    cast = lambda a: torch.as_tensor(a, dtype=like.dtype, device=like.device).reshape(-1, 1)
    return cast(beta), cast(alpha), cast(ab)


def forward_noise(
    z0: torch.Tensor, t: torch.Tensor | int, eps: torch.Tensor, sched: NoiseSchedule
) -> torch.Tensor:
    """z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps."""
    if isinstance(t, int):
        t = torch.full((z0.shape[0],), t, dtype=torch.long)
    _, _, ab = _gather(sched, t, z0)
    return torch.sqrt(ab) * z0 + torch.sqrt(1.0 - ab) * eps


def dm_loss(
    net: EpsNet,
    z0: torch.Tensor,
    cond: torch.Tensor,
    sched: NoiseSchedule,
    rng: torch.Generator,
    fidelity_input: torch.Tensor | None = None,
) -> torch.Tensor:
    """Per-dimension mean squared eps-prediction error at a uniformly drawn step.

    Differentiable w.r.t. the net parameters and w.r.t. `cond`, which is the
    channel through which the diffusion loss trains the feature-predicting LM.
    """
    B = z0.shape[0]
    t = torch.randint(1, sched.T + 1, (B,), generator=rng, device=z0.device)
    eps = torch.randn(z0.shape, generator=rng, dtype=z0.dtype, device=z0.device)
    z_t = forward_noise(z0, t, eps, sched)
    pred = net(z_t, t, cond, fidelity_input)
    return ((eps - pred) ** 2).mean()


def cfg_eps(
    net: EpsNet,
    z_t: torch.Tensor,
    t: torch.Tensor,
    cond: torch.Tensor,
    guidance: GuidanceParams,
    fidelity_input: torch.Tensor | None = None,
) -> torch.Tensor:
    """eps_neg + w * (eps_cond - eps_neg), with the negative features as the
    unconditioned branch."""
    if guidance.c_neg is None:
        raise ValueError("guidance.c_neg is required")
    c_neg = torch.as_tensor(guidance.c_neg, dtype=z_t.dtype, device=z_t.device)
    c_neg = c_neg.reshape(1, -1).expand(z_t.shape[0], -1)
    eps_c = net(z_t, t, cond, fidelity_input)
    eps_n = net(z_t, t, c_neg, fidelity_input)
    return eps_n + guidance.w * (eps_c - eps_n)


@torch.no_grad()
def sample(
    net: EpsNet,
    cond: torch.Tensor,
    sched: NoiseSchedule,
    guidance: GuidanceParams,
    rng: torch.Generator,
    fidelity_input: torch.Tensor | None = None,
) -> torch.Tensor:
    """Ancestral DDPM sampling; returns samples in their legal range, shape (B, D).

    sigma_t = sqrt(beta_t); the noise term is dropped at t=1. The fidelity
    input, when given, is concatenated to the net input at every step.
    """
    if (fidelity_input is not None) != net.fidelity:
        raise ModeMismatch(
            f"net fidelity={net.fidelity} but fidelity_input "
            f"{'given' if fidelity_input is not None else 'missing'}"
        )
    cond = cond.reshape(-1, net.lf * net.df)
    B = cond.shape[0]
    dtype = next(net.parameters()).dtype
    device = next(net.parameters()).device
    z = torch.randn((B, net.data_dim), generator=rng, dtype=dtype, device=device)
    for step in range(sched.T, 0, -1):
        t = torch.full((B,), step, dtype=torch.long, device=device)
        beta, alpha, ab = _gather(sched, t, z)
        eps_hat = cfg_eps(net, z, t, cond, guidance, fidelity_input)
        z = (z - beta / torch.sqrt(1.0 - ab) * eps_hat) / torch.sqrt(alpha)
        if step > 1:
            nu = torch.randn(z.shape, generator=rng, dtype=dtype, device=device)
            z = z + torch.sqrt(beta) * nu
    return from_model_space(z, net.modality)
