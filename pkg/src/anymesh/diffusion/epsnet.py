"""FiLM-conditioned residual MLP noise predictor.

The data dimension is small (<= 768) so an MLP with per-block FiLM
modulation from the flattened conditioning matrix replaces the usual U-Net.
The optimal eps prediction contains a full-rank `z_t` passthrough scaled by a
function of t alone, which a narrow trunk cannot carry; a learned time-gated
identity skip provides it, leaving the trunk the conditioning-dependent part.
An optional fidelity channel concatenates a source sample to the net input at
every step, for edits that must preserve unedited content.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn

from ..synthworld.types import AUDIO_LEN, DEFAULT_DF, DEFAULT_LF

DATA_DIMS = {"image": 16 * 16 * 3, "audio": AUDIO_LEN}
TIME_EMB_DIM = 64


def timestep_embedding(t: torch.Tensor, dim: int = TIME_EMB_DIM) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64) / (half - 1)
    ).to(t.device)
    ang = t.double()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(ang), torch.cos(ang)], dim=1)


class FilmBlock(nn.Module):
    """Residual MLP block modulated by (conditioning, time embedding)."""

    def __init__(self, hidden: int, cond_dim: int):
        super().__init__()
        self.norm = nn.LayerNorm(hidden)
        self.film = nn.Linear(cond_dim + TIME_EMB_DIM, 2 * hidden)
        self.lin1 = nn.Linear(hidden, hidden)
        self.lin2 = nn.Linear(hidden, hidden)

    def forward(self, h: torch.Tensor, cond_t: torch.Tensor) -> torch.Tensor:
        scale, shift = self.film(cond_t).chunk(2, dim=-1)
        u = self.norm(h) * (1.0 + scale) + shift
        return h + self.lin2(torch.nn.functional.silu(self.lin1(u)))


class EpsNet(nn.Module):
    """Predicts the noise component of z_t given (t, conditioning matrix)."""

    def __init__(
        self,
        modality: str,
        hidden: int = 512,
        n_blocks: int = 3,
        lf: int = DEFAULT_LF,
        df: int = DEFAULT_DF,
        fidelity: bool = False,
        data_dim: int | None = None,
    ):
        super().__init__()
        if modality not in DATA_DIMS:
            raise ValueError(f"unknown modality {modality!r}")
        self.modality = modality
        self.data_dim = DATA_DIMS[modality] if data_dim is None else data_dim
        self.lf = lf
        self.df = df
        self.fidelity = fidelity
        cond_dim = lf * df
        in_dim = self.data_dim * (2 if fidelity else 1) + TIME_EMB_DIM
        self.stem = nn.Linear(in_dim, hidden)
        self.blocks = nn.ModuleList(FilmBlock(hidden, cond_dim) for _ in range(n_blocks))
        self.norm_out = nn.LayerNorm(hidden)
        self.head = nn.Linear(hidden, self.data_dim)
        # scalar gate on the z_t identity skip, a smooth function of t (init ~1)
        self.gate = nn.Sequential(nn.Linear(TIME_EMB_DIM, 64), nn.SiLU(), nn.Linear(64, 1))
        nn.init.zeros_(self.gate[-1].weight)
        nn.init.ones_(self.gate[-1].bias)

    def forward(
        self,
        z_t: torch.Tensor,
        t: torch.Tensor,
        cond: torch.Tensor,
        fidelity_input: torch.Tensor | None = None,
    ) -> torch.Tensor:
        if z_t.ndim == 1:
            raise ValueError("z_t must be batched (B, D)")
        if (fidelity_input is not None) != self.fidelity:
            raise ValueError("fidelity input does not match net's fidelity mode")
        cond = cond.reshape(cond.shape[0], -1)
        temb = timestep_embedding(t).to(z_t.dtype)
        parts = [z_t] if fidelity_input is None else [z_t, fidelity_input]
        h = self.stem(torch.cat(parts + [temb], dim=-1))
        cond_t = torch.cat([cond, temb], dim=-1)
        for block in self.blocks:
            h = block(h, cond_t)
        return self.gate(temb) * z_t + self.head(self.norm_out(h))


def to_model_space(sample: torch.Tensor, modality: str) -> torch.Tensor:
    """Map rendered sample(s) into the roughly unit-scale diffusion space, as (B, D)."""
    flat = sample.reshape(-1, DATA_DIMS[modality])
    if modality == "image":
        return 2.0 * flat - 1.0
    if modality == "audio":
        return 2.0 * flat
    raise ValueError(f"unknown modality {modality!r}")


def from_model_space(z0: torch.Tensor, modality: str) -> torch.Tensor:
    """Inverse of to_model_space, clipped to the sample's legal range."""
    if modality == "image":
        return torch.clamp((z0 + 1.0) / 2.0, 0.0, 1.0)
    if modality == "audio":
        return torch.clamp(z0 / 2.0, -0.9, 0.9)
    raise ValueError(f"unknown modality {modality!r}")
