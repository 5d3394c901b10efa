"""DDPM noise schedules (linear and cosine)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    pass


@dataclass
class NoiseSchedule:
    """Per-step beta/alpha arrays, index i holding time step t = i + 1.

    alpha_bar is the running cumulative product of alpha, so the identity
    alpha_bar[t] = alpha_bar[t-1] * alpha[t] holds exactly in floats.
    """

    kind: str
    T: int
    beta: np.ndarray
    alpha: np.ndarray = field(init=False)
    alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.beta.shape != (self.T,):
            raise ConfigError(f"beta must have length T={self.T}")
        if np.any(self.beta <= 0) or np.any(self.beta >= 1):
            raise ConfigError("beta values must lie in (0, 1)")
        self.alpha = 1.0 - self.beta
        self.alpha_bar = np.cumprod(self.alpha)

    def at(self, t):
        """(beta_t, alpha_t, alpha_bar_t) for step(s) t in [1, T]."""
        t = np.asarray(t)
        if np.any(t < 1) or np.any(t > self.T):
            raise IndexError(f"t out of range [1, {self.T}]")
        i = t - 1
        return self.beta[i], self.alpha[i], self.alpha_bar[i]


def _cosine_alpha_bar(T: int, s: float = 0.008) -> np.ndarray:
    t = np.arange(T + 1, dtype=np.float64)
    f = np.cos((t / T + s) / (1 + s) * np.pi / 2.0) ** 2
    return f / f[0]


def make_schedule(kind: str = "cosine", T: int = 100) -> NoiseSchedule:
    """Build a schedule; cosine uses the squared-cosine alpha_bar with s=0.008,
    linear ramps beta from 1e-4 to 0.02."""
    if T < 2:
        raise ConfigError(f"T must be >= 2, got {T}")
    if kind == "linear":
        beta = np.linspace(1e-4, 0.02, T)
    elif kind == "cosine":
        ab = _cosine_alpha_bar(T)
        beta = np.minimum(1.0 - ab[1:] / ab[:-1], 0.999)
    else:
        raise ConfigError(f"unknown schedule kind {kind!r}")
    return NoiseSchedule(kind=kind, T=T, beta=beta)
