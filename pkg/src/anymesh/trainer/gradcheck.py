"""Analytic-vs-finite-difference gradient verification.

Meant for float64 micro-configurations; the loss function must be
deterministic across calls (fix every internal rng draw before passing it in).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import torch


def grad_check(
    loss_fn: Callable[[], torch.Tensor],
    params: Sequence[torch.Tensor],
    eps: float = 1e-3,
    n_coords: int = 200,
    seed: int = 0,
) -> float:
    """Max relative error between autograd and central finite differences.

    Samples at least `n_coords` coordinates across the parameter tensors
    (all of them when they have fewer), perturbs each by +-eps, and compares
    (loss+ - loss-) / 2 eps against the analytic gradient.
    """
    params = list(params)
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    sizes = [p.numel() for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    if total <= n_coords:
        coords = np.arange(total)
    else:
        coords = rng.choice(total, size=n_coords, replace=False)
    bounds = np.cumsum([0] + sizes)
    worst = 0.0
    for flat_idx in sorted(int(c) for c in coords):
        pi = int(np.searchsorted(bounds, flat_idx, side="right") - 1)
        local = flat_idx - bounds[pi]
        p = params[pi]
        g = grads[pi]
        analytic = 0.0 if g is None else float(g.reshape(-1)[local])
        with torch.no_grad():
            orig = float(p.reshape(-1)[local])
            p.reshape(-1)[local] = orig + eps
            lp = float(loss_fn())
            p.reshape(-1)[local] = orig - eps
            lm = float(loss_fn())
            p.reshape(-1)[local] = orig
        fd = (lp - lm) / (2.0 * eps)
        rel = abs(fd - analytic) / max(abs(fd), abs(analytic), 1e-6)
        worst = max(worst, rel)
    return worst
