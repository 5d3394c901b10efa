"""Optimizer wrapper, phase alternation and the single training step."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from ..diffusion.epsnet import EpsNet
from ..diffusion.schedule import NoiseSchedule
from ..model.transformer import MllmTransformer
from .losses import Batch, LossWeights, combined_loss


class NonFiniteLoss(RuntimeError):
    def __init__(self, message: str, step: int | None = None, phase: str | None = None):
        self.step = step
        self.phase = phase
        ctx = " ".join(p for p in (f"step={step}" if step is not None else "", phase or "") if p)
        super().__init__(f"{message}{' (' + ctx + ')' if ctx else ''}")


@dataclass
class PhaseSchedule:
    """Round-robin over target-modality phases weighted by integer ratios.

    weights (2, 1, 1) over ("text", "image", "audio") yield the period-4
    cycle T, T, I, A. Pure function of the batch counter.
    """

    weights: tuple[int, ...] = (2, 1, 1)
    phases: tuple[str, ...] = ("text", "image", "audio")
    counter: int = 0
    _cycle: tuple[str, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.weights) != len(self.phases):
            raise ValueError("weights and phases must align")
        if any(w <= 0 or int(w) != w for w in self.weights):
            raise ValueError(f"weights must be positive integers, got {self.weights}")
        cycle: list[str] = []
        for phase, w in zip(self.phases, self.weights):
            cycle += [phase] * int(w)
        self._cycle = tuple(cycle)

    def family_at(self, counter: int) -> str:
        return self._cycle[counter % len(self._cycle)]

    def phase_next(self) -> str:
        phase = self.family_at(self.counter)
        self.counter += 1
        return phase


def phase_next(sched: PhaseSchedule) -> str:
    return sched.phase_next()


@dataclass
class OptState:
    """Adam over the trainable groups only, with warmup and global-norm clipping."""

    named: dict[str, torch.nn.Parameter]
    lr: float = 3e-4
    clip_norm: float = 1.0
    warmup: int = 100
    step_count: int = 0
    opt: torch.optim.Adam = field(init=False, repr=False)

    def __post_init__(self):
        self.opt = torch.optim.Adam(list(self.named.values()), lr=self.lr)

    def step(self) -> None:
        self.step_count += 1
        scale = min(1.0, self.step_count / self.warmup) if self.warmup > 0 else 1.0
        for group in self.opt.param_groups:
            group["lr"] = self.lr * scale
        if self.clip_norm > 0:
            torch.nn.utils.clip_grad_norm_(list(self.named.values()), self.clip_norm)
        self.opt.step()
        self.opt.zero_grad(set_to_none=True)


def train_step(
    model: MllmTransformer,
    dm_nets: dict[str, EpsNet],
    batch: Batch,
    opt: OptState,
    sched: NoiseSchedule,
    weights: LossWeights,
    rng: torch.Generator,
    stopgrad_dm: bool = False,
    phase: str | None = None,
    batch_id: int | None = None,
) -> dict[str, float]:
    """One optimization step over the trainable groups; frozen groups untouched."""
    total, parts = combined_loss(model, dm_nets, batch, sched, weights, rng, stopgrad_dm)
    if not torch.isfinite(total):
        raise NonFiniteLoss(f"loss is {float(total)}", step=batch_id, phase=phase)
    total.backward()
    opt.step()
    parts["total"] = float(total.detach())
    return parts
