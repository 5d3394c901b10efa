"""The combined training objective: alpha * MSE + L_DM + L_token.

Token loss is mean cross-entropy over CE positions; feature loss is mean
squared error between predicted rows and encoder targets over MSE positions;
the diffusion term conditions each target sample's eps-net on the model's own
predicted feature rows, which is the differentiable path by which the
diffusion loss trains the language model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..diffusion.core import dm_loss
from ..diffusion.epsnet import EpsNet, to_model_space
from ..diffusion.schedule import NoiseSchedule
from ..model.transformer import MllmTransformer
from ..sequence.episode import LOSS_CE, LOSS_MSE, ModelSequence


class MissingRawTarget(ValueError):
    """A supervised feature segment lacks the raw sample the dm term needs."""


@dataclass
class LossWeights:
    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


@dataclass
class Batch:
    input_ids: torch.Tensor  # (B, L) long, -1 at feature positions, pad with pad_id
    input_rows: torch.Tensor  # (B, L, d_f)
    loss_kind: torch.Tensor  # (B, L) int8
    ce_target: torch.Tensor  # (B, L) long, -1 where unused
    mse_target: torch.Tensor  # (B, L, d_f)
    spans: list[list]  # per-example FeatureSpan lists

    def __len__(self) -> int:
        return int(self.input_ids.shape[0])


def collate(seqs: list[ModelSequence], pad_id: int, dtype=torch.float32) -> Batch:
    B = len(seqs)
    L = max(len(s) for s in seqs)
    df = seqs[0].input_rows.shape[1]
    ids = np.full((B, L), pad_id, dtype=np.int64)
    rows = np.zeros((B, L, df), dtype=np.float32)
    kind = np.zeros((B, L), dtype=np.int8)
    ce = np.full((B, L), -1, dtype=np.int64)
    mse = np.zeros((B, L, df), dtype=np.float32)
    for b, s in enumerate(seqs):
        n = len(s)
        ids[b, :n] = s.input_ids
        rows[b, :n] = s.input_rows
        kind[b, :n] = s.loss_kind
        ce[b, :n] = s.ce_target
        mse[b, :n] = s.mse_target
    return Batch(
        input_ids=torch.from_numpy(ids),
        input_rows=torch.from_numpy(rows).to(dtype),
        loss_kind=torch.from_numpy(kind),
        ce_target=torch.from_numpy(ce),
        mse_target=torch.from_numpy(mse).to(dtype),
        spans=[s.spans for s in seqs],
    )


def combined_loss(
    model: MllmTransformer,
    dm_nets: dict[str, EpsNet],
    batch: Batch,
    sched: NoiseSchedule,
    weights: LossWeights,
    rng: torch.Generator,
    stopgrad_dm: bool = False,
    return_tensors: bool = False,
) -> tuple[torch.Tensor, dict]:
    """Returns (total, parts) with total = alpha * mse + dm + tok exactly.

    Batches with no MSE positions contribute mse = dm = 0. With stopgrad_dm
    the dm term sees detached conditioning, cutting its gradient to the LM.
    With return_tensors the parts stay attached to the autograd graph.
    """
    logits, feats = model(batch.input_ids, batch.input_rows)
    ce_mask = batch.loss_kind == LOSS_CE
    tok = F.cross_entropy(logits[ce_mask], batch.ce_target[ce_mask])
    mse_mask = batch.loss_kind == LOSS_MSE
    zero = logits.sum() * 0.0
    if mse_mask.any():
        mse = ((feats[mse_mask] - batch.mse_target[mse_mask]) ** 2).mean()
    else:
        mse = zero

    per_mod: dict[str, list[tuple[torch.Tensor, torch.Tensor]]] = {}
    for b, spans in enumerate(batch.spans):
        for span in spans:
            if not span.is_target or span.modality not in dm_nets:
                continue
            if span.sample is None:
                raise MissingRawTarget(
                    f"target {span.modality} segment at positions "
                    f"[{span.start}, {span.end}) has no raw sample"
                )
            pred_rows = feats[b, span.start - 1 : span.end - 1].reshape(-1)
            z0 = to_model_space(
                torch.as_tensor(np.asarray(span.sample), dtype=feats.dtype), span.modality
            )[0]
            per_mod.setdefault(span.modality, []).append((z0, pred_rows))
    if per_mod:
        total_segs = sum(len(v) for v in per_mod.values())
        dm = zero
        for modality, pairs in sorted(per_mod.items()):
            z0 = torch.stack([p[0] for p in pairs])
            cond = torch.stack([p[1] for p in pairs])
            if stopgrad_dm:
                cond = cond.detach()
            dm = dm + dm_loss(dm_nets[modality], z0, cond, sched, rng) * (len(pairs) / total_segs)
    else:
        dm = zero

    total = weights.alpha * mse + dm + tok
    if return_tensors:
        return total, {"mse": mse, "dm": dm, "tok": tok}
    parts = {
        "mse": float(mse.detach()) + 0.0,
        "dm": float(dm.detach()) + 0.0,
        "tok": float(tok.detach()) + 0.0,
    }
    return total, parts
