"""Mode-switching autoregressive generation.

Token mode samples from the token head; a modality-begin token switches to
feature mode, which emits exactly L_f rows from the feature head (each fed
back through the input projection) and then forces the matching end token.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..synthworld.features import FeatureSeq
from ..sequence.episode import ModelSequence
from ..sequence.vocab import BEG_TOKENS, EOS, SEGMENT_BOUNDS, Vocabulary
from .transformer import MllmTransformer

STOP_EOS, STOP_MAX_LEN, STOP_MALFORMED = "eos", "max_len", "malformed"


@dataclass
class GenerationOutput:
    token_ids: list[int]
    segments: list[tuple[str, FeatureSeq]]
    stop_reason: str
    items: list = field(default_factory=list)  # ("tok", id) | ("row", vec), in order


@dataclass
class GenerationParams:
    max_len: int = 64
    temperature: float = 0.0
    greedy: bool = True


@torch.no_grad()
def generate(
    model: MllmTransformer,
    vocab: Vocabulary,
    prompt: ModelSequence,
    params: GenerationParams | None = None,
    rng: torch.Generator | None = None,
) -> GenerationOutput:
    """Generate from a prompt that ends at a generation point (after the asst token)."""
    params = params or GenerationParams()
    model.eval()
    device = next(model.parameters()).device
    dtype = next(model.parameters()).dtype
    df = model.cfg.df
    lf = model.cfg.lf
    ids = torch.from_numpy(np.asarray(prompt.input_ids, dtype=np.int64)).to(device)
    rows = torch.from_numpy(np.asarray(prompt.input_rows)).to(device=device, dtype=dtype)
    beg_ids = {vocab.id(tok): mod for tok, mod in BEG_TOKENS.items()}
    eos_id = vocab.id(EOS)

    out_tokens: list[int] = []
    out_segments: list[tuple[str, FeatureSeq]] = []
    items: list = []
    stop = STOP_MAX_LEN

    def room_for(extra: int) -> bool:
        return ids.shape[0] + extra <= model.cfg.max_positions

    def step_token() -> int:
        logits, _ = model(ids[None], rows[None])
        logit = logits[0, -1]
        if params.greedy or params.temperature <= 0.0:
            return int(torch.argmax(logit))
        probs = torch.softmax(logit / params.temperature, dim=-1)
        return int(torch.multinomial(probs, 1, generator=rng))

    def append_token(tid: int):
        nonlocal ids, rows
        ids = torch.cat([ids, torch.tensor([tid], dtype=torch.long, device=device)])
        rows = torch.cat([rows, torch.zeros(1, df, dtype=dtype, device=device)])

    def append_row(vec: torch.Tensor):
        nonlocal ids, rows
        ids = torch.cat([ids, torch.tensor([-1], dtype=torch.long, device=device)])
        rows = torch.cat([rows, vec[None]])

    emitted = 0
    while emitted < params.max_len:
        if not room_for(1):
            stop = STOP_MAX_LEN
            break
        tid = step_token()
        if tid == eos_id:
            out_tokens.append(tid)
            items.append(("tok", tid))
            stop = STOP_EOS
            break
        if tid in beg_ids:
            modality = beg_ids[tid]
            # need the begin token, lf rows and the forced end token
            if emitted + lf + 2 > params.max_len or not room_for(lf + 2):
                stop = STOP_MALFORMED
                break
            append_token(tid)
            out_tokens.append(tid)
            items.append(("tok", tid))
            emitted += 1
            seg_rows = []
            for _ in range(lf):
                _, feats = model(ids[None], rows[None])
                row = feats[0, -1]
                row = row / torch.linalg.vector_norm(row).clamp_min(1e-12)
                seg_rows.append(row.cpu().numpy().astype(np.float32))
                append_row(row)
                items.append(("row", seg_rows[-1]))
                emitted += 1
            end_id = vocab.id(SEGMENT_BOUNDS[modality][1])
            append_token(end_id)
            out_tokens.append(end_id)
            items.append(("tok", end_id))
            emitted += 1
            out_segments.append((modality, FeatureSeq(np.stack(seg_rows), modality)))
            continue
        append_token(tid)
        out_tokens.append(tid)
        items.append(("tok", tid))
        emitted += 1
    return GenerationOutput(out_tokens, out_segments, stop, items)
