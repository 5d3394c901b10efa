"""Causal transformer over mixed token/feature-row inputs.

Token positions embed through the vocabulary table; feature-row positions go
through the input projection MLP (linear, activation, normalization, linear).
Every position gets both heads: token logits and a projected feature vector.
LoRA adapters (B zero-initialized) sit on the configured attention maps, so
the adapted model equals the base model until fine-tuning moves them.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import ModelConfig


class SequenceTooLong(ValueError):
    pass


class LoraLinear(nn.Module):
    """Linear layer with an additive low-rank adapter: W x + B (A x)."""

    def __init__(self, d_in: int, d_out: int, rank: int):
        super().__init__()
        self.base = nn.Linear(d_in, d_out)
        self.lora_a = nn.Parameter(torch.randn(rank, d_in) / math.sqrt(d_in))
        self.lora_b = nn.Parameter(torch.zeros(d_out, rank))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + F.linear(F.linear(x, self.lora_a), self.lora_b)


def _maybe_lora(d_in: int, d_out: int, name: str, cfg: ModelConfig) -> nn.Module:
    if name in cfg.lora_targets:
        return LoraLinear(d_in, d_out, cfg.lora_rank)
    return nn.Linear(d_in, d_out)


class CausalSelfAttention(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.d_model
        self.n_heads = cfg.n_heads
        self.d_head = d // cfg.n_heads
        self.q = _maybe_lora(d, d, "q", cfg)
        self.k = _maybe_lora(d, d, "k", cfg)
        self.v = _maybe_lora(d, d, "v", cfg)
        self.o = _maybe_lora(d, d, "o", cfg)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        B, L, d = x.shape
        shape = (B, L, self.n_heads, self.d_head)
        q = self.q(x).view(shape).transpose(1, 2)
        k = self.k(x).view(shape).transpose(1, 2)
        v = self.v(x).view(shape).transpose(1, 2)
        att = (q @ k.transpose(-2, -1)) / math.sqrt(self.d_head)
        mask = torch.triu(torch.ones(L, L, dtype=torch.bool, device=x.device), diagonal=1)
        att = att.masked_fill(mask, float("-inf"))
        out = torch.softmax(att, dim=-1) @ v
        return self.o(out.transpose(1, 2).reshape(B, L, d))


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.attn = CausalSelfAttention(cfg)
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.mlp = nn.Sequential(
            nn.Linear(cfg.d_model, cfg.d_ff), nn.GELU(), nn.Linear(cfg.d_ff, cfg.d_model)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.mlp(self.ln2(x))


class ProjectionMLP(nn.Module):
    """linear -> activation -> layer norm -> linear."""

    def __init__(self, d_in: int, d_hidden: int, d_out: int):
        super().__init__()
        self.lin1 = nn.Linear(d_in, d_hidden)
        self.norm = nn.LayerNorm(d_hidden)
        self.lin2 = nn.Linear(d_hidden, d_out)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.lin2(self.norm(F.gelu(self.lin1(x))))


class MllmTransformer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.max_positions, cfg.d_model)
        self.in_proj = ProjectionMLP(cfg.df, cfg.d_model, cfg.d_model)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.d_model)
        self.tok_head = nn.Linear(cfg.d_model, cfg.vocab_size)
        self.out_proj = ProjectionMLP(cfg.d_model, cfg.d_model, cfg.df)

    def input_project(self, rows: torch.Tensor) -> torch.Tensor:
        return self.in_proj(rows)

    def output_project(self, h: torch.Tensor) -> torch.Tensor:
        return self.out_proj(h)

    def forward(
        self, input_ids: torch.Tensor, input_rows: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """(B, L) token ids with -1 at feature positions + (B, L, d_f) rows.

        Returns (logits (B, L, vocab), features (B, L, d_f)); features are the
        raw output projection, not normalized (generation renormalizes).
        """
        B, L = input_ids.shape
        if L > self.cfg.max_positions:
            raise SequenceTooLong(f"sequence length {L} > max {self.cfg.max_positions}")
        is_feat = input_ids < 0
        emb = self.tok_emb(input_ids.clamp(min=0))
        if is_feat.any():
            emb = torch.where(is_feat[..., None], self.in_proj(input_rows), emb)
        pos = torch.arange(L, device=input_ids.device)
        h = emb + self.pos_emb(pos)[None]
        for blk in self.blocks:
            h = blk(h)
        h = self.ln_f(h)
        return self.tok_head(h), self.out_proj(h)


def init_model(cfg: ModelConfig, seed: int) -> MllmTransformer:
    """Deterministic initialization; LoRA B = 0 so adapted == base at step 0."""
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        model = MllmTransformer(cfg)
    return model


PRETRAIN, FINETUNE = "pretrain", "finetune"
_FT_MARKERS = ("lora_a", "lora_b", "in_proj.", "out_proj.")


def trainable_parameters(model: MllmTransformer, mode: str) -> dict[str, nn.Parameter]:
    """pretrain: all base weights (no LoRA); finetune: LoRA factors + both projections."""
    if mode == PRETRAIN:
        return {
            n: p for n, p in model.named_parameters() if "lora_a" not in n and "lora_b" not in n
        }
    if mode == FINETUNE:
        return {n: p for n, p in model.named_parameters() if any(m in n for m in _FT_MARKERS)}
    raise ValueError(f"unknown mode {mode!r}")


def set_trainable(model: MllmTransformer, mode: str) -> dict[str, nn.Parameter]:
    """Flag requires_grad per group and return the trainable set."""
    trainable = trainable_parameters(model, mode)
    for n, p in model.named_parameters():
        p.requires_grad_(n in trainable)
    return trainable


def parameter_count(cfg: ModelConfig) -> dict[str, int]:
    """Closed-form parameter counts per group (validated by tests)."""
    d, v, ff, df = cfg.d_model, cfg.vocab_size, cfg.d_ff, cfg.df
    lin = lambda i, o: i * o + o
    attn = 4 * lin(d, d)
    block = attn + lin(d, ff) + lin(ff, d) + 4 * d  # 2 layer norms
    proj_in = lin(df, d) + 2 * d + lin(d, d)
    proj_out = lin(d, d) + 2 * d + lin(d, df)
    base = (
        v * d
        + cfg.max_positions * d
        + cfg.n_layers * block
        + 2 * d  # final norm
        + lin(d, v)
        + proj_in
        + proj_out
    )
    lora = cfg.n_layers * len(cfg.lora_targets) * (cfg.lora_rank * d + d * cfg.lora_rank)
    return {"base": base, "lora": lora, "total": base + lora}
