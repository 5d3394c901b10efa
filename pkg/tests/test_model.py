"""Transformer: init, LoRA equivalence, causality, projections, trainable sets."""

import numpy as np
import pytest
import torch

from anymesh.model import (
    FINETUNE,
    PRETRAIN,
    ConfigError,
    ModelConfig,
    SequenceTooLong,
    init_model,
    parameter_count,
    set_trainable,
    trainable_parameters,
)
from anymesh.sequence import DatasetBuilder, assemble, default_vocabulary

VOCAB = default_vocabulary()
CFG = ModelConfig(vocab_size=len(VOCAB))


def _example_batch(n=2, seed=5):
    b = DatasetBuilder()
    eps = b.build_paired(n, seed, "to_modality", "image")
    seqs = [assemble(e, VOCAB) for e in eps]
    L = max(len(s) for s in seqs)
    ids = np.full((n, L), VOCAB.pad_id, dtype=np.int64)
    rows = np.zeros((n, L, 64), dtype=np.float32)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s.input_ids
        rows[i, : len(s)] = s.input_rows
    return torch.from_numpy(ids), torch.from_numpy(rows)


def test_config_invariants():
    with pytest.raises(ConfigError):
        ModelConfig(vocab_size=10, d_model=10, n_heads=3)
    with pytest.raises(ConfigError):
        ModelConfig(vocab_size=10, lora_rank=0)
    with pytest.raises(ConfigError):
        ModelConfig(vocab_size=10, lora_targets=("q", "zzz"))


def test_same_seed_identical_parameters():
    m1, m2 = init_model(CFG, 3), init_model(CFG, 3)
    for (n1, p1), (_, p2) in zip(m1.named_parameters(), m2.named_parameters()):
        assert torch.equal(p1, p2), n1
    m3 = init_model(CFG, 4)
    assert any(
        not torch.equal(p1, p3)
        for (_, p1), (_, p3) in zip(m1.named_parameters(), m3.named_parameters())
    )


def test_lora_b_zero_init_makes_adapter_inert():
    model = init_model(CFG, 1)
    ids, rows = _example_batch()
    logits0, feats0 = model(ids, rows)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if "lora_a" in name:
                p.add_(torch.randn_like(p))  # A may be anything while B == 0
    logits1, feats1 = model(ids, rows)
    assert float((logits0 - logits1).abs().max()) == 0.0
    assert float((feats0 - feats1).abs().max()) == 0.0
    with torch.no_grad():
        for name, p in model.named_parameters():
            if "lora_b" in name:
                p.add_(0.1 * torch.randn_like(p))
    logits2, _ = model(ids, rows)
    assert float((logits0 - logits2).abs().max()) > 0.0


def test_parameter_count_closed_form():
    for cfg in (
        CFG,
        ModelConfig(vocab_size=31, d_model=32, n_layers=2, n_heads=2, d_ff=48, lora_rank=2),
        ModelConfig(vocab_size=len(VOCAB), lora_targets=("q", "k", "v", "o")),
    ):
        model = init_model(cfg, 0)
        counts = parameter_count(cfg)
        assert counts["total"] == sum(p.numel() for p in model.parameters())
        assert counts["lora"] == sum(p.numel() for n, p in model.named_parameters() if "lora" in n)


def test_causality_numerically():
    model = init_model(CFG, 2)
    ids, rows = _example_batch()
    logits0, feats0 = model(ids, rows)
    rng = np.random.default_rng(0)
    for _ in range(5):
        j = int(rng.integers(1, ids.shape[1]))
        ids2 = ids.clone()
        rows2 = rows.clone()
        if ids2[0, j] >= 0:
            ids2[0, j] = (int(ids2[0, j]) + 1) % len(VOCAB)
        else:
            rows2[0, j] += 0.5
        logits1, feats1 = model(ids2, rows2)
        dl = (logits0 - logits1).abs().amax(dim=-1)[0]
        df = (feats0 - feats1).abs().amax(dim=-1)[0]
        assert float(dl[:j].max()) == 0.0 and float(df[:j].max()) == 0.0
        assert float(dl[j:].max()) > 0.0


def test_pad_suffix_leaves_prefix_unchanged():
    model = init_model(CFG, 2)
    ids, rows = _example_batch()
    L = ids.shape[1]
    ids_padded = torch.cat([ids, torch.full((2, 7), VOCAB.pad_id, dtype=torch.long)], dim=1)
    rows_padded = torch.cat([rows, torch.zeros(2, 7, 64)], dim=1)
    a, fa = model(ids, rows)
    b, fb = model(ids_padded, rows_padded)
    assert torch.allclose(a, b[:, :L], atol=1e-6)
    assert torch.allclose(fa, fb[:, :L], atol=1e-6)


def test_output_shapes_and_too_long():
    model = init_model(CFG, 2)
    ids, rows = _example_batch()
    logits, feats = model(ids, rows)
    assert logits.shape == (*ids.shape, len(VOCAB))
    assert feats.shape == (*ids.shape, 64)
    long_ids = torch.zeros(1, CFG.max_positions + 1, dtype=torch.long)
    with pytest.raises(SequenceTooLong):
        model(long_ids, torch.zeros(1, CFG.max_positions + 1, 64))


def test_projection_dims_and_zero_input():
    model = init_model(CFG, 0)
    out = model.input_project(torch.zeros(3, 64))
    assert out.shape == (3, 128) and torch.isfinite(out).all()
    assert torch.equal(out[0], out[1])  # bias-determined
    back = model.output_project(torch.zeros(3, 128))
    assert back.shape == (3, 64) and torch.isfinite(back).all()


def test_output_projection_not_normalized_at_training():
    model = init_model(CFG, 0)
    h = torch.randn(8, 128, generator=torch.Generator().manual_seed(0))
    norms = torch.linalg.vector_norm(model.output_project(h), dim=-1)
    assert float((norms - 1.0).abs().max()) > 1e-3


def test_projection_jacobian_matches_finite_differences():
    model = init_model(ModelConfig(vocab_size=11, d_model=16, n_heads=2, d_ff=16, df=8), 0).double()
    x = torch.randn(8, dtype=torch.float64, generator=torch.Generator().manual_seed(1))
    x.requires_grad_(True)
    y = model.input_project(x[None])[0]
    jac = torch.stack([torch.autograd.grad(y[i], x, retain_graph=True)[0] for i in range(16)])
    eps = 1e-5
    with torch.no_grad():
        for k in range(8):
            xp, xm = x.clone(), x.clone()
            xp[k] += eps
            xm[k] -= eps
            fd = (model.input_project(xp[None])[0] - model.input_project(xm[None])[0]) / (2 * eps)
            rel = (fd - jac[:, k]).abs().max() / max(float(jac[:, k].abs().max()), 1e-8)
            assert float(rel) < 1e-4


def test_trainable_sets():
    model = init_model(CFG, 0)
    ft = trainable_parameters(model, FINETUNE)
    # per layer: 2 lora targets x (A, B); plus 2 projection MLPs x (2 linears + LN) x (w, b)
    assert len(ft) == CFG.n_layers * len(CFG.lora_targets) * 2 + 2 * 6
    assert all("lora" in n or "in_proj" in n or "out_proj" in n for n in ft)
    pt = trainable_parameters(model, PRETRAIN)
    assert not any("lora" in n for n in pt)
    assert len(pt) + CFG.n_layers * len(CFG.lora_targets) * 2 == len(list(model.named_parameters()))
    set_trainable(model, FINETUNE)
    frozen = [n for n, p in model.named_parameters() if not p.requires_grad]
    assert all(n not in ft for n in frozen) and frozen
