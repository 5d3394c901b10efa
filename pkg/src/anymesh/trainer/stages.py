"""Three-stage training driver: LM pretrain -> DM autoencoder pretrain -> MLLM finetune.

Per-step rngs derive from (seed, global step), so a resumed run continues the
exact trajectory of an uninterrupted one. All stage outputs live under the
run directory: checkpoints in ckpt/<stage>/, loss rows appended to loss.csv.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import torch

from ..diffusion import (
    AutoencoderData,
    EpsNet,
    make_schedule,
    pretrain_autoencoder,
    to_model_space,
)
from ..model import (
    FINETUNE,
    PRETRAIN,
    MissingCheckpoint,
    ModelConfig,
    init_model,
    load_module,
    load_optimizer,
    save_module,
    save_optimizer,
    set_trainable,
)
from ..sequence import assemble, default_vocabulary, deserialize
from ..synthworld import (
    FeatureEncoder,
    SceneSpec,
    all_audio_specs,
    all_glyphs,
    all_single_scenes,
    render,
)
from .loop import OptState, PhaseSchedule, train_step
from .losses import LossWeights, collate

STAGES = ("lm_pretrain", "dm_pretrain", "mllm_finetune")

PHASE_FAMILIES = {
    "text": [("modality_to_caption", "image"), ("modality_to_caption", "audio"), ("text_swap", None)],
    "image": [
        ("caption_to_modality", "image"),
        ("editing", "image"),
        ("exemplar_icl", "image"),
        ("composition", None),
        ("multiround", "image"),
    ],
    "audio": [
        ("caption_to_modality", "audio"),
        ("editing", "audio"),
        ("exemplar_icl", "audio"),
        ("multiround", "audio"),
    ],
}

# token-loss-only pretraining covers every caption-bearing family in both
# directions (feature-row supervision stripped) plus the text-only family, so
# the frozen token head knows the full token structure before fine-tuning
LM_FAMILIES = [
    ("caption_to_modality", "image"),
    ("caption_to_modality", "audio"),
    ("modality_to_caption", "image"),
    ("modality_to_caption", "audio"),
    ("text_swap", None),
]


def strip_feature_supervision(seq):
    """Drop MSE supervision (keep CE, including boundary tokens): tok loss only."""
    from ..sequence.episode import LOSS_MSE, LOSS_NONE, ModelSequence

    kind = seq.loss_kind.copy()
    kind[kind == LOSS_MSE] = LOSS_NONE
    spans = [
        type(s)(s.modality, s.start, s.end, False, s.sample) for s in seq.spans
    ]
    return ModelSequence(
        seq.input_ids, seq.input_rows, kind, seq.ce_target,
        np.zeros_like(seq.mse_target), spans,
    )


def _step_rng(seed: int, tag: str, step: int) -> torch.Generator:
    digest = hashlib.sha256(repr((seed, tag, step)).encode()).digest()
    return torch.Generator().manual_seed(int.from_bytes(digest[:8], "little"))


def dataset_file(data_dir: Path, family: str, modality: str | None) -> Path:
    name = family if modality is None else f"{family}.{modality}"
    return data_dir / f"{name}.jsonl"


def _load_pool(data_dir: Path, pairs, vocab) -> list:
    seqs = []
    for family, modality in pairs:
        path = dataset_file(data_dir, family, modality)
        if not path.exists():
            raise MissingCheckpoint(f"dataset file {path} missing; run build-data first")
        for ep in deserialize(path):
            seqs.append(assemble(ep, vocab))
    if not seqs:
        raise ValueError(f"no sequences loaded from {data_dir}")
    return seqs


class LossLog:
    """Appends (step, total, mse, dm, tok, phase) rows to loss.csv."""

    COLUMNS = ("step", "total", "mse", "dm", "tok", "phase")

    def __init__(self, path: Path):
        self.path = path
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w", newline="") as fh:
                csv.writer(fh).writerow(self.COLUMNS)

    def write(self, step: int, parts: dict, phase: str) -> None:
        with self.path.open("a", newline="") as fh:
            csv.writer(fh).writerow(
                [step, f"{parts['total']:.8f}", f"{parts['mse']:.8f}", f"{parts['dm']:.8f}",
                 f"{parts['tok']:.8f}", phase]
            )


def _state_path(ckpt_dir: Path) -> Path:
    return ckpt_dir / "state.json"


def _save_stage(ckpt_dir: Path, model, opt: OptState, model_cfg: ModelConfig, global_step: int):
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    model_cfg.to_json(ckpt_dir / "config.json")
    save_module(ckpt_dir / "params.bin", model)
    save_optimizer(ckpt_dir / "optimizer.bin", opt.opt, opt.named)
    _state_path(ckpt_dir).write_text(
        json.dumps({"global_step": global_step, "opt_steps": opt.step_count}, sort_keys=True)
    )


def dm_net_from_cfg(cfg: dict, modality: str, fidelity: bool = False, seed: int | None = None) -> EpsNet:
    dm = cfg["dm"]

    def build():
        return EpsNet(
            modality,
            hidden=dm["hidden"],
            n_blocks=dm["blocks"][modality],
            lf=cfg["model"]["lf"],
            df=cfg["model"]["df"],
            fidelity=fidelity,
        )

    if seed is None:
        return build()
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return build()


def load_dm_nets(out_dir: Path, cfg: dict, fidelity: bool = False) -> dict[str, EpsNet]:
    nets = {}
    for modality in ("image", "audio"):
        path = out_dir / "ckpt" / "dm" / (f"{modality}_fid.bin" if fidelity else f"{modality}.bin")
        if not path.exists():
            raise MissingCheckpoint(f"diffusion checkpoint {path} missing; run dm_pretrain first")
        net = dm_net_from_cfg(cfg, modality, fidelity)
        load_module(path, net)
        nets[modality] = net
    return nets


def _two_glyph_scenes(rng: np.random.Generator, n: int) -> list[SceneSpec]:
    glyphs = all_glyphs()
    out = []
    while len(out) < n:
        g0 = glyphs[int(rng.integers(len(glyphs)))]
        g1 = glyphs[int(rng.integers(len(glyphs)))]
        if g0.position != g1.position:
            out.append(SceneSpec((g0, g1)))
    return out


def autoencoder_dataset(modality: str, cfg: dict, encoder: FeatureEncoder) -> AutoencoderData:
    """Full-coverage (sample, own-features) pairs; the DM is generic pretrained
    infrastructure, so no spec holdout applies here (the eval split holds
    specs out of the LM stages instead)."""
    if modality == "image":
        specs = list(all_single_scenes())
        rng = np.random.default_rng(cfg["data"]["seed"] + 91)
        specs += _two_glyph_scenes(rng, int(cfg["dm"]["two_glyph"]))
    else:
        specs = list(all_audio_specs())
    z0 = torch.stack(
        [to_model_space(torch.from_numpy(render(s)), modality)[0] for s in specs]
    ).float()
    cond = torch.stack(
        [torch.from_numpy(encoder.encode(s, modality).rows).reshape(-1) for s in specs]
    ).float()
    return AutoencoderData(z0=z0, cond=cond)


def editing_fidelity_dataset(modality: str, cfg: dict, encoder: FeatureEncoder) -> AutoencoderData:
    """(edited sample, edited features, source sample) triples for fidelity nets."""
    from ..synthworld import apply_edit, enumerate_edits
    from ..sequence.builders import spec_pool

    rng = np.random.default_rng(cfg["data"]["seed"] + 137)
    pool = spec_pool(modality, "all")
    z0s, conds, fids = [], [], []
    for _ in range(int(cfg["dm"]["fidelity_pairs"])):
        src = pool[int(rng.integers(len(pool)))]
        ops = enumerate_edits(src)
        tgt = apply_edit(src, ops[int(rng.integers(len(ops)))])
        z0s.append(to_model_space(torch.from_numpy(render(tgt)), modality)[0])
        conds.append(torch.from_numpy(encoder.encode(tgt, modality).rows).reshape(-1))
        fids.append(to_model_space(torch.from_numpy(render(src)), modality)[0])
    return AutoencoderData(
        z0=torch.stack(z0s).float(), cond=torch.stack(conds).float(), fid=torch.stack(fids).float()
    )


def run_dm_pretrain(cfg: dict, out_dir: Path) -> Path:
    dm_dir = out_dir / "ckpt" / "dm"
    dm_dir.mkdir(parents=True, exist_ok=True)
    encoder = FeatureEncoder(cfg["data"]["encoder_seed"], cfg["model"]["lf"], cfg["model"]["df"])
    sched = make_schedule(cfg["dm"]["schedule"], cfg["dm"]["T"])
    log = LossLog(out_dir / "loss.csv")
    global_step = _read_global_step(out_dir)
    for modality in ("image", "audio"):
        net = dm_net_from_cfg(cfg, modality, seed=cfg["train"]["seed"] + (1 if modality == "image" else 2))
        data = autoencoder_dataset(modality, cfg, encoder)
        neg = torch.from_numpy(encoder.negative_feature(modality).rows).reshape(-1).float()
        steps = int(cfg["train"]["steps"]["dm"])
        offset = global_step

        def on_log(step, loss, _m=modality, _o=offset):
            log.write(_o + step, {"total": loss, "mse": 0.0, "dm": loss, "tok": 0.0}, _m)

        pretrain_autoencoder(
            net,
            data,
            sched,
            steps=steps,
            neg_cond=neg,
            batch_size=int(cfg["dm"]["batch"]),
            lr=float(cfg["dm"]["lr"]),
            cond_dropout=float(cfg["dm"]["cond_dropout"]),
            cond_noise=float(cfg["dm"]["cond_noise"]),
            seed=cfg["train"]["seed"] + (11 if modality == "image" else 23),
            log_every=int(cfg["train"]["log_every"]),
            log_fn=on_log,
        )
        global_step += steps
        save_module(dm_dir / f"{modality}.bin", net)
        if cfg["dm"]["fidelity"]:
            fnet = dm_net_from_cfg(cfg, modality, fidelity=True, seed=cfg["train"]["seed"] + (3 if modality == "image" else 4))
            fdata = editing_fidelity_dataset(modality, cfg, encoder)
            pretrain_autoencoder(
                fnet,
                fdata,
                sched,
                steps=steps,
                neg_cond=neg,
                batch_size=int(cfg["dm"]["batch"]),
                lr=float(cfg["dm"]["lr"]),
                cond_dropout=float(cfg["dm"]["cond_dropout"]),
                cond_noise=float(cfg["dm"]["cond_noise"]),
                seed=cfg["train"]["seed"] + (12 if modality == "image" else 24),
                log_every=int(cfg["train"]["log_every"]),
            )
            save_module(dm_dir / f"{modality}_fid.bin", fnet)
    _write_global_step(out_dir, global_step)
    (dm_dir / "done.json").write_text(json.dumps({"steps": cfg["train"]["steps"]["dm"]}))
    return dm_dir


def _read_global_step(out_dir: Path) -> int:
    p = out_dir / "train_state.json"
    if p.exists():
        return int(json.loads(p.read_text())["global_step"])
    return 0


def _write_global_step(out_dir: Path, step: int) -> None:
    (out_dir / "train_state.json").write_text(json.dumps({"global_step": step}))


def _lm_like_stage(
    stage: str, cfg: dict, out_dir: Path, resume: bool = False
) -> Path:
    """Shared loop for lm_pretrain (token loss only data) and mllm_finetune."""
    vocab = default_vocabulary()
    data_dir = Path(cfg["data"].get("dir") or (out_dir / "data"))
    model_cfg = ModelConfig(vocab_size=len(vocab), **cfg["model"])
    seed = int(cfg["train"]["seed"])
    weights = LossWeights(alpha=float(cfg["train"]["alpha"]))
    sched = make_schedule(cfg["dm"]["schedule"], cfg["dm"]["T"])
    log = LossLog(out_dir / "loss.csv")
    ckpt_dir = out_dir / "ckpt" / ("lm" if stage == "lm_pretrain" else "ft")

    if stage == "lm_pretrain":
        model = init_model(model_cfg, seed)
        trainable = set_trainable(model, PRETRAIN)
        dm_nets: dict[str, EpsNet] = {}
        pools = {"lm": [strip_feature_supervision(s) for s in _load_pool(data_dir, LM_FAMILIES, vocab)]}
        phase_sched = None
        steps = int(cfg["train"]["steps"]["lm"])
    else:
        lm_ckpt = out_dir / "ckpt" / "lm" / "params.bin"
        if not lm_ckpt.exists():
            raise MissingCheckpoint(f"lm checkpoint {lm_ckpt} missing; run lm_pretrain first")
        model = init_model(model_cfg, seed)
        load_module(lm_ckpt, model)
        trainable = set_trainable(model, FINETUNE)
        dm_nets = load_dm_nets(out_dir, cfg)
        unfreeze = bool(cfg["train"]["unfreeze_dm"])
        for net in dm_nets.values():
            for p in net.parameters():
                p.requires_grad_(unfreeze)
        if unfreeze:
            for modality, net in dm_nets.items():
                for n, p in net.named_parameters():
                    trainable[f"dm.{modality}.{n}"] = p
        pools = {
            phase: _load_pool(data_dir, pairs, vocab) for phase, pairs in PHASE_FAMILIES.items()
        }
        phase_sched = PhaseSchedule(weights=tuple(cfg["train"]["phase_weights"]))
        steps = int(cfg["train"]["steps"]["ft"])

    opt = OptState(
        named=trainable,
        lr=float(cfg["train"]["lr"]),
        clip_norm=float(cfg["train"]["clip_norm"]),
        warmup=int(cfg["train"]["warmup"]),
    )
    start_step = 0
    global_step = _read_global_step(out_dir)
    if resume and _state_path(ckpt_dir).exists():
        state = json.loads(_state_path(ckpt_dir).read_text())
        start_step = int(state["opt_steps"])
        load_module(ckpt_dir / "params.bin", model)
        load_optimizer(ckpt_dir / "optimizer.bin", opt.opt, opt.named)
        opt.step_count = start_step
        global_step = int(state["global_step"])

    batch_size = int(cfg["train"]["batch"])
    log_every = int(cfg["train"]["log_every"])
    snapshot_every = int(cfg["train"].get("snapshot_every", 0))
    stopgrad = bool(cfg["train"]["stopgrad_dm"])
    for step in range(start_step, steps):
        rng = _step_rng(seed, stage, step)
        if phase_sched is None:
            phase = "text"
            pool = pools["lm"]
        else:
            phase = phase_sched.family_at(step)
            pool = pools[phase]
        idx = torch.randint(0, len(pool), (batch_size,), generator=rng)
        batch = collate([pool[i] for i in idx.tolist()], vocab.pad_id)
        parts = train_step(
            model, dm_nets, batch, opt, sched, weights, rng,
            stopgrad_dm=stopgrad, phase=phase, batch_id=step,
        )
        global_step += 1
        if (step + 1) % log_every == 0:
            log.write(global_step, parts, phase)
        if snapshot_every and (step + 1) % snapshot_every == 0:
            _eval_snapshot(out_dir, stage, global_step, model, dm_nets, pools, vocab,
                           sched, weights, seed)
    _save_stage(ckpt_dir, model, opt, model_cfg, global_step)
    if stage == "mllm_finetune" and bool(cfg["train"]["unfreeze_dm"]):
        for modality, net in dm_nets.items():
            save_module(out_dir / "ckpt" / "dm" / f"{modality}.bin", net)
    _write_global_step(out_dir, global_step)
    return ckpt_dir


@torch.no_grad()
def _probe_parts(model, dm_nets, pool, vocab, sched, weights, seed):
    from .losses import combined_loss

    rng = _step_rng(seed, "snapshot", 0)
    idx = torch.randint(0, len(pool), (16,), generator=rng)
    batch = collate([pool[i] for i in idx.tolist()], vocab.pad_id)
    total, parts = combined_loss(model, dm_nets, batch, sched, weights, rng)
    parts["total"] = float(total)
    return parts


def _eval_snapshot(out_dir, stage, global_step, model, dm_nets, pools, vocab, sched, weights, seed):
    """Fixed-probe loss parts per phase, appended as JSONL."""
    snap = {"stage": stage, "step": global_step}
    model.eval()
    for phase, pool in pools.items():
        snap[phase] = _probe_parts(model, dm_nets, pool, vocab, sched, weights, seed)
    model.train()
    with (out_dir / "eval_snapshots.jsonl").open("a") as fh:
        fh.write(json.dumps(snap, sort_keys=True) + "\n")


def run_stage(stage: str, cfg: dict, out_dir: str | Path, resume: bool = False) -> Path:
    """Run one training stage (or 'all'); returns the checkpoint directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if stage == "all":
        last = None
        for s in STAGES:
            last = run_stage(s, cfg, out_dir, resume=resume)
        return last
    if stage == "lm_pretrain":
        return _lm_like_stage("lm_pretrain", cfg, out_dir, resume)
    if stage == "dm_pretrain":
        return run_dm_pretrain(cfg, out_dir)
    if stage == "mllm_finetune":
        return _lm_like_stage("mllm_finetune", cfg, out_dir, resume)
    raise ValueError(f"unknown stage {stage!r}; known: {STAGES + ('all',)}")
