"""End-to-end evaluation protocols over held-out prompts.

Each protocol builds eval-split episodes, lets the model generate feature
segments, decodes them through the diffusion nets, grades the result with the
exact oracles, and returns a MetricsReport.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..diffusion import EpsNet, GuidanceParams, make_schedule, sample
from ..model import (
    GenerationOutput,
    GenerationParams,
    MissingCheckpoint,
    ModelConfig,
    generate,
    init_model,
    load_module,
)
from ..sequence import DatasetBuilder, assemble_prompt, default_vocabulary, deserialize
from ..sequence.builders import spec_pool
from ..synthworld import (
    FeatureEncoder,
    edit_from_dict,
    render,
    spec_from_dict,
)
from ..trainer.stages import dataset_file, load_dm_nets
from .metrics import (
    MetricsReport,
    metric_attr_accuracy,
    metric_edit_exactness,
    metric_lsd,
)

EVAL_TASKS = ("autoencoder", "caption", "editing", "exemplar", "multiround")


class EmptyEvalSet(ValueError):
    pass


@dataclass
class EvalHarness:
    model: object
    vocab: object
    dm_nets: dict[str, EpsNet]
    encoder: FeatureEncoder
    sched: object
    cfg: dict
    fid_nets: dict[str, EpsNet] | None = None
    builder: DatasetBuilder = field(init=False)

    def __post_init__(self):
        self.builder = DatasetBuilder(encoder=self.encoder)


def load_harness(cfg: dict, out_dir: Path, fidelity: bool = False) -> EvalHarness:
    vocab = default_vocabulary()
    ft = out_dir / "ckpt" / "ft" / "params.bin"
    if not ft.exists():
        raise MissingCheckpoint(f"finetune checkpoint {ft} missing")
    model = init_model(ModelConfig(vocab_size=len(vocab), **cfg["model"]), cfg["train"]["seed"])
    load_module(ft, model)
    model.eval()
    encoder = FeatureEncoder(cfg["data"]["encoder_seed"], cfg["model"]["lf"], cfg["model"]["df"])
    return EvalHarness(
        model=model,
        vocab=vocab,
        dm_nets=load_dm_nets(out_dir, cfg),
        fid_nets=load_dm_nets(out_dir, cfg, fidelity=True) if fidelity else None,
        encoder=encoder,
        sched=make_schedule(cfg["dm"]["schedule"], cfg["dm"]["T"]),
        cfg=cfg,
    )


def _seed_from(tag: str, seed: int) -> int:
    digest = hashlib.sha256(repr((tag, seed)).encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class Realized:
    """One episode's generation plus diffusion-decoded samples per segment."""

    gen: GenerationOutput
    samples: list  # (modality, FeatureSeq, np.ndarray) per generated segment

    def first_sample(self, modality: str):
        for m, _f, arr in self.samples:
            if m == modality:
                return arr
        return None


def realize(
    harness: EvalHarness,
    episodes: list,
    guidance_w: float | None = None,
    seed: int = 0,
    max_len: int = 48,
    fidelity_from_prompt: bool = False,
) -> list[Realized]:
    """Generate every episode's target, then batch-decode feature segments."""
    cfg = harness.cfg
    w = cfg["dm"]["guidance_w"] if guidance_w is None else guidance_w
    params = GenerationParams(max_len=max_len, temperature=float(cfg["eval"]["temperature"]))
    gens = []
    for i, ep in enumerate(episodes):
        prompt = assemble_prompt(ep, harness.vocab, df=harness.model.cfg.df)
        rng = torch.Generator().manual_seed(_seed_from(f"gen/{i}", seed))
        gens.append(generate(harness.model, harness.vocab, prompt, params, rng))

    # group generated segments by (modality, fidelity-or-not); a segment uses the
    # fidelity net only when the prompt carries a source sample of its modality
    pending: dict[tuple[str, bool], list[tuple[int, int, np.ndarray, np.ndarray | None]]] = {}
    for i, (ep, gen) in enumerate(zip(episodes, gens)):
        fid_by_mod: dict[str, np.ndarray] = {}
        if fidelity_from_prompt and harness.fid_nets:
            for _, segs in ep.turns[:-1]:
                for seg in segs:
                    if seg.kind == "feature" and seg.sample is not None:
                        fid_by_mod[seg.feature.modality] = seg.sample
        for j, (modality, feat) in enumerate(gen.segments):
            if modality not in harness.dm_nets:
                continue
            fid = fid_by_mod.get(modality)
            pending.setdefault((modality, fid is not None), []).append(
                (i, j, feat.rows.reshape(-1), fid)
            )

    out = [Realized(gen=g, samples=[]) for g in gens]
    for (modality, use_fid), items in sorted(pending.items()):
        net = harness.fid_nets[modality] if use_fid else harness.dm_nets[modality]
        cond = torch.from_numpy(np.stack([it[2] for it in items])).float()
        fid_in = None
        if use_fid:
            from ..diffusion.epsnet import to_model_space

            fid_in = torch.stack(
                [
                    to_model_space(torch.from_numpy(np.asarray(it[3], dtype=np.float32)), modality)[0]
                    for it in items
                ]
            )
        neg = harness.encoder.negative_feature(modality).rows.reshape(-1)
        rng = torch.Generator().manual_seed(_seed_from(f"dm/{modality}/{use_fid}", seed))
        arrs = sample(net, cond, harness.sched, GuidanceParams(w=w, c_neg=neg), rng, fid_in)
        shape = (16, 16, 3) if modality == "image" else (-1,)
        for (i, j, _c, _f), row in zip(items, arrs):
            feat = gens[i].segments[j][1]
            out[i].samples.append((modality, feat, row.numpy().reshape(shape)))
    return out


def _report(task: str, metrics: dict, manifest: list) -> MetricsReport:
    return MetricsReport(task=task, metrics=metrics, manifest=manifest)


def eval_autoencoder(cfg: dict, out_dir: Path, n: int = 64, seed: int = 0) -> MetricsReport:
    """Criterion: DM conditioned on C_x(x) reconstructs x attribute-exactly on
    eval-split specs; shuffled conditioning must not."""
    nets = load_dm_nets(out_dir, cfg)
    encoder = FeatureEncoder(cfg["data"]["encoder_seed"], cfg["model"]["lf"], cfg["model"]["df"])
    sched = make_schedule(cfg["dm"]["schedule"], cfg["dm"]["T"])
    metrics = {}
    manifest = []
    for modality in ("image", "audio"):
        specs = list(spec_pool(modality, "eval"))[:n]
        if not specs:
            raise EmptyEvalSet(f"no eval specs for {modality}")
        cond = torch.from_numpy(
            np.stack([encoder.encode(s, modality).rows.reshape(-1) for s in specs])
        ).float()
        neg = encoder.negative_feature(modality).rows.reshape(-1)
        g = torch.Generator().manual_seed(_seed_from(f"ae/{modality}", seed))
        arrs = sample(nets[modality], cond, sched, GuidanceParams(w=cfg["dm"]["guidance_w"], c_neg=neg), g)
        shape = (16, 16, 3) if modality == "image" else (-1,)
        samples = [arrs[i].numpy().reshape(shape) for i in range(len(specs))]
        metrics[f"{modality}_acc"] = metric_attr_accuracy(samples, specs, modality)
        shifted = specs[1:] + specs[:1]  # derangement: condition on the wrong spec
        cond_s = torch.from_numpy(
            np.stack([encoder.encode(s, modality).rows.reshape(-1) for s in shifted])
        ).float()
        g = torch.Generator().manual_seed(_seed_from(f"ae-shuf/{modality}", seed))
        arrs_s = sample(nets[modality], cond_s, sched, GuidanceParams(w=cfg["dm"]["guidance_w"], c_neg=neg), g)
        samples_s = [arrs_s[i].numpy().reshape(shape) for i in range(len(specs))]
        metrics[f"{modality}_shuffled_acc"] = metric_attr_accuracy(samples_s, specs, modality)
        manifest.append({"modality": modality, "n": len(specs)})
    return _report("autoencoder", metrics, manifest)


def eval_caption(harness: EvalHarness, n: int, seed: int, split: str = "eval") -> MetricsReport:
    metrics = {}
    manifest = []
    for modality in ("image", "audio"):
        episodes = harness.builder.build_paired(n, _seed_from(f"cap/{modality}", seed),
                                                "to_modality", modality, split=split)
        realized = realize(harness, episodes, seed=seed, max_len=int(harness.cfg["eval"]["max_len"]))
        specs = [spec_from_dict(ep.meta["spec"]) for ep in episodes]
        samples = [r.first_sample(modality) for r in realized]
        metrics[f"{modality}_acc"] = metric_attr_accuracy(samples, specs, modality)
        manifest.append({"modality": modality, "n": n})
    metrics["image_random_baseline"] = 1.0 / 160.0
    return _report("caption", metrics, manifest)


def eval_editing(harness: EvalHarness, n: int, seed: int, split: str = "eval") -> MetricsReport:
    metrics = {}
    manifest = []
    for modality in ("image", "audio"):
        episodes = harness.builder.build_editing(n, _seed_from(f"edit/{modality}", seed),
                                                 modality, split=split)
        realized = realize(harness, episodes, seed=seed, max_len=int(harness.cfg["eval"]["max_len"]))
        srcs = [spec_from_dict(ep.meta["src"]) for ep in episodes]
        ops = [edit_from_dict(ep.meta["op"]) for ep in episodes]
        samples = [r.first_sample(modality) for r in realized]
        ex = metric_edit_exactness(srcs, ops, samples, modality)
        metrics[f"{modality}_edit_acc"] = ex["edit_acc"]
        metrics[f"{modality}_preservation_acc"] = ex["preservation_acc"]
        if modality == "audio":
            to_tgt, to_src = [], []
            for ep, arr in zip(episodes, samples):
                if arr is None:
                    continue
                src = spec_from_dict(ep.meta["src"])
                tgt = spec_from_dict(ep.meta["tgt"])
                to_tgt.append(metric_lsd(arr, render(tgt)))
                to_src.append(metric_lsd(arr, render(src)))
            if to_tgt:
                metrics["audio_lsd_to_target_median"] = float(np.median(to_tgt))
                metrics["audio_lsd_to_source_median"] = float(np.median(to_src))
                metrics["audio_lsd_n"] = float(len(to_tgt))
        manifest.append({"modality": modality, "n": n})
    return _report("editing", metrics, manifest)


def icl_train_marginals(data_dir: Path, modality: str) -> dict[str, float]:
    """Op frequencies (kind + parameters) over the training ICL corpus."""
    path = dataset_file(data_dir, "exemplar_icl", modality)
    counts: dict[str, int] = {}
    total = 0
    if path.exists():
        for ep in deserialize(path):
            key = repr(sorted(ep.meta["op"].items()))
            counts[key] = counts.get(key, 0) + 1
            total += 1
    if total == 0:
        return {}
    return {k: v / total for k, v in counts.items()}


def eval_exemplar(harness: EvalHarness, n: int, seed: int, data_dir: Path, split: str = "eval") -> MetricsReport:
    metrics = {}
    manifest = []
    for modality in ("image", "audio"):
        episodes = harness.builder.build_exemplar_icl(
            n, _seed_from(f"icl/{modality}", seed), modality, split=split,
            heldout_ops=tuple(harness.cfg["data"]["heldout_ops"]),
        )
        realized = realize(harness, episodes, seed=seed, max_len=int(harness.cfg["eval"]["max_len"]))
        srcs = [spec_from_dict(ep.meta["x2"]) for ep in episodes]
        ops = [edit_from_dict(ep.meta["op"]) for ep in episodes]
        samples = [r.first_sample(modality) for r in realized]
        ex = metric_edit_exactness(srcs, ops, samples, modality)
        metrics[f"{modality}_edit_acc"] = ex["edit_acc"]
        marginals = icl_train_marginals(data_dir, modality)
        baseline = float(
            np.mean([marginals.get(repr(sorted(ep.meta["op"].items())), 0.0) for ep in episodes])
        ) if marginals else 0.0
        metrics[f"{modality}_marginal_baseline"] = baseline
        manifest.append({"modality": modality, "n": n})
    accs = [metrics["image_edit_acc"], metrics["audio_edit_acc"]]
    metrics["edit_acc"] = float(np.mean(accs))
    metrics["marginal_baseline"] = float(
        np.mean([metrics["image_marginal_baseline"], metrics["audio_marginal_baseline"]])
    )
    return _report("exemplar", metrics, manifest)


def eval_multiround(harness: EvalHarness, n: int, seed: int, turns: int = 2, split: str = "eval") -> MetricsReport:
    metrics = {}
    manifest = []
    for modality in ("image", "audio"):
        episodes = harness.builder.build_multiround(
            n, _seed_from(f"mr/{modality}", seed), modality, turns=turns, split=split
        )
        realized = realize(harness, episodes, seed=seed, max_len=int(harness.cfg["eval"]["max_len"]))
        finals = [spec_from_dict(ep.meta["chain"][-1]) for ep in episodes]
        samples = [r.first_sample(modality) for r in realized]
        metrics[f"{modality}_cumulative_acc"] = metric_attr_accuracy(samples, finals, modality)
        manifest.append({"modality": modality, "n": n, "turns": turns})
    metrics["cumulative_acc"] = float(
        np.mean([metrics["image_cumulative_acc"], metrics["audio_cumulative_acc"]])
    )
    return _report("multiround", metrics, manifest)


def run_eval_task(
    task: str,
    cfg: dict,
    out_dir: Path,
    n: int | None = None,
    seed: int | None = None,
    split: str = "eval",
) -> MetricsReport:
    n = int(cfg["eval"]["n"]) if n is None else n
    seed = int(cfg["eval"]["seed"]) if seed is None else seed
    if n <= 0:
        raise EmptyEvalSet(f"eval set size must be positive, got {n}")
    data_dir = Path(cfg["data"].get("dir") or (Path(out_dir) / "data"))
    if task == "autoencoder":
        return eval_autoencoder(cfg, Path(out_dir), n=min(n, 64), seed=seed)
    harness = load_harness(cfg, Path(out_dir))
    if task == "caption":
        return eval_caption(harness, n, seed, split)
    if task == "editing":
        return eval_editing(harness, n, seed, split)
    if task == "exemplar":
        return eval_exemplar(harness, n, seed, data_dir, split)
    if task == "multiround":
        return eval_multiround(harness, n, seed, turns=int(cfg["data"]["turns"]), split=split)
    raise ValueError(f"unknown eval task {task!r}; known: {EVAL_TASKS}")
