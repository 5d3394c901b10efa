"""anymesh command line: build-data | train | sample | eval | report.

Exit codes: 0 ok, 2 config schema violation, 3 non-finite training loss,
4 checkpoint missing/mismatched, 5 empty eval set.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from ..model import MissingCheckpoint
from ..sequence import DatasetBuilder, serialize
from ..synthworld import FeatureEncoder, UndecodableSample, decode_audio, decode_image, spec_to_dict
from ..trainer import run_stage
from ..trainer.loop import NonFiniteLoss
from ..trainer.stages import STAGES, dataset_file
from .config import ConfigError, fingerprint, load_config
from .evalsuite import EVAL_TASKS, EmptyEvalSet, load_harness, realize, run_eval_task
from .plots import plot_loss_curves, plot_metric_bars

EXIT_CONFIG, EXIT_NONFINITE, EXIT_CKPT, EXIT_EMPTY = 2, 3, 4, 5


def _load_cfg(config, sets, seed):
    try:
        return load_config(config, list(sets), seed)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)


def _common(fn):
    fn = click.option("--config", type=click.Path(), default=None, help="JSON config file")(fn)
    fn = click.option("--set", "sets", multiple=True, help="dotted key=value override")(fn)
    fn = click.option("--seed", type=int, default=None, help="sets data.seed and train.seed")(fn)
    fn = click.option("--out", type=click.Path(), required=True, help="run directory")(fn)
    return fn


@click.group()
def main():
    """Desk-scale any-to-any multimodal model."""


def _write_run_config(cfg: dict, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(
        json.dumps({"config": cfg, "fingerprint": fingerprint(cfg)}, indent=2, sort_keys=True)
    )


def _check_fingerprint(cfg: dict, out: Path, force: bool) -> None:
    current = fingerprint(cfg)
    sources = [
        ("run dir", out / "run_config.json"),
        ("dataset manifest", Path(cfg["data"].get("dir") or (out / "data")) / "manifest.json"),
    ]
    for label, path in sources:
        if not path.exists():
            continue
        stored = json.loads(path.read_text())["fingerprint"]
        if stored != current and not force:
            click.echo(
                f"fingerprint mismatch: {label} has {stored}, config gives {current} "
                "(use --force to override)",
                err=True,
            )
            sys.exit(EXIT_CKPT)


@main.command("build-data")
@_common
@click.option("--split", type=click.Choice(["train", "eval", "all"]), default="train")
def cmd_build_data(config, sets, seed, out, split):
    """Build per-family JSONL shards plus a manifest."""
    cfg = _load_cfg(config, sets, seed)
    out = Path(out)
    data_dir = Path(cfg["data"]["dir"] or (out / "data"))
    data_dir.mkdir(parents=True, exist_ok=True)
    encoder = FeatureEncoder(cfg["data"]["encoder_seed"], cfg["model"]["lf"], cfg["model"]["df"])
    builder = DatasetBuilder(encoder=encoder)
    heldout = tuple(cfg["data"]["heldout_ops"])
    files = []
    for family, weight in cfg["data"]["families"].items():
        n = int(round(cfg["data"]["n"] * float(weight)))
        if n <= 0:
            continue
        modalities = [None] if family in ("composition", "text_swap") else ["image", "audio"]
        for modality in modalities:
            from ..sequence.builders import build_family

            records = build_family(
                builder, family, n, cfg["data"]["seed"],
                modality=modality or "image", split=split,
                turns=int(cfg["data"]["turns"]), heldout_ops=heldout,
            )
            path = dataset_file(data_dir, family, modality)
            serialize(records, path)
            files.append(
                {"family": family, "modality": modality, "path": path.name, "n": n,
                 "seed": cfg["data"]["seed"], "split": split}
            )
            click.echo(f"wrote {path} ({n} records)")
    (data_dir / "manifest.json").write_text(
        json.dumps({"files": files, "fingerprint": fingerprint(cfg)}, indent=2, sort_keys=True)
    )
    _write_run_config(cfg, out)


@main.command("train")
@_common
@click.option("--stage", type=click.Choice(list(STAGES) + ["all"]), default="all")
@click.option("--resume", is_flag=True, default=False)
def cmd_train(config, sets, seed, out, stage, resume):
    """Run training stage(s); writes checkpoints and loss.csv."""
    cfg = _load_cfg(config, sets, seed)
    out = Path(out)
    _write_run_config(cfg, out)
    try:
        ckpt = run_stage(stage, cfg, out, resume=resume)
    except MissingCheckpoint as e:
        click.echo(f"checkpoint error: {e}", err=True)
        sys.exit(EXIT_CKPT)
    except NonFiniteLoss as e:
        click.echo(f"non-finite loss: {e}", err=True)
        sys.exit(EXIT_NONFINITE)
    click.echo(f"stage {stage} done -> {ckpt}")


@main.command("sample")
@_common
@click.option("--prompts", type=click.Path(exists=True), required=True,
              help="JSONL episode file; the final asst turn (if any) is ignored")
@click.option("--guidance-w", type=float, default=None)
@click.option("--fidelity", is_flag=True, default=False)
@click.option("--max-len", type=int, default=None)
@click.option("--force", is_flag=True, default=False)
def cmd_sample(config, sets, seed, out, prompts, guidance_w, fidelity, max_len, force):
    """Generate from prompt episodes and decode through the diffusion nets."""
    from ..sequence import deserialize
    from ..sequence.serialize import feature_to_b64
    from ..synthworld.sampleio import write_sample

    cfg = _load_cfg(config, sets, seed)
    out = Path(out)
    _check_fingerprint(cfg, out, force)
    try:
        harness = load_harness(cfg, out, fidelity=fidelity)
    except MissingCheckpoint as e:
        click.echo(f"checkpoint error: {e}", err=True)
        sys.exit(EXIT_CKPT)
    episodes = deserialize(Path(prompts))
    if not episodes:
        click.echo("no prompts given", err=True)
        sys.exit(EXIT_EMPTY)
    realized = realize(
        harness,
        episodes,
        guidance_w=guidance_w,
        seed=int(cfg["eval"]["seed"]),
        max_len=int(max_len or cfg["eval"]["max_len"]),
        fidelity_from_prompt=fidelity,
    )
    sample_dir = out / "sample_out"
    sample_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, r in enumerate(realized):
        entry = {"index": i, "stop_reason": r.gen.stop_reason,
                 "words": [harness.vocab.word(t) for t in r.gen.token_ids], "segments": []}
        for j, (modality, feat, arr) in enumerate(r.samples):
            path = sample_dir / f"{i:04d}.{j}.bin"
            write_sample(path, arr, modality)
            try:
                decoded = decode_image(arr) if modality == "image" else decode_audio(arr)
                spec = spec_to_dict(decoded)
                undecodable = False
            except UndecodableSample as e:
                spec, undecodable = None, str(e)
            entry["segments"].append(
                {"modality": modality, "sample": path.name, "spec": spec,
                 "undecodable": undecodable, "features": feature_to_b64(feat)}
            )
        manifest.append(entry)
        (sample_dir / f"{i:04d}.json").write_text(json.dumps(entry, indent=2, sort_keys=True))
    with (sample_dir / "manifest.jsonl").open("w") as fh:
        for entry in manifest:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    click.echo(f"wrote {len(realized)} outputs to {sample_dir}")


@main.command("eval")
@_common
@click.option("--task", type=click.Choice(list(EVAL_TASKS) + ["all"]), required=True)
@click.option("--split", type=click.Choice(["eval", "train"]), default="eval")
@click.option("--n", type=int, default=None)
@click.option("--force", is_flag=True, default=False)
def cmd_eval(config, sets, seed, out, task, split, n, force):
    """Compute the metric suite; writes a JSON report and bar plots."""
    cfg = _load_cfg(config, sets, seed)
    out = Path(out)
    _check_fingerprint(cfg, out, force)
    tasks = list(EVAL_TASKS) if task == "all" else [task]
    report_dir = out / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)
    for t in tasks:
        try:
            report = run_eval_task(t, cfg, out, n=n, split=split)
        except MissingCheckpoint as e:
            click.echo(f"checkpoint error: {e}", err=True)
            sys.exit(EXIT_CKPT)
        except EmptyEvalSet as e:
            click.echo(f"empty eval set: {e}", err=True)
            sys.exit(EXIT_EMPTY)
        report.fingerprint = fingerprint(cfg)
        report.revision = report.fingerprint
        report.write(report_dir / f"{t}.json")
        plot_metric_bars(report.metrics, f"{t} ({split})", report_dir / f"{t}.png")
        click.echo(f"{t}: " + " ".join(f"{k}={v:.3f}" for k, v in sorted(report.metrics.items())))


@main.command("report")
@_common
def cmd_report(config, sets, seed, out):
    """Aggregate loss curves and eval reports into figures + summary.json."""
    cfg = _load_cfg(config, sets, seed)
    out = Path(out)
    report_dir = out / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)
    summary = {"fingerprint": fingerprint(cfg), "tasks": {}}
    loss_csv = out / "loss.csv"
    if loss_csv.exists():
        png = plot_loss_curves(loss_csv, report_dir / "loss_curve.png")
        summary["loss_curve"] = png.name
    for rp in sorted(report_dir.glob("*.json")):
        if rp.name == "summary.json":
            continue
        data = json.loads(rp.read_text())
        summary["tasks"][data["task"]] = data["metrics"]
    (report_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    click.echo(f"summary -> {report_dir / 'summary.json'}")


if __name__ == "__main__":
    main()
