"""Run configuration: schema-validated nested config with file + flag overrides."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path


class ConfigError(ValueError):
    pass


DEFAULTS: dict = {
    "data": {
        "n": 4000,
        "seed": 0,
        "dir": None,
        "families": {
            "caption_to_modality": 1.0,
            "modality_to_caption": 1.0,
            "editing": 1.0,
            "exemplar_icl": 1.0,
            "composition": 0.5,
            "text_swap": 0.5,
            "multiround": 0.5,
        },
        "turns": 2,
        "heldout_ops": [],
        "encoder_seed": 20240,
    },
    "model": {
        "d_model": 128,
        "n_layers": 4,
        "n_heads": 4,
        "d_ff": 256,
        "max_positions": 256,
        "lora_rank": 8,
        "lora_targets": ["q", "v"],
        "lf": 4,
        "df": 64,
    },
    "dm": {
        "T": 100,
        "schedule": "cosine",
        "guidance_w": 3.0,
        "fidelity": False,
        "hidden": 512,
        "blocks": {"image": 4, "audio": 3},
        "lr": 1e-3,
        "batch": 128,
        "cond_noise": 0.02,
        "cond_dropout": 0.1,
        "two_glyph": 1200,
        "fidelity_pairs": 2000,
    },
    "train": {
        "alpha": 1.0,
        "lr": 1e-3,
        "clip_norm": 1.0,
        "warmup": 100,
        "steps": {"lm": 4000, "dm": 9000, "ft": 32000},
        "batch": 32,
        "phase_weights": [1, 2, 2],
        "seed": 0,
        "stopgrad_dm": False,
        "unfreeze_dm": False,
        "log_every": 50,
        "snapshot_every": 4000,
    },
    "eval": {"n": 128, "seed": 777, "max_len": 48, "temperature": 0.0},
}

# keys whose values may change type relative to the default (None placeholders)
_ANY_TYPE = {("data", "dir")}


def _check(defaults: dict, given: dict, path: tuple = ()) -> None:
    for key, value in given.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {'.'.join(path + (key,))!r}")
        dval = defaults[key]
        if path + (key,) == ("data", "families"):
            if not isinstance(value, dict):
                raise ConfigError("data.families must be a mapping of family -> weight")
            for fam, weight in value.items():
                if fam not in DEFAULTS["data"]["families"]:
                    raise ConfigError(f"unknown family {fam!r} in data.families")
                if not isinstance(weight, (int, float)) or isinstance(weight, bool):
                    raise ConfigError(f"data.families.{fam} must be a number")
        elif isinstance(dval, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{'.'.join(path + (key,))} must be a mapping")
            _check(dval, value, path + (key,))
        elif path + (key,) in _ANY_TYPE or dval is None:
            continue
        else:
            ok = isinstance(value, type(dval)) or (
                isinstance(dval, float) and isinstance(value, int)
            )
            if isinstance(dval, bool) != isinstance(value, bool):
                ok = False
            if not ok:
                raise ConfigError(
                    f"{'.'.join(path + (key,))} expects {type(dval).__name__}, "
                    f"got {type(value).__name__}"
                )


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_set(cfg: dict, dotted: str, raw: str) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    node[keys[-1]] = _parse_value(raw)


def load_config(
    config_path: str | Path | None = None,
    sets: list[str] = (),
    seed: int | None = None,
) -> dict:
    """Merge defaults <- file <- --set overrides; validate against the schema."""
    cfg = copy.deepcopy(DEFAULTS)
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {config_path}: {e}") from e
        _check(DEFAULTS, loaded)
        cfg = _merge(cfg, loaded)
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, _, raw = item.partition("=")
        _apply_set(cfg, key.strip(), raw.strip())
    if seed is not None:
        cfg["train"]["seed"] = int(seed)
        cfg["data"]["seed"] = int(seed)
    _check(DEFAULTS, cfg)
    return cfg


# pure-observation knobs that cannot change the trained artifact
_NON_REPRO_KEYS = {("train", "log_every"), ("train", "snapshot_every")}


def fingerprint(cfg: dict) -> str:
    """Stable reproducibility hash over the training-relevant config subtree."""
    core = {
        section: {
            k: v for k, v in cfg[section].items() if (section, k) not in _NON_REPRO_KEYS
        }
        for section in ("data", "model", "dm", "train")
    }
    blob = json.dumps(core, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]
