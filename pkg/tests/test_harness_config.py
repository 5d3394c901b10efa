"""Config loading: schema rejection, overrides, fingerprint stability."""

import json

import pytest

from anymesh.harness import ConfigError, fingerprint, load_config


def test_defaults_load():
    cfg = load_config()
    assert cfg["dm"]["T"] == 100
    assert cfg["train"]["steps"]["lm"] > 0


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        load_config(sets=["bogus.key=1"])
    with pytest.raises(ConfigError):
        load_config(sets=["train.bogus=1"])


def test_type_mismatch_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"train": {"alpha": "high"}}))
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text(json.dumps({"train": {"stopgrad_dm": 3}}))
    with pytest.raises(ConfigError):
        load_config(path)


def test_file_and_set_merge(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"train": {"lr": 0.01}, "dm": {"T": 50}}))
    cfg = load_config(path, sets=["train.alpha=2.5", 'dm.schedule="linear"'])
    assert cfg["train"]["lr"] == 0.01
    assert cfg["dm"]["T"] == 50
    assert cfg["train"]["alpha"] == 2.5
    assert cfg["dm"]["schedule"] == "linear"


def test_seed_flag_sets_both_seeds():
    cfg = load_config(seed=9)
    assert cfg["train"]["seed"] == 9 and cfg["data"]["seed"] == 9


def test_fingerprint_stable_under_key_order(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    a.write_text(json.dumps({"train": {"lr": 0.01, "alpha": 2.0}}))
    b.write_text(json.dumps({"train": {"alpha": 2.0, "lr": 0.01}}))
    assert fingerprint(load_config(a)) == fingerprint(load_config(b))


def test_fingerprint_changes_on_any_core_key():
    base = fingerprint(load_config())
    assert fingerprint(load_config(sets=["train.lr=0.0007"])) != base
    assert fingerprint(load_config(sets=["dm.T=50"])) != base
    assert fingerprint(load_config(sets=["data.n=17"])) != base
    # eval-only and pure-logging keys do not perturb the reproducibility fingerprint
    assert fingerprint(load_config(sets=["eval.n=5"])) == base
    assert fingerprint(load_config(sets=["train.log_every=7"])) == base
    assert fingerprint(load_config(sets=["train.snapshot_every=123"])) == base


def test_families_validation():
    with pytest.raises(ConfigError):
        load_config(sets=['data.families={"nope": 1.0}'])
    # --set replaces the whole value at the key
    cfg = load_config(sets=['data.families={"editing": 2.0}'])
    assert cfg["data"]["families"] == {"editing": 2.0}
    # a config file deep-merges instead, keeping unspecified families
    import json as _json
    import tempfile, pathlib as _pl
    with tempfile.TemporaryDirectory() as td:
        f = _pl.Path(td, "c.json")
        f.write_text(_json.dumps({"data": {"families": {"editing": 2.0}}}))
        cfg2 = load_config(f)
    assert cfg2["data"]["families"]["editing"] == 2.0
    assert cfg2["data"]["families"]["composition"] == 0.5
