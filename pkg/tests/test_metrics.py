"""Metric identities and enumeration-derived baselines."""

import numpy as np
import pytest

from anymesh.harness import (
    DimensionError,
    MetricsReport,
    metric_attr_accuracy,
    metric_edit_exactness,
    metric_feature_fidelity,
    metric_lsd,
)
from anymesh.synthworld import (
    EditOp,
    FeatureEncoder,
    AudioSpec,
    ToneSpec,
    all_single_scenes,
    apply_edit,
    render_audio,
    render_image,
)

ENC = FeatureEncoder()


def test_feature_fidelity_identities():
    rows = ENC.spec_rows(all_single_scenes()[0])
    out = metric_feature_fidelity(rows, rows)
    assert out["mse"] == 0.0 and abs(out["mean_row_cosine"] - 1.0) < 1e-7
    a = np.eye(4, 8, dtype=np.float32)
    b = np.roll(np.eye(4, 8, dtype=np.float32), 4, axis=1)
    assert abs(metric_feature_fidelity(a, b)["mean_row_cosine"]) < 1e-7
    with pytest.raises(DimensionError):
        metric_feature_fidelity(np.zeros((4, 8)), np.zeros((4, 9)))


def test_feature_fidelity_random_pair_expectation():
    # exhaustive oracle: mean row-cosine over every ordered pair of the 160 specs
    rows = np.stack([ENC.spec_rows(s) for s in all_single_scenes()]).astype(np.float64)
    n = rows.shape[0]
    gram = np.einsum("ird,jrd->ijr", rows, rows).mean(axis=2)
    exhaustive = float(gram.mean())
    rng = np.random.default_rng(0)
    draws = 4000
    sample_mean = float(
        np.mean(
            [
                metric_feature_fidelity(rows[rng.integers(n)], rows[rng.integers(n)])["mean_row_cosine"]
                for _ in range(draws)
            ]
        )
    )
    spread = float(gram.std())
    assert abs(sample_mean - exhaustive) <= 3 * spread / np.sqrt(draws)


def test_attr_accuracy_endpoints():
    specs = all_single_scenes()[:20]
    perfect = [render_image(s) for s in specs]
    assert metric_attr_accuracy(perfect, specs, "image") == 1.0
    black = [np.zeros((16, 16, 3), dtype=np.float32) for _ in specs]
    assert metric_attr_accuracy(black, specs, "image") == 0.0
    with pytest.raises(ValueError):
        metric_attr_accuracy([], [], "image")


def test_attr_accuracy_shuffled_control_matches_combinatorics():
    # a generator that renders a uniformly random spec independent of the target
    rng = np.random.default_rng(1)
    specs = all_single_scenes()
    n = 2000
    targets = [specs[rng.integers(160)] for _ in range(n)]
    outputs = [render_image(specs[rng.integers(160)]) for _ in range(n)]
    acc = metric_attr_accuracy(outputs, targets, "image")
    p = 1.0 / 160.0
    sigma = np.sqrt(p * (1 - p) / n)
    assert abs(acc - p) <= 3 * sigma


def test_edit_exactness_endpoints():
    specs = all_single_scenes()[:32]
    ops = [EditOp("recolor", value="green") for _ in specs]
    copies = [render_image(s) for s in specs]
    out = metric_edit_exactness(specs, ops, copies, "image")
    non_noop = sum(1 for s in specs if s.glyphs[0].color != "green") / len(specs)
    assert out["preservation_acc"] == 1.0
    assert out["edit_acc"] == pytest.approx(1.0 - non_noop)
    exact = [render_image(apply_edit(s, op)) for s, op in zip(specs, ops)]
    out = metric_edit_exactness(specs, ops, exact, "image")
    assert out["edit_acc"] == 1.0 and out["preservation_acc"] == 1.0


def test_edit_exactness_random_baseline_enumeration():
    # uniform random generated scene: edit_acc for recolor = P(color == target) = 1/4,
    # preservation = P(shape, size, position all match source) = 1/(4*2*5)
    rng = np.random.default_rng(2)
    specs = all_single_scenes()
    n = 4000
    srcs = [specs[rng.integers(160)] for _ in range(n)]
    ops = [EditOp("recolor", value=("red", "green", "blue", "yellow")[rng.integers(4)]) for _ in range(n)]
    gens = [render_image(specs[rng.integers(160)]) for _ in range(n)]
    out = metric_edit_exactness(srcs, ops, gens, "image")
    for key, p in (("edit_acc", 1 / 4), ("preservation_acc", 1 / 40)):
        sigma = np.sqrt(p * (1 - p) / n)
        assert abs(out[key] - p) <= 4 * sigma, (key, out[key], p)


def test_edit_exactness_audio_semantics():
    src = AudioSpec((ToneSpec("f2", 0.3), ToneSpec("f5", 0.15)))
    op = EditOp("tone_drop", old_bin="f2")
    tgt = apply_edit(src, op)
    out = metric_edit_exactness([src], [op], [render_audio(tgt)], "audio")
    assert out == {"edit_acc": 1.0, "preservation_acc": 1.0}
    out = metric_edit_exactness([src], [op], [render_audio(src)], "audio")
    assert out == {"edit_acc": 0.0, "preservation_acc": 1.0}
    # dropping the right tone but corrupting the kept one: edit ok, preservation not
    wrong = AudioSpec((ToneSpec("f5", 0.3),))
    out = metric_edit_exactness([src], [op], [render_audio(wrong)], "audio")
    assert out == {"edit_acc": 1.0, "preservation_acc": 0.0}


def test_lsd_identities():
    w = render_audio(AudioSpec((ToneSpec("f3", 0.3),)))
    assert metric_lsd(w, w) == 0.0
    rng = np.random.default_rng(3)
    x = rng.normal(0, 0.1, 512)
    assert abs(metric_lsd(10.0 * x, x) - 1.0) < 1e-12
    with pytest.raises(DimensionError):
        metric_lsd(np.zeros(512), np.zeros(256))


def test_lsd_between_tone_specs_matches_hand_oracle():
    a = render_audio(AudioSpec((ToneSpec("f1", 0.3),)))
    b = render_audio(AudioSpec((ToneSpec("f1", 0.3), ToneSpec("f3", 0.15))))
    # hand-rolled oracle with python floats over the 257 one-sided bins
    import math

    fa = np.fft.rfft(np.asarray(a, dtype=np.float64))
    fb = np.fft.rfft(np.asarray(b, dtype=np.float64))
    acc = 0.0
    for k in range(257):
        la = math.log10(max(abs(fa[k]), 1e-8))
        lb = math.log10(max(abs(fb[k]), 1e-8))
        acc += (la - lb) ** 2
    expected = math.sqrt(acc / 257)
    assert metric_lsd(a, b) == pytest.approx(expected, rel=1e-12)
    assert expected > 0.3  # the added tone moves an exact bin by orders of magnitude


def test_metrics_report_rejects_nonfinite():
    with pytest.raises(ValueError):
        MetricsReport(task="x", metrics={"bad": float("nan")})
    rep = MetricsReport(task="x", metrics={"good": 0.5}, fingerprint="abc")
    d = rep.to_dict()
    assert d["metrics"]["good"] == 0.5 and d["fingerprint"] == "abc"
