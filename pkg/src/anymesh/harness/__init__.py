"""CLI, configuration, metrics and evaluation protocols."""

from .config import DEFAULTS, ConfigError, fingerprint, load_config
from .metrics import (
    DimensionError,
    MetricsReport,
    metric_attr_accuracy,
    metric_edit_exactness,
    metric_feature_fidelity,
    metric_lsd,
)
from .evalsuite import (
    EVAL_TASKS,
    EmptyEvalSet,
    EvalHarness,
    Realized,
    eval_autoencoder,
    load_harness,
    realize,
    run_eval_task,
)
from .plots import plot_loss_curves, plot_metric_bars

__all__ = [name for name in dir() if not name.startswith("_")]
