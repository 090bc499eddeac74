"""Linear screening rules that maximize sensitivity at a target PPV."""

from .core import (
    Dataset,
    ExternalMode,
    ExternalRule,
    FittedRule,
    LabeledSample,
    LinearRule,
    Prevalence,
    RuleMetrics,
    SamplingDesign,
    decide,
)
from .doolr import DoolrConfig, doolr_fit
from .glm import fit_logistic, standard_rule
from .harness import BenchSettings, brute_force_best_linear, emit_table, evaluate, run_benchmark
from .itdoolr import ItConfig, itdoolr_fit
from .metrics import SmoothingSpec, empirical_rates, ppv, rule_metrics, smoothed_rates
from .plugin import PluginRule, knn_risk, plugin_fit
from .simulate import ScenarioSpec

__all__ = [
    "BenchSettings",
    "Dataset",
    "DoolrConfig",
    "ExternalMode",
    "ExternalRule",
    "FittedRule",
    "ItConfig",
    "LabeledSample",
    "LinearRule",
    "PluginRule",
    "Prevalence",
    "RuleMetrics",
    "SamplingDesign",
    "ScenarioSpec",
    "SmoothingSpec",
    "brute_force_best_linear",
    "decide",
    "doolr_fit",
    "emit_table",
    "empirical_rates",
    "evaluate",
    "fit_logistic",
    "itdoolr_fit",
    "knn_risk",
    "plugin_fit",
    "ppv",
    "rule_metrics",
    "run_benchmark",
    "smoothed_rates",
    "standard_rule",
]
