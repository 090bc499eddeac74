"""Replicated train/test experiments, result tables, and a brute-force oracle."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import Dataset, ExternalMode, ExternalRule, LinearRule, Prevalence, RuleMetrics
from .doolr import DoolrConfig, default_kappa_grid, doolr_fit
from .glm import finite_threshold, standard_rule, threshold_scan
from .itdoolr import DEFAULT_ETA_GRID, ItConfig, itdoolr_fit
from .metrics import SmoothingSpec, rule_metrics
from .plugin import plugin_fit
from .simulate import ScenarioSpec, derive_seed

METHODS = ("standard", "plugin-logistic", "plugin-knn", "doolr", "it-doolr")
COLUMNS = (
    "scenario",
    "n",
    "alpha",
    "method",
    "tpr_mean",
    "tpr_sd",
    "ppv_mean",
    "ppv_sd",
    "reps",
    "failures",
)


def evaluate(rule, test: Dataset, prev: Prevalence) -> RuleMetrics:
    """Held-out TPR, FPR and prevalence-weighted PPV of anything with ``decide``."""
    return rule_metrics(rule, test, prev)


@dataclass(frozen=True)
class BenchSettings:
    """Method tuning shared by every replicate.

    ``cv_kappa_points``/``cv_restarts`` set a cheaper DOOLR configuration for
    the eta cross-validation; ``None`` reuses the main one.
    """

    kappa_points: int = 101
    restarts: int = 5
    h: float | None = None
    eta_grid: tuple[float, ...] = DEFAULT_ETA_GRID
    cv_folds: int = 5
    cv_kappa_points: int | None = None
    cv_restarts: int | None = None
    knn_k: int | None = None

    def doolr_config(self, alpha: float, seed: int) -> DoolrConfig:
        return DoolrConfig(
            alpha=alpha,
            kappa_grid=default_kappa_grid(self.kappa_points),
            restarts=self.restarts,
            smoothing=SmoothingSpec(self.h),
            seed=seed,
        )

    def it_config(self, alpha: float, seed: int) -> ItConfig:
        base = self.doolr_config(alpha, seed)
        cv = None
        if self.cv_kappa_points is not None or self.cv_restarts is not None:
            cv = replace(
                base,
                kappa_grid=default_kappa_grid(self.cv_kappa_points or self.kappa_points),
                restarts=self.cv_restarts or self.restarts,
            )
        return ItConfig(base, self.eta_grid, self.cv_folds, cv_config=cv)


@dataclass(frozen=True)
class BenchRow:
    scenario: str
    n: int
    alpha: float
    method: str
    tpr_mean: float
    tpr_sd: float
    ppv_mean: float
    ppv_sd: float
    reps: int
    failures: int


@dataclass(frozen=True)
class BenchmarkTable:
    rows: tuple[BenchRow, ...] = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def row(self, method: str, alpha: float | None = None) -> BenchRow:
        for r in self.rows:
            if r.method == method and (alpha is None or r.alpha == alpha):
                return r
        raise KeyError((method, alpha))


def _generate(kind: str, n: int, seed: int) -> Dataset:
    return ScenarioSpec(kind, n, seed).generate()


def _fit(method, train, alpha, prev, settings, seed):
    if method == "standard":
        return standard_rule(train, alpha, prev)
    if method == "plugin-logistic":
        return plugin_fit(train, alpha, prev, "logistic")
    if method == "plugin-knn":
        return plugin_fit(train, alpha, prev, "knn", settings.knn_k)
    if method == "doolr":
        return doolr_fit(train, prev, settings.doolr_config(alpha, seed))
    if method == "it-doolr":
        ext = ExternalRule(ExternalMode.SCORE, train.external)
        return itdoolr_fit(train, ext, prev, settings.it_config(alpha, seed))
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class _Job:
    kind: str
    methods: tuple[str, ...]
    alphas: tuple[float, ...]
    n_train: int
    n_test: int
    prev: Prevalence
    seed: int
    settings: BenchSettings


def _replicate(job: _Job, r: int) -> dict:
    """Test (TPR, PPV) per (method, alpha), or the error message on failure."""
    out = {}
    try:
        train = _generate(job.kind, job.n_train, derive_seed(job.seed, r, 0))
        test = _generate(job.kind, job.n_test, derive_seed(job.seed, r, 1))
    except Exception as exc:  # a failed draw fails every cell of the replicate
        return {(m, a): repr(exc) for m in job.methods for a in job.alphas}
    fit_seed = derive_seed(job.seed, r, 2) & 0xFFFFFFFF
    for a in job.alphas:
        for m in job.methods:
            try:
                rule = _fit(m, train, a, job.prev, job.settings, fit_seed)
                res = evaluate(rule, test, job.prev)
                out[(m, a)] = (res.tpr, res.ppv)
            except Exception as exc:
                out[(m, a)] = repr(exc)
    return out


def _run(args):
    return _replicate(*args)


def _mean_sd(v: list[float]) -> tuple[float, float]:
    if not v:
        return math.nan, math.nan
    arr = np.asarray(v, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def run_benchmark(
    scenario: ScenarioSpec | str,
    methods,
    alphas,
    reps: int = 100,
    n_train: int | None = None,
    n_test: int = 100_000,
    prev: Prevalence = Prevalence(0.01),
    seed: int | None = None,
    workers: int = 1,
    settings: BenchSettings = BenchSettings(),
) -> BenchmarkTable:
    """Fit every method on ``reps`` fresh training sets and score each on a fresh test set.

    Replicate ``r`` draws its training set from seed ``derive_seed(seed, r, 0)``
    and its test set from ``derive_seed(seed, r, 1)``; results are collected
    in replicate order, so the table does not depend on ``workers``. For
    ``nested-cc`` both sizes are totals ``21 * n1``.
    """
    if isinstance(scenario, str):
        scenario = ScenarioSpec(scenario, n_train or 2500, seed or 0)
    n_train = scenario.n if n_train is None else int(n_train)
    seed = scenario.seed if seed is None else int(seed)
    methods = tuple(methods)
    alphas = tuple(float(a) for a in alphas)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
    if "it-doolr" in methods and not scenario.has_external:
        raise ValueError("it-doolr needs an external scenario")
    if reps < 1:
        raise ValueError("reps must be positive")
    if not alphas or any(not 0 < a < 1 for a in alphas):
        raise ValueError("alphas must lie in (0, 1)")
    job = _Job(scenario.kind, methods, alphas, n_train, n_test, prev, seed, settings)
    tasks = [(job, r) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run, tasks, chunksize=1))
    else:
        results = [_run(t) for t in tasks]
    rows = []
    errors = {}
    for a in alphas:
        for m in methods:
            vals = [res[(m, a)] for res in results]
            ok = [v for v in vals if isinstance(v, tuple)]
            bad = [v for v in vals if not isinstance(v, tuple)]
            if bad:
                errors[f"{m}@{a}"] = bad[0]
            tm, ts = _mean_sd([v[0] for v in ok])
            pm, ps = _mean_sd([v[1] for v in ok])
            rows.append(BenchRow(scenario.kind, n_train, a, m, tm, ts, pm, ps, reps, len(bad)))
    meta = {
        "seed": seed,
        "n_test": n_test,
        "prevalence": prev.p1,
        "settings": asdict(settings),
        "first_errors": errors,
    }
    return BenchmarkTable(tuple(rows), meta)


def _fmt(x: float) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def emit_table(table: BenchmarkTable, fmt: str = "csv") -> str:
    """Render as CSV (full precision) or markdown with ``mean(sd)`` cells."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in table.rows:
            w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "markdown":
        lines = [
            "| scenario | n | alpha | method | TPR | PPV | reps | failures |",
            "|---|---|---|---|---|---|---|---|",
        ]
        for r in table.rows:
            lines.append(
                f"| {r.scenario} | {r.n} | {r.alpha:g} | {r.method} | "
                f"{r.tpr_mean:.3f}({r.tpr_sd:.3f}) | {r.ppv_mean:.3f}({r.ppv_sd:.3f}) | "
                f"{r.reps} | {r.failures} |"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def parse_csv_table(text: str) -> BenchmarkTable:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(
            BenchRow(
                rec["scenario"],
                int(rec["n"]),
                float(rec["alpha"]),
                rec["method"],
                *(float(rec[c]) for c in COLUMNS[4:8]),
                int(rec["reps"]),
                int(rec["failures"]),
            )
        )
    return BenchmarkTable(tuple(rows))


def brute_force_best_linear(
    data: Dataset, alpha: float, prev: Prevalence, angle_steps: int = 720
) -> LinearRule:
    """Best feasible two-feature linear rule over a grid of directions.

    Every direction ``(cos t, sin t)`` with ``t = pi*j/angle_steps`` is tried
    with both orientations and every distinct cut. Exact over that grid.
    """
    if data.p != 2:
        raise ValueError("brute-force oracle supports exactly two features")
    if angle_steps < 360:
        raise ValueError("angle_steps must be at least 360")
    best = None
    for j in range(angle_steps):
        th = math.pi * j / angle_steps
        u = np.array([math.cos(th), math.sin(th)])
        for sign in (1.0, -1.0):
            z = data.X @ (sign * u)
            ts, tpr, _, ppv = threshold_scan(z, data.y, prev)
            ok = np.flatnonzero(ppv >= alpha)
            if ok.size == 0:
                continue
            i = ok[np.argmax(tpr[ok])]
            if best is None or tpr[i] > best[0]:
                best = (tpr[i], finite_threshold(float(ts[i]), z), sign * u)
    if best is None:
        raise ValueError("no direction on the grid meets the PPV target")
    _, t, w = best
    return LinearRule(-t, w)
