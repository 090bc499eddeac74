"""``ppvrule`` command line: fit, evaluate, simulate, bench.

Exit status is 0 on success, 2 when a fit ran but could not meet the PPV
target, and 1 for input or usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import ExternalMode, ExternalRule, Prevalence, SamplingDesign
from .doolr import DoolrConfig, default_kappa_grid, doolr_fit
from .glm import FitError, standard_rule
from .harness import METHODS, BenchSettings, emit_table, evaluate, run_benchmark
from .itdoolr import DEFAULT_ETA_GRID, ItConfig, itdoolr_fit
from .metrics import SmoothingSpec
from .plugin import plugin_fit
from .serialize import InputError, dump_rule, load_rule, read_csv, rule_document, write_csv
from .simulate import SCENARIOS, ScenarioSpec

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _kappa_grid(text: str) -> tuple[float, ...]:
    """Either a point count (``51``) or an explicit list (``0,0.5,0.9``)."""
    if "," not in text and "." not in text:
        try:
            return default_kappa_grid(int(text))
        except ValueError:
            pass
    return _floats(text)


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ppvrule", description="Screening rules that maximize TPR at a PPV target.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a rule from a CSV file")
    f.add_argument("--data", required=True)
    f.add_argument("--label", default="D")
    f.add_argument("--features", type=_names)
    f.add_argument("--method", required=True, choices=METHODS)
    f.add_argument("--alpha", required=True, type=float)
    f.add_argument("--prevalence", required=True, type=float)
    f.add_argument("--design", default="cohort", choices=[d.value for d in SamplingDesign])
    f.add_argument("--external")
    f.add_argument("--external-mode", default="score", choices=[m.value for m in ExternalMode])
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    f.add_argument("--kappa-grid", type=_kappa_grid)
    f.add_argument("--eta-grid", type=_floats)
    f.add_argument("--h", type=float)
    f.add_argument("--no-standardize", action="store_true")
    f.add_argument("--restarts", type=int, default=5)
    f.add_argument("--k", type=int, help="neighbours for plugin-knn")

    e = sub.add_parser("evaluate", help="score a saved rule on a CSV file")
    e.add_argument("--rule", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--label", default="D")
    e.add_argument("--prevalence", type=float)

    s = sub.add_parser("simulate", help="write a simulated dataset")
    s.add_argument("--scenario", required=True, choices=SCENARIOS)
    s.add_argument("--n", required=True, type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")

    b = sub.add_parser("bench", help="replicated benchmark table")
    b.add_argument("--scenario", required=True, choices=SCENARIOS)
    b.add_argument("--methods", type=_names, default=("standard", "doolr"))
    b.add_argument("--alphas", type=_floats, default=(0.04,))
    b.add_argument("--reps", type=int, default=100)
    b.add_argument("--n-train", type=int, default=2500)
    b.add_argument("--n-test", type=int, default=100_000)
    b.add_argument("--prevalence", type=float, default=0.01)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--format", default="markdown", choices=("csv", "markdown"))
    b.add_argument("--out")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--kappa-points", type=int, default=101)
    b.add_argument("--restarts", type=int, default=5)
    b.add_argument("--cv-kappa-points", type=int)
    b.add_argument("--cv-restarts", type=int)
    b.add_argument("--k", type=int)
    return p


def _fit_rule(args, data, prev):
    if args.method == "standard":
        return standard_rule(data, args.alpha, prev)
    if args.method in ("plugin-logistic", "plugin-knn"):
        return plugin_fit(data, args.alpha, prev, args.method.split("-", 1)[1], args.k)
    kw = {}
    if args.kappa_grid is not None:
        kw["kappa_grid"] = args.kappa_grid
    config = DoolrConfig(
        alpha=args.alpha,
        restarts=args.restarts,
        smoothing=SmoothingSpec(args.h),
        seed=args.seed,
        standardize=not args.no_standardize,
        **kw,
    )
    if args.method == "doolr":
        return doolr_fit(data, prev, config)
    ext = ExternalRule(args.external_mode, data.external)
    grid = args.eta_grid if args.eta_grid is not None else DEFAULT_ETA_GRID
    return itdoolr_fit(data, ext, prev, ItConfig(config, grid))


def cmd_fit(args) -> int:
    if args.method == "it-doolr" and not args.external:
        raise UsageError("ppvrule fit: error: it-doolr needs --external <column>")
    if args.external and args.method != "it-doolr":
        raise UsageError("ppvrule fit: error: --external is only used by it-doolr")
    prev = Prevalence(args.prevalence)
    data = read_csv(args.data, args.label, args.features, args.external, SamplingDesign(args.design))
    fitted = _fit_rule(args, data, prev)
    dump_rule(rule_document(fitted, data.feature_names, prev, args.seed), args.out)
    m = fitted.train_metrics
    status = "feasible" if fitted.feasible else "INFEASIBLE"
    print(f"{fitted.method}: train tpr={m.tpr:.4f} fpr={m.fpr:.4f} ppv={m.ppv:.4f} ({status})")
    return EXIT_OK if fitted.feasible else EXIT_INFEASIBLE


def cmd_evaluate(args) -> int:
    doc, rule = load_rule(args.rule)
    data = read_csv(args.data, args.label, doc["feature_names"])
    prev = Prevalence(args.prevalence if args.prevalence is not None else doc["prevalence"])
    m = evaluate(rule, data, prev)
    print("tpr,fpr,ppv")
    print(f"{m.tpr!r},{m.fpr!r},{m.ppv!r}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    data = ScenarioSpec(args.scenario, args.n, args.seed).generate()
    text = write_csv(data, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    settings = BenchSettings(
        kappa_points=args.kappa_points,
        restarts=args.restarts,
        cv_kappa_points=args.cv_kappa_points,
        cv_restarts=args.cv_restarts,
        knn_k=args.k,
    )
    table = run_benchmark(
        ScenarioSpec(args.scenario, args.n_train, args.seed),
        args.methods,
        args.alphas,
        reps=args.reps,
        n_test=args.n_test,
        prev=Prevalence(args.prevalence),
        workers=args.workers,
        settings=settings,
    )
    text = emit_table(table, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "evaluate": cmd_evaluate, "simulate": cmd_simulate, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
    except (InputError, FitError, ValueError, OSError) as exc:
        print(f"ppvrule: error: {exc}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
