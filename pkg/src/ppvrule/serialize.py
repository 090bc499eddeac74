"""CSV datasets and JSON rule documents."""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    Dataset,
    FittedRule,
    LinearRule,
    Prevalence,
    RuleMetrics,
    SamplingDesign,
    Standardization,
)
from .plugin import KnnRisk, LogisticRisk, PluginRule

SCHEMA_VERSION = 1
LABEL = "D"
EXTERNAL = "external"


class InputError(ValueError):
    """Bad user input: missing columns, unparsable cells, schema problems."""


def write_csv(data: Dataset, path: str | Path | None = None) -> str:
    """Header of feature names, ``D`` and optionally ``external``; floats in repr form."""
    header = list(data.feature_names) + [LABEL]
    if data.external is not None:
        header.append(EXTERNAL)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(data.n):
        row = [repr(float(v)) for v in data.X[i]] + [str(int(data.y[i]))]
        if data.external is not None:
            row.append(repr(float(data.external[i])))
        w.writerow(row)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="")
    return text


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise InputError(f"row {row}, column {col!r}: not a number: {cell!r}") from None
    if not math.isfinite(v):
        raise InputError(f"row {row}, column {col!r}: non-finite value")
    return v


def read_csv(
    path: str | Path,
    label: str = LABEL,
    features: Sequence[str] | None = None,
    external: str | None = None,
    design: SamplingDesign = SamplingDesign.COHORT,
) -> Dataset:
    """Load a dataset; ``features`` defaults to every column except label and external."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise InputError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not body:
        raise InputError(f"{path} has no data rows")
    skip = {label, EXTERNAL} | ({external} if external else set())
    if features is None:
        features = [h for h in header if h not in skip]
    wanted = list(features) + [label] + ([external] if external else [])
    missing = [c for c in wanted if c not in header]
    if missing:
        raise InputError(f"missing column(s): {', '.join(missing)}")
    if not features:
        raise InputError("no feature columns")
    pos = {h: j for j, h in enumerate(header)}
    X = np.empty((len(body), len(features)))
    y = np.empty(len(body), dtype=np.int64)
    ext = np.empty(len(body)) if external else None
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise InputError(f"row {i} has {len(r)} cells, header has {len(header)}")
        for j, f in enumerate(features):
            X[i - 2, j] = _parse_float(r[pos[f]], i, f)
        d = _parse_float(r[pos[label]], i, label)
        if d not in (0.0, 1.0):
            raise InputError(f"row {i}: label must be 0 or 1, got {r[pos[label]]!r}")
        y[i - 2] = int(d)
        if external:
            ext[i - 2] = _parse_float(r[pos[external]], i, external)
    return Dataset(X, y, tuple(features), design, ext)


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else "-inf"


def _unnum(v):
    if v is None:
        return None
    return float(v)


def _metrics(m: RuleMetrics | None):
    return None if m is None else {"tpr": m.tpr, "fpr": m.fpr, "ppv": m.ppv}


def rule_document(
    fitted: FittedRule | PluginRule,
    feature_names: Sequence[str],
    prev: Prevalence,
    seed: int | None = None,
) -> dict:
    """JSON-ready description of a fitted rule; floats are kept at full precision."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "method": fitted.method,
        "feature_names": list(feature_names),
        "alpha": fitted.alpha,
        "prevalence": prev.p1,
        "feasible": bool(fitted.feasible),
        "train_metrics": _metrics(fitted.train_metrics),
        "fitted_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seed": seed,
    }
    if isinstance(fitted, PluginRule):
        risk = fitted.risk_model
        block = {"log_threshold": _num(fitted.log_threshold), "offset": risk.offset}
        if isinstance(risk, LogisticRisk):
            block["estimator"] = "logistic"
            doc.update(intercept=risk.intercept, slopes=list(risk.slopes))
        else:
            block.update(
                estimator="knn",
                k=risk.k,
                train_X=risk.X.tolist(),
                train_y=risk.y.tolist(),
            )
            doc.update(intercept=None, slopes=None)
        doc.update(
            standardization=None,
            kappa_hat=None,
            lambda_hat=_num(fitted.lambda_hat),
            h=None,
            eta=None,
            plugin=block,
        )
        return doc
    rule = fitted.rule
    st = rule.standardization
    doc.update(
        intercept=rule.intercept,
        slopes=list(rule.slopes),
        standardization=None if st is None else {"mean": list(st.mean), "sd": list(st.sd)},
        kappa_hat=fitted.kappa_hat,
        lambda_hat=_num(fitted.lambda_hat),
        h=fitted.h,
        eta=fitted.eta,
    )
    return doc


def dump_rule(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def load_rule(path: str | Path) -> tuple[dict, FittedRule | PluginRule]:
    """Read a rule document and rebuild an object whose ``decide`` matches the original."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read rule document {path}: {exc}") from None
    return doc, rule_from_document(doc)


def rule_from_document(doc: dict) -> FittedRule | PluginRule:
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"unsupported rule document (schema_version must be {SCHEMA_VERSION})")
    try:
        prev = Prevalence(float(doc["prevalence"]))
        tm = doc.get("train_metrics")
        metrics = None if tm is None else RuleMetrics(tm["tpr"], tm["fpr"], tm["ppv"])
        if "plugin" in doc:
            b = doc["plugin"]
            if b["estimator"] == "logistic":
                risk = LogisticRisk(float(doc["intercept"]), tuple(doc["slopes"]), b["offset"])
            else:
                risk = KnnRisk(
                    np.asarray(b["train_X"], dtype=float),
                    np.asarray(b["train_y"], dtype=np.int64),
                    int(b["k"]),
                    b["offset"],
                )
            return PluginRule(
                risk,
                _unnum(doc["lambda_hat"]),
                prev,
                float(doc["alpha"]),
                _unnum(b["log_threshold"]),
                metrics,
                bool(doc["feasible"]),
                doc["method"],
            )
        st = doc.get("standardization")
        rule = LinearRule(
            doc["intercept"],
            doc["slopes"],
            None if st is None else Standardization(tuple(st["mean"]), tuple(st["sd"])),
        )
        if rule.p != len(doc["feature_names"]):
            raise InputError("slopes and feature_names differ in length")
        return FittedRule(
            rule=rule,
            kappa_hat=float(doc["kappa_hat"]),
            lambda_hat=_unnum(doc["lambda_hat"]),
            h=float(doc["h"]),
            alpha=float(doc["alpha"]),
            train_metrics=metrics,
            feasible=bool(doc["feasible"]),
            eta=doc.get("eta"),
            method=doc["method"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed rule document: {exc!r}") from None
