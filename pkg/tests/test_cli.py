import json
import subprocess
import sys

import numpy as np
import pytest

from ppvrule.cli import main
from ppvrule.core import Dataset, Prevalence
from ppvrule.glm import standard_rule
from ppvrule.serialize import load_rule, read_csv, write_csv
from ppvrule.simulate import gen_external, gen_linear

PREV = Prevalence(0.01)


@pytest.fixture
def linear_csv(tmp_path):
    path = tmp_path / "train.csv"
    write_csv(gen_linear(3000, seed=1), path)
    return path


def run(*argv):
    return main([str(a) for a in argv])


def fit_args(data, out, method, alpha="0.04", *extra):
    return ("fit", "--data", data, "--method", method, "--alpha", alpha, "--prevalence", "0.01", "--out", out, *extra)


def test_fit_standard_round_trip(linear_csv, tmp_path, capsys):
    out = tmp_path / "rule.json"
    assert run(*fit_args(linear_csv, out, "standard")) == 0
    assert "standard: train tpr=" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == 1 and doc["feature_names"] == ["x1", "x2"]
    _, rule = load_rule(out)
    data = read_csv(linear_csv)
    mem = standard_rule(data, 0.04, PREV)
    spots = np.random.default_rng(0).normal(size=(100, 2)) * 2
    np.testing.assert_array_equal(rule.decide(spots), mem.decide(spots))


@pytest.mark.parametrize("method", ["standard", "plugin-logistic", "plugin-knn", "doolr"])
def test_evaluate_reproduces_train_metrics(method, linear_csv, tmp_path, capsys):
    out = tmp_path / "rule.json"
    extra = ("--kappa-grid", "11", "--restarts", "1") if method == "doolr" else ()
    assert run(*fit_args(linear_csv, out, method, "0.04", *extra)) == 0
    capsys.readouterr()
    assert run("evaluate", "--rule", out, "--data", linear_csv) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "tpr,fpr,ppv"
    tpr, fpr, ppv = map(float, lines[1].split(","))
    m = json.loads(out.read_text())["train_metrics"]
    assert abs(tpr - m["tpr"]) <= 1e-12
    assert abs(fpr - m["fpr"]) <= 1e-12
    assert abs(ppv - m["ppv"]) <= 1e-12


def test_evaluate_on_fresh_test_data(linear_csv, tmp_path, capsys):
    out = tmp_path / "rule.json"
    run(*fit_args(linear_csv, out, "standard"))
    test = tmp_path / "test.csv"
    write_csv(gen_linear(20_000, seed=2), test)
    capsys.readouterr()
    assert run("evaluate", "--rule", out, "--data", test) == 0
    tpr, _, ppv = map(float, capsys.readouterr().out.splitlines()[1].split(","))
    assert tpr >= 0.85 and 0.02 <= ppv <= 0.08


def test_infeasible_exit_code(tmp_path):
    rng = np.random.default_rng(3)
    d = Dataset(rng.normal(size=(500, 2)), (rng.random(500) < 0.05).astype(int))
    data = tmp_path / "noise.csv"
    write_csv(d, data)
    out = tmp_path / "rule.json"
    assert run(*fit_args(data, out, "standard", "0.9")) == 2
    assert json.loads(out.read_text())["feasible"] is False


def test_it_doolr_needs_external(linear_csv, tmp_path, capsys):
    assert run(*fit_args(linear_csv, tmp_path / "r.json", "it-doolr")) == 1
    assert "--external" in capsys.readouterr().err


def test_it_doolr_fit(tmp_path, capsys):
    data = tmp_path / "ext.csv"
    write_csv(gen_external(800, "I", seed=4)[0], data)
    out = tmp_path / "r.json"
    code = run(
        *fit_args(data, out, "it-doolr", "0.04", "--external", "external", "--eta-grid", "0,1",
                  "--kappa-grid", "6", "--restarts", "1")
    )
    assert code in (0, 2)
    doc = json.loads(out.read_text())
    assert doc["method"] == "it-doolr" and doc["eta"] in (0.0, 1.0)
    assert doc["feature_names"] == ["x1", "x2", "x3"]


def test_input_errors(linear_csv, tmp_path, capsys):
    out = tmp_path / "rule.json"
    assert run(*fit_args(linear_csv, out, "standard", "0.04", "--features", "x1,x9")) == 1
    assert run(*fit_args(linear_csv, out, "standard", "0.04", "--bogus")) == 1
    assert run(*fit_args(tmp_path / "missing.csv", out, "standard")) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2,D\n1,abc,0\n2,3,1\n")
    assert run(*fit_args(bad, out, "standard")) == 1
    one = tmp_path / "one.csv"
    one.write_text("x1,D\n1,0\n2,0\n3,0\n")
    assert run(*fit_args(one, out, "standard")) == 1


def test_evaluate_feature_mismatch(linear_csv, tmp_path):
    out = tmp_path / "rule.json"
    run(*fit_args(linear_csv, out, "standard"))
    other = tmp_path / "other.csv"
    other.write_text("a,b,D\n1,2,0\n3,4,1\n")
    assert run("evaluate", "--rule", out, "--data", other) == 1
    doc = json.loads(out.read_text())
    doc["schema_version"] = 99
    out.write_text(json.dumps(doc))
    assert run("evaluate", "--rule", out, "--data", linear_csv) == 1


def test_simulate(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("simulate", "--scenario", "linear", "--n", 1000, "--seed", 7, "--out", a) == 0
    assert run("simulate", "--scenario", "linear", "--n", 1000, "--seed", 7, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 1001
    assert run("simulate", "--scenario", "linear-contaminated", "--n", 1000, "--out", b) == 0
    assert len(b.read_text().splitlines()) == 1061
    assert run("simulate", "--scenario", "external-I", "--n", 50, "--out", b) == 0
    assert b.read_text().splitlines()[0] == "x1,x2,x3,D,external"
    assert run("simulate", "--scenario", "spiral", "--n", 50) == 1


def test_csv_reread_is_identical(tmp_path):
    d = gen_external(300, "II", seed=8)[0]
    path = tmp_path / "d.csv"
    write_csv(d, path)
    back = read_csv(path, external="external")
    assert back.identical_to(d)
    assert read_csv(path).p == 3


def test_bench_smoke_and_formats(tmp_path, capsys):
    common = ("bench", "--scenario", "linear", "--methods", "standard,plugin-logistic", "--reps", 5,
              "--n-train", 1000, "--n-test", 5000, "--seed", 3)
    assert run(*common, "--format", "csv") == 0
    csv_text = capsys.readouterr().out
    assert run(*common, "--format", "markdown") == 0
    md = capsys.readouterr().out
    rows = csv_text.strip().splitlines()
    assert rows[0].startswith("scenario,n,alpha,method") and len(rows) == 3
    md_rows = md.strip().splitlines()[2:]
    for line, mdline in zip(rows[1:], md_rows):
        f = line.split(",")
        assert f"{float(f[4]):.3f}({float(f[5]):.3f})" in mdline
        assert f"{float(f[6]):.3f}({float(f[7]):.3f})" in mdline


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "ppvrule", "simulate", "--scenario", "nonlinear", "--n", "20"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert r.stdout.splitlines()[0] == "x1,x2,x3,D"
    assert len(r.stdout.splitlines()) == 21
