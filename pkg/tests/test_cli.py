import csv
import json
import shutil
import subprocess
import sys

import pytest

from pswdisparity import __version__
from pswdisparity.cli import run
from pswdisparity.config import load_config

from conftest import FIXTURES

# OW estimate on the fixture, frozen from the first run of the pipeline
FIXTURE_OW_ESTIMATE = 553.3507877747852


@pytest.fixture
def workdir(tmp_path):
    for name in ("fixture.csv", "fixture.json", "scenario.json"):
        shutil.copy(FIXTURES / name, tmp_path / name)
    return tmp_path


def _run(capsys, *argv):
    code = run([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_estimate_ow(workdir, capsys):
    code, out, _ = _run(capsys, "estimate", "--config", workdir / "fixture.json",
                        "--scheme", "ow", "--out", workdir / "o")
    assert code == 0
    res = json.loads(out)
    assert res["estimate"] == pytest.approx(FIXTURE_OW_ESTIMATE, rel=1e-9)
    assert res["warnings"] == []
    assert res["variance_method"] == "sandwich" and res["se"] > 0
    assert res["ci"][0] == pytest.approx(res["estimate"] - 1.96 * res["se"])
    assert res["version"] == __version__
    assert res["config_hash"] == load_config(workdir / "fixture.json").config_hash()
    assert json.loads((workdir / "o" / "estimate.json").read_text()) == res


def test_config_output_dir_is_relative_to_config(workdir, capsys):
    code, _, _ = _run(capsys, "fit", "--config", workdir / "fixture.json")
    assert code == 0
    model = json.loads((workdir / "out" / "propensity_model.json").read_text())["model"]
    assert len(model["coefficients"]) == 5


def test_missing_outcome_column(workdir, capsys):
    cfg = json.loads((workdir / "fixture.json").read_text())
    cfg["outcome"] = "income"
    (workdir / "bad.json").write_text(json.dumps(cfg))
    code, out, err = _run(capsys, "estimate", "--config", workdir / "bad.json")
    assert code == 2 and out == ""
    assert "MissingColumn" in err and "income" in err


def test_non_binary_group_exit_code(workdir, capsys):
    text = (workdir / "fixture.csv").read_text().splitlines()
    cells = text[5].split(",")
    cells[1] = "2"
    text[5] = ",".join(cells)
    (workdir / "fixture.csv").write_text("\n".join(text) + "\n")
    code, _, err = _run(capsys, "fit", "--config", workdir / "fixture.json")
    assert code == 2 and "row 5" in err


def test_balance(workdir, capsys):
    code, out, _ = _run(capsys, "balance", "--config", workdir / "fixture.json",
                        "--out", workdir / "b", "--svg")
    assert code == 0
    res = json.loads(out)
    assert res["exact_balance_ow"] is True and res["max_asd"]["ow"] <= 1e-6
    with open(workdir / "b" / "balance_report.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["covariate"] for r in rows} == {"h1", "h2", "h3", "b1"}
    assert all(float(r["ow"]) <= 1e-6 for r in rows)
    assert (workdir / "b" / "love_plot.svg").exists()
    assert (workdir / "b" / "ps_histogram.csv").exists()


def test_rerun_is_byte_identical(workdir, capsys):
    args = ["estimate", "--config", workdir / "fixture.json", "--variance", "bootstrap",
            "--reps", "50", "--weights"]
    _run(capsys, *args, "--out", workdir / "a")
    _run(capsys, *args, "--out", workdir / "b")
    for name in ("estimate.json", "weights.csv"):
        assert (workdir / "a" / name).read_bytes() == (workdir / "b" / name).read_bytes()


def test_sandwich_with_trim_is_rejected(workdir, capsys):
    code, _, err = _run(capsys, "estimate", "--config", workdir / "fixture.json",
                        "--trim", "0.1,0.9", "--out", workdir / "t")
    assert code == 2 and "RequiresUntrimmed" in err


def test_trim_with_bootstrap_warns(workdir, capsys):
    code, out, err = _run(capsys, "estimate", "--config", workdir / "fixture.json",
                          "--trim", "0.1,0.9", "--variance", "bootstrap", "--reps", "20",
                          "--out", workdir / "t")
    res = json.loads(out)
    assert code == 0 and res["n_trimmed"] > 0
    assert any(w.startswith("TrimmingWarning") for w in res["warnings"])
    assert "warning: TrimmingWarning" in err


def test_iomc(workdir, capsys):
    code, out, _ = _run(capsys, "iomc", "--config", workdir / "fixture.json", "--reps", "20",
                        "--out", workdir / "i")
    assert code == 0
    res = json.loads(out)
    assert res["variance_method"] == "bootstrap" and res["reps"] == 20
    assert set(res["ecdf_sup_distance_per_group"]) == {"1", "0"}


def test_simulate(workdir, capsys):
    code, out, _ = _run(capsys, "simulate", "--scenario", workdir / "scenario.json",
                        "--reps", "100", "--out", workdir / "s")
    assert code == 0
    res = json.loads(out)
    assert [r["scheme"] for r in res["results"]] == ["ipw", "att", "ow"]
    truth = json.loads((workdir / "s" / "ground_truth.json").read_text())
    assert set(truth["tau_h"]) == {"ipw", "att", "atc", "ow"}
    assert (workdir / "s" / "simulation_results.csv").exists()


def test_console_script(workdir):
    proc = subprocess.run([sys.executable, "-m", "pswdisparity.cli", "fit", "--config",
                           str(workdir / "fixture.json"), "--out", str(workdir / "c")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["command"] == "fit"


def test_load_summary(workdir, capsys):
    code, out, _ = _run(capsys, "load", "--config", workdir / "fixture.json", "--out", workdir / "l")
    assert code == 0
    res = json.loads(out)
    assert res["n"] == 800 and res["n_group"]["1"] + res["n_group"]["0"] == 800
    assert "region[south]" in res["columns"] and "region[west]" not in res["columns"]
    assert res["propensity_columns"] == ["h1", "h2", "h3", "b1"]
