import csv
import json
import math

import pytest

from corrsched import experiment as ex
from corrsched.cli import _report_failures, main
from corrsched.config import parse_ini
from corrsched.scheduling import ThresholdSurface, calibrate_thresholds

SMALL = """
[experiment]
domains = so3, terrain-ridge
horizon = 30
budget_grid = 0:1:0.25
calibration_seeds = 100-111
evaluation_seeds = 0-3
pdm_calibration_seeds = 200-207
pdm_evaluation_seeds = 300-303

[pdm-lite]
levels = 4
inner_steps = 8
"""


@pytest.fixture(scope="module")
def small_ini(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "small.ini"
    p.write_text(SMALL)
    return p


@pytest.fixture(scope="module")
def small_run(tmp_path_factory, small_ini):
    out = tmp_path_factory.mktemp("run")
    for verb in ("calibrate", "run", "report"):
        assert main([verb, "--config", str(small_ini), "--out", str(out)]) == 0
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_outputs_exist(small_run):
    for name in ("cells.jsonl", "manifest.txt", "summary.csv", "frontier.csv", "winrates.csv",
                 "budget_usage.csv", "degenerate.csv", "report_manifest.txt", "frontier_so3.svg"):
        assert (small_run / name).is_file(), name
    assert sum(1 for _ in open(small_run / "cells.jsonl")) == 2 * 5 * 4


def test_manifest_records_provenance(small_run):
    text = (small_run / "manifest.txt").read_text()
    cfg = parse_ini(SMALL)
    assert f"config_hash = {cfg.digest()}" in text
    assert "evaluation_seeds = 0-3" in text and "failed_cells = 0" in text
    report = (small_run / "report_manifest.txt").read_text()
    assert "summary.csv" in report and cfg.digest() in report


def test_frontier_endpoints(small_run):
    for row in read_csv(small_run / "frontier.csv"):
        if row["schedule"] not in ("periodic", "adaptive"):
            continue
        frac = float(row["budget_fraction"])
        if frac == 0.0:
            assert float(row["nepe_mean"]) == 1.0
        elif frac == 1.0:
            assert float(row["nepe_mean"]) == 0.0


def test_budget_usage_within_target(small_run):
    for row in read_csv(small_run / "budget_usage.csv"):
        assert row["within_budget"] == "1"


def test_cells_sorted_and_complete(small_run):
    recs = [json.loads(line) for line in open(small_run / "cells.jsonl")]
    keys = [(r["domain"], r["budget_fraction"], r["seed"]) for r in recs]
    assert keys == sorted(keys)
    assert {r["seed"] for r in recs} == {0, 1, 2, 3}


def test_calibrate_is_byte_identical(small_run, small_ini, tmp_path):
    assert main(["calibrate", "--config", str(small_ini), "--out", str(tmp_path)]) == 0
    for p in sorted((small_run / "surfaces").iterdir()):
        assert (tmp_path / "surfaces" / p.name).read_bytes() == p.read_bytes()


def test_surfaces_are_budget_restrictions(small_run):
    a = ThresholdSurface.load(small_run / "surfaces" / "so3_B0030.json")
    b = ThresholdSurface.load(small_run / "surfaces" / "so3_B0008.json")
    assert (a.lam[:, :9] == b.lam).all()


def test_report_is_idempotent(small_run, small_ini):
    before = (small_run / "summary.csv").read_bytes()
    assert main(["report", "--config", str(small_ini), "--out", str(small_run)]) == 0
    assert (small_run / "summary.csv").read_bytes() == before


def test_parallel_matches_serial(small_run, small_ini, tmp_path):
    (tmp_path / "surfaces").mkdir()
    for p in (small_run / "surfaces").iterdir():
        (tmp_path / "surfaces" / p.name).write_bytes(p.read_bytes())
    assert main(["run", "--config", str(small_ini), "--out", str(tmp_path), "--jobs", "2"]) == 0
    assert (tmp_path / "cells.jsonl").read_bytes() == (small_run / "cells.jsonl").read_bytes()


def test_missing_surface_exit_code(small_ini, tmp_path, capsys):
    assert main(["run", "--config", str(small_ini), "--out", str(tmp_path)]) == 3
    assert "calibrate" in capsys.readouterr().err


def test_stale_surface_is_rejected(small_run, small_ini, tmp_path):
    (tmp_path / "surfaces").mkdir()
    for p in (small_run / "surfaces").iterdir():
        (tmp_path / "surfaces" / p.name).write_bytes(p.read_bytes())
    other = tmp_path / "other.ini"
    other.write_text(SMALL.replace("calibration_seeds = 100-111", "calibration_seeds = 100-112"))
    assert main(["run", "--config", str(other), "--out", str(tmp_path)]) == 3


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nhorizon = -3\n")
    assert main(["calibrate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["run", "--config", str(tmp_path / "none.ini"), "--out", str(tmp_path)]) == 2
    assert main(["run", "--jobs", "0", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path):
    wild = tmp_path / "wild.ini"
    wild.write_text("[experiment]\ndomains = so3\nhorizon = 20\nbudget_grid = 0, 0.25\n"
                    "calibration_seeds = 100-103\nevaluation_seeds = 0-1\n[so3]\ndrift = 1e6\nattraction = 0\n")
    assert main(["calibrate", "--config", str(wild), "--out", str(tmp_path)]) == 4


def test_failed_cells_are_listed(capsys):
    res = ex.RunResult(3, [("so3", 0.25, 7)], 0.1, [])
    assert _report_failures(res) == 4
    assert "seed=7" in capsys.readouterr().err


def test_selftest_exit_code():
    assert main(["selftest"]) == 0


def test_single_constant_calibration_trace():
    surf = calibrate_thresholds([[0.3] * 30], 30, 30)
    interior = [surf.lam[t, b] for t in range(30) for b in range(1, 30 - t)]
    assert set(interior) == {0.3}


def test_pdm_pipeline(small_ini, tmp_path):
    assert main(["pdm", "--config", str(small_ini), "--out", str(tmp_path)]) == 0
    pout = tmp_path / "pdm"
    rows = read_csv(pout / "pdm_summary.csv")
    assert [r["schedule"] for r in rows] == ["periodic", "adaptive"]
    ada = rows[1]
    assert math.isclose(float(ada["benefit_recovered"]), 1 - float(ada["nepe_mean"]), abs_tol=2e-6)
    assert (pout / "pdm_scene_300.svg").read_text().startswith("<svg")
    traj = (pout / "trajectory_300_adaptive.csv").read_text().splitlines()
    assert len(traj) > 2
