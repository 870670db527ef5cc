"""Calibrate, run and report paired schedule experiments.

Directory layout under the output directory::

    surfaces/<domain>_B<budget>.json   threshold artifacts
    cells.jsonl                        one metrics record per paired cell
    traces.jsonl                       optional rollout traces
    manifest.txt                       config hash, version, grid, wall time
    summary.csv frontier.csv winrates.csv budget_usage.csv degenerate.csv
    frontier_<domain>.svg

pdm-lite writes the same layout under ``<out>/pdm`` plus its own summary,
scene plots and trajectory CSVs.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from corrsched import __version__
from corrsched import metrics as met
from corrsched import plots
from corrsched.config import ExperimentConfig
from corrsched.pdm_lite import trajectory_csv
from corrsched.rollout import ARMS, budget_for, run_rollout, run_seed_cells
from corrsched.scheduling import Schedule, ThresholdSurface, calibrate_thresholds

log = logging.getLogger(__name__)


class MissingArtifactError(RuntimeError):
    """A required input file is absent or was produced under different settings."""


@dataclass(frozen=True)
class Grid:
    """Which domains, seeds and budget fractions one pipeline covers."""

    name: str
    domains: tuple[str, ...]
    calibration_seeds: range
    evaluation_seeds: range
    fractions: tuple[float, ...]


def synthetic_grid(cfg: ExperimentConfig) -> Grid:
    return Grid("synthetic", tuple(cfg.domains), cfg.calibration_seeds, cfg.evaluation_seeds,
                tuple(cfg.budget_grid))


def pdm_grid(cfg: ExperimentConfig) -> Grid:
    return Grid("pdm", ("pdm-lite",), cfg.pdm_calibration_seeds, cfg.pdm_evaluation_seeds,
                tuple(cfg.budget_grid))


def _budgets(fractions, horizon) -> list[int]:
    return sorted({budget_for(f, horizon) for f in fractions})


def surface_path(out: Path, domain: str, budget: int) -> Path:
    return Path(out) / "surfaces" / f"{domain}_B{budget:04d}.json"


def _normalise(obj):
    return json.loads(json.dumps(obj, sort_keys=True))


def _surface_meta(cfg: ExperimentConfig, grid: Grid, domain: str) -> dict:
    return _normalise({
        "domain": domain,
        "settings": cfg.domain_settings(domain),
        "horizon": cfg.domain_setup(domain).params.horizon,
        "calibration_seeds": [grid.calibration_seeds.start, grid.calibration_seeds.stop - 1],
    })


# --- calibrate ---------------------------------------------------------------


def calibration_defects(cfg: ExperimentConfig, domain: str, seeds) -> list[list[float]]:
    """Proposal-defect traces of terminal rollouts; failed rollouts are dropped and logged."""
    setup = cfg.domain_setup(domain)
    horizon = setup.params.horizon
    out = []
    for seed in seeds:
        tr = run_rollout(setup.spec, setup.params, Schedule.terminal(horizon), seed, keep_states=False)
        if tr.failed:
            log.warning("calibration rollout %s/%d failed; dropped", domain, seed)
            continue
        out.append(tr.proposal_defects)
    if not out:
        raise FloatingPointError(f"every calibration rollout of {domain} failed")
    return out


def calibrate_domain(cfg: ExperimentConfig, grid: Grid, domain: str) -> ThresholdSurface:
    """Full surface (B = T) for one domain; per-budget artifacts are slices of it."""
    horizon = cfg.domain_setup(domain).params.horizon
    traces = calibration_defects(cfg, domain, grid.calibration_seeds)
    return calibrate_thresholds(traces, horizon, horizon, _surface_meta(cfg, grid, domain))


def cmd_calibrate(cfg: ExperimentConfig, out: Path, grid: Grid | None = None) -> list[Path]:
    grid = grid or synthetic_grid(cfg)
    written = []
    for domain in grid.domains:
        full = calibrate_domain(cfg, grid, domain)
        for b in _budgets(grid.fractions, full.horizon):
            path = surface_path(out, domain, b)
            path.parent.mkdir(parents=True, exist_ok=True)
            full.restrict(b).save(path)
            written.append(path)
        log.info("calibrated %s from %d traces", domain, full.meta["n_traces"])
    return written


def load_surfaces(cfg: ExperimentConfig, out: Path, grid: Grid) -> dict[str, dict[int, ThresholdSurface]]:
    surfaces = {}
    for domain in grid.domains:
        horizon = cfg.domain_setup(domain).params.horizon
        want = _surface_meta(cfg, grid, domain)
        per = {}
        for b in _budgets(grid.fractions, horizon):
            path = surface_path(out, domain, b)
            if not path.is_file():
                raise MissingArtifactError(f"missing threshold surface {path} (run 'calibrate' first)")
            try:
                surf = ThresholdSurface.load(path)
            except (ValueError, KeyError) as exc:
                raise MissingArtifactError(f"unreadable threshold surface {path}: {exc}") from exc
            got = {k: surf.meta.get(k) for k in want}
            if got != want or surf.horizon != horizon or surf.budget != b:
                raise MissingArtifactError(f"threshold surface {path} was calibrated under different settings")
            per[b] = surf
        surfaces[domain] = per
    return surfaces


# --- run ---------------------------------------------------------------------


def _seed_job(args):
    cfg, domain, seed, fractions, surfaces, want_traces = args
    setup = cfg.domain_setup(domain)
    cells = run_seed_cells(setup.spec, setup.params, fractions, seed, surfaces, keep_states=True)
    cache: dict = {}
    records = [met.cell_metrics(c, setup.spec, cfg.eps, cfg.q, cache).to_record() for c in cells]
    traces = None
    if want_traces:
        traces = []
        for c in cells:
            for arm in ARMS:
                rec = c.traces[arm].to_record(cfg.compact_traces)
                rec["budget_fraction"] = c.budget_fraction
                traces.append(rec)
    return records, traces, cells if domain == "pdm-lite" else None


@dataclass
class RunResult:
    n_cells: int
    failed: list[tuple[str, int, float]]
    wall_time: float
    cells: list  # pdm-lite PairedCells kept for scene output, else empty


def _cell_key(rec):
    return rec["domain"], rec["budget_fraction"], rec["seed"]


def cmd_run(cfg: ExperimentConfig, out: Path, jobs: int = 1, grid: Grid | None = None,
            keep_cells_for: tuple[int, ...] = ()) -> RunResult:
    grid = grid or synthetic_grid(cfg)
    out = Path(out)
    surfaces = load_surfaces(cfg, out, grid)
    start = time.perf_counter()
    tasks = [(cfg, d, s, grid.fractions, surfaces[d], cfg.write_traces)
             for d in grid.domains for s in grid.evaluation_seeds]
    records, traces, kept = [], [], []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_seed_job, tasks, chunksize=1))
    else:
        results = map(_seed_job, tasks)
    for (_, _, seed, _, _, _), (recs, trs, cells) in zip(tasks, results):
        records.extend(recs)
        if trs:
            traces.extend(trs)
        if cells and seed in keep_cells_for:
            kept.extend(cells)
    records.sort(key=_cell_key)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "cells.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    if cfg.write_traces:
        traces.sort(key=lambda r: (r["domain"], r["budget_fraction"], r["seed"], ARMS.index(r["schedule"])))
        with open(out / "traces.jsonl", "w") as fh:
            for rec in traces:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    failed = [_cell_key(r) for r in records if r["failed"]]
    wall = time.perf_counter() - start
    _write_manifest(cfg, out, grid, len(records), failed, wall, jobs)
    for key in failed:
        log.error("numerical failure in cell %s seed %d budget %.2f", key[0], key[2], key[1])
    return RunResult(len(records), failed, wall, kept)


def _write_manifest(cfg, out, grid, n_cells, failed, wall, jobs):
    lines = [
        f"config_hash = {cfg.digest()}",
        f"code_version = corrsched {__version__}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"grid = {grid.name}",
        f"domains = {', '.join(grid.domains)}",
        f"budget_fractions = {', '.join(f'{f:.2f}' for f in grid.fractions)}",
        f"calibration_seeds = {grid.calibration_seeds.start}-{grid.calibration_seeds.stop - 1}",
        f"evaluation_seeds = {grid.evaluation_seeds.start}-{grid.evaluation_seeds.stop - 1}",
        f"cells = {n_cells}",
        f"jobs = {jobs}",
        f"wall_time_s = {wall:.2f}",
        f"failed_cells = {len(failed)}",
    ]
    lines += [f"failed = {d} seed={s} budget_fraction={f:.2f}" for d, f, s in failed]
    lines.append(f"config = {json.dumps(cfg.to_dict(), sort_keys=True, default=list)}")
    (Path(out) / "manifest.txt").write_text("\n".join(lines) + "\n")


# --- report ------------------------------------------------------------------


def read_cells(out: Path) -> list[met.CellMetrics]:
    path = Path(out) / "cells.jsonl"
    if not path.is_file():
        raise MissingArtifactError(f"missing cell records {path} (run 'run' first)")
    with open(path) as fh:
        cells = [met.CellMetrics.from_record(json.loads(line)) for line in fh if line.strip()]
    if not cells:
        raise MissingArtifactError(f"no cell records in {path}")
    return cells


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    return "nan" if math.isnan(v) else f"{v:.6f}"


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue())


def _manifest_hash(out: Path) -> str:
    path = Path(out) / "manifest.txt"
    if path.is_file():
        for line in path.read_text().splitlines():
            if line.startswith("config_hash = "):
                return line.split("=", 1)[1].strip()
    return "unknown"


def _row_at(rows, domain, fraction):
    for r in rows:
        if r.domain == domain and math.isclose(r.budget_fraction, fraction):
            return r
    return None


SUMMARY_HEADER = [
    "domain", "budget_fraction", "n",
    "endpoint_periodic", "endpoint_periodic_se", "endpoint_adaptive", "endpoint_adaptive_se",
    "delta_endpoint", "delta_endpoint_se",
    "nepe_periodic", "nepe_periodic_se", "nepe_adaptive", "nepe_adaptive_se",
    "delta_nepe", "delta_nepe_se",
]


def _summary_line(r):
    sp, sa = r.stats["periodic"], r.stats["adaptive"]
    return [r.domain, r.budget_fraction, r.n_normalized,
            *sp["endpoint"], *sa["endpoint"], r.delta_endpoint, r.delta_endpoint_se,
            *sp["nepe"], *sa["nepe"], r.delta_nepe, r.delta_nepe_se]


def cmd_report(cfg: ExperimentConfig, out: Path, grid: Grid | None = None) -> list[Path]:
    """Tables and SVG plots from ``cells.jsonl``; a pure function of on-disk records."""
    grid = grid or synthetic_grid(cfg)
    out = Path(out)
    cells = read_cells(out)
    rows, excluded = met.aggregate(cells)
    domains = [d for d in grid.domains if any(c.domain == d for c in cells)]
    written = []

    p = out / "summary.csv"
    _write_csv(p, SUMMARY_HEADER,
               [_summary_line(r) for d in domains if (r := _row_at(rows, d, cfg.summary_fraction))])
    written.append(p)

    front = []
    for r in rows:
        for arm in ARMS:
            m, se = r.stats[arm]["nepe"]
            front.append([r.domain, r.budget_fraction, arm, m, se, r.n_normalized])
    p = out / "frontier.csv"
    _write_csv(p, ["domain", "budget_fraction", "schedule", "nepe_mean", "nepe_se", "n"], front)
    written.append(p)

    wins = []
    for d in domains:
        w = met.pooled_win_rates(cells, d)
        wins.append([d, *w["endpoint_win"], *w["pathwise_win"], w["median_delta_nepe"], w["n"]])
    p = out / "winrates.csv"
    _write_csv(p, ["domain", "endpoint_win", "endpoint_win_se", "pathwise_win", "pathwise_win_se",
                   "median_delta_nepe", "n"], wins)
    written.append(p)

    usage = []
    for r in rows:
        horizon = next(c.horizon for c in cells if c.domain == r.domain)
        target = budget_for(r.budget_fraction, horizon) / horizon
        ok = [c for c in cells if c.domain == r.domain and c.budget_fraction == r.budget_fraction and not c.failed]
        for arm in ("periodic", "adaptive"):
            m, se = r.stats[arm]["achieved_budget"]
            calls = met.mean_se([c.arms[arm].projection_calls for c in ok])
            usage.append([r.domain, r.budget_fraction, arm, target, m, se, calls[0],
                          int(all(c.arms[arm].achieved_budget <= target + 1e-12 for c in ok))])
    p = out / "budget_usage.csv"
    _write_csv(p, ["domain", "budget_fraction", "schedule", "target", "achieved_mean", "achieved_se",
                   "projection_calls_mean", "within_budget"], usage)
    written.append(p)

    tally = []
    for (d, f), n_excl in sorted(excluded.items()):
        group = [c for c in cells if c.domain == d and c.budget_fraction == f]
        n_failed = sum(c.failed for c in group)
        tally.append([d, f, len(group), n_failed, n_excl - n_failed, n_excl])
    p = out / "degenerate.csv"
    _write_csv(p, ["domain", "budget_fraction", "cells", "failed", "degenerate", "excluded"], tally)
    written.append(p)

    for d in domains:
        curves = {}
        for arm in ("periodic", "adaptive"):
            sel = [r for r in rows if r.domain == d]
            curves[arm] = ([r.budget_fraction for r in sel], [r.stats[arm]["nepe"][0] for r in sel],
                           [r.stats[arm]["nepe"][1] for r in sel])
        p = out / f"frontier_{d}.svg"
        p.write_text(plots.frontier_svg(d, curves))
        written.append(p)

    _append_report_manifest(out, written)
    return written


def _append_report_manifest(out: Path, written) -> None:
    h = _manifest_hash(out)
    lines = [f"{Path(p).name} config_hash={h}" for p in written]
    (Path(out) / "report_manifest.txt").write_text("\n".join(lines) + "\n")


# --- pdm-lite -----------------------------------------------------------------


def pdm_summary_rows(rows, fraction):
    """Fixed-budget table: NEPE, benefit recovered and reduction against periodic."""
    r = _row_at(rows, "pdm-lite", fraction)
    if r is None:
        return []
    out = []
    for arm in ("periodic", "adaptive"):
        m, se = r.stats[arm]["nepe"]
        delta = r.delta_nepe if arm == "adaptive" else math.nan
        out.append([arm, r.budget_fraction, m, se, met.benefit_recovered(m), delta,
                    r.pathwise_win[0] if arm == "adaptive" else math.nan, r.n_normalized])
    return out


def cmd_pdm(cfg: ExperimentConfig, out: Path, jobs: int = 1) -> RunResult:
    """Calibrate, run and report the pdm-lite grid under ``<out>/pdm``."""
    grid = pdm_grid(cfg)
    pout = Path(out) / "pdm"
    cmd_calibrate(cfg, pout, grid)
    res = cmd_run(cfg, pout, jobs, grid, keep_cells_for=tuple(cfg.pdm_scene_seeds))
    cmd_report(cfg, pout, grid)
    rows, _ = met.aggregate(read_cells(pout))
    _write_csv(pout / "pdm_summary.csv",
               ["schedule", "budget_fraction", "nepe_mean", "nepe_se", "benefit_recovered",
                "delta_vs_periodic", "pathwise_win", "n"],
               pdm_summary_rows(rows, cfg.summary_fraction))
    setup = cfg.domain_setup("pdm-lite")
    written = [pout / "pdm_summary.csv"]
    for cell in res.cells:
        if not math.isclose(cell.budget_fraction, cfg.summary_fraction) or cell.failed:
            continue
        # last state before the terminal step, so uncorrected paths still show collisions
        paths = {arm: cell.traces[arm].state(cell.traces[arm].horizon - 1) for arm in ARMS}
        events = {arm: cell.traces[arm].events for arm in ARMS}
        events["terminal"] = [cell.traces["terminal"].horizon - 1]
        svg = plots.pdm_scene_svg(setup.spec.obstacles, paths, events, cell.traces["terminal"].horizon,
                                  f"pdm-lite seed {cell.seed}, B/T = {cell.budget_fraction:.2f}")
        p = pout / f"pdm_scene_{cell.seed}.svg"
        p.write_text(svg)
        written.append(p)
        for arm in ARMS:
            p = pout / f"trajectory_{cell.seed}_{arm}.csv"
            p.write_text(trajectory_csv(cell.traces[arm].state(cell.traces[arm].horizon)))
            written.append(p)
    with open(pout / "report_manifest.txt", "a") as fh:
        h = _manifest_hash(pout)
        fh.writelines(f"{p.name} config_hash={h}\n" for p in written)
    return res

