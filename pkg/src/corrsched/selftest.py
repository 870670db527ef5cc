"""Quick oracle checks runnable from the command line."""

from __future__ import annotations

import math

import numpy as np

from corrsched import geometry as geo
from corrsched import metrics as met
from corrsched import oracles
from corrsched.config import ExperimentConfig
from corrsched.rollout import run_rollout, run_seed_cells
from corrsched.scheduling import Schedule, calibrate_thresholds, constant_surface


def check_projection(n=10, step=0.05):
    grid = oracles.RotationGrid(step)
    bound = math.sqrt(2.0) * oracles.grid_half_diagonal(step)
    rng = np.random.default_rng(7)
    for _ in range(n):
        a = rng.normal(size=(3, 3))
        f = np.linalg.norm(a - geo.project_so3(a))
        fg = np.linalg.norm(a - grid.nearest(a))
        if not (f <= fg + 1e-12 and fg - f <= bound):
            return False, f"projection gap {fg - f:.3g} (bound {bound:.3g})"
    return True, f"{n} matrices within grid bound {bound:.4f}"


def check_calibration():
    traces = [[1.0, 2.0, 3.0, 4.0]]
    got = calibrate_thresholds(traces, 4, 1).lam.tolist()
    want = oracles.quantile_surface(traces, 4, 1)
    return got == want, f"hand example {got}"


def check_limits(seeds=range(3)):
    cfg = ExperimentConfig()
    for domain in ("so3", "se3-lever", "terrain-ridge"):
        s = cfg.domain_setup(domain)
        horizon = s.params.horizon
        for seed in seeds:
            pairs = [
                (Schedule.terminal(horizon), Schedule.adaptive(constant_surface(horizon, 0, math.inf), 0)),
                (Schedule.stepwise(horizon), Schedule.adaptive(constant_surface(horizon, horizon, -math.inf))),
            ]
            for ref, ada in pairs:
                a = run_rollout(s.spec, s.params, ref, seed)
                b = run_rollout(s.spec, s.params, ada, seed)
                if a.state_defects != b.state_defects or any(
                        not np.array_equal(x, y) for x, y in zip(a.states, b.states)):
                    return False, f"{domain} seed {seed}: {ref.kind} limit differs"
    return True, "adaptive limits reproduce terminal and stepwise"


def check_nepe_endpoints(seeds=range(3)):
    cfg = ExperimentConfig(horizon=40)
    n = 0
    for domain in cfg.domains:
        s = cfg.domain_setup(domain)
        horizon = s.params.horizon
        cal = [run_rollout(s.spec, s.params, Schedule.terminal(horizon), 10_000 + i, False).proposal_defects
               for i in range(8)]
        surf = calibrate_thresholds(cal, horizon, horizon)
        for seed in seeds:
            for cell in run_seed_cells(s.spec, s.params, (0.0, 0.25, 1.0), seed, surf):
                m = met.cell_metrics(cell, s.spec)
                if m.degenerate:
                    continue
                n += 1
                if abs(m.arms["stepwise"].nepe) > 1e-12 or abs(m.arms["terminal"].nepe - 1.0) > 1e-12:
                    return False, f"{domain} seed {seed}: endpoints off"
    return True, f"{n} cells with NEPE(stepwise)=0, NEPE(terminal)=1"


def check_metrics():
    cfg = ExperimentConfig(horizon=6)
    s = cfg.domain_setup("so3")
    cal = [run_rollout(s.spec, s.params, Schedule.terminal(6), 10_000 + i, False).proposal_defects for i in range(8)]
    surf = calibrate_thresholds(cal, 6, 6)
    cell = run_seed_cells(s.spec, s.params, (0.5,), 3, surf)[0]
    m = met.cell_metrics(cell, s.spec)
    paths = {k: sum(tr.state_defects) for k, tr in cell.traces.items()}
    ref = cell.traces["stepwise"].states
    for arm, tr in cell.traces.items():
        end = oracles.geodesic_angle(geo.project_so3(tr.states[-1]), geo.project_so3(ref[-1]))
        if abs(end - m.arms[arm].endpoint) > 1e-10 or abs(paths[arm] - m.arms[arm].path) > 1e-10:
            return False, f"{arm} metric mismatch"
    if not m.degenerate:
        want = oracles.nepe_values(paths)
        if any(abs(want[a] - m.arms[a].nepe) > 1e-10 for a in want):
            return False, "NEPE mismatch"
    return True, "T=6 cell matches brute force"


CHECKS = {
    "projection": check_projection,
    "calibration": check_calibration,
    "limits": check_limits,
    "nepe-endpoints": check_nepe_endpoints,
    "metrics": check_metrics,
}


def run_selftest(echo=print) -> bool:
    ok_all = True
    for name, fn in CHECKS.items():
        try:
            ok, msg = fn()
        except Exception as exc:  # report and keep going
            ok, msg = False, f"raised {type(exc).__name__}: {exc}"
        ok_all &= ok
        echo(f"{'PASS' if ok else 'FAIL'} {name}: {msg}")
    return ok_all
