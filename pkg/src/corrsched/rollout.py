"""Corrected rollouts and paired execution of the four schedule arms."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field

import numpy as np

from corrsched import geometry as geo
from corrsched.dynamics import DynamicsParams, initial_state, propose_update
from corrsched.noise import NoiseStream
from corrsched.scheduling import BudgetState, Schedule, ThresholdSurface, constant_surface, decide, spend

log = logging.getLogger(__name__)

FEASIBLE_TOL = 1e-9
ARMS = ("terminal", "stepwise", "periodic", "adaptive")


@dataclass
class RolloutTrace:
    domain: str
    seed: int
    schedule: str
    horizon: int
    budget: int
    states: list | None
    proposal_defects: list[float]
    state_defects: list[float]  # d(x_t, M) for t = 1..T, after any final projection
    events: list[int]
    achieved_budget: float
    projection_calls: int
    final_projection: bool
    failed: bool = False
    failed_step: int | None = None

    def state(self, t: int) -> np.ndarray:
        if self.states is None:
            raise ValueError("compact trace has no states")
        return np.asarray(self.states[t], dtype=float)

    def to_record(self, compact: bool = False) -> dict:
        rec = asdict(self)
        if compact:
            rec["states"] = None
        elif self.states is not None:
            rec["states"] = [np.asarray(x, dtype=float).tolist() for x in self.states]
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "RolloutTrace":
        rec = dict(rec)
        if rec.get("states") is not None:
            rec["states"] = [np.asarray(x, dtype=float) for x in rec["states"]]
        return cls(**rec)


@dataclass
class PairedCell:
    domain: str
    seed: int
    budget_fraction: float
    budget: int
    traces: dict[str, RolloutTrace] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(tr.failed for tr in self.traces.values())


def budget_for(fraction: float, horizon: int) -> int:
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("budget fraction must lie in [0, 1]")
    return round(fraction * horizon)  # ties to even


def run_rollout(spec: geo.DomainSpec, params: DynamicsParams, schedule: Schedule, seed: int,
                keep_states: bool = True) -> RolloutTrace:
    """Roll out ``T`` ambient updates, projecting wherever ``schedule`` says so.

    If the last state is still infeasible it gets one final projection, which
    is logged separately from the intermediate budget.
    """
    horizon = params.horizon
    if schedule.horizon != horizon:
        raise ValueError("schedule horizon does not match the dynamics")
    noise = NoiseStream(seed)
    x = initial_state(spec, noise)
    states = [x] if keep_states else None
    props, post, events = [], [], []
    budget = BudgetState(schedule.budget)
    final = False
    failed_step = None
    t = 0
    try:
        # overflow is caught below as a failed rollout; numpy's own warnings add nothing
        with np.errstate(over="ignore", invalid="ignore"):
            for t in range(horizon):
                prop = propose_update(x, t, params, noise, spec)
                s_t = geo.defect(prop, spec)
                # terminal's single correction is the final projection below
                correct = schedule.kind != "terminal" and decide(schedule, t, s_t, budget)
                if correct:
                    x = geo.project(prop, spec)
                    events.append(t)
                    if schedule.budgeted:
                        budget = spend(budget, t)
                    d_t = geo.defect(x, spec)
                else:
                    x = prop
                    d_t = s_t
                if t == horizon - 1 and d_t > FEASIBLE_TOL:
                    x = geo.project(x, spec)
                    d_t = geo.defect(x, spec)
                    final = True
                props.append(s_t)
                post.append(d_t)
                if keep_states:
                    states.append(x)
    except (geo.DegenerateStateError, FloatingPointError) as exc:
        failed_step = t
        log.warning("%s seed %d (%s) failed at step %d: %s", spec.domain, seed, schedule.kind, t, exc)
    return RolloutTrace(
        domain=spec.domain,
        seed=seed,
        schedule=schedule.kind,
        horizon=horizon,
        budget=schedule.budget,
        states=states,
        proposal_defects=props,
        state_defects=post,
        events=events,
        achieved_budget=len(events) / horizon,
        projection_calls=len(events) + int(final),
        final_projection=final,
        failed=failed_step is not None,
        failed_step=failed_step,
    )


def run_paired_cell(spec, params, fraction: float, seed: int, surface: ThresholdSurface | None,
                    keep_states: bool = True) -> PairedCell:
    """All four arms for one (domain, seed, budget) under identical noise."""
    return run_seed_cells(spec, params, [fraction], seed, surface, keep_states)[0]


def run_seed_cells(spec, params, fractions, seed: int,
                   surface: ThresholdSurface | Mapping[int, ThresholdSurface] | None,
                   keep_states: bool = True) -> list[PairedCell]:
    """Paired cells for several budgets of one seed.

    ``surface`` is either one surface covering every budget or a mapping from
    budget to surface. Terminal and stepwise arms do not depend on the budget,
    so they are run once and shared by every cell of the seed.
    """
    horizon = params.horizon
    base = {
        "terminal": run_rollout(spec, params, Schedule.terminal(horizon), seed, keep_states),
        "stepwise": run_rollout(spec, params, Schedule.stepwise(horizon), seed, keep_states),
    }
    cells = []
    for frac in fractions:
        b = budget_for(frac, horizon)
        traces = dict(base)
        traces["periodic"] = run_rollout(spec, params, Schedule.periodic(horizon, b), seed, keep_states)
        surf = surface.get(b) if isinstance(surface, Mapping) else surface
        if surf is None:
            if b > 0:
                raise ValueError(f"adaptive arm needs a calibrated threshold surface for B={b}")
            surf = constant_surface(horizon, 0, np.inf)
        adaptive = Schedule.adaptive(surf, b)
        traces["adaptive"] = run_rollout(spec, params, adaptive, seed, keep_states)
        cell = PairedCell(spec.domain, seed, frac, b, traces)
        if cell.failed:
            log.warning("cell %s/%d/%.2f failed; excluded from aggregates", spec.domain, seed, frac)
        cells.append(cell)
    return cells


def write_traces(path, cells, compact: bool = False) -> None:
    with open(path, "w") as fh:
        for cell in cells:
            for arm in ARMS:
                rec = cell.traces[arm].to_record(compact)
                rec["budget_fraction"] = cell.budget_fraction
                fh.write(json.dumps(rec) + "\n")


def read_traces(path) -> list[RolloutTrace]:
    out = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            rec.pop("budget_fraction", None)
            out.append(RolloutTrace.from_record(rec))
    return out
