"""Trajectory-fidelity metrics, paired statistics and aggregation."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from corrsched import geometry as geo
from corrsched.rollout import ARMS, FEASIBLE_TOL, PairedCell, RolloutTrace

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-8
DEFAULT_Q = 0.2


def _require_ok(trace: RolloutTrace):
    if trace.failed:
        raise ValueError(f"trace {trace.domain}/{trace.seed}/{trace.schedule} failed")


def path_error(trace: RolloutTrace, spec: geo.DomainSpec | None = None) -> float:
    """Cumulative defect of the realised states x_1..x_T."""
    _require_ok(trace)
    return float(sum(trace.state_defects))


def _aligned(trace, reference):
    _require_ok(trace)
    _require_ok(reference)
    if trace.horizon != reference.horizon:
        raise ValueError("traces have different horizons")
    if trace.states is None or reference.states is None:
        raise ValueError("state metrics need full (non-compact) traces")


def _measured(trace: RolloutTrace, spec: geo.DomainSpec, cache: dict | None):
    if cache is not None and id(trace) in cache:
        return cache[id(trace)][1]
    states = [trace.states[0]]
    for x, d in zip(trace.states[1:], trace.state_defects):
        # recorded-feasible states are already on the manifold
        states.append(np.asarray(x, dtype=float) if d <= FEASIBLE_TOL else geo.measurable(x, spec))
    if cache is not None:
        # keep the trace alive so its id cannot be reused while cached
        cache[id(trace)] = (trace, states)
    return states


def state_path_error(trace: RolloutTrace, reference: RolloutTrace, spec: geo.DomainSpec,
                     cache: dict | None = None) -> float:
    """Sum over t = 1..T of the domain distance to the reference arm."""
    _aligned(trace, reference)
    xs = _measured(trace, spec, cache)
    ys = _measured(reference, spec, cache)
    return float(sum(geo.distance(x, y, spec, checked=False) for x, y in zip(xs[1:], ys[1:])))


def endpoint_distance(trace: RolloutTrace, reference: RolloutTrace, spec: geo.DomainSpec,
                      cache: dict | None = None) -> float:
    _aligned(trace, reference)
    return geo.distance(_measured(trace, spec, cache)[-1], _measured(reference, spec, cache)[-1], spec, checked=False)


def nepe_from_paths(paths: dict[str, float], eps: float = DEFAULT_EPS) -> dict[str, float] | None:
    """Normalised excess path error, or None when terminal and stepwise nearly coincide."""
    base = paths["stepwise"]
    den = paths["terminal"] - base
    if den < eps:
        return None
    return {k: (v - base) / den for k, v in paths.items()}


def nepe(cell: PairedCell, spec: geo.DomainSpec | None = None, eps: float = DEFAULT_EPS):
    return nepe_from_paths({k: path_error(tr) for k, tr in cell.traces.items()}, eps)


def improvement(m_periodic: float, m_adaptive: float) -> float:
    """Relative reduction of a lower-is-better metric; NaN when undefined."""
    if not m_periodic > 0:
        return math.nan
    return (m_periodic - m_adaptive) / m_periodic


def benefit_recovered(nepe_value: float) -> float:
    return 1.0 - nepe_value


def outcome_rates(pairs) -> tuple[float, float, float]:
    """(win, loss, tie) fractions of adaptive against periodic."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no paired comparisons")
    n = len(pairs)
    wins = sum(1 for a, p in pairs if a < p)
    losses = sum(1 for a, p in pairs if a > p)
    return wins / n, losses / n, (n - wins - losses) / n


def win_rate(pairs) -> tuple[float, float]:
    """Strict win rate of ``m_adaptive < m_periodic`` and its binomial SE."""
    pairs = list(pairs)
    rate = outcome_rates(pairs)[0]
    return rate, math.sqrt(rate * (1.0 - rate) / len(pairs))


def top_q_mass(defects, q: float = DEFAULT_Q) -> float:
    """Share of total defect carried by the largest ceil(qT) steps (NaN if all zero)."""
    s = np.asarray(defects, dtype=float)
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    total = float(np.sum(s))
    if not total > 0:
        return math.nan
    k = math.ceil(q * len(s))
    # stable sort on -s keeps earlier indices first among ties
    order = np.argsort(-s, kind="stable")[:k]
    return float(np.sum(s[order])) / total


def improvement_se(adaptive_vals, periodic_vals) -> float:
    """Delta-method SE of ``1 - mean(a) / mean(p)`` for paired samples."""
    a = np.asarray(adaptive_vals, dtype=float)
    p = np.asarray(periodic_vals, dtype=float)
    n = a.size
    if n < 2 or a.shape != p.shape:
        return math.nan
    ma, mp = float(a.mean()), float(p.mean())
    if not mp > 0:
        return math.nan
    cov = np.cov(np.stack([a, p]), ddof=1) / n
    g = np.array([-1.0 / mp, ma / mp**2])
    return float(math.sqrt(max(float(g @ cov @ g), 0.0)))


def mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), math.nan
    return float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(v.size))


# --- per-cell and aggregate records ------------------------------------------


@dataclass
class ArmMetrics:
    endpoint: float
    path: float
    state_path: float
    nepe: float | None
    achieved_budget: float
    projection_calls: int


@dataclass
class CellMetrics:
    domain: str
    seed: int
    budget_fraction: float
    budget: int
    horizon: int
    arms: dict[str, ArmMetrics] = field(default_factory=dict)
    degenerate: bool = False
    failed: bool = False
    concentration: float | None = None

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "CellMetrics":
        rec = dict(rec)
        rec["arms"] = {k: ArmMetrics(**v) for k, v in rec["arms"].items()}
        return cls(**rec)


def cell_metrics(cell: PairedCell, spec: geo.DomainSpec, eps: float = DEFAULT_EPS,
                 q: float = DEFAULT_Q, cache: dict | None = None) -> CellMetrics:
    """Per-arm metrics of one paired cell.

    ``cache`` may be shared across the cells of a seed so the terminal and
    stepwise states are measured once.
    """
    horizon = cell.traces["terminal"].horizon
    out = CellMetrics(cell.domain, cell.seed, cell.budget_fraction, cell.budget, horizon)
    if cell.failed:
        out.failed = True
        return out
    ref = cell.traces["stepwise"]
    paths = {k: path_error(cell.traces[k]) for k in ARMS}
    norm = nepe_from_paths(paths, eps)
    out.degenerate = norm is None
    for k in ARMS:
        tr = cell.traces[k]
        out.arms[k] = ArmMetrics(
            endpoint=endpoint_distance(tr, ref, spec, cache),
            path=paths[k],
            state_path=state_path_error(tr, ref, spec, cache),
            nepe=None if norm is None else norm[k],
            achieved_budget=tr.achieved_budget,
            projection_calls=tr.projection_calls,
        )
    c = top_q_mass(cell.traces["terminal"].proposal_defects, q)
    out.concentration = None if math.isnan(c) else c
    return out


@dataclass
class AggregateRow:
    domain: str
    budget_fraction: float
    n: int  # non-failed paired cells
    n_normalized: int  # of which non-degenerate
    n_degenerate: int
    stats: dict[str, dict[str, tuple[float, float]]]  # schedule -> metric -> (mean, se)
    endpoint_win: tuple[float, float]
    pathwise_win: tuple[float, float]
    delta_endpoint: float
    delta_endpoint_se: float
    delta_nepe: float
    delta_nepe_se: float
    median_delta_nepe: float
    benefit: float


RAW_METRICS = ("endpoint", "path", "state_path", "achieved_budget")


def aggregate(cells: list[CellMetrics]) -> tuple[list[AggregateRow], dict[tuple[str, float], int]]:
    """Group by (domain, budget fraction).

    Returns the rows and, per group, the number of cells left out of the
    normalised columns (degenerate or failed). Groups with no usable cell give
    no row.
    """
    groups = defaultdict(list)
    for c in sorted(cells, key=lambda c: (c.domain, c.budget_fraction, c.seed)):
        groups[(c.domain, c.budget_fraction)].append(c)
    rows, excluded = [], {}
    for key, group in groups.items():
        ok = [c for c in group if not c.failed]
        norm = [c for c in ok if not c.degenerate]
        excluded[key] = len(group) - len(norm)
        if not norm:
            log.warning("group %s/%.2f has no non-degenerate cells; row omitted", *key)
            continue
        stats = {}
        for arm in ARMS:
            s = {m: mean_se([getattr(c.arms[arm], m) for c in ok]) for m in RAW_METRICS}
            s["nepe"] = mean_se([c.arms[arm].nepe for c in norm])
            stats[arm] = s
        end_pairs = [(c.arms["adaptive"].endpoint, c.arms["periodic"].endpoint) for c in ok]
        path_pairs = [(c.arms["adaptive"].nepe, c.arms["periodic"].nepe) for c in norm]
        per_pair = [improvement(p, a) for a, p in path_pairs]
        per_pair = [d for d in per_pair if not math.isnan(d)]
        rows.append(AggregateRow(
            domain=key[0],
            budget_fraction=key[1],
            n=len(ok),
            n_normalized=len(norm),
            n_degenerate=len(ok) - len(norm),
            stats=stats,
            endpoint_win=win_rate(end_pairs),
            pathwise_win=win_rate(path_pairs),
            delta_endpoint=improvement(stats["periodic"]["endpoint"][0], stats["adaptive"]["endpoint"][0]),
            delta_endpoint_se=improvement_se(*zip(*end_pairs)),
            delta_nepe=improvement(stats["periodic"]["nepe"][0], stats["adaptive"]["nepe"][0]),
            delta_nepe_se=improvement_se(*zip(*path_pairs)),
            median_delta_nepe=float(np.median(per_pair)) if per_pair else math.nan,
            benefit=benefit_recovered(stats["adaptive"]["nepe"][0]),
        ))
    return rows, excluded


def pooled_win_rates(cells: list[CellMetrics], domain: str, interior_only: bool = True):
    """Endpoint and pathwise win rates pooled over the budget grid of one domain.

    Budgets 0 and 1 make both budgeted arms identical by construction, so they
    are left out unless ``interior_only`` is False.
    """
    sel = [c for c in sorted(cells, key=lambda c: (c.budget_fraction, c.seed))
           if c.domain == domain and not c.failed]
    if interior_only:
        sel = [c for c in sel if 0 < c.budget < c.horizon]
    norm = [c for c in sel if not c.degenerate]
    end = win_rate([(c.arms["adaptive"].endpoint, c.arms["periodic"].endpoint) for c in sel])
    path = win_rate([(c.arms["adaptive"].nepe, c.arms["periodic"].nepe) for c in norm])
    deltas = [improvement(c.arms["periodic"].nepe, c.arms["adaptive"].nepe) for c in norm]
    deltas = [d for d in deltas if not math.isnan(d)]
    return {
        "endpoint_win": end,
        "pathwise_win": path,
        "median_delta_nepe": float(np.median(deltas)) if deltas else math.nan,
        "n": len(norm),
    }
