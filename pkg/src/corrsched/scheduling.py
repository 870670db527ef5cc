"""Correction schedules, the budget-indexed threshold surface and its calibration."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SURFACE_FORMAT = "corrsched-threshold-surface"
SURFACE_VERSION = 1

KINDS = ("terminal", "stepwise", "periodic", "adaptive")


@dataclass(frozen=True, eq=False)
class ThresholdSurface:
    """``lam[t, b]``: the defect level needed to spend a correction at step t with b left."""

    lam: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim != 2 or lam.shape[1] < 1:
            raise ValueError("surface must be a (T, B+1) grid")
        lam.flags.writeable = False
        object.__setattr__(self, "lam", lam)

    @property
    def horizon(self) -> int:
        return self.lam.shape[0]

    @property
    def budget(self) -> int:
        return self.lam.shape[1] - 1

    def restrict(self, budget: int) -> "ThresholdSurface":
        """Sub-surface for a smaller budget (entries do not depend on B)."""
        if not 0 <= budget <= self.budget:
            raise ValueError("budget outside the calibrated range")
        return ThresholdSurface(self.lam[:, : budget + 1].copy(), dict(self.meta, budget=budget))

    def to_json(self) -> str:
        def enc(v):
            return "inf" if v == math.inf else "-inf" if v == -math.inf else float(v)

        payload = {
            "format": SURFACE_FORMAT,
            "version": SURFACE_VERSION,
            "T": self.horizon,
            "B": self.budget,
            "meta": self.meta,
            "lambda": [[enc(v) for v in row] for row in self.lam],
        }
        return json.dumps(payload, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ThresholdSurface":
        payload = json.loads(text)
        if payload.get("format") != SURFACE_FORMAT or payload.get("version") != SURFACE_VERSION:
            raise ValueError("not a version-1 threshold surface")
        lam = np.array([[float(v) for v in row] for row in payload["lambda"]], dtype=float)
        if lam.shape != (payload["T"], payload["B"] + 1):
            raise ValueError("surface grid does not match its header")
        return cls(lam, payload["meta"])

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "ThresholdSurface":
        return cls.from_json(Path(path).read_text())


def constant_surface(horizon: int, budget: int, value: float) -> ThresholdSurface:
    """Every entry set to ``value`` (no boundary conventions); used for limit cases."""
    return ThresholdSurface(np.full((horizon, budget + 1), float(value)), {"constant": value})


@dataclass(frozen=True)
class Schedule:
    kind: str
    horizon: int
    budget: int = 0
    surface: ThresholdSurface | None = None
    indices: frozenset = frozenset()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0 <= self.budget <= self.horizon:
            raise ValueError("budget must lie in [0, T]")
        if self.kind == "adaptive":
            if self.surface is None:
                raise ValueError("adaptive schedule needs a threshold surface")
            if self.surface.horizon != self.horizon or self.surface.budget < self.budget:
                raise ValueError("threshold surface does not cover (T, B)")

    @property
    def budgeted(self) -> bool:
        return self.kind in ("periodic", "adaptive")

    @classmethod
    def terminal(cls, horizon):
        return cls("terminal", horizon)

    @classmethod
    def stepwise(cls, horizon):
        return cls("stepwise", horizon, horizon)

    @classmethod
    def periodic(cls, horizon, budget):
        return cls("periodic", horizon, budget, indices=frozenset(periodic_indices(horizon, budget)))

    @classmethod
    def adaptive(cls, surface: ThresholdSurface, budget: int | None = None):
        budget = surface.budget if budget is None else budget
        return cls("adaptive", surface.horizon, budget, surface)


@dataclass(frozen=True)
class BudgetState:
    remaining: int
    spent_at: tuple[int, ...] = ()

    @property
    def total(self) -> int:
        return self.remaining + len(self.spent_at)


def spend(budget: BudgetState, t: int) -> BudgetState:
    if budget.remaining <= 0:
        raise ValueError("no correction budget left")
    if budget.spent_at and t <= budget.spent_at[-1]:
        raise ValueError("corrections must be spent at increasing steps")
    return BudgetState(budget.remaining - 1, budget.spent_at + (t,))


def periodic_indices(horizon: int, budget: int) -> list[int]:
    """``floor((k+1) T / B) - 1`` for k < B: evenly spaced and always ending at T-1."""
    if not 0 <= budget <= horizon:
        raise ValueError("budget must lie in [0, T]")
    return [(k + 1) * horizon // budget - 1 for k in range(budget)]


def decide(schedule: Schedule, t: int, s_t: float, budget: BudgetState) -> bool:
    """Whether to project the proposal made at step ``t`` with defect ``s_t``."""
    if not 0 <= t < schedule.horizon:
        raise ValueError(f"step {t} outside [0, {schedule.horizon})")
    kind = schedule.kind
    if kind == "terminal":
        return t == schedule.horizon - 1
    if kind == "stepwise":
        return True
    if kind == "periodic":
        return t in schedule.indices
    b = budget.remaining
    return b > 0 and s_t >= schedule.surface.lam[t, b]


def lower_quantile_index(n: int, num: int, den: int) -> int:
    """Index ``ceil(q n) - 1`` (clamped) of the lower empirical q-quantile, q = num/den."""
    k = -((-num * n) // den) - 1
    return min(max(k, 0), n - 1)


def calibrate_thresholds(calib_traces, horizon: int, budget: int, meta: dict | None = None) -> ThresholdSurface:
    """Quantile surface from terminal-schedule defect traces.

    ``lam[t, b]`` is the lower empirical ``1 - b/(T-t)`` quantile of the pooled
    defects at steps ``u >= t``; ``lam[t, 0] = +inf`` and ``lam[t, b] = -inf``
    once ``b >= T - t``.
    """
    traces = [np.asarray(s, dtype=float) for s in calib_traces]
    if not traces:
        raise ValueError("need at least one calibration trace")
    if any(s.shape != (horizon,) for s in traces):
        raise ValueError(f"every calibration trace must have length {horizon}")
    if not 0 <= budget <= horizon:
        raise ValueError("budget must lie in [0, T]")
    data = np.stack(traces)
    if np.any(~np.isfinite(data)) or np.any(data < 0):
        raise ValueError("defects must be finite and nonnegative")
    lam = np.full((horizon, budget + 1), -math.inf)
    lam[:, 0] = math.inf
    for t in range(horizon):
        rem = horizon - t
        pool = np.sort(data[:, t:], axis=None)
        n = pool.size
        for b in range(1, min(budget, rem - 1) + 1):
            lam[t, b] = pool[lower_quantile_index(n, rem - b, rem)]
    info = {"n_traces": len(traces), "T": horizon, "B": budget}
    if meta:
        info.update(meta)
    return ThresholdSurface(lam, info)
