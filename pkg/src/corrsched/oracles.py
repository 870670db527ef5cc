"""Brute-force reference computations used by ``selftest`` and the test suite.

These deliberately avoid the production code paths: nearest rotations come
from an exhaustive axis-angle grid, quantiles from exact rational arithmetic
and metrics from plain Python loops.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def axis_angle_grid(step: float = 0.05) -> np.ndarray:
    """Cubic grid of rotation vectors covering the ball of radius pi (plus one cell)."""
    n = int(math.ceil((math.pi + step) / step))
    ax = step * np.arange(-n, n + 1)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    return g[np.linalg.norm(g, axis=1) <= math.pi + step]


def grid_half_diagonal(step: float) -> float:
    """Largest distance from any point of the ball to the nearest grid node."""
    return step * math.sqrt(3.0) / 2.0


def rotation_from_vector(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    theta = float(np.linalg.norm(w))
    if theta == 0.0:
        return np.eye(3)
    k = w / theta
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(theta) * kx + (1.0 - math.cos(theta)) * (kx @ kx)


class RotationGrid:
    """Axis-angle grid with the per-node terms of <a, R(w)> precomputed."""

    def __init__(self, step: float = 0.05):
        self.step = step
        self.points = axis_angle_grid(step)
        theta = np.linalg.norm(self.points, axis=1)
        k = np.zeros_like(self.points)
        nz = theta > 0
        k[nz] = self.points[nz] / theta[nz, None]
        self.axes = k
        self.sin = np.sin(theta)
        self.vers = 1.0 - np.cos(theta)
        # k k^T flattened, so <a, k k^T> is one matrix-vector product
        self.outer = np.einsum("ni,nj->nij", k, k).reshape(-1, 9)

    def nearest(self, a) -> np.ndarray:
        """Grid rotation maximising <a, R>, i.e. minimising ||a - R||_F."""
        a = np.asarray(a, dtype=float)
        tr = float(np.trace(a))
        v = np.array([a[2, 1] - a[1, 2], a[0, 2] - a[2, 0], a[1, 0] - a[0, 1]])
        # <a, I + sin K + (1 - cos)(k k^T - I)>
        score = self.sin * (self.axes @ v) + self.vers * (self.outer @ a.reshape(9) - tr)
        return rotation_from_vector(self.points[int(np.argmax(score))])


def grid_nearest_rotation(a, grid: RotationGrid) -> np.ndarray:
    return grid.nearest(a)


def quantile_surface(traces, horizon: int, budget: int) -> list[list[float]]:
    """Threshold surface from its definition, using exact ceilings."""
    lam = []
    for t in range(horizon):
        pool = sorted(x for tr in traces for x in tr[t:])
        n = len(pool)
        row = []
        for b in range(budget + 1):
            if b == 0:
                row.append(math.inf)
            elif b >= horizon - t:
                row.append(-math.inf)
            else:
                q = 1 - Fraction(b, horizon - t)
                idx = math.ceil(q * n) - 1
                row.append(pool[min(max(idx, 0), n - 1)])
        lam.append(row)
    return lam


def geodesic_angle(r1, r2) -> float:
    """Rotation angle of r1^T r2 via the clipped trace formula."""
    c = (float(np.trace(np.asarray(r1).T @ np.asarray(r2))) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, c)))


def top_mass(values, q: float) -> float:
    vals = sorted((float(v) for v in values), reverse=True)
    total = sum(vals)
    k = math.ceil(q * len(vals))
    return sum(vals[:k]) / total


def nepe_values(path_errors: dict[str, float]) -> dict[str, float]:
    lo, hi = path_errors["stepwise"], path_errors["terminal"]
    return {k: (v - lo) / (hi - lo) for k, v in path_errors.items()}
