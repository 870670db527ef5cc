"""Annealed Langevin trajectory sampler with an obstacle projection.

A stand-in for a learned projected diffusion sampler: 2-D waypoint paths are
driven by a quadratic smoothness energy plus a soft penetration penalty and
annealed Gaussian kicks. The hard constraint (stay outside every circle) is
enforced only by ``project_trajectory``, whose timing is what the schedules
control. Scheduling steps are the inner Langevin updates, ``T = K * L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from corrsched.noise import NoiseStream


@dataclass(frozen=True)
class ObstacleSet:
    centers: tuple[tuple[float, float], ...]
    radii: tuple[float, ...]
    margin: float = 1e-3  # clearance as a fraction of each radius
    corridor: tuple[float, float] | None = None  # bounds on the second coordinate

    def __post_init__(self):
        if len(self.centers) != len(self.radii):
            raise ValueError("centers and radii differ in length")
        if any(r <= 0 for r in self.radii):
            raise ValueError("radii must be positive")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")
        c = self.center_array
        r = self.radius_array * (1.0 + self.margin)
        for i in range(len(r)):
            for j in range(i + 1, len(r)):
                if np.linalg.norm(c[i] - c[j]) <= r[i] + r[j]:
                    raise ValueError("obstacles (with clearance) must be disjoint")
        if self.corridor is not None:
            lo, hi = self.corridor
            if np.any(c[:, 1] - r < lo) or np.any(c[:, 1] + r > hi):
                raise ValueError("obstacles must lie inside the corridor")

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.centers, dtype=float).reshape(-1, 2)

    @property
    def radius_array(self) -> np.ndarray:
        return np.asarray(self.radii, dtype=float)

    def feasible_point(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        d = np.linalg.norm(self.center_array - p, axis=1)
        inside = bool(np.any(d < self.radius_array))
        if self.corridor is not None:
            inside |= not (self.corridor[0] <= p[1] <= self.corridor[1])
        return not inside


@dataclass(frozen=True)
class AnnealSchedule:
    levels: int
    inner_steps: int
    sigmas: tuple[float, ...]
    step_sizes: tuple[float, ...]

    def __post_init__(self):
        if len(self.sigmas) != self.levels or len(self.step_sizes) != self.levels:
            raise ValueError("one sigma and one step size per level")
        if any(s < 0 for s in self.sigmas) or any(e < 0 for e in self.step_sizes):
            raise ValueError("noise scales and step sizes must be nonnegative")
        if any(a < b for a, b in zip(self.sigmas, self.sigmas[1:])):
            raise ValueError("noise scales must not increase across levels")
        if self.inner_steps < 1:
            raise ValueError("need at least one inner step")

    @property
    def horizon(self) -> int:
        return self.levels * self.inner_steps

    def locate(self, t: int) -> tuple[int, int]:
        """Global step index -> (level, inner step)."""
        return divmod(t, self.inner_steps)

    @classmethod
    def geometric(cls, levels=10, inner_steps=20, sigma_max=0.3, sigma_min=0.01, step_size=0.25):
        sig = np.geomspace(sigma_max, sigma_min, levels)
        return cls(levels, inner_steps, tuple(float(s) for s in sig), (float(step_size),) * levels)


@dataclass(frozen=True)
class TrajectoryEnergy:
    smoothness: float = 1.0
    obstacle_stiffness: float = 0.0


def straight_line(start, goal, waypoints: int) -> np.ndarray:
    if waypoints < 3:
        raise ValueError("need at least 3 waypoints")
    s = np.linspace(0.0, 1.0, waypoints)[:, None]
    traj = (1.0 - s) * np.asarray(start, dtype=float) + s * np.asarray(goal, dtype=float)
    traj[0] = start
    traj[-1] = goal
    return traj


def _penetration(traj, obstacles: ObstacleSet):
    diff = traj[:, None, :] - obstacles.center_array[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    return diff, dist, obstacles.radius_array[None, :] - dist


def energy(traj, obstacles: ObstacleSet, weights: TrajectoryEnergy) -> float:
    seg = np.diff(traj, axis=0)
    e = 0.5 * weights.smoothness * float(np.sum(seg * seg))
    if weights.obstacle_stiffness:
        _, _, pen = _penetration(traj[1:-1], obstacles)
        pen = np.maximum(pen, 0.0)
        e += 0.5 * weights.obstacle_stiffness * float(np.sum(pen * pen))
    return e


def energy_grad(traj, obstacles: ObstacleSet, weights: TrajectoryEnergy) -> np.ndarray:
    """Gradient of ``energy`` with respect to the interior waypoints, shape (W-2, 2)."""
    g = weights.smoothness * (2.0 * traj[1:-1] - traj[:-2] - traj[2:])
    if weights.obstacle_stiffness:
        diff, dist, pen = _penetration(traj[1:-1], obstacles)
        active = pen > 0
        if np.any(active):
            safe = np.where(dist > 0, dist, 1.0)
            coef = np.where(active, -weights.obstacle_stiffness * pen / safe, 0.0)
            g = g + np.sum(coef[:, :, None] * diff, axis=1)
    return g


def langevin_update(traj, level: int, inner: int, noise: NoiseStream, anneal: AnnealSchedule,
                    obstacles: ObstacleSet, weights: TrajectoryEnergy = TrajectoryEnergy()):
    """One inner update: gradient step on the energy plus a level-scaled kick.

    Endpoints are held fixed. Noise is addressed by the global step index.
    """
    if not (0 <= level < anneal.levels and 0 <= inner < anneal.inner_steps):
        raise ValueError("schedule index out of range")
    traj = np.asarray(traj, dtype=float)
    t = level * anneal.inner_steps + inner
    eta = anneal.step_sizes[level]
    sigma = anneal.sigmas[level]
    out = traj.copy()
    z = noise.normal(t, 2 * (len(traj) - 2)).reshape(-1, 2)
    out[1:-1] = traj[1:-1] - eta * energy_grad(traj, obstacles, weights) + sigma * z
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite trajectory at step {t}")
    return out


def project_trajectory(traj, obstacles: ObstacleSet) -> np.ndarray:
    """Push interior waypoints out of obstacles along the radial ray.

    Points strictly inside a circle land at radius ``r * (1 + margin)``. A
    waypoint exactly at a centre is pushed along +u.
    """
    traj = np.asarray(traj, dtype=float)
    out = traj.copy()
    inner = out[1:-1]
    if obstacles.corridor is not None:
        np.clip(inner[:, 1], obstacles.corridor[0], obstacles.corridor[1], out=inner[:, 1])
    for c, r in zip(obstacles.center_array, obstacles.radius_array):
        diff = inner - c
        d = np.sqrt(np.sum(diff * diff, axis=1))
        hit = d < r
        if not np.any(hit):
            continue
        dirs = np.zeros_like(diff[hit])
        dh = d[hit]
        nz = dh > 0
        dirs[nz] = diff[hit][nz] / dh[nz, None]
        dirs[~nz] = (1.0, 0.0)
        inner[hit] = c + dirs * (r * (1.0 + obstacles.margin))
    return out


def trajectory_defect(traj, obstacles: ObstacleSet) -> float:
    traj = np.asarray(traj, dtype=float)
    res = traj - project_trajectory(traj, obstacles)
    return float(math.sqrt(float(np.sum(res * res))))


def run_pdm_rollout(schedule, anneal: AnnealSchedule, obstacles: ObstacleSet, seed: int,
                    weights: TrajectoryEnergy = TrajectoryEnergy(), waypoints: int = 32,
                    start=(0.0, 0.0), goal=(10.0, 0.0)):
    """Run one pdm-lite rollout under ``schedule``; thin wrapper over the rollout engine."""
    from corrsched.dynamics import DynamicsParams
    from corrsched.geometry import DomainSpec
    from corrsched.rollout import run_rollout

    spec = DomainSpec("pdm-lite", obstacles=obstacles, waypoints=waypoints,
                      start=tuple(start), goal=tuple(goal))
    params = DynamicsParams(horizon=anneal.horizon, anneal=anneal, energy=weights)
    return run_rollout(spec, params, schedule, seed)


def trajectory_csv(traj) -> str:
    lines = ["index,u,v"]
    for i, (u, v) in enumerate(np.asarray(traj, dtype=float)):
        lines.append(f"{i},{u!r},{v!r}")
    return "\n".join(lines) + "\n"
