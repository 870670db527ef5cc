"""Ambient update operators for the synthetic domains and pdm-lite.

Every update is a pure function of ``(x, t, params, seed, spec)``. Randomness
comes from a counter-addressed ``NoiseStream`` so all schedule arms of a seed
see the same draws at the same step.

The synthetic updates share one structure: on-manifold motion, an
off-manifold drift term, Gaussian noise, and a partial pull back towards the
constraint set (``attraction``, the fraction of the current deviation removed
per step). The pull stands in for a learned update that roughly, but not
exactly, respects the constraint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from corrsched import geometry as geo
from corrsched.noise import EPISODE, INIT, NoiseStream
from corrsched.pdm_lite import AnnealSchedule, TrajectoryEnergy, langevin_update, straight_line

_EYE = np.eye(3)


@dataclass(frozen=True)
class DynamicsParams:
    horizon: int = 200
    step: float = 0.05
    noise: float = 0.02
    drift: float = 1.0
    spin: float = 1.0
    coupling: float = 1.0
    attraction: float = 0.4
    modulation_freq: float = 1.0
    modulation_power: float = 2.0
    impulse_start: int = 80
    impulse_end: int = 90
    impulse_magnitude: float = 1.0
    trans_noise: float = 0.02
    planar_noise: float = 0.02
    lever_gain: float = 0.8
    height_steer: float = 0.5
    anneal: AnnealSchedule | None = None
    energy: TrajectoryEnergy = field(default_factory=TrajectoryEnergy)

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step size must be positive")
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if min(self.noise, self.trans_noise, self.planar_noise) < 0:
            raise ValueError("noise scales must be nonnegative")
        if not 0 <= self.impulse_start <= self.impulse_end <= self.horizon:
            raise ValueError("impulse window must lie inside [0, T)")
        if not 0 <= self.attraction < 1:
            raise ValueError("attraction must be in [0, 1)")
        if self.anneal is not None and self.anneal.horizon != self.horizon:
            raise ValueError("pdm-lite horizon must equal levels * inner_steps")

    def in_burst(self, t: int) -> bool:
        return self.impulse_start <= t < self.impulse_end


@dataclass(frozen=True)
class _Episode:
    phases: np.ndarray
    drift_dir: np.ndarray  # unit-Frobenius symmetric matrix
    spin_axis: np.ndarray  # unit vector for the state-dependent spin


_FAMILY_SALT = {"so3": 0, "se3": 1, "terrain": 2, "pdm": 3}


@lru_cache(maxsize=4096)
def _episode(seed: int, family: str) -> _Episode:
    # base and volatile variants of a family share constants; families do not
    salt = _FAMILY_SALT[family]
    z = NoiseStream(seed).normal(salt, 16, EPISODE)
    phases = 2.0 * math.pi * NoiseStream(seed).uniform(salt, 6, EPISODE)
    s = np.array([[z[0], z[3], z[4]], [z[3], z[1], z[5]], [z[4], z[5], z[2]]])
    s /= np.linalg.norm(s)
    axis = z[6:9] / np.linalg.norm(z[6:9])
    return _Episode(phases, s, axis)


def _modulation(tau, params: DynamicsParams, phase) -> float:
    return (0.5 * (1.0 + math.sin(params.modulation_freq * tau + phase))) ** params.modulation_power


def _drift_gain(t, params: DynamicsParams, spec: geo.DomainSpec, phase) -> float:
    """Drift envelope; inside the burst window of the volatile variants it is the impulse magnitude."""
    if spec.domain in ("so3-impulse", "se3-lever") and params.in_burst(t):
        return params.impulse_magnitude
    return _modulation(t * params.step, params, phase)


def _rotation_step(a, t, params, noise, spec, ep):
    h = params.step
    tau = t * h
    ph = ep.phases
    stretch = a @ a.T - _EYE
    w = params.spin * np.array(
        [math.sin(0.7 * tau + ph[0]), math.cos(0.5 * tau + ph[1]), 0.5 * math.sin(0.3 * tau + ph[2])]
    )
    # off-manifold stretch feeds back into the rotation rate
    w = w + params.coupling * (stretch @ ep.spin_axis)
    d = params.drift * _drift_gain(t, params, spec, ph[3]) * ep.drift_dir
    xi = noise.normal(t, 9).reshape(3, 3)
    return (
        a
        + h * (geo.hat(w) + d) @ a
        - 0.5 * params.attraction * stretch @ a
        + params.noise * math.sqrt(h) * xi
    )


def _se3_step(x, t, params, noise, spec, ep):
    a = x[:, :3]
    p = x[:, 3]
    h = params.step
    out = np.empty((3, 4))
    out[:, :3] = _rotation_step(a, t, params, noise, spec, ep)
    xi = noise.normal(t, 12)[9:]
    if spec.lever:
        # follows the lever point of the ambient rotation block, so rotational
        # drift is amplified by the arm length
        target = spec.lever_length * out[:, 0] + np.asarray(spec.lever_anchor)
        out[:, 3] = p + params.lever_gain * (target - p) + params.trans_noise * math.sqrt(h) * xi
    else:
        tau = t * h
        vb = params.spin * np.array([1.0, 0.5 * math.sin(0.4 * tau + ep.phases[4]), 0.3])
        out[:, 3] = p + h * (a @ vb) + params.trans_noise * math.sqrt(h) * xi
    return out


def _terrain_step(x, t, params, noise, spec, ep):
    u, v, z = x
    h = params.step
    tau = t * h
    # height steers the heading, so vertical error bends the planar path
    heading = 0.4 * math.sin(0.5 * tau + ep.phases[4]) + 0.3 * math.sin(ep.phases[5]) + params.height_steer * z
    wu = params.spin * math.cos(heading)
    wv = params.spin * math.sin(heading)
    f = spec.field
    fu, fv = f.grad(u, v)
    xi = noise.normal(t, 3)
    sq = math.sqrt(h)
    return np.array(
        [
            u + h * wu + params.planar_noise * sq * xi[0],
            v + h * wv + params.planar_noise * sq * xi[1],
            z + h * (fu * wu + fv * wv) + params.attraction * (f(u, v) - z) + params.noise * sq * xi[2],
        ]
    )


def propose_update(x, t: int, params: DynamicsParams, noise: NoiseStream, spec: geo.DomainSpec):
    """Ambient proposal ``x_{t+1}`` from ``x_t`` (no projection)."""
    if not 0 <= t < params.horizon:
        raise ValueError(f"step {t} outside [0, {params.horizon})")
    x = np.asarray(x, dtype=float)
    if not math.isfinite(x.sum()) and not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite state entering step {t}")
    fam = spec.family
    if fam == "pdm":
        level, inner = params.anneal.locate(t)
        out = langevin_update(x, level, inner, noise, params.anneal, spec.obstacles, params.energy)
    else:
        ep = _episode(noise.seed, fam)
        if fam == "so3":
            out = _rotation_step(x, t, params, noise, spec, ep)
        elif fam == "se3":
            out = _se3_step(x, t, params, noise, spec, ep)
        else:
            out = _terrain_step(x, t, params, noise, spec, ep)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite proposal at step {t}")
    return out


def random_rotation(noise: NoiseStream):
    z = noise.normal(0, 3, INIT)
    angle = math.pi * noise.uniform(0, 1, INIT)[0]
    return geo.exp_so3(angle * z / np.linalg.norm(z))


def initial_state(spec: geo.DomainSpec, noise: NoiseStream):
    """Feasible starting state, fixed by the seed."""
    fam = spec.family
    if fam == "so3":
        return random_rotation(noise)
    if fam == "se3":
        r = random_rotation(noise)
        x = np.empty((3, 4))
        x[:, :3] = r
        x[:, 3] = geo.lever_point(r, spec) if spec.lever else noise.normal(0, 6, INIT)[3:]
        return x
    if fam == "terrain":
        u, v = 0.3 * noise.normal(0, 2, INIT + 1)
        return geo.project_terrain(np.array([u, v, 0.0]), spec.field)
    line = straight_line(spec.start, spec.goal, spec.waypoints)
    return geo.project(line, spec)
