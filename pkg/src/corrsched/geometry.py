"""Constraint sets: projection, defect and state distance per domain.

State layouts used throughout the package:

    so3, so3-impulse          (3, 3) ambient matrix
    se3, se3-lever            (3, 4) matrix ``[A | p]``
    terrain, terrain-ridge    (3,) array ``(u, v, z)``
    pdm-lite                  (W, 2) waypoint array
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from corrsched.pdm_lite import ObstacleSet, project_trajectory, trajectory_defect

DOMAINS = (
    "so3",
    "se3",
    "terrain",
    "so3-impulse",
    "se3-lever",
    "terrain-ridge",
    "pdm-lite",
)
SYNTHETIC_DOMAINS = DOMAINS[:6]
VOLATILE_PAIRS = {"so3-impulse": "so3", "se3-lever": "se3", "terrain-ridge": "terrain"}

MANIFOLD_TOL = 1e-8
_EYE = np.eye(3)


class DegenerateStateError(ValueError):
    """Raised for non-finite or rank-deficient states that cannot be projected."""


@dataclass(frozen=True)
class HeightField:
    """Smooth terrain ``f(u, v) = A sin(w u) cos(w v) + A_r exp(-k (u - c(v))^2)``.

    The ridge centre line is ``c(v) = c0 + c1 sin(wc v)``.
    """

    amplitude: float = 0.5
    frequency: float = 1.0
    ridge_amplitude: float = 0.0
    ridge_sharpness: float = 0.0
    ridge_offset: float = 0.0
    ridge_bend: float = 0.0
    ridge_bend_freq: float = 0.0

    def _centre(self, v):
        return self.ridge_offset + self.ridge_bend * np.sin(self.ridge_bend_freq * v)

    def __call__(self, u, v):
        w = self.frequency
        z = self.amplitude * np.sin(w * u) * np.cos(w * v)
        if self.ridge_amplitude != 0.0:
            du = u - self._centre(v)
            z = z + self.ridge_amplitude * np.exp(-self.ridge_sharpness * du * du)
        return z

    def grad(self, u, v):
        """Analytic ``(df/du, df/dv)``."""
        w = self.frequency
        fu = self.amplitude * w * np.cos(w * u) * np.cos(w * v)
        fv = -self.amplitude * w * np.sin(w * u) * np.sin(w * v)
        if self.ridge_amplitude != 0.0:
            du = u - self._centre(v)
            g = self.ridge_amplitude * np.exp(-self.ridge_sharpness * du * du)
            dc = self.ridge_bend * self.ridge_bend_freq * np.cos(self.ridge_bend_freq * v)
            fu = fu - 2.0 * self.ridge_sharpness * du * g
            fv = fv + 2.0 * self.ridge_sharpness * du * dc * g
        return fu, fv


@dataclass(frozen=True)
class DomainSpec:
    domain: str
    alpha: float = 1.0
    field: HeightField = field(default_factory=HeightField)
    lever_length: float = 0.0
    lever_anchor: tuple[float, float, float] = (0.0, 0.0, 0.0)
    obstacles: ObstacleSet | None = None
    waypoints: int = 32
    start: tuple[float, float] = (0.0, 0.0)
    goal: tuple[float, float] = (10.0, 0.0)

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.domain == "pdm-lite" and self.obstacles is None:
            raise ValueError("pdm-lite needs an obstacle set")

    @property
    def family(self) -> str:
        if self.domain.startswith("so3"):
            return "so3"
        if self.domain.startswith("se3"):
            return "se3"
        if self.domain.startswith("terrain"):
            return "terrain"
        return "pdm"

    @property
    def lever(self) -> bool:
        return self.domain == "se3-lever"


def _check_finite(x):
    x = np.asarray(x, dtype=float)
    # a finite sum is a cheap sufficient check; fall back on overflow
    if not math.isfinite(x.sum()) and not np.all(np.isfinite(x)):
        raise DegenerateStateError("non-finite state")
    return x


def det3(a) -> float:
    """Determinant of a 3x3 matrix by cofactor expansion."""
    return float(
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )


# --- SO(3) -----------------------------------------------------------------


def hat(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def vee(m):
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def exp_so3(w):
    """Rodrigues formula for the rotation with axis-angle vector ``w``."""
    w = np.asarray(w, dtype=float)
    theta = math.sqrt(float(w @ w))
    k = hat(w)
    if theta < 1e-12:
        return _EYE + k
    return _EYE + (math.sin(theta) / theta) * k + ((1.0 - math.cos(theta)) / theta**2) * (k @ k)


def project_so3(a):
    """Nearest rotation in Frobenius norm (polar factor with det fixed to +1)."""
    a = _check_finite(a)
    u, s, vt = np.linalg.svd(a)
    if s[-1] <= 1e-12:
        raise DegenerateStateError(f"rank-deficient matrix (sigma_min={s[-1]:.3g})")
    r = u @ vt
    if det3(r) < 0:
        # singular values come sorted, so the last column pairs with sigma_min
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


def defect_so3(a) -> float:
    a = _check_finite(a)
    g = a.T @ a - _EYE
    return float(math.sqrt(float(np.sum(g * g))) + abs(det3(a) - 1.0))


def orthogonality_error(r) -> float:
    g = r.T @ r - _EYE
    return float(math.sqrt(float(np.sum(g * g))) + abs(det3(r) - 1.0))


def dist_so3(r1, r2, checked: bool = True) -> float:
    """Geodesic angle between two rotations, in [0, pi].

    ``checked=False`` skips the membership test for callers that have just
    projected both arguments.
    """
    r1 = _check_finite(r1)
    r2 = _check_finite(r2)
    if checked and (orthogonality_error(r1) > MANIFOLD_TOL or orthogonality_error(r2) > MANIFOLD_TOL):
        raise ValueError("dist_so3 needs rotations; project first")
    m = r1.T @ r2
    c = (np.trace(m) - 1.0) / 2.0
    c = min(1.0, max(-1.0, c))
    s = 0.5 * math.sqrt((m[2, 1] - m[1, 2]) ** 2 + (m[0, 2] - m[2, 0]) ** 2 + (m[1, 0] - m[0, 1]) ** 2)
    return math.atan2(s, c)


# --- SE(3) -----------------------------------------------------------------


def lever_point(r, spec: DomainSpec):
    return spec.lever_length * r[:, 0] + np.asarray(spec.lever_anchor, dtype=float)


def project_se3(p, spec: DomainSpec | None = None):
    p = _check_finite(p)
    out = np.empty((3, 4))
    out[:, :3] = project_so3(p[:, :3])
    if spec is not None and spec.lever:
        out[:, 3] = lever_point(out[:, :3], spec)
    else:
        out[:, 3] = p[:, 3]
    return out


def translation_violation(p, spec: DomainSpec) -> float:
    """Distance of the translation from the lever-arm point (0 off the lever domain)."""
    if not spec.lever:
        return 0.0
    r = project_so3(p[:, :3])
    return float(np.linalg.norm(p[:, 3] - lever_point(r, spec)))


def defect_se3(p, spec: DomainSpec) -> float:
    p = _check_finite(p)
    return defect_so3(p[:, :3]) + spec.alpha * translation_violation(p, spec)


def dist_se3(p1, p2, spec: DomainSpec, checked: bool = True) -> float:
    p1 = _check_finite(p1)
    p2 = _check_finite(p2)
    return dist_so3(p1[:, :3], p2[:, :3], checked) + spec.alpha * float(np.linalg.norm(p1[:, 3] - p2[:, 3]))


# --- terrain ---------------------------------------------------------------


def project_terrain(pt, field: HeightField):
    pt = _check_finite(pt)
    return np.array([pt[0], pt[1], field(pt[0], pt[1])])


def defect_terrain(pt, field: HeightField) -> float:
    pt = _check_finite(pt)
    return float(abs(pt[2] - field(pt[0], pt[1])))


# --- dispatch --------------------------------------------------------------


def project(x, spec: DomainSpec):
    fam = spec.family
    if fam == "so3":
        return project_so3(x)
    if fam == "se3":
        return project_se3(x, spec)
    if fam == "terrain":
        return project_terrain(x, spec.field)
    return project_trajectory(_check_finite(x), spec.obstacles)


def defect_generic(x, spec: DomainSpec) -> float:
    fam = spec.family
    if fam == "so3":
        return defect_so3(x)
    if fam == "se3":
        return defect_se3(x, spec)
    if fam == "terrain":
        return defect_terrain(x, spec.field)
    return trajectory_defect(_check_finite(x), spec.obstacles)


defect = defect_generic


def distance(x, y, spec: DomainSpec, checked: bool = True) -> float:
    """Domain metric. SO(3)/SE(3) arguments must already be on the manifold."""
    fam = spec.family
    if fam == "so3":
        return dist_so3(x, y, checked)
    if fam == "se3":
        return dist_se3(x, y, spec, checked)
    return float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))


def measurable(x, spec: DomainSpec):
    """Map a state to where ``distance`` is defined (projects SO(3)/SE(3) blocks only)."""
    if spec.family in ("so3", "se3"):
        return project(x, spec)
    return np.asarray(x, dtype=float)
