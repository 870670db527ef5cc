import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from corrsched import geometry as geo
from corrsched import oracles
from tests.conftest import rz

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
mat3 = arrays(np.float64, (3, 3), elements=finite)
pose = arrays(np.float64, (3, 4), elements=finite)
LEVER = geo.DomainSpec("se3-lever", lever_length=2.0, lever_anchor=(0.5, -1.0, 0.0))


def well_conditioned(a):
    return np.linalg.svd(a, compute_uv=False)[-1] > 1e-3


# --- SO(3) ------------------------------------------------------------------


def test_project_so3_identity_and_scaling():
    assert np.allclose(geo.project_so3(np.eye(3)), np.eye(3), atol=1e-15)
    assert np.allclose(geo.project_so3(2 * np.eye(3)), np.eye(3), atol=1e-15)


def test_project_so3_reflection_gets_proper_rotation():
    a = np.diag([1.0, 1.0, -1.0]) + 0.01
    r = geo.project_so3(a)
    assert geo.det3(r) == pytest.approx(1.0, abs=1e-12)


def test_project_so3_matches_grid_oracle():
    grid = oracles.RotationGrid(0.05)
    bound = math.sqrt(2) * oracles.grid_half_diagonal(0.05)
    rng = np.random.default_rng(11)
    for _ in range(15):
        a = rng.normal(size=(3, 3))
        f = np.linalg.norm(a - geo.project_so3(a))
        fg = np.linalg.norm(a - grid.nearest(a))
        assert f <= fg + 1e-12
        assert fg - f <= bound


@pytest.mark.parametrize("bad", [np.zeros((3, 3)), np.array([[1, 0, 0], [0, 1, 0], [0, 0, 0.0]]),
                                 np.full((3, 3), np.nan)])
def test_project_so3_degenerate(bad):
    with pytest.raises(geo.DegenerateStateError):
        geo.project_so3(bad)


def test_defect_so3_examples():
    assert geo.defect_so3(np.eye(3)) == 0.0
    assert geo.defect_so3(2 * np.eye(3)) == pytest.approx(3 * math.sqrt(3) + 7, abs=1e-12)
    assert 3 * math.sqrt(3) + 7 == pytest.approx(12.1962, abs=1e-4)


@given(mat3)
def test_projection_is_feasible_and_idempotent(a):
    if not well_conditioned(a):
        return
    r = geo.project_so3(a)
    assert geo.defect_so3(r) <= 1e-9
    assert np.allclose(geo.project_so3(r), r, atol=1e-12)


def test_projection_feasible_on_many_samples():
    rng = np.random.default_rng(5)
    worst = max(geo.defect_so3(geo.project_so3(rng.normal(size=(3, 3)) * rng.uniform(0.1, 10)))
                for _ in range(10_000))
    assert worst <= 1e-9


def test_dist_so3_examples():
    assert geo.dist_so3(np.eye(3), np.eye(3)) == 0.0
    assert geo.dist_so3(np.eye(3), rz(math.pi)) == pytest.approx(math.pi, abs=1e-12)
    rng = np.random.default_rng(3)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    r = oracles.rotation_from_vector(0.3 * axis)
    assert geo.dist_so3(np.eye(3), r) == pytest.approx(0.3, abs=1e-9)


def test_dist_so3_rejects_off_manifold():
    with pytest.raises(ValueError):
        geo.dist_so3(np.eye(3), 2 * np.eye(3))


@given(mat3, mat3, mat3)
def test_dist_so3_metric_axioms(a, b, c):
    if not all(map(well_conditioned, (a, b, c))):
        return
    ra, rb, rc = (geo.project_so3(x) for x in (a, b, c))
    dab = geo.dist_so3(ra, rb)
    assert 0.0 <= dab <= math.pi + 1e-12
    assert dab == pytest.approx(geo.dist_so3(rb, ra), abs=1e-12)
    assert geo.dist_so3(ra, ra) <= 1e-7
    assert dab <= geo.dist_so3(ra, rc) + geo.dist_so3(rc, rb) + 1e-9
    # agrees with the trace formula away from its ill-conditioned ends
    if 1e-3 < dab < math.pi - 1e-3:
        assert dab == pytest.approx(oracles.geodesic_angle(ra, rb), abs=1e-9)


def test_exp_so3_and_hat_vee():
    w = np.array([0.3, -0.2, 0.9])
    assert np.allclose(geo.vee(geo.hat(w)), w)
    r = geo.exp_so3(w)
    assert geo.defect_so3(r) < 1e-12
    assert np.allclose(r, oracles.rotation_from_vector(w), atol=1e-14)


# --- SE(3) ------------------------------------------------------------------


def _pose(r, p):
    x = np.empty((3, 4))
    x[:, :3] = r
    x[:, 3] = p
    return x


def test_project_se3_examples():
    base = geo.DomainSpec("se3")
    x = _pose(np.eye(3), (1, 2, 3))
    assert np.array_equal(geo.project_se3(x, base), x)
    y = geo.project_se3(_pose(2 * np.eye(3), (0, 0, 0)), base)
    assert np.allclose(y, _pose(np.eye(3), (0, 0, 0)))


@given(pose)
def test_project_se3_keeps_translation(p):
    if not well_conditioned(p[:, :3]):
        return
    out = geo.project_se3(p, geo.DomainSpec("se3"))
    assert geo.defect_so3(out[:, :3]) <= 1e-9
    assert np.array_equal(out[:, 3], p[:, 3])


@given(pose)
def test_project_se3_lever_is_feasible(p):
    if not well_conditioned(p[:, :3]):
        return
    out = geo.project_se3(p, LEVER)
    assert geo.defect_se3(out, LEVER) <= 1e-9
    assert np.allclose(geo.project_se3(out, LEVER), out, atol=1e-12)


def test_defect_se3_examples():
    base = geo.DomainSpec("se3")
    assert geo.defect_se3(_pose(np.eye(3), (4, 5, 6)), base) == 0.0
    assert geo.defect_se3(_pose(2 * np.eye(3), (1, 1, 1)), base) == pytest.approx(3 * math.sqrt(3) + 7)
    # feasible rotation, translation off the lever point by delta along a unit direction
    r = rz(0.4)
    delta = 0.37
    p = geo.lever_point(r, LEVER) + delta * np.array([0.0, 0.6, 0.8])
    assert geo.defect_se3(_pose(r, p), LEVER) == pytest.approx(delta, abs=1e-12)


def test_dist_se3_examples():
    a = _pose(np.eye(3), (0, 0, 0))
    assert geo.dist_se3(a, a, geo.DomainSpec("se3")) == 0.0
    assert geo.dist_se3(a, _pose(np.eye(3), (3, 4, 0)), geo.DomainSpec("se3")) == pytest.approx(5.0)
    half = geo.DomainSpec("se3", alpha=0.5)
    assert geo.dist_se3(a, _pose(rz(math.pi), (3, 4, 0)), half) == pytest.approx(math.pi + 2.5)


# --- terrain ----------------------------------------------------------------


def _field_by_hand(u, v, A, w, Ar=0.0, k=0.0, c0=0.0, c1=0.0, wc=0.0):
    centre = c0 + c1 * math.sin(wc * v)
    return A * math.sin(w * u) * math.cos(w * v) + Ar * math.exp(-k * (u - centre) ** 2)


def test_project_terrain_examples():
    flat = geo.HeightField(amplitude=0.0)
    assert np.array_equal(geo.project_terrain(np.array([1.0, 2.0, 3.0]), flat), [1.0, 2.0, 0.0])
    f = geo.HeightField(amplitude=0.7, frequency=1.3, ridge_amplitude=1.5, ridge_sharpness=20.0,
                        ridge_offset=0.8, ridge_bend=0.5, ridge_bend_freq=0.5)
    out = geo.project_terrain(np.array([1.0, 2.0, 99.0]), f)
    want = _field_by_hand(1.0, 2.0, 0.7, 1.3, 1.5, 20.0, 0.8, 0.5, 0.5)
    assert out[:2].tolist() == [1.0, 2.0]
    assert out[2] == pytest.approx(want, abs=1e-14)
    on = np.array([0.3, -0.4, f(0.3, -0.4)])
    assert np.array_equal(geo.project_terrain(on, f), on)


def test_defect_terrain_examples():
    f = geo.HeightField()
    assert geo.defect_terrain(np.array([0.3, 0.2, f(0.3, 0.2)]), f) == 0.0
    assert geo.defect_terrain(np.array([0.3, 0.2, f(0.3, 0.2) + 0.7]), f) == pytest.approx(0.7)
    rng = np.random.default_rng(2)
    for _ in range(50):
        pt = rng.normal(size=3)
        assert geo.defect_terrain(pt, f) == pytest.approx(np.linalg.norm(pt - geo.project_terrain(pt, f)))


def test_height_field_gradient_finite_difference():
    f = geo.HeightField(0.5, 1.0, 1.5, 20.0, 5.0, 0.5, 0.5)
    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(30):
        u, v = rng.uniform(3, 7), rng.uniform(-3, 3)
        fu, fv = f.grad(u, v)
        assert fu == pytest.approx((f(u + h, v) - f(u - h, v)) / (2 * h), rel=1e-6, abs=1e-7)
        assert fv == pytest.approx((f(u, v + h) - f(u, v - h)) / (2 * h), rel=1e-6, abs=1e-7)


# --- dispatch ---------------------------------------------------------------


def test_generic_defect_dispatch():
    rng = np.random.default_rng(9)
    so3 = geo.DomainSpec("so3")
    a = rng.normal(size=(3, 3))
    assert geo.defect(a, so3) == geo.defect_so3(a)
    for spec, x in [(so3, a), (LEVER, rng.normal(size=(3, 4))),
                    (geo.DomainSpec("terrain"), rng.normal(size=3))]:
        assert geo.defect(geo.project(x, spec), spec) <= 1e-9


def test_unknown_domain_rejected():
    with pytest.raises(ValueError):
        geo.DomainSpec("so4")
