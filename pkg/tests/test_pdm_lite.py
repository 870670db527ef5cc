import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from corrsched.noise import NoiseStream
from corrsched.pdm_lite import (
    AnnealSchedule,
    ObstacleSet,
    TrajectoryEnergy,
    energy,
    energy_grad,
    langevin_update,
    project_trajectory,
    straight_line,
    trajectory_defect,
)
from corrsched.rollout import run_rollout
from corrsched.scheduling import Schedule

OBS = ObstacleSet(((2.5, 0.25), (5.0, -0.25), (7.5, 0.25)), (0.8, 0.8, 0.8))
OBS0 = ObstacleSet(((2.0, 0.0),), (1.0,), margin=0.0)


def test_obstacles_must_be_disjoint():
    with pytest.raises(ValueError):
        ObstacleSet(((0, 0), (1, 0)), (0.6, 0.6))
    with pytest.raises(ValueError):
        ObstacleSet(((0, 0),), (1.0,), corridor=(-0.5, 0.5))


def test_anneal_schedule():
    a = AnnealSchedule.geometric(levels=4, inner_steps=3, sigma_max=1.0, sigma_min=0.001)
    assert a.horizon == 12
    assert a.locate(7) == (2, 1)
    assert a.sigmas[0] == pytest.approx(1.0) and a.sigmas[-1] == pytest.approx(0.001)
    assert all(x > y for x, y in zip(a.sigmas, a.sigmas[1:]))


def test_energy_gradient_finite_difference():
    rng = np.random.default_rng(0)
    w = TrajectoryEnergy(smoothness=1.3, obstacle_stiffness=40.0)
    traj = straight_line((0, 0), (10, 0), 12) + np.vstack([[0, 0], rng.normal(0, 0.3, (10, 2)), [0, 0]])
    g = energy_grad(traj, OBS, w)
    h = 1e-6
    fd = np.zeros_like(g)
    for i in range(1, len(traj) - 1):
        for j in range(2):
            p, m = traj.copy(), traj.copy()
            p[i, j] += h
            m[i, j] -= h
            fd[i - 1, j] = (energy(p, OBS, w) - energy(m, OBS, w)) / (2 * h)
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-6)


def test_langevin_update_hand_gradient():
    anneal = AnnealSchedule(1, 1, (0.0,), (0.1,))
    traj = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
    out = langevin_update(traj, 0, 0, NoiseStream(0), anneal, OBS0, TrajectoryEnergy(1.0, 0.0))
    # d/dx of 0.5(|x - a|^2 + |b - x|^2) = 2x - a - b = (0, 2)
    assert np.allclose(out, [[0, 0], [1.0, 0.8], [2, 0]])


def test_zero_noise_zero_step_is_identity():
    anneal = AnnealSchedule(2, 2, (0.0, 0.0), (0.0, 0.0))
    traj = np.random.default_rng(1).normal(size=(8, 2))
    for t in range(anneal.horizon):
        k, i = anneal.locate(t)
        assert np.array_equal(langevin_update(traj, k, i, NoiseStream(1), anneal, OBS, TrajectoryEnergy()), traj)


def test_straight_line_is_fixed_point_without_noise():
    anneal = AnnealSchedule(1, 5, (0.0,), (0.3,))
    far = ObstacleSet(((5.0, 3.0),), (1.0,))
    traj = straight_line((0, 0), (10, 0), 16)
    x = traj
    for i in range(5):
        x = langevin_update(x, 0, i, NoiseStream(2), anneal, far, TrajectoryEnergy(1.0, 10.0))
    assert np.allclose(x, traj, atol=1e-12)


def test_projection_examples():
    feasible = straight_line((0, 3), (10, 3), 10)
    assert np.array_equal(project_trajectory(feasible, OBS), feasible)
    assert trajectory_defect(feasible, OBS) == 0.0
    # interior waypoint at depth 0.4 inside a unit circle
    traj = np.array([[0.0, 0.0], [2.0, 0.6], [4.0, 0.0]])
    out = project_trajectory(traj, OBS0)
    assert np.allclose(out[1], [2.0, 1.0])
    assert trajectory_defect(traj, OBS0) == pytest.approx(0.4, abs=1e-9)
    margin = ObstacleSet(((2.0, 0.0),), (1.0,), margin=1e-3)
    assert np.allclose(project_trajectory(traj, margin)[1], [2.0, 1.001])
    assert np.array_equal(project_trajectory(out, OBS0), out)


def test_projection_at_centre_and_endpoints():
    traj = np.array([[2.0, 0.0], [2.0, 0.0], [4.0, 0.0]])
    out = project_trajectory(traj, OBS0)
    assert np.array_equal(out[0], [2.0, 0.0])  # endpoints untouched
    assert np.allclose(out[1], [3.0, 0.0])


interior = arrays(np.float64, (10, 2), elements=st.floats(-2, 12, allow_nan=False))


@given(interior)
def test_projection_idempotent_and_feasible(mid):
    traj = np.vstack([[0.0, 0.0], mid, [10.0, 0.0]])
    once = project_trajectory(traj, OBS)
    assert np.array_equal(project_trajectory(once, OBS), once)
    assert trajectory_defect(once, OBS) == 0.0
    for p in once[1:-1]:
        assert OBS.feasible_point(p)


@given(interior)
def test_defect_is_residual_norm(mid):
    traj = np.vstack([[0.0, 0.0], mid, [10.0, 0.0]])
    res = traj - project_trajectory(traj, OBS)
    assert trajectory_defect(traj, OBS) == pytest.approx(math.sqrt(sum(float(r @ r) for r in res)))


def test_stepwise_rollout_stays_feasible(cfg):
    s = cfg.domain_setup("pdm-lite")
    tr = run_rollout(s.spec, s.params, Schedule.stepwise(s.params.horizon), 30_001)
    assert max(tr.state_defects) <= 1e-9
    assert np.array_equal(tr.states[-1][0], s.spec.start) and np.array_equal(tr.states[-1][-1], s.spec.goal)
