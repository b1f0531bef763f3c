import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from contactsafe.control import (PostureTarget, Target, dynamically_consistent_inverse,
                                 free_space_torque, inverse_kinematics, posture_torque,
                                 task_space_terms, vic_force)
from contactsafe.model import Pose, dynamics, forward_kinematics, jacobian, random_configuration

from conftest import READY


def test_operational_space_identities(panda, rng):
    for _ in range(20):
        q = random_configuration(panda, rng)
        d = dynamics(panda, q, np.zeros(7))
        J = jacobian(panda, q)
        Lam, Jp, N = dynamically_consistent_inverse(J, d.Minv)
        assert np.allclose(Lam, np.linalg.inv(J @ d.Minv @ J.T), rtol=1e-8)
        assert np.allclose(J @ Jp, np.eye(6), atol=1e-8)
        assert np.allclose(N @ N, N, atol=1e-9)
        assert np.allclose(J @ d.Minv @ N.T, 0, atol=1e-9)


def test_singular_jacobian_is_regularised():
    J = np.array([[1.0, 0.0], [1.0, 0.0]])
    Lam, Jp, N = dynamically_consistent_inverse(J, np.eye(2))
    assert np.all(np.isfinite(Lam))
    assert np.linalg.eigvalsh(Lam).max() < 2e6


def test_task_terms_at_rest_are_gravity_only(panda):
    d = dynamics(panda, READY, np.zeros(7))
    terms = task_space_terms(panda, READY, np.zeros(7), d)
    assert not np.any(terms.mu)
    assert np.allclose(terms.J.T @ terms.p, d.g - terms.N.T @ d.g, atol=1e-9)


def test_mu_matches_projected_bias(panda, rng):
    # task acceleration of the unforced arm: xdd = Jdot qd - J M^-1 h, so Lambda xdd = -(mu + p)
    q = READY + 0.1 * rng.standard_normal(7)
    qd = rng.standard_normal(7)
    d = dynamics(panda, q, qd)
    t = task_space_terms(panda, q, qd, d)
    h = 1e-6
    x = lambda s: forward_kinematics(panda, q + s * qd + 0.5 * s * s * (-d.Minv @ d.h)).position
    xdd = (x(h) - 2 * x(0) + x(-h)) / h**2
    pred = -np.linalg.solve(t.Lam, t.mu + t.p)
    assert np.allclose(xdd, pred[:3], atol=2e-3 * max(1, np.abs(xdd).max()))


def test_vic_force_zero_error_is_feedforward(panda):
    d = dynamics(panda, READY, np.zeros(7))
    t = task_space_terms(panda, READY, np.zeros(7), d)
    pose = forward_kinematics(panda, READY)
    tgt = Target.from_pose(pose, [500] * 3 + [50] * 3, [45] * 3 + [14] * 3)
    assert np.allclose(vic_force(t, tgt), t.mu + t.p, atol=1e-9)


def test_vic_force_spring_direction(panda):
    d = dynamics(panda.with_gravity([0, 0, 0]), READY, np.zeros(7))
    t = task_space_terms(panda, READY, np.zeros(7), d)
    pose = forward_kinematics(panda, READY)
    tgt = Target(pose.position + [0.01, 0, 0], pose.quat, np.full(6, 100.0), np.zeros(6))
    F = vic_force(t, tgt)
    assert np.allclose(F, t.Lam @ np.array([1.0, 0, 0, 0, 0, 0]), atol=1e-9)


def test_posture_torque():
    tgt = PostureTarget(np.ones(3), np.array([1.0, 2, 3]), np.array([0.5, 0.5, 0.5]))
    assert np.allclose(posture_torque(np.zeros(3), np.ones(3), tgt), [0.5, 1.5, 2.5])


def test_null_space_torque_has_no_task_effect(panda, rng):
    d = dynamics(panda, READY, np.zeros(7))
    t = task_space_terms(panda, READY, np.zeros(7), d)
    tau = free_space_torque(t, np.zeros(6), rng.standard_normal(7))
    assert np.allclose(t.J @ d.Minv @ tau, 0, atol=1e-9)


def test_ik_reaches_perturbed_pose(panda, rng):
    q_goal = READY + 0.2 * rng.standard_normal(7)
    goal = forward_kinematics(panda, q_goal)
    res = inverse_kinematics(panda, goal, READY)
    assert res.reachable
    got = forward_kinematics(panda, res.q)
    assert np.linalg.norm(got.position - goal.position) < 1e-4
    rot = Rotation.from_quat(got.quat).inv() * Rotation.from_quat(goal.quat)
    assert rot.magnitude() < 1e-3


def test_ik_unreachable_returns_best(panda):
    res = inverse_kinematics(panda, Pose(np.array([3.0, 0, 0.5]), np.array([0, 0, 0, 1.0])), READY)
    assert not res.reachable
    assert np.all(res.q >= panda.lower) and np.all(res.q <= panda.upper)
    assert res.position_error > 1.0


def test_ik_rejects_bad_seed(panda):
    with pytest.raises(ValueError):
        inverse_kinematics(panda, forward_kinematics(panda, READY), np.full(7, np.nan))
