import math

import numpy as np
import pytest
from dataclasses import replace

from contactsafe.model import dynamics, forward_kinematics, jacobian
from contactsafe.observer import ObserverState, detect_contact, lowpass, observer_update
from contactsafe.sim import FTReading, Table, ee_normal_force, make_world, step

from conftest import READY


def step_response(model, K_I, joint=3, seconds=1.0, dt=1e-3):
    """Unit external torque on one joint, cancelled by the command so the arm stays put.

    The observer only sees the command, so its residual must rise as
    ``1 - exp(-K_I t)`` toward the hidden torque.
    """
    tau_ext = np.zeros(model.n)
    tau_ext[joint] = 1.0
    obs = ObserverState.create(model.n, K_I=K_I, dt=dt)
    q, qd = READY.copy(), np.zeros(model.n)
    tau_prev = np.zeros(model.n)
    out = []
    for _ in range(int(round(seconds / dt)) + 1):
        d = dynamics(model, q, qd)
        obs = observer_update(obs, model, q, qd, tau_prev, np.zeros(6), d)
        out.append(obs.gamma[joint])
        tau_prev = d.g - tau_ext
        qdd = d.Minv @ (tau_prev + tau_ext - d.h)
        qd = qd + dt * qdd
        q = q + dt * qd
    return np.array(out)


def test_unit_step_matches_first_order_response(panda):
    g = step_response(panda, 1.5)
    expected = 1.0 - math.exp(-1.5)  # 0.7769
    assert g[-1] == pytest.approx(expected, rel=0.01)
    assert g[0] == 0.0


def test_larger_gain_converges_faster(panda):
    ends = [step_response(panda, k, seconds=0.3)[-1] for k in (1.5, 5.0, 20.0)]
    assert ends[0] < ends[1] < ends[2]
    for k, e in zip((1.5, 5.0, 20.0), ends):
        assert e == pytest.approx(1.0 - math.exp(-k * 0.3), rel=0.02)


def test_residual_stays_zero_without_external_torque(panda, rng):
    obs = ObserverState.create(7, K_I=10.0)
    world = make_world(panda, READY, 0.2 * rng.standard_normal(7))
    tau = np.zeros(7)
    ft = FTReading(np.zeros(6))
    peak = 0.0
    for _ in range(1000):
        d = dynamics(panda, world.q, world.qd)
        obs = observer_update(obs, panda, world.q, world.qd, tau, ft, d)
        peak = max(peak, np.abs(obs.gamma).max())
        # computed-torque PD tracking a slow sinusoid
        q_ref = READY + 0.3 * np.sin(2 * np.pi * world.time * np.arange(1, 8) / 4)
        tau = d.h + d.M @ (100 * (q_ref - world.q) - 20 * world.qd)
        world, ft, _ = step(world, tau, d)
    assert np.abs(world.q - READY).max() > 0.1  # it did move
    assert peak < 0.05


def test_end_effector_wrench_is_cancelled(panda):
    q0 = np.array([0, -0.0077, 0, -2.4458, 0, 2.5381, 0.7854])  # pad pointing down
    ee = forward_kinematics(panda, q0).position
    world = make_world(panda, q0, table=Table([0, 0, ee[2] + 0.002], [0, 0, 1]))
    obs = ObserverState.create(7, K_I=10.0)
    tau, ft = np.zeros(7), FTReading(np.zeros(6))
    peak = 0.0
    for _ in range(500):
        d = dynamics(panda, world.q, world.qd)
        obs = observer_update(obs, panda, world.q, world.qd, tau, ft, d)
        peak = max(peak, np.abs(obs.gamma).max())
        # press the pad down with 5 N through the Jacobian, joint damping for rest
        J = jacobian(panda, world.q)
        tau = d.g + J.T @ np.array([0, 0, -5.0, 0, 0, 0]) - 2.0 * d.qd
        world, ft, recs = step(world, tau, d)
    assert ee_normal_force(panda, recs) == pytest.approx(5.0, rel=0.05)
    assert peak < 0.15


def test_first_update_latches_momentum(panda):
    obs = ObserverState.create(7)
    assert not obs.started
    obs = observer_update(obs, panda, READY, np.ones(7), np.zeros(7), np.zeros(6))
    assert obs.started
    assert np.allclose(obs.p0, dynamics(panda, READY, np.ones(7)).M @ np.ones(7))
    assert not np.any(obs.gamma)


def test_shape_errors(panda):
    obs = ObserverState.create(7)
    with pytest.raises(ValueError):
        observer_update(obs, panda, READY[:3], np.zeros(3), np.zeros(7), np.zeros(6))
    obs = observer_update(obs, panda, READY, np.zeros(7), np.zeros(7), np.zeros(6))
    with pytest.raises(ValueError):
        observer_update(obs, panda, READY, np.zeros(7), np.zeros(7), np.zeros(3))


@pytest.mark.parametrize("kw", [{"K_I": 0.0}, {"K_I": -1.0}, {"delta": 0.0}])
def test_bad_parameters(kw):
    with pytest.raises(ValueError):
        ObserverState.create(7, **kw)


def test_lowpass_coefficient():
    s = ObserverState.create(1, cutoff=20.0, dt=1e-3)
    alpha = 1 - math.exp(-2 * math.pi * 20 * 1e-3)
    assert s.alpha == pytest.approx(alpha)
    y = np.zeros(1)
    for _ in range(200):
        y = lowpass(replace(s, gamma_f=y), np.ones(1))
    assert y[0] == pytest.approx(1 - (1 - alpha) ** 200)


def test_detect_picks_most_distal_joint():
    info = detect_contact(np.array([3.0, 0, -2.0, 0.1, 0, 0, 0]), 1.5, 0.25)
    assert info.link == 3 and info.time == 0.25
    assert detect_contact(np.full(7, 1.5), 1.5, 0.0) is None  # strict threshold
