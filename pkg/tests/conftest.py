from pathlib import Path

import numpy as np
import pytest

from contactsafe.model import load_model

DATA = Path(__file__).resolve().parents[1] / "src" / "contactsafe" / "data"
SCENARIOS = DATA / "scenarios"
READY = np.array([0.0, -0.3, 0.0, -2.2, 0.0, 2.0, np.pi / 4])


@pytest.fixture(scope="session")
def panda():
    return load_model(DATA / "panda7.json")


@pytest.fixture(scope="session")
def planar():
    return load_model(DATA / "planar2.json")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def com_jacobian_oracle(model, q):
    """Mass matrix and gravity torque from per-link COM Jacobians (no spatial algebra)."""
    from contactsafe.model import frames, point_jacobian

    fr = frames(model, q)
    M = np.zeros((model.n, model.n))
    g = np.zeros(model.n)
    for i, link in enumerate(model.links):
        c = fr.point(i, link.com)
        J = point_jacobian(fr, i, c)
        Jv, Jw = J[:3], J[3:]
        I_world = fr.R[i] @ link.inertia @ fr.R[i].T
        M += link.mass * Jv.T @ Jv + Jw.T @ I_world @ Jw
        g -= link.mass * Jv.T @ model.gravity
    return M, g
