"""Generalized-momentum observer for external joint torques on the arm.

The residual obeys ``d(gamma)/dt = K_I (tau_ext - gamma)`` for an exact model,
where ``tau_ext`` is the torque the environment exerts on the joints. Torques
explained by the measured end-effector wrench are removed so the residual
only reflects contacts elsewhere on the arm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import Dynamics, RobotModel, dynamics, ee_position, frames, point_jacobian, spatial_inertias
from . import _kernels as _k

DEFAULT_GAIN = 1.5
DEFAULT_THRESHOLD = 1.5
DEFAULT_CUTOFF_HZ = 20.0
MDOT_EPS = 1e-7


@dataclass(frozen=True)
class ObserverState:
    K_I: np.ndarray
    delta: float = DEFAULT_THRESHOLD
    cutoff: float = DEFAULT_CUTOFF_HZ
    dt: float = 1e-3
    acc: np.ndarray | None = None
    p0: np.ndarray | None = None
    gamma: np.ndarray | None = None
    gamma_f: np.ndarray | None = None
    # integrand terms evaluated at the previous sample
    _beta: np.ndarray | None = None
    _Jt: np.ndarray | None = None

    def __post_init__(self):
        K = np.asarray(self.K_I, float)
        if K.ndim != 1 or np.any(K <= 0):
            raise ValueError("K_I must be a positive diagonal")
        if self.delta <= 0:
            raise ValueError("threshold delta must be > 0")
        object.__setattr__(self, "K_I", K)

    @classmethod
    def create(cls, n: int, K_I=DEFAULT_GAIN, delta: float = DEFAULT_THRESHOLD,
               cutoff: float = DEFAULT_CUTOFF_HZ, dt: float = 1e-3) -> "ObserverState":
        K = np.broadcast_to(np.asarray(K_I, float), (n,)).copy()
        z = np.zeros(n)
        return cls(K, float(delta), float(cutoff), float(dt), gamma=z, gamma_f=z.copy())

    @property
    def started(self) -> bool:
        return self.p0 is not None

    @property
    def alpha(self) -> float:
        return 1.0 - math.exp(-2.0 * math.pi * self.cutoff * self.dt)


@dataclass(frozen=True)
class ContactInfo:
    link: int  # counted from the base: link k is moved by joint index k - 1
    gamma_f: np.ndarray
    time: float


def mdot_qd(model: RobotModel, dyn: Dynamics) -> np.ndarray:
    """``Mdot qd`` by a forward difference of the mass matrix along ``qd``."""
    if not np.any(dyn.qd):
        return np.zeros(model.n)
    fr = frames(model, dyn.q + MDOT_EPS * dyn.qd)
    M_eps = _k.crba_kernel(fr.S, spatial_inertias(model, fr))
    return (M_eps - dyn.M) @ dyn.qd / MDOT_EPS


def beta_hat(model: RobotModel, dyn: Dynamics) -> np.ndarray:
    """``g + C qd - Mdot qd``; with ``p = M qd``, ``pdot = tau + tau_ext - beta``."""
    return dyn.h - mdot_qd(model, dyn)


def observer_update(state: ObserverState, model: RobotModel, q, qd, tau_m, F_eff,
                    dyn: Dynamics | None = None) -> ObserverState:
    """Advance the residual by one sample.

    ``tau_m`` and ``F_eff`` are the torque applied and the end-effector wrench
    measured over the interval that ends at this sample. They are integrated
    with the momentum-rate terms stored at the previous sample (explicit
    Euler), then ``gamma = K_I (M qd - integral - p0)``. The first call only
    latches ``p0``.
    """
    q = np.asarray(q, float)
    qd = np.asarray(qd, float)
    if q.shape != (model.n,) or qd.shape != (model.n,) or state.K_I.shape != (model.n,):
        raise ValueError(f"observer expects {model.n}-vectors")
    dyn = dyn or dynamics(model, q, qd)
    p = dyn.M @ qd
    beta = beta_hat(model, dyn)
    Jt = point_jacobian(dyn.fr, model.ee_parent, ee_position(model, dyn.fr))

    if not state.started:
        z = np.zeros(model.n)
        return replace(state, acc=z, p0=p, gamma=z.copy(), gamma_f=z.copy(), _beta=beta, _Jt=Jt)

    tau = np.asarray(tau_m, float)
    wrench = np.asarray(getattr(F_eff, "wrench", F_eff), float)
    if tau.shape != (model.n,) or wrench.shape != (6,):
        raise ValueError("tau_m must be an n-vector and F_eff a 6-vector wrench")
    acc = state.acc + (tau + state._Jt.T @ wrench - state._beta + state.gamma) * state.dt
    gamma = state.K_I * (p - acc - state.p0)
    return replace(state, acc=acc, gamma=gamma, _beta=beta, _Jt=Jt)


def lowpass(state: ObserverState, gamma) -> np.ndarray:
    """First-order IIR step of the filtered residual toward ``gamma``."""
    return state.gamma_f + state.alpha * (np.asarray(gamma, float) - state.gamma_f)


def detect_contact(gamma_f, delta: float, time: float) -> ContactInfo | None:
    """Contact on the most distal link whose residual magnitude exceeds ``delta``."""
    above = np.flatnonzero(np.abs(np.asarray(gamma_f)) > delta)
    if above.size == 0:
        return None
    return ContactInfo(int(above[-1]) + 1, np.array(gamma_f, float), float(time))
