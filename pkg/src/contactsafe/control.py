"""Operational-space terms, Cartesian variable impedance and the free-space controller."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .model import (Dynamics, Pose, RobotModel, dynamics, ee_position, ee_rotation, frames,
                    orientation_error, point_jacobian)

# Lambda is regularized only when J M^-1 J^T has an eigenvalue below this.
SINGULAR_EIGENVALUE = 1e-8
LAMBDA_DAMPING = 1e-6
FD_EPS = 1e-7
IK_DAMPING = 1e-3
IK_STEP_CLAMP = 0.2
IK_MAX_ITER = 200
IK_POS_TOL = 1e-4
IK_ROT_TOL = 1e-3
ALL_ROWS = (0, 1, 2, 3, 4, 5)


def dynamically_consistent_inverse(J: np.ndarray, Minv: np.ndarray):
    """Task mass matrix, M^-1-weighted inverse and null-space projector.

    Returns ``(Lambda, J_pinv, N)`` with ``Lambda = (J M^-1 J^T)^-1``,
    ``J_pinv = M^-1 J^T Lambda`` and ``N = I - J_pinv J``.
    """
    A = J @ Minv @ J.T
    A = 0.5 * (A + A.T)
    if np.linalg.eigvalsh(A)[0] < SINGULAR_EIGENVALUE:
        A = A + LAMBDA_DAMPING * np.eye(A.shape[0])
    Lam = np.linalg.inv(A)
    Lam = 0.5 * (Lam + Lam.T)
    J_pinv = Minv @ J.T @ Lam
    N = np.eye(J.shape[1]) - J_pinv @ J
    # one refinement pass: near singular poses rounding leaves J N visibly nonzero
    N = N - J_pinv @ (J @ N)
    return Lam, J_pinv, N


@dataclass(frozen=True)
class TaskSpaceTerms:
    J: np.ndarray
    Lam: np.ndarray
    J_pinv: np.ndarray
    mu: np.ndarray
    p: np.ndarray
    N: np.ndarray
    ee_pos: np.ndarray
    ee_rot: np.ndarray
    ee_vel: np.ndarray  # J qd
    rows: tuple[int, ...] = ALL_ROWS


def task_space_terms(model: RobotModel, q, qd, dyn: Dynamics | None = None,
                     rows: Sequence[int] = ALL_ROWS) -> TaskSpaceTerms:
    """Operational-space quantities of the end-effector task at ``(q, qd)``.

    ``mu = J#^T C qd - Lambda Jdot qd`` with ``Jdot qd`` from a directional
    finite difference of the Jacobian along ``qd``.
    """
    rows = tuple(rows)
    dyn = dyn or dynamics(model, q, qd)
    link = model.ee_parent
    x = ee_position(model, dyn.fr)
    J = point_jacobian(dyn.fr, link, x)[list(rows)]
    Lam, J_pinv, N = dynamically_consistent_inverse(J, dyn.Minv)

    qd = dyn.qd
    if np.any(qd):
        fr_eps = frames(model, dyn.q + FD_EPS * qd)
        J_eps = point_jacobian(fr_eps, link, ee_position(model, fr_eps))[list(rows)]
        jdot_qd = (J_eps - J) @ qd / FD_EPS
    else:
        jdot_qd = np.zeros(len(rows))
    coriolis = dyn.h - dyn.g
    mu = J_pinv.T @ coriolis - Lam @ jdot_qd
    p = J_pinv.T @ dyn.g
    return TaskSpaceTerms(J, Lam, J_pinv, mu, p, N, x, ee_rotation(model, dyn.fr), J @ qd, rows)


@dataclass(frozen=True)
class Target:
    """Equilibrium pose with its (diagonal) stiffness and damping."""

    position: np.ndarray
    quat: np.ndarray
    K: np.ndarray
    D: np.ndarray

    @classmethod
    def from_pose(cls, pose: Pose, K, D) -> "Target":
        return cls(np.array(pose.position, float), np.array(pose.quat, float),
                   np.array(K, float), np.array(D, float))

    @property
    def pose(self) -> Pose:
        return Pose(self.position, self.quat)

    @cached_property
    def rotation(self) -> np.ndarray:
        return Rotation.from_quat(self.quat).as_matrix()


TaskTarget = Target


@dataclass(frozen=True)
class PostureTarget:
    q_pose: np.ndarray
    K: np.ndarray
    D: np.ndarray


def pose_error(target: Target, position, rotation) -> np.ndarray:
    """``[p_d - p; rotvec(R_d R^T)]`` in world coordinates."""
    return np.concatenate([target.position - position, orientation_error(target.rotation, rotation)])


def vic_force(terms: TaskSpaceTerms, target: Target, x: Pose | None = None,
              xd_vel: np.ndarray | None = None) -> np.ndarray:
    """Cartesian variable-impedance force ``Lambda (K e - D xdot) + mu + p``."""
    if x is None:
        err = pose_error(target, terms.ee_pos, terms.ee_rot)
    else:
        err = pose_error(target, x.position, x.rotation)
    vel = terms.ee_vel if xd_vel is None else np.asarray(xd_vel, float)
    rows = list(terms.rows)
    K, D = np.asarray(target.K)[rows], np.asarray(target.D)[rows]
    return terms.Lam @ (K * err[rows] - D * vel) + terms.mu + terms.p


def posture_torque(q, qd, target: PostureTarget) -> np.ndarray:
    return target.K * (target.q_pose - np.asarray(q)) - target.D * np.asarray(qd)


def free_space_torque(terms: TaskSpaceTerms, F_t, gamma_pose) -> np.ndarray:
    return terms.J.T @ F_t + terms.N.T @ gamma_pose


@dataclass(frozen=True)
class IKResult:
    q: np.ndarray
    reachable: bool
    iterations: int
    position_error: float
    rotation_error: float


def inverse_kinematics(model: RobotModel, x_d: Pose | Target, q_seed,
                       max_iter: int = IK_MAX_ITER) -> IKResult:
    """Damped least-squares IK for the end-effector pose, started at ``q_seed``.

    Iterates are clipped to the joint range. When the tolerance is not met
    within ``max_iter`` the best iterate is returned with ``reachable=False``.
    """
    q = np.array(q_seed, dtype=float)
    if q.shape != (model.n,) or not np.all(np.isfinite(q)):
        raise ValueError("IK seed must be a finite vector of joint angles")
    target = x_d if isinstance(x_d, Target) else Target.from_pose(x_d, np.zeros(6), np.zeros(6))
    eye = IK_DAMPING * np.eye(6)
    best = None
    for it in range(max_iter + 1):
        fr = frames(model, q)
        x = ee_position(model, fr)
        err = pose_error(target, x, ee_rotation(model, fr))
        ep, er = float(np.linalg.norm(err[:3])), float(np.linalg.norm(err[3:]))
        if best is None or ep + er < best[1] + best[2]:
            best = (q.copy(), ep, er)
        if ep < IK_POS_TOL and er < IK_ROT_TOL:
            return IKResult(q, True, it, ep, er)
        if it == max_iter:
            break
        J = point_jacobian(fr, model.ee_parent, x)
        dq = J.T @ np.linalg.solve(J @ J.T + eye, err)
        peak = np.abs(dq).max()
        if peak > IK_STEP_CLAMP:
            dq *= IK_STEP_CLAMP / peak
        q = np.clip(q + dq, model.lower, model.upper)
    return IKResult(best[0], False, max_iter, best[1], best[2])
