"""Contact-aware controller and the mode switch between the two controllers."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .control import Target, TaskSpaceTerms, vic_force
from .observer import ContactInfo

DEGENERATE_CONTACT = 1e-6
DEFAULT_HOLD = 0.05


class Mode(enum.IntEnum):
    FREE_SPACE = 0
    CONTACT_AWARE = 1


@dataclass(frozen=True)
class ControllerMode:
    mode: Mode = Mode.FREE_SPACE
    entered: float = 0.0
    t_c: float = DEFAULT_HOLD

    def __post_init__(self):
        if self.t_c <= 0:
            raise ValueError("t_c must be > 0")


def compensated_task_force(terms: TaskSpaceTerms, target: Target, gamma_f, x=None,
                           xd_vel=None) -> np.ndarray:
    """Impedance force minus the task-space image of the arm-contact residual."""
    return vic_force(terms, target, x, xd_vel) - terms.J_pinv.T @ np.asarray(gamma_f, float)


def contact_aware_projector(N_t: np.ndarray, gamma_f, M: np.ndarray | None = None, *,
                            Minv: np.ndarray | None = None,
                            eps: float = DEGENERATE_CONTACT) -> np.ndarray:
    """Task-consistent projector that also removes the contact direction.

    ``A = gamma^T N_t`` is inverted with the ``M^-1`` weighting; when ``|A|``
    is below ``eps`` the residual lies in the task row space and ``N_t`` is
    returned unchanged. The result depends only on the direction of gamma.
    """
    A = np.asarray(gamma_f, float) @ N_t
    if np.linalg.norm(A) < eps:
        return N_t
    Minv = np.linalg.inv(M) if Minv is None else Minv
    MA = Minv @ A
    s = float(A @ MA)
    # M^-1 is positive definite, so s > 0 whenever |A| >= eps; an additive guard
    # would bias A# (and break idempotence) for small residuals, so only bail out
    if not s > 0:
        return N_t
    A_pinv = MA / s
    return N_t @ (np.eye(N_t.shape[0]) - np.outer(A_pinv, A))


def contact_aware_torque(terms: TaskSpaceTerms, F_tc, N_ct: np.ndarray, gamma_pose) -> np.ndarray:
    return terms.J.T @ F_tc + N_ct.T @ gamma_pose


def switch_mode(mode: ControllerMode, detected: ContactInfo | None, time: float) -> ControllerMode:
    """Enter contact-aware mode on detection; leave only after ``t_c`` without detection."""
    if mode.mode == Mode.FREE_SPACE:
        if detected is not None:
            return ControllerMode(Mode.CONTACT_AWARE, float(time), mode.t_c)
        return mode
    # small tolerance so a hold of exactly t_c is not lost to rounding of tick * dt
    if detected is None and time - mode.entered >= mode.t_c - 1e-12:
        return ControllerMode(Mode.FREE_SPACE, mode.entered, mode.t_c)
    return mode
