"""Policy interface over Cartesian impedance increments, with scripted stand-ins.

A policy sees the end-effector pose and a summary of the ink board and returns
an :class:`ActionIncrement`: increments of the equilibrium pose and of the
diagonal stiffness and damping. Any object with a ``step(obs)`` method works.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np
from scipy.spatial.transform import Rotation

from .control import Target

POLICY_PERIOD = 16  # control ticks per policy tick (62.5 Hz at 1 kHz)


@dataclass(frozen=True)
class Bounds:
    k_pos: tuple[float, float] = (10.0, 1500.0)
    k_rot: tuple[float, float] = (1.0, 100.0)
    d: tuple[float, float] = (1.0, 100.0)
    step_pos: float = 0.005
    step_rot: float = 0.02
    step_k: float = 50.0
    step_d: float = 5.0

    @classmethod
    def from_dict(cls, data: dict | None) -> "Bounds":
        data = dict(data or {})
        for key in ("k_pos", "k_rot", "d"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def k_range(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self.k_pos[0]] * 3 + [self.k_rot[0]] * 3)
        hi = np.array([self.k_pos[1]] * 3 + [self.k_rot[1]] * 3)
        return lo, hi


def _clip_norm(v: np.ndarray, limit: float) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    return v * (limit / norm) if norm > limit else v


@dataclass(frozen=True)
class ActionIncrement:
    dx: np.ndarray = field(default_factory=lambda: np.zeros(6))
    dK: np.ndarray = field(default_factory=lambda: np.zeros(6))
    dD: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def clamped(self, bounds: Bounds) -> "ActionIncrement":
        dx = np.concatenate([_clip_norm(np.asarray(self.dx[:3], float), bounds.step_pos),
                             _clip_norm(np.asarray(self.dx[3:], float), bounds.step_rot)])
        return ActionIncrement(dx, np.clip(self.dK, -bounds.step_k, bounds.step_k),
                               np.clip(self.dD, -bounds.step_d, bounds.step_d))


@dataclass(frozen=True)
class PolicyObservation:
    ee_position: np.ndarray
    ee_quat: np.ndarray
    wiped_fraction: float
    time: float
    board_vector: np.ndarray  # EE -> nearest ink still on the board, zeros when clean
    remaining: np.ndarray | None = None  # (rows, cols) mask of ink still on the board


class Policy(Protocol):
    def step(self, obs: PolicyObservation) -> ActionIncrement: ...


def apply_action(target: Target, inc: ActionIncrement, bounds: Bounds = Bounds()) -> Target:
    """Integrate a (clamped) increment into the impedance target."""
    inc = inc.clamped(bounds)
    position = target.position + inc.dx[:3]
    quat = target.quat
    if np.any(inc.dx[3:]):
        quat = (Rotation.from_rotvec(inc.dx[3:]) * Rotation.from_quat(target.quat)).as_quat()
    k_lo, k_hi = bounds.k_range()
    K = np.clip(target.K + inc.dK, k_lo, k_hi)
    D = np.clip(target.D + inc.dD, *bounds.d)
    return Target(position, quat, K, D)


class HoldPolicy:
    def step(self, obs: PolicyObservation) -> ActionIncrement:
        return ActionIncrement()


class WipePolicy:
    """Boustrophedon sweep over the inked cells with the pad pressed into the table.

    The equilibrium moves toward the first cell (in sweep order) that is still
    inked and waits there until the pad has wiped it.
    """

    def __init__(self, x_d, centers: np.ndarray, inked: np.ndarray, table_height: float,
                 press_depth: float = 0.003, step: float = 0.003, descend_step: float = 0.002,
                 touch_step: float = 0.0003, touch_band: float = 0.005):
        self.x_d = np.array(x_d, float)
        self.table_z = table_height
        self.press_z = table_height - press_depth
        self.touch_step = touch_step
        self.touch_band = touch_band
        self.step_xy = step
        self.step_z = descend_step
        rows, cols = inked.shape
        order = []
        for i in range(rows):
            js = range(cols) if i % 2 == 0 else range(cols - 1, -1, -1)
            order.extend((i, j) for j in js if inked[i, j])
        self.order = order
        self.centers = centers

    def next_cell(self, remaining: np.ndarray | None):
        for cell in self.order:
            if remaining is None or remaining[cell]:
                return cell
        return None

    def step(self, obs: PolicyObservation) -> ActionIncrement:
        cell = self.next_cell(obs.remaining)
        if cell is None:
            return ActionIncrement()
        goal = np.array([*self.centers[cell], self.press_z])
        delta = goal - self.x_d
        near = self.x_d[2] - self.table_z < self.touch_band
        vz = self.touch_step if near else self.step_z
        dz = np.clip(delta[2], -vz, vz)
        # touch down first, then sweep; landing while moving sideways spikes the force
        dxy = _clip_norm(delta[:2], self.step_xy) if abs(delta[2]) < 1e-9 else np.zeros(2)
        move = np.array([dxy[0], dxy[1], dz])
        self.x_d = self.x_d + move
        return ActionIncrement(np.concatenate([move, np.zeros(3)]))


class MisledPolicy:
    """Wraps a policy and, from ``trigger`` on, drives the equilibrium sideways.

    This emulates a policy confused by an unseen object: it keeps commanding
    motion in ``direction`` (a world vector) by ``step`` per policy tick until
    ``travel`` metres have been covered (unbounded when ``travel`` is None).
    """

    def __init__(self, inner: Policy, trigger: float, direction, step: float = 0.002,
                 travel: float | None = None):
        d = np.asarray(direction, float)
        self.inner = inner
        self.trigger = float(trigger)
        self.direction = d / np.linalg.norm(d)
        self.step_len = float(step)
        self.travel = travel
        self.covered = 0.0

    def step(self, obs: PolicyObservation) -> ActionIncrement:
        if obs.time < self.trigger:
            return self.inner.step(obs)
        if self.travel is not None and self.covered >= self.travel - 1e-12:
            return ActionIncrement()
        length = self.step_len
        if self.travel is not None:
            length = min(length, self.travel - self.covered)
        self.covered += length
        return ActionIncrement(np.concatenate([self.direction * length, np.zeros(3)]))


def make_policy(spec: dict, x_d, board=None, table_height: float | None = None) -> Policy:
    """Build a scripted policy from its scenario description."""
    kind = spec.get("type", "hold")
    if kind == "hold":
        return HoldPolicy()
    if kind == "wipe":
        if board is None or table_height is None:
            raise ValueError("wipe policy needs an ink board and a table")
        return WipePolicy(x_d, board.centers, board.inked, table_height,
                          press_depth=spec.get("press_depth", 0.003),
                          step=spec.get("step", 0.003),
                          descend_step=spec.get("descend_step", 0.002),
                          touch_step=spec.get("touch_step", 0.0003))
    if kind == "misled":
        inner_spec = spec.get("before", {"type": "hold"})
        inner = make_policy(inner_spec, x_d, board, table_height)
        return MisledPolicy(inner, spec.get("trigger", 1.0), spec.get("direction", [0, 1, 0]),
                            step=spec.get("step", 0.002), travel=spec.get("travel"))
    raise ValueError(f"unknown policy type {kind!r}")
