"""Fixed-step torque-level simulation with penalty contacts.

The integrator is semi-implicit Euler at a fixed ``dt``. Contacts are
explicit spring-dampers evaluated at a small set of probe points per link:
a table half-space with Coulomb friction, spheres, and scripted force
pulses. A wipeable ink grid lies on the table.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .model import Dynamics, RobotModel, cross, dynamics, ee_position

TABLE_STIFFNESS = 2.0e4
TABLE_DAMPING = 200.0
TABLE_FRICTION = 0.3
OBSTACLE_STIFFNESS = 5.0e3
OBSTACLE_DAMPING = 50.0
# tangential speed below which Coulomb friction is linearized
FRICTION_SLIP_SPEED = 1e-2
WIPE_FORCE_MIN = 0.5
WIPE_FORCE_MAX = 40.0

KIND_TABLE, KIND_OBSTACLE, KIND_PUSH = "table", "obstacle", "push"


class SimulationDiverged(RuntimeError):
    def __init__(self, tick: int, detail: str = "non-finite state"):
        super().__init__(f"simulation diverged at tick {tick}: {detail}")
        self.tick = tick


@dataclass(frozen=True)
class Table:
    point: np.ndarray
    normal: np.ndarray
    stiffness: float = TABLE_STIFFNESS
    damping: float = TABLE_DAMPING
    friction: float = TABLE_FRICTION

    def __post_init__(self):
        n = np.asarray(self.normal, float)
        object.__setattr__(self, "point", np.asarray(self.point, float))
        object.__setattr__(self, "normal", n / np.linalg.norm(n))
        if self.stiffness <= 0:
            raise ValueError("table stiffness must be > 0")

    @property
    def height(self) -> float:
        return float(self.point @ self.normal)


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    stiffness: float = OBSTACLE_STIFFNESS
    damping: float = OBSTACLE_DAMPING

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, float))
        if self.stiffness <= 0 or self.radius <= 0:
            raise ValueError("sphere stiffness and radius must be > 0")


@dataclass(frozen=True)
class Push:
    """Rectangular force pulse on a link-frame point, active on [start, end)."""

    link: int
    point: np.ndarray
    force: np.ndarray
    start: float
    end: float

    def active(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass(frozen=True)
class InkBoard:
    """Ink grid on a horizontal table rectangle; cell (i, j) is row i along y, column j along x."""

    origin: np.ndarray  # (x, y) of the lower-left corner
    cell: float
    inked: np.ndarray  # (rows, cols) bool
    wiped: np.ndarray  # (rows, cols) bool
    wipe_radius: float = 0.02

    def __post_init__(self):
        if self.inked.ndim != 2 or min(self.inked.shape) < 1:
            raise ValueError("ink grid must be at least 1x1")

    @classmethod
    def blank(cls, origin, cell: float, shape: tuple[int, int], wipe_radius: float = 0.02):
        return cls(np.asarray(origin, float), float(cell), np.zeros(shape, bool),
                   np.zeros(shape, bool), wipe_radius)

    @property
    def centers(self) -> np.ndarray:
        rows, cols = self.inked.shape
        xs = self.origin[0] + (np.arange(cols) + 0.5) * self.cell
        ys = self.origin[1] + (np.arange(rows) + 0.5) * self.cell
        X, Y = np.meshgrid(xs, ys)
        return np.stack([X, Y], axis=-1)

    @property
    def wiped_fraction(self) -> float:
        total = int(self.inked.sum())
        if total == 0:
            return 1.0
        return float((self.inked & self.wiped).sum()) / total

    def remaining(self) -> np.ndarray:
        """Centers of inked cells not yet wiped, shape (k, 2)."""
        return self.centers[self.inked & ~self.wiped]


@dataclass(frozen=True)
class ContactRecord:
    link: int
    point: np.ndarray
    force: np.ndarray
    kind: str
    normal: np.ndarray | None = None

    @property
    def normal_force(self) -> float:
        return 0.0 if self.normal is None else float(self.force @ self.normal)


@dataclass(frozen=True)
class FTReading:
    """Wrench exerted by the environment on the end-effector body, ``[force; torque]``.

    The torque is taken about the end-effector origin, world frame.
    """

    wrench: np.ndarray

    @property
    def force(self) -> np.ndarray:
        return self.wrench[:3]


def default_probes(model: RobotModel) -> list[tuple[int, np.ndarray]]:
    """Tip and midpoint of every link; the end-effector origin is the tip of its parent."""
    probes = []
    _, _, _, _, origin = model._body_arrays()
    for i in range(model.n):
        if i == model.ee_parent:
            tip = model.ee_point
        elif i + 1 < model.n:
            tip = origin[i + 1, :3, 3]
        else:
            tip = np.zeros(3)
        pts = [tip, 0.5 * tip]
        seen = []
        for p in pts:
            if not any(np.allclose(p, s) for s in seen):
                seen.append(np.array(p, float))
        probes.extend((i, p) for p in seen)
    return probes


@dataclass(frozen=True)
class World:
    model: RobotModel
    q: np.ndarray
    qd: np.ndarray
    table: Table | None = None
    obstacles: tuple[Sphere, ...] = ()
    pushes: tuple[Push, ...] = ()
    board: InkBoard | None = None
    probes: tuple[tuple[int, np.ndarray], ...] = ()
    dt: float = 1e-3
    tick: int = 0
    _probe_arrays: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        object.__setattr__(self, "q", np.asarray(self.q, float))
        object.__setattr__(self, "qd", np.asarray(self.qd, float))
        if not self.probes:
            object.__setattr__(self, "probes", tuple(default_probes(self.model)))
        if self._probe_arrays is None:
            links = np.array([p[0] for p in self.probes], dtype=int)
            pts = np.array([p[1] for p in self.probes], dtype=float).reshape(-1, 3)
            object.__setattr__(self, "_probe_arrays", (links, pts))

    @property
    def time(self) -> float:
        return self.tick * self.dt

    @property
    def wiped_fraction(self) -> float:
        return 1.0 if self.board is None else self.board.wiped_fraction


def make_world(model: RobotModel, q, qd=None, **kw) -> World:
    qd = np.zeros(model.n) if qd is None else qd
    kw["probes"] = tuple((int(l), np.asarray(p, float)) for l, p in kw.get("probes", ()))
    kw["obstacles"] = tuple(kw.get("obstacles", ()))
    kw["pushes"] = tuple(kw.get("pushes", ()))
    return World(model, np.array(q, float), np.array(qd, float), **kw)


def contact_forces(world: World, dyn: Dynamics | None = None) -> list[ContactRecord]:
    """Penalty contact forces at the current state, plus active scripted pushes."""
    dyn = dyn or dynamics(world.model, world.q, world.qd)
    fr = dyn.fr
    links, local = world._probe_arrays
    records: list[ContactRecord] = []

    if (world.table is not None or world.obstacles) and len(links):
        P = fr.p[links] + np.einsum("kij,kj->ki", fr.R[links], local)
        V = dyn.spatial_vel[links]
        vel = V[:, 3:] + cross(V[:, :3], P)

        if world.table is not None:
            tb = world.table
            depth = (tb.point - P) @ tb.normal
            for k in np.flatnonzero(depth > 0):
                vn = float(vel[k] @ tb.normal)
                fn = tb.stiffness * depth[k] - tb.damping * vn
                if fn <= 0.0:
                    continue
                vt = vel[k] - vn * tb.normal
                speed = float(np.sqrt(vt @ vt))
                ft = -tb.friction * fn * vt / max(speed, FRICTION_SLIP_SPEED)
                records.append(ContactRecord(int(links[k]), P[k], fn * tb.normal + ft, KIND_TABLE, tb.normal))

        for sph in world.obstacles:
            d = P - sph.center
            dist = np.sqrt(np.einsum("ki,ki->k", d, d))
            for k in np.flatnonzero(dist < sph.radius):
                nrm = d[k] / dist[k] if dist[k] > 0 else np.array([0.0, 0.0, 1.0])
                vn = float(vel[k] @ nrm)
                fn = sph.stiffness * (sph.radius - dist[k]) - sph.damping * vn
                if fn > 0.0:
                    records.append(ContactRecord(int(links[k]), P[k], fn * nrm, KIND_OBSTACLE, nrm))

    t = world.time
    for push in world.pushes:
        if push.active(t):
            records.append(ContactRecord(push.link, fr.point(push.link, push.point),
                                         np.asarray(push.force, float), KIND_PUSH))
    return records


def generalized_contact_torque(dyn: Dynamics, records: Sequence[ContactRecord]) -> np.ndarray:
    """Sum of J_i^T F_i over contact records (point forces, no pure moments)."""
    n = dyn.fr.S.shape[0]
    wrench = np.zeros((n, 6))
    for rec in records:
        wrench[rec.link, :3] += cross(rec.point, rec.force)
        wrench[rec.link, 3:] += rec.force
    total = np.cumsum(wrench[::-1], axis=0)[::-1]
    return np.einsum("ni,ni->n", dyn.fr.S, total)


def ft_reading(model: RobotModel, dyn: Dynamics, records: Sequence[ContactRecord]) -> FTReading:
    ee = ee_position(model, dyn.fr)
    w = np.zeros(6)
    for rec in records:
        if rec.link == model.ee_parent:
            w[:3] += rec.force
            w[3:] += cross(rec.point - ee, rec.force)
    return FTReading(w)


def ee_normal_force(model: RobotModel, records: Sequence[ContactRecord]) -> float:
    return sum(r.normal_force for r in records if r.kind == KIND_TABLE and r.link == model.ee_parent)


def step(world: World, tau_m, dyn: Dynamics | None = None
         ) -> tuple[World, FTReading, list[ContactRecord]]:
    """Advance one tick: qdd = M^-1 (tau - bias + sum J^T F), then semi-implicit Euler.

    Torques are clamped to the model limits. Joints that would leave their
    position range are stopped at the limit.
    """
    model = world.model
    dyn = dyn or dynamics(model, world.q, world.qd)
    tau = np.clip(np.asarray(tau_m, float), -model.torque_limits, model.torque_limits)
    if not np.all(np.isfinite(tau)):
        raise SimulationDiverged(world.tick, "non-finite torque command")
    records = contact_forces(world, dyn)
    tau_c = generalized_contact_torque(dyn, records) if records else 0.0
    qdd = np.linalg.solve(dyn.M, tau - dyn.h + tau_c)
    qd = world.qd + world.dt * qdd
    q = world.q + world.dt * qd
    out = (q < model.lower) | (q > model.upper)
    if out.any():
        q = np.clip(q, model.lower, model.upper)
        qd = np.where(out, 0.0, qd)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
        raise SimulationDiverged(world.tick)
    new = replace(world, q=q, qd=qd, tick=world.tick + 1)
    return new, ft_reading(model, dyn, records), records


def wipe_update(world: World, ee_pos, normal_force: float) -> World:
    """Mark cells within the wipe radius as wiped while the pad presses in (0.5, 40] N."""
    board = world.board
    if board is None or not (WIPE_FORCE_MIN < normal_force <= WIPE_FORCE_MAX):
        return world
    d = board.centers - np.asarray(ee_pos, float)[:2]
    hit = np.einsum("ijk,ijk->ij", d, d) <= board.wipe_radius ** 2
    if not (hit & ~board.wiped).any():
        return world
    return replace(world, board=replace(board, wiped=board.wiped | hit))
