"""Serial-chain kinematics and rigid-body dynamics.

All algorithms work in fixed world coordinates with spatial vectors referred
to the world origin, ordered ``[angular; linear]`` internally. Public
Jacobians are returned ``[linear; angular]``.

Joint ``i`` is placed by a fixed origin transform relative to the frame of
link ``i - 1`` (the base for ``i = 0``) and then rotates about its unit axis.
Link ``i`` is rigidly attached after that rotation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from . import _kernels as _k


class ModelError(ValueError):
    """Raised for malformed or physically invalid robot descriptions."""


@dataclass(frozen=True)
class Joint:
    name: str
    axis: np.ndarray
    origin: np.ndarray  # 4x4 transform parent-link -> joint frame
    position_limits: tuple[float, float]
    velocity_limit: float
    torque_limit: float


@dataclass(frozen=True)
class Link:
    name: str
    mass: float
    com: np.ndarray
    inertia: np.ndarray  # 3x3 about the COM, link frame


@dataclass(frozen=True)
class RobotModel:
    joints: tuple[Joint, ...]
    links: tuple[Link, ...]
    gravity: np.ndarray
    ee_parent: int
    ee_transform: np.ndarray  # 4x4 in the parent link frame
    name: str = "robot"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.joints)

    @property
    def lower(self) -> np.ndarray:
        return self._cached("lower", lambda: np.array([j.position_limits[0] for j in self.joints]))

    @property
    def upper(self) -> np.ndarray:
        return self._cached("upper", lambda: np.array([j.position_limits[1] for j in self.joints]))

    @property
    def torque_limits(self) -> np.ndarray:
        return self._cached("tau", lambda: np.array([j.torque_limit for j in self.joints]))

    @property
    def velocity_limits(self) -> np.ndarray:
        return self._cached("vel", lambda: np.array([j.velocity_limit for j in self.joints]))

    @property
    def ee_point(self) -> np.ndarray:
        """End-effector origin expressed in its parent link frame."""
        return self.ee_transform[:3, 3]

    def with_gravity(self, gravity: Sequence[float]) -> "RobotModel":
        return RobotModel(self.joints, self.links, np.asarray(gravity, float), self.ee_parent,
                          self.ee_transform, self.name)

    def _cached(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    def _body_arrays(self):
        def make():
            mass = np.array([lk.mass for lk in self.links])
            com = np.array([lk.com for lk in self.links])
            inertia = np.array([lk.inertia for lk in self.links])
            axis = np.array([j.axis for j in self.joints])
            origin = np.array([j.origin for j in self.joints])
            return mass, com, inertia, axis, origin

        return self._cached("bodies", make)


@dataclass(frozen=True)
class Pose:
    """World pose; ``quat`` is a unit quaternion in (x, y, z, w) order."""

    position: np.ndarray
    quat: np.ndarray

    @classmethod
    def from_matrix(cls, position, rotation) -> "Pose":
        return cls(np.array(position, float), Rotation.from_matrix(rotation).as_quat())

    @property
    def rotation(self) -> np.ndarray:
        return Rotation.from_quat(self.quat).as_matrix()


# ---------------------------------------------------------------- loading

_TOP_KEYS = {"name", "gravity", "joints", "links", "end_effector"}
_JOINT_KEYS = {"name", "axis", "origin", "limits"}
_ORIGIN_KEYS = {"xyz", "rpy"}
_LIMIT_KEYS = {"position", "velocity", "torque"}
_LINK_KEYS = {"name", "mass", "com", "inertia"}
_EE_KEYS = {"parent", "xyz", "rpy"}


def transform(xyz: Sequence[float], rpy: Sequence[float]) -> np.ndarray:
    """Homogeneous transform from a translation and fixed-axis roll/pitch/yaw."""
    T = np.eye(4)
    T[:3, :3] = Rotation.from_euler("xyz", rpy).as_matrix()
    T[:3, 3] = xyz
    return T


def _vec(value, size: int, where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (size,) or not np.all(np.isfinite(arr)):
        raise ModelError(f"{where}: expected {size} finite numbers, got {value!r}")
    return arr


def _check_keys(obj: Mapping, allowed: set, required: set, where: str) -> None:
    if not isinstance(obj, Mapping):
        raise ModelError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ModelError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ModelError(f"{where}: missing key(s) {sorted(missing)}")


def model_from_dict(data: Mapping[str, Any]) -> RobotModel:
    """Build and validate a :class:`RobotModel` from the JSON schema."""
    _check_keys(data, _TOP_KEYS, _TOP_KEYS - {"name"}, "model")
    gravity = _vec(data["gravity"], 3, "gravity")
    jdata, ldata = data["joints"], data["links"]
    if not isinstance(jdata, list) or not isinstance(ldata, list):
        raise ModelError("model: 'joints' and 'links' must be arrays")
    if not 1 <= len(jdata) <= 16:
        raise ModelError(f"model: chain must have 1..16 joints, got {len(jdata)}")
    if len(ldata) != len(jdata):
        raise ModelError(f"model: {len(jdata)} joints but {len(ldata)} links")

    joints = []
    for i, jd in enumerate(jdata):
        where = f"joints[{i}]"
        _check_keys(jd, _JOINT_KEYS, _JOINT_KEYS, where)
        name = str(jd["name"])
        axis = _vec(jd["axis"], 3, f"{where} ({name}).axis")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ModelError(f"joint '{name}': axis must be unit norm, |axis| = {np.linalg.norm(axis)!r}")
        _check_keys(jd["origin"], _ORIGIN_KEYS, _ORIGIN_KEYS, f"{where}.origin")
        origin = transform(_vec(jd["origin"]["xyz"], 3, f"{where}.origin.xyz"),
                           _vec(jd["origin"]["rpy"], 3, f"{where}.origin.rpy"))
        _check_keys(jd["limits"], _LIMIT_KEYS, _LIMIT_KEYS, f"{where}.limits")
        lo, hi = _vec(jd["limits"]["position"], 2, f"{where}.limits.position")
        vel = float(jd["limits"]["velocity"])
        tau = float(jd["limits"]["torque"])
        if not lo < hi:
            raise ModelError(f"joint '{name}': position limits must satisfy lo < hi")
        if not (vel > 0 and tau > 0):
            raise ModelError(f"joint '{name}': velocity and torque limits must be positive")
        joints.append(Joint(name, axis, origin, (float(lo), float(hi)), vel, tau))

    links = []
    for i, ld in enumerate(ldata):
        where = f"links[{i}]"
        _check_keys(ld, _LINK_KEYS, _LINK_KEYS, where)
        name = str(ld["name"])
        mass = float(ld["mass"])
        if not (np.isfinite(mass) and mass > 0):
            raise ModelError(f"link '{name}': mass must be > 0, got {mass!r}")
        com = _vec(ld["com"], 3, f"link '{name}' com")
        ixx, ixy, ixz, iyy, iyz, izz = _vec(ld["inertia"], 6, f"link '{name}' inertia")
        inertia = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
        if np.linalg.eigvalsh(inertia).min() <= 0:
            raise ModelError(f"link '{name}': inertia must be positive definite")
        links.append(Link(name, mass, com, inertia))

    ee = data["end_effector"]
    _check_keys(ee, _EE_KEYS, _EE_KEYS, "end_effector")
    names = [lk.name for lk in links]
    if ee["parent"] not in names:
        raise ModelError(f"end_effector: unknown parent link {ee['parent']!r}")
    ee_T = transform(_vec(ee["xyz"], 3, "end_effector.xyz"), _vec(ee["rpy"], 3, "end_effector.rpy"))

    return RobotModel(tuple(joints), tuple(links), gravity, names.index(ee["parent"]), ee_T,
                      name=str(data.get("name", "robot")))


def load_model(path: str | Path) -> RobotModel:
    """Load a robot model JSON file; see the README for the schema."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return model_from_dict(data)


def model_to_dict(model: RobotModel) -> dict:
    def rpy(R):
        return Rotation.from_matrix(R).as_euler("xyz").tolist()

    return {
        "name": model.name,
        "gravity": model.gravity.tolist(),
        "joints": [{
            "name": j.name, "axis": j.axis.tolist(),
            "origin": {"xyz": j.origin[:3, 3].tolist(), "rpy": rpy(j.origin[:3, :3])},
            "limits": {"position": list(j.position_limits), "velocity": j.velocity_limit,
                       "torque": j.torque_limit},
        } for j in model.joints],
        "links": [{
            "name": lk.name, "mass": lk.mass, "com": lk.com.tolist(),
            "inertia": [lk.inertia[0, 0], lk.inertia[0, 1], lk.inertia[0, 2],
                        lk.inertia[1, 1], lk.inertia[1, 2], lk.inertia[2, 2]],
        } for lk in model.links],
        "end_effector": {"parent": model.links[model.ee_parent].name,
                         "xyz": model.ee_transform[:3, 3].tolist(),
                         "rpy": rpy(model.ee_transform[:3, :3])},
    }


# ------------------------------------------------------------- kinematics

def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over the last axis; much cheaper than ``np.cross`` for small stacks."""
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


@dataclass(frozen=True)
class Frames:
    """World placement of every link for one configuration."""

    R: np.ndarray  # (n, 3, 3) link rotations
    p: np.ndarray  # (n, 3) link origins (= joint positions)
    z: np.ndarray  # (n, 3) joint axes
    S: np.ndarray  # (n, 6) motion subspaces [z; p x z]

    def point(self, link: int, local: np.ndarray) -> np.ndarray:
        return self.p[link] + self.R[link] @ local


def frames(model: RobotModel, q: np.ndarray) -> Frames:
    _, _, _, axis, origin = model._body_arrays()
    R, p, z, S = _k.frames_kernel(np.asarray(q, dtype=float), axis, origin)
    return Frames(R, p, z, S)


def _check_link(model: RobotModel, link: int) -> None:
    if not 0 <= link < model.n:
        raise IndexError(f"link index {link} out of range for a {model.n}-joint chain")


def forward_kinematics(model: RobotModel, q, link: int | None = None, point=None,
                       fr: Frames | None = None) -> Pose:
    """World pose of ``point`` (link frame) on ``link``.

    With ``link=None`` the end-effector frame is returned.
    """
    q = np.asarray(q, float)
    fr = fr or frames(model, q)
    if link is None:
        R = fr.R[model.ee_parent] @ model.ee_transform[:3, :3]
        return Pose.from_matrix(fr.point(model.ee_parent, model.ee_point), R)
    _check_link(model, link)
    local = np.zeros(3) if point is None else np.asarray(point, float)
    return Pose.from_matrix(fr.point(link, local), fr.R[link])


def ee_rotation(model: RobotModel, fr: Frames) -> np.ndarray:
    return fr.R[model.ee_parent] @ model.ee_transform[:3, :3]


def ee_position(model: RobotModel, fr: Frames) -> np.ndarray:
    return fr.point(model.ee_parent, model.ee_point)


def point_jacobian(fr: Frames, link: int, world_point: np.ndarray) -> np.ndarray:
    """6 x n geometric Jacobian ``[linear; angular]`` of a world point fixed to ``link``."""
    n = fr.p.shape[0]
    J = np.zeros((6, n))
    k = link + 1
    J[:3, :k] = cross(fr.z[:k], world_point - fr.p[:k]).T
    J[3:, :k] = fr.z[:k].T
    return J


def jacobian(model: RobotModel, q, link: int | None = None, point=None,
             fr: Frames | None = None) -> np.ndarray:
    """Geometric Jacobian of a link-frame point (end-effector when ``link`` is None)."""
    q = np.asarray(q, float)
    fr = fr or frames(model, q)
    if link is None:
        return point_jacobian(fr, model.ee_parent, ee_position(model, fr))
    _check_link(model, link)
    local = np.zeros(3) if point is None else np.asarray(point, float)
    return point_jacobian(fr, link, fr.point(link, local))


# --------------------------------------------------------------- dynamics

def spatial_inertias(model: RobotModel, fr: Frames) -> np.ndarray:
    """Link spatial inertias about the world origin, shape (n, 6, 6).

    COM-frame inertias are shifted with the parallel-axis theorem.
    """
    mass, com, inertia, _, _ = model._body_arrays()
    return _k.inertia_kernel(fr.R, fr.p, mass, com, inertia)


def rnea(model: RobotModel, q, qd, qdd, gravity: np.ndarray | None = None,
         fr: Frames | None = None, inertias: np.ndarray | None = None) -> np.ndarray:
    """Recursive Newton-Euler inverse dynamics, tau = M qdd + C qd + g."""
    fr = fr or frames(model, q)
    I = spatial_inertias(model, fr) if inertias is None else inertias
    g = model.gravity if gravity is None else np.asarray(gravity, float)
    return _k.rnea_kernel(fr.S, I, np.asarray(qd, float), np.asarray(qdd, float), g)


def mass_matrix(model: RobotModel, q, fr: Frames | None = None,
                inertias: np.ndarray | None = None) -> np.ndarray:
    """Joint-space mass matrix by the composite-rigid-body algorithm."""
    fr = fr or frames(model, q)
    I = spatial_inertias(model, fr) if inertias is None else inertias
    return _k.crba_kernel(fr.S, I)


def bias_forces(model: RobotModel, q, qd, **kw) -> np.ndarray:
    """Coriolis/centrifugal plus gravity torque, C(q, qd) qd + g(q)."""
    return rnea(model, q, qd, np.zeros(model.n), **kw)


def gravity_vector(model: RobotModel, q, **kw) -> np.ndarray:
    n = model.n
    return rnea(model, q, np.zeros(n), np.zeros(n), **kw)


def inverse_dynamics(model: RobotModel, q, qd, qdd, **kw) -> np.ndarray:
    return rnea(model, q, qd, qdd, **kw)


def forward_dynamics(model: RobotModel, q, qd, tau, **kw) -> np.ndarray:
    q = np.asarray(q, float)
    fr = kw.pop("fr", None) or frames(model, q)
    I = spatial_inertias(model, fr)
    M = mass_matrix(model, q, fr=fr, inertias=I)
    h = bias_forces(model, q, qd, fr=fr, inertias=I, **kw)
    return np.linalg.solve(M, np.asarray(tau, float) - h)


@dataclass(frozen=True)
class Dynamics:
    """Per-tick snapshot of kinematics and dynamics terms at one state."""

    q: np.ndarray
    qd: np.ndarray
    fr: Frames
    M: np.ndarray
    Minv: np.ndarray
    h: np.ndarray
    g: np.ndarray
    spatial_vel: np.ndarray  # (n, 6) world-origin spatial velocities

    def point_velocity(self, link: int, world_point: np.ndarray) -> np.ndarray:
        v = self.spatial_vel[link]
        return v[3:] + cross(v[:3], world_point)


def dynamics(model: RobotModel, q, qd) -> Dynamics:
    q = np.asarray(q, float)
    qd = np.asarray(qd, float)
    fr = frames(model, q)
    I = spatial_inertias(model, fr)
    M = mass_matrix(model, q, fr=fr, inertias=I)
    h = rnea(model, q, qd, np.zeros(model.n), fr=fr, inertias=I)
    g = rnea(model, q, np.zeros(model.n), np.zeros(model.n), fr=fr, inertias=I)
    vel = _k.spatial_velocities(fr.S, qd)
    return Dynamics(q, qd, fr, M, np.linalg.inv(M), h, g, vel)


def kinetic_energy(model: RobotModel, q, qd) -> float:
    qd = np.asarray(qd, float)
    return 0.5 * float(qd @ mass_matrix(model, q) @ qd)


def orientation_error(R_desired: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Rotation vector of ``R_desired @ R.T`` in world coordinates."""
    return Rotation.from_matrix(R_desired @ R.T).as_rotvec()


def random_configuration(model: RobotModel, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(model.lower, model.upper)
