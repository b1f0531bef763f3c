"""Scenario files, the closed-loop driver and trace/summary emission.

One run produces three files in its output directory:

``trace.csv``
    ``#`` comment lines (scenario, hash, seed, policy period), a header row,
    then one row per control tick.
``contacts.csv``
    every contact record applied by the simulator, one row per record.
``summary.json``
    the run metrics plus scenario name, hash, seed and declared thresholds.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy.spatial.transform import Rotation

from . import control, observer, safety
from .control import PostureTarget, Target, inverse_kinematics, task_space_terms
from .model import Pose, RobotModel, dynamics, forward_kinematics, load_model
from .observer import ObserverState, detect_contact, lowpass, observer_update
from .policy import POLICY_PERIOD, Bounds, PolicyObservation, apply_action, make_policy
from .safety import ControllerMode, Mode, switch_mode
from .sim import (InkBoard, Push, Sphere, Table, World, default_probes, ee_normal_force,
                  make_world, step, wipe_update)

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
DEFAULT_K2 = [40.0, 40.0, 40.0, 40.0, 30.0, 20.0, 10.0]
DEFAULT_D2 = [12.0, 12.0, 12.0, 12.0, 10.0, 8.0, 6.0]
DEFAULT_K1 = [500.0, 500.0, 500.0, 50.0, 50.0, 50.0]
DEFAULT_D1 = [45.0, 45.0, 45.0, 14.0, 14.0, 14.0]

CONTROLLERS = ("contact_aware", "baseline")
_SCENARIO_KEYS = {
    "name", "description", "model", "initial_q", "initial_qd", "controller", "duration", "dt",
    "policy", "table", "obstacles", "pushes", "probes", "ink", "params", "thresholds",
    "compare", "seed", "gravity", "output",
}
_PARAM_KEYS = {
    "K_I", "delta", "t_c", "cutoff", "K2", "D2", "K1", "D1", "x_d", "bounds", "policy_period",
    "ik_seed", "eps_c",
}


class ScenarioError(ValueError):
    pass


@dataclass
class Params:
    K_I: Any = observer.DEFAULT_GAIN
    delta: float = observer.DEFAULT_THRESHOLD
    t_c: float = safety.DEFAULT_HOLD
    cutoff: float = observer.DEFAULT_CUTOFF_HZ
    K2: list = field(default_factory=lambda: list(DEFAULT_K2))
    D2: list = field(default_factory=lambda: list(DEFAULT_D2))
    K1: list = field(default_factory=lambda: list(DEFAULT_K1))
    D1: list = field(default_factory=lambda: list(DEFAULT_D1))
    x_d: dict | None = None
    bounds: dict | None = None
    policy_period: int = POLICY_PERIOD
    ik_seed: str = "posture"
    eps_c: float = safety.DEGENERATE_CONTACT


@dataclass
class Scenario:
    name: str
    model_path: Path
    initial_q: list
    controller: str
    duration: float
    policy: dict
    params: Params
    initial_qd: list | None = None
    dt: float = 1e-3
    table: dict | None = None
    obstacles: list = field(default_factory=list)
    pushes: list = field(default_factory=list)
    probes: dict | None = None
    ink: dict | None = None
    thresholds: dict = field(default_factory=dict)
    compare: dict | None = None
    seed: int = 0
    gravity: list | None = None
    output: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def load_model(self) -> RobotModel:
        model = load_model(self.model_path)
        return model if self.gravity is None else model.with_gravity(self.gravity)


def _resolve_model(ref: str, base: Path | None) -> Path:
    candidates = [Path(ref)]
    if base is not None:
        candidates.insert(0, base / ref)
    candidates.append(DATA_DIR / ref)
    for c in candidates:
        if c.is_file():
            return c
    raise ScenarioError(f"model file {ref!r} not found")


def scenario_from_dict(data: dict, base: Path | None = None) -> Scenario:
    unknown = set(data) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"scenario: unknown key(s) {sorted(unknown)}")
    for key in ("name", "model", "initial_q", "controller", "duration"):
        if key not in data:
            raise ScenarioError(f"scenario: missing {key!r}")
    if data["controller"] not in CONTROLLERS:
        raise ScenarioError(f"scenario: controller must be one of {CONTROLLERS}")
    if not data["duration"] > 0:
        raise ScenarioError("scenario: duration must be > 0")
    pdata = data.get("params", {}) or {}
    bad = set(pdata) - _PARAM_KEYS
    if bad:
        raise ScenarioError(f"scenario params: unknown key(s) {sorted(bad)}")
    return Scenario(
        name=str(data["name"]),
        model_path=_resolve_model(data["model"], base),
        initial_q=list(data["initial_q"]),
        initial_qd=data.get("initial_qd"),
        controller=data["controller"],
        duration=float(data["duration"]),
        dt=float(data.get("dt", 1e-3)),
        policy=data.get("policy", {"type": "hold"}),
        params=Params(**pdata),
        table=data.get("table"),
        obstacles=list(data.get("obstacles", [])),
        pushes=list(data.get("pushes", [])),
        probes=data.get("probes"),
        ink=data.get("ink"),
        thresholds=data.get("thresholds", {}) or {},
        compare=data.get("compare"),
        seed=int(data.get("seed", 0)),
        gravity=data.get("gravity"),
        output=data.get("output"),
        raw=dict(data),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(data, path.parent)


def bundled_scenario(name: str) -> Scenario:
    return load_scenario(DATA_DIR / "scenarios" / f"{name}.json")


# ------------------------------------------------------------------ world

def _build_board(ink: dict, seed: int) -> InkBoard:
    rows, cols = ink["shape"]
    board = InkBoard.blank(ink["origin"], ink["cell"], (rows, cols), ink.get("wipe_radius", 0.02))
    cells = ink.get("cells", "random")
    inked = np.zeros((rows, cols), bool)
    if cells == "all":
        inked[:] = True
    elif cells == "random":
        rng = np.random.default_rng(np.uint64(seed))
        inked = rng.random((rows, cols)) < ink.get("fill", 0.5)
        if not inked.any():
            inked[rng.integers(rows), rng.integers(cols)] = True
    else:
        for i, j in cells:
            inked[i, j] = True
    return InkBoard(board.origin, board.cell, inked, board.wiped, board.wipe_radius)


def _probes(model: RobotModel, spec: dict) -> list:
    """Default probes, with the listed links replaced.

    Each entry maps a 0-based link index to either a list of link-frame points
    or ``{"fractions": [...]}``: points at those fractions of the segment from
    the link origin to its tip.
    """
    override = {int(k): v for k, v in spec.items()}
    if any(not 0 <= k < model.n for k in override):
        raise ScenarioError(f"probes: link index out of range 0..{model.n - 1}")
    base = default_probes(model)
    probes = [(l, p) for l, p in base if l not in override]
    for link, entry in sorted(override.items()):
        if isinstance(entry, dict):
            tip = max((p for l, p in base if l == link), key=np.linalg.norm)
            probes.extend((link, f * tip) for f in entry["fractions"])
        else:
            probes.extend((link, np.asarray(p, float)) for p in entry)
    return probes


def build_world(sc: Scenario, model: RobotModel) -> World:
    table = None
    if sc.table is not None:
        t = sc.table
        table = Table(t["point"], t.get("normal", [0, 0, 1]), t.get("stiffness", 2e4),
                      t.get("damping", 200.0), t.get("friction", 0.3))
    obstacles = [Sphere(o["center"], o["radius"], o.get("stiffness", 5e3), o.get("damping", 50.0))
                 for o in sc.obstacles]
    pushes = [Push(int(p["link"]), np.asarray(p.get("point", [0, 0, 0]), float),
                   np.asarray(p["force"], float), float(p["start"]), float(p["end"]))
              for p in sc.pushes]
    kw: dict[str, Any] = dict(table=table, obstacles=obstacles, pushes=pushes, dt=sc.dt)
    if sc.probes:
        kw["probes"] = _probes(model, sc.probes)
    if sc.ink is not None:
        kw["board"] = _build_board(sc.ink, sc.seed)
    q0 = np.asarray(sc.initial_q, float)
    if q0.shape != (model.n,):
        raise ScenarioError(f"initial_q must have {model.n} entries")
    return make_world(model, q0, sc.initial_qd, **kw)


# ------------------------------------------------------------------ trace

def trace_columns(n: int) -> list[str]:
    cols = ["t"]
    for name in ("q", "qd", "tau_m", "gamma_f"):
        cols += [f"{name}[{i}]" for i in range(n)]
    cols += [f"F_eff[{i}]" for i in range(6)]
    cols += [f"ee_pos[{i}]" for i in range(3)]
    cols += [f"ee_err[{i}]" for i in range(3)]
    cols += ["mode", "wiped_fraction", "contact_link"]
    return cols


CONTACT_COLUMNS = ["tick", "t", "kind", "link", "px", "py", "pz", "fx", "fy", "fz"]


def _fmt(values) -> str:
    return ",".join(map(repr, values))


@dataclass
class Metrics:
    peak_ee_force: float
    peak_gamma_f: float
    peak_ee_error: list
    peak_ee_error_max: float
    wiped_fraction: float
    mode_switches: int
    min_switch_interval: float | None
    clamp_events: int
    peak_obstacle_force: float
    peak_arm_contact_force: float

    def as_dict(self) -> dict:
        return asdict(self)


RATIO_METRICS = ("peak_ee_force", "peak_gamma_f", "peak_ee_error_max", "wiped_fraction",
                 "mode_switches", "clamp_events", "peak_obstacle_force", "peak_arm_contact_force")


def compute_metrics(trace: np.ndarray, contacts: list[tuple], n: int, torque_limits,
                    ee_link: int) -> Metrics:
    """Metrics from the trace matrix and contact rows ``(tick, t, kind, link, p, f)``."""
    o = 1 + 2 * n
    tau = trace[:, o:o + n]
    gf = trace[:, o + n:o + 2 * n]
    o += 2 * n
    F = trace[:, o:o + 3]
    err = trace[:, o + 9:o + 12]
    mode = trace[:, o + 12]
    wiped = trace[:, o + 13]
    t = trace[:, 0]
    switches = np.flatnonzero(np.diff(mode) != 0) + 1
    interval = float(np.diff(t[switches]).min()) if len(switches) > 1 else None
    peak_err = np.abs(err).max(axis=0) if len(err) else np.zeros(3)
    clamp = int(np.any(np.abs(tau) >= np.asarray(torque_limits), axis=1).sum())

    obstacle = {}
    arm = {}
    for tick, _, kind, link, _, f in contacts:
        if kind == "obstacle":
            obstacle[tick] = obstacle.get(tick, 0.0) + np.asarray(f)
        if link != ee_link:
            arm[tick] = arm.get(tick, 0.0) + np.asarray(f)
    peak_obs = max((float(np.linalg.norm(v)) for v in obstacle.values()), default=0.0)
    peak_arm = max((float(np.linalg.norm(v)) for v in arm.values()), default=0.0)
    return Metrics(
        peak_ee_force=float(np.linalg.norm(F, axis=1).max()) if len(F) else 0.0,
        peak_gamma_f=float(np.abs(gf).max()) if len(gf) else 0.0,
        peak_ee_error=[float(x) for x in peak_err],
        peak_ee_error_max=float(peak_err.max()),
        wiped_fraction=float(wiped[-1]) if len(wiped) else 0.0,
        mode_switches=int(len(switches)),
        min_switch_interval=interval,
        clamp_events=clamp,
        peak_obstacle_force=peak_obs,
        peak_arm_contact_force=peak_arm,
    )


def read_trace(path: str | Path) -> tuple[dict, list[str], np.ndarray]:
    """Parse a trace file into (header comments, column names, data matrix)."""
    meta: dict[str, str] = {}
    with open(path) as fh:
        line = fh.readline()
        while line.startswith("#"):
            for item in line[1:].split():
                key, _, value = item.partition("=")
                meta[key] = value
            line = fh.readline()
        columns = line.strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return meta, columns, data


def read_contacts(path: str | Path) -> list[tuple]:
    rows = []
    with open(path) as fh:
        fh.readline()
        for line in fh:
            parts = line.strip().split(",")
            rows.append((int(parts[0]), float(parts[1]), parts[2], int(parts[3]),
                         [float(x) for x in parts[4:7]], [float(x) for x in parts[7:10]]))
    return rows


def _trace_path(path: str | Path) -> Path:
    path = Path(path)
    return path / "trace.csv" if path.is_dir() else path


def recompute_metrics(trace: str | Path) -> Metrics:
    """Metrics from a trace file and the ``contacts.csv`` beside it."""
    trace = _trace_path(trace)
    meta, columns, data = read_trace(trace)
    try:
        n = int(meta["n"])
        limits = np.array([float(x) for x in meta["torque_limits"].split(",")])
        ee_link = int(meta["ee_link"])
    except KeyError as exc:
        raise ScenarioError(f"{trace}: trace header lacks {exc.args[0]!r}") from None
    if columns != trace_columns(n):
        raise ScenarioError(f"{trace}: columns do not match the trace schema for n={n}")
    contacts_file = trace.parent / "contacts.csv"
    contacts = read_contacts(contacts_file) if contacts_file.exists() else []
    return compute_metrics(data, contacts, n, limits, ee_link)


def check_thresholds(metrics: dict, thresholds: dict) -> list[str]:
    """Absolute pass/fail checks; returns a list of failure messages."""
    failures = []
    for key, limit in (thresholds.get("max") or {}).items():
        if not metrics[key] < limit:
            failures.append(f"{key} = {metrics[key]:.6g} not < {limit}")
    for key, limit in (thresholds.get("min") or {}).items():
        if not metrics[key] >= limit:
            failures.append(f"{key} = {metrics[key]:.6g} not >= {limit}")
    return failures


# ------------------------------------------------------------------- loop

@dataclass
class RunResult:
    scenario: Scenario
    out_dir: Path
    metrics: Metrics
    summary: dict
    failures: list

    @property
    def trace_path(self) -> Path:
        return self.out_dir / "trace.csv"

    @property
    def passed(self) -> bool:
        return not self.failures


def _initial_target(sc: Scenario, model: RobotModel, q0: np.ndarray) -> Target:
    pr = sc.params
    pose = forward_kinematics(model, q0)
    if pr.x_d is not None:
        pos = pr.x_d.get("position", pose.position)
        quat = (Rotation.from_euler("xyz", pr.x_d["rpy"]).as_quat() if "rpy" in pr.x_d
                else pose.quat)
        pose = Pose(np.asarray(pos, float), np.asarray(quat, float))
    return Target.from_pose(pose, pr.K1, pr.D1)


def _gains(values, n: int, what: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(values, float), (n,)) if np.ndim(values) == 0 else np.asarray(values, float)
    if arr.shape != (n,):
        raise ScenarioError(f"{what} must have {n} entries")
    return arr.copy()


def _observation(world: World, terms, remaining) -> PolicyObservation:
    ee = terms.ee_pos
    vec = np.zeros(3)
    board = world.board
    if board is not None:
        left = board.remaining()
        if len(left):
            d = left - ee[:2]
            k = int(np.argmin(np.einsum("ij,ij->i", d, d)))
            vec[:2] = d[k]
    quat = Rotation.from_matrix(terms.ee_rot).as_quat()
    return PolicyObservation(ee.copy(), quat, world.wiped_fraction, world.time, vec, remaining)


def run_scenario(sc: Scenario, out_dir: str | Path | None = None) -> RunResult:
    """Run the closed loop for ``duration / dt`` ticks and write the trace files.

    Per tick: observer update, low-pass, detection and mode switch (skipped by
    the baseline), torque from the active controller, simulator step, wipe
    update. Every ``policy_period`` ticks the policy acts first and the
    posture target is refreshed by IK.
    """
    out = Path(out_dir or sc.output or f"runs/{sc.name}")
    out.mkdir(parents=True, exist_ok=True)
    model = sc.load_model()
    n = model.n
    pr = sc.params
    world = build_world(sc, model)
    bounds = Bounds.from_dict(pr.bounds)
    target = _initial_target(sc, model, world.q)
    K2 = _gains(pr.K2, n, "K2")
    D2 = _gains(pr.D2, n, "D2")
    q_pose = world.q.copy()
    table_h = world.table.height if world.table is not None else None
    policy = make_policy(sc.policy, target.position, world.board, table_h)
    obs_state = ObserverState.create(n, pr.K_I, pr.delta, pr.cutoff, sc.dt)
    mode = ControllerMode(Mode.FREE_SPACE, 0.0, pr.t_c)
    aware = sc.controller == "contact_aware"
    limits = model.torque_limits
    if pr.ik_seed not in ("posture", "current"):
        raise ScenarioError("params.ik_seed must be 'posture' or 'current'")

    ticks = int(round(sc.duration / sc.dt))
    rows = np.empty((ticks, len(trace_columns(n))))
    contact_rows: list[tuple] = []
    tau_prev = np.zeros(n)
    ft_prev = np.zeros(6)
    clamps = 0

    for k in range(ticks):
        t = world.time
        dyn = dynamics(model, world.q, world.qd)
        obs_state = observer_update(obs_state, model, world.q, world.qd, tau_prev, ft_prev, dyn)
        gamma_f = lowpass(obs_state, obs_state.gamma)
        obs_state = replace(obs_state, gamma_f=gamma_f)
        detected = detect_contact(gamma_f, obs_state.delta, t)
        if aware:
            mode = switch_mode(mode, detected, t)

        terms = task_space_terms(model, world.q, world.qd, dyn)
        if k % pr.policy_period == 0:
            remaining = None if world.board is None else world.board.inked & ~world.board.wiped
            inc = policy.step(_observation(world, terms, remaining))
            target = apply_action(target, inc, bounds)
            seed = q_pose if pr.ik_seed == "posture" else world.q
            q_pose = inverse_kinematics(model, target, seed).q

        posture = control.posture_torque(world.q, world.qd, PostureTarget(q_pose, K2, D2))
        if mode.mode == Mode.CONTACT_AWARE:
            F = safety.compensated_task_force(terms, target, gamma_f)
            N_ct = safety.contact_aware_projector(terms.N, gamma_f, Minv=dyn.Minv, eps=pr.eps_c)
            tau = safety.contact_aware_torque(terms, F, N_ct, posture)
        else:
            F = control.vic_force(terms, target)
            tau = control.free_space_torque(terms, F, posture)
        # the task force carries the task-space share of C qd + g; add the null-space share
        tau = tau + terms.N.T @ dyn.h

        if np.any(np.abs(tau) > limits):
            clamps += 1
            if clamps == 1:
                log.warning("%s: torque clamped to model limits at t=%.3f s", sc.name, t)
            log.debug("%s: clamp at tick %d: %s", sc.name, k, tau)
            tau = np.clip(tau, -limits, limits)

        world, ft, records = step(world, tau, dyn)
        world = wipe_update(world, terms.ee_pos, ee_normal_force(model, records))

        link = detected.link if detected is not None else -1
        rows[k, 0] = t
        rows[k, 1:] = np.concatenate([
            dyn.q, dyn.qd, tau, gamma_f, ft.wrench, terms.ee_pos, target.position - terms.ee_pos,
            [float(mode.mode), world.wiped_fraction, float(link)],
        ])
        for rec in records:
            contact_rows.append((k, t, rec.kind, rec.link, rec.point.tolist(), rec.force.tolist()))
        tau_prev, ft_prev = tau, ft.wrench

    metrics = compute_metrics(rows, contact_rows, n, limits, model.ee_parent)
    _write_trace(out / "trace.csv", sc, rows, n, model.ee_parent, limits)
    _write_contacts(out / "contacts.csv", contact_rows)
    failures = check_thresholds(metrics.as_dict(), sc.thresholds)
    summary = {
        "scenario": sc.name,
        "scenario_hash": sc.hash,
        "seed": sc.seed,
        "controller": sc.controller,
        "model": model.name,
        "dt": sc.dt,
        "policy_period": pr.policy_period,
        "ticks": ticks,
        "metrics": metrics.as_dict(),
        "clamp_events_logged": clamps,
        "thresholds": sc.thresholds,
        "compare": sc.compare,
        "passed": not failures,
        "failures": failures,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return RunResult(sc, out, metrics, summary, failures)


def _write_trace(path: Path, sc: Scenario, rows: np.ndarray, n: int, ee_link: int,
                 limits: np.ndarray) -> None:
    mode_col = 1 + 4 * n + 12
    link_col = mode_col + 2
    with open(path, "w", newline="") as fh:
        fh.write(f"# scenario={sc.name} hash={sc.hash} seed={sc.seed} controller={sc.controller}\n")
        fh.write(f"# dt={sc.dt!r} policy_period={sc.params.policy_period} n={n} ee_link={ee_link}"
                 f" torque_limits={','.join(map(repr, limits.tolist()))}\n")
        fh.write(",".join(trace_columns(n)) + "\n")
        for row in rows.tolist():
            row[mode_col] = int(row[mode_col])
            row[link_col] = int(row[link_col])
            fh.write(_fmt(row) + "\n")


def _write_contacts(path: Path, rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CONTACT_COLUMNS) + "\n")
        for tick, t, kind, link, p, f in rows:
            fh.write(f"{tick},{t!r},{kind},{link},{_fmt(p)},{_fmt(f)}\n")


# ---------------------------------------------------------------- compare

def _ratio(a: float, b: float) -> float:
    if a == b:
        return 1.0
    return a / b if b != 0 else float("inf")


def compare(trace_a: str | Path, trace_b: str | Path, max_ratio: dict | None = None) -> dict:
    """Side-by-side metrics of run A against run B, with ratios A / B.

    ``max_ratio`` defaults to the ``compare.max_ratio`` block of A's summary.
    Identical metrics give a ratio of exactly 1.0, also when both are zero.
    """
    ta, tb = _trace_path(trace_a), _trace_path(trace_b)
    meta_a, cols_a, _ = read_trace(ta)
    meta_b, cols_b, _ = read_trace(tb)
    if cols_a != cols_b:
        raise ScenarioError(f"trace schemas differ: {len(cols_a)} vs {len(cols_b)} columns")
    ma, mb = recompute_metrics(ta).as_dict(), recompute_metrics(tb).as_dict()
    if max_ratio is None:
        summary = ta.parent / "summary.json"
        declared = json.loads(summary.read_text()).get("compare") if summary.exists() else None
        max_ratio = (declared or {}).get("max_ratio", {})
    ratios = {k: _ratio(float(ma[k]), float(mb[k])) for k in RATIO_METRICS}
    checks = {k: {"ratio": ratios[k], "max": lim, "passed": bool(ratios[k] <= lim)}
              for k, lim in max_ratio.items()}
    return {
        "a": {"trace": str(ta), "scenario": meta_a.get("scenario"), "metrics": ma},
        "b": {"trace": str(tb), "scenario": meta_b.get("scenario"), "metrics": mb},
        "ratios": ratios,
        "checks": checks,
        "passed": all(c["passed"] for c in checks.values()),
        "note": "obstacle force is the peak penalty-model force, a stand-in for a force gauge",
    }


def format_report(report: dict) -> str:
    a, b = report["a"], report["b"]
    lines = [f"A: {a['scenario']}  ({a['trace']})", f"B: {b['scenario']}  ({b['trace']})", "",
             f"{'metric':<24}{'A':>14}{'B':>14}{'A/B':>10}"]
    for key in RATIO_METRICS:
        lines.append(f"{key:<24}{a['metrics'][key]:>14.6g}{b['metrics'][key]:>14.6g}"
                     f"{report['ratios'][key]:>10.4g}")
    if report["checks"]:
        lines.append("")
        for key, c in report["checks"].items():
            verdict = "PASS" if c["passed"] else "FAIL"
            lines.append(f"{verdict}  {key}: ratio {c['ratio']:.4g} (max {c['max']})")
    return "\n".join(lines)


# ------------------------------------------------------------------ batch

def _run_one(args) -> tuple[str, bool, str]:
    path, out = args
    try:
        res = run_scenario(load_scenario(path), out)
        return str(path), res.passed, "; ".join(res.failures)
    except Exception as exc:  # reported per scenario, the batch carries on
        return str(path), False, f"error: {exc}"


def run_batch(directory: str | Path, jobs: int = 1, out_root: str | Path | None = None) -> dict:
    """Run every ``*.json`` scenario in ``directory``, then the declared comparisons.

    Each scenario writes to its own directory, so workers share no files.
    """
    directory = Path(directory)
    out_root = Path(out_root) if out_root else Path("runs")
    paths = sorted(directory.glob("*.json"))
    tasks = [(p, out_root / p.stem) for p in paths]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    report = {"runs": {}, "comparisons": {}, "passed": True}
    for path, ok, msg in results:
        report["runs"][Path(path).stem] = {"passed": ok, "detail": msg}
        report["passed"] &= ok
    for p in paths:
        declared = json.loads(p.read_text()).get("compare")
        if not declared:
            continue
        other = Path(declared["with"]).stem
        if other not in report["runs"]:
            report["comparisons"][p.stem] = {"passed": False, "error": f"{other} not in batch"}
            report["passed"] = False
            continue
        try:
            rep = compare(out_root / p.stem, out_root / other, declared.get("max_ratio", {}))
        except (OSError, ScenarioError) as exc:
            rep = {"passed": False, "error": str(exc)}
        report["comparisons"][p.stem] = rep
        report["passed"] &= rep["passed"]
    return report
