"""Command line: run, compare, check-model, batch.

Exit status is 0 when everything passes, 2 when a declared threshold fails and
1 on any error (bad input, I/O, divergence).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .model import ModelError, dynamics, load_model
from .sim import SimulationDiverged

EXIT_OK, EXIT_ERROR, EXIT_THRESHOLD = 0, 1, 2


def _cmd_run(args) -> int:
    sc = harness.load_scenario(args.scenario)
    res = harness.run_scenario(sc, args.out)
    print(json.dumps(res.summary["metrics"], indent=2))
    for failure in res.failures:
        print(f"FAIL {failure}", file=sys.stderr)
    print(f"trace: {res.trace_path}")
    return EXIT_OK if res.passed else EXIT_THRESHOLD


def _cmd_compare(args) -> int:
    report = harness.compare(args.a, args.b)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    text = harness.format_report(report)
    out.with_suffix(".txt").write_text(text + "\n")
    print(text)
    return EXIT_OK if report["passed"] else EXIT_THRESHOLD


def _cmd_check_model(args) -> int:
    model = load_model(args.model)
    q = np.clip(np.zeros(model.n), model.lower, model.upper)
    dyn = dynamics(model, q, np.zeros(model.n))
    eig = np.linalg.eigvalsh(dyn.M)
    print(f"{model.name}: n={model.n}, ee link {model.ee_parent}, total mass "
          f"{sum(l.mass for l in model.links):.3f} kg")
    print(f"mass matrix eigenvalues at q=0 (clipped to limits): {eig.min():.4g} .. {eig.max():.4g}")
    return EXIT_OK


def _cmd_batch(args) -> int:
    report = harness.run_batch(args.dir, args.jobs, args.out)
    for name, r in report["runs"].items():
        print(f"{'PASS' if r['passed'] else 'FAIL'}  run {name}  {r['detail']}")
    for name, r in report["comparisons"].items():
        detail = r.get("error") or ", ".join(
            f"{k} {c['ratio']:.3g}<= {c['max']}" for k, c in r["checks"].items())
        print(f"{'PASS' if r['passed'] else 'FAIL'}  compare {name}  {detail}")
    if any("error:" in r["detail"] for r in report["runs"].values()):
        return EXIT_ERROR
    return EXIT_OK if report["passed"] else EXIT_THRESHOLD


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contactsafe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="compare two runs (A is divided by B)")
    p.add_argument("--a", required=True, help="trace file or run directory")
    p.add_argument("--b", required=True, help="trace file or run directory")
    p.add_argument("--out", required=True, help="JSON report path; text goes beside it")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("check-model", help="validate a model file")
    p.add_argument("--model", required=True)
    p.set_defaults(func=_cmd_check_model)

    p = sub.add_parser("batch", help="run every scenario in a directory")
    p.add_argument("--dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="runs", help="root directory for run outputs")
    p.set_defaults(func=_cmd_batch)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ModelError, harness.ScenarioError, SimulationDiverged, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
