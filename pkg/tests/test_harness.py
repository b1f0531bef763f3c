import json

import numpy as np
import pytest

from contactsafe.harness import (CONTACT_COLUMNS, ScenarioError, _build_board, bundled_scenario,
                                 check_thresholds, compare, load_scenario, read_trace,
                                 recompute_metrics, run_scenario, scenario_from_dict, trace_columns)

from conftest import READY


def short_push(**extra):
    data = {
        "name": "short_push", "model": "panda7.json", "initial_q": READY.tolist(),
        "controller": "contact_aware", "duration": 0.3, "seed": 5, "params": {"K_I": 100.0},
        "pushes": [{"link": 3, "point": [-0.0825, 0.384, 0.0], "force": [0, 40, 0],
                    "start": 0.05, "end": 0.15}],
    }
    data.update(extra)
    return scenario_from_dict(data)


@pytest.fixture(scope="module")
def push_run(tmp_path_factory):
    return run_scenario(short_push(), tmp_path_factory.mktemp("push"))


def test_hold_scenario_stays_put(tmp_path):
    res = run_scenario(bundled_scenario("hold"), tmp_path)
    assert res.passed, res.failures
    assert res.metrics.peak_ee_error_max < 1e-6
    assert res.metrics.mode_switches == 0


def test_outputs_written(push_run):
    out = push_run.out_dir
    assert {p.name for p in out.iterdir()} == {"trace.csv", "contacts.csv", "summary.json"}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenario_hash"] == short_push().hash
    assert summary["ticks"] == 300
    meta, cols, data = read_trace(push_run.trace_path)
    assert cols == trace_columns(7)
    assert data.shape == (300, len(cols))
    assert meta["seed"] == "5"
    header = (out / "contacts.csv").read_text().splitlines()[0]
    assert header.split(",") == CONTACT_COLUMNS


def test_push_triggers_contact_aware_mode(push_run):
    m = push_run.metrics
    assert m.mode_switches >= 1
    assert m.peak_gamma_f > 1.5
    assert m.peak_arm_contact_force == pytest.approx(40.0)


def test_recomputed_metrics_match_summary(push_run):
    again = recompute_metrics(push_run.trace_path).as_dict()
    for key, value in push_run.summary["metrics"].items():
        if isinstance(value, list):
            assert np.allclose(again[key], value, rtol=0, atol=1e-12)
        elif value is None:
            assert again[key] is None
        else:
            assert again[key] == pytest.approx(value, abs=1e-12)


def test_rerun_is_byte_identical(push_run, tmp_path):
    again = run_scenario(short_push(), tmp_path)
    for name in ("trace.csv", "contacts.csv"):
        assert (again.out_dir / name).read_bytes() == (push_run.out_dir / name).read_bytes()


def test_compare_with_itself(push_run):
    rep = compare(push_run.out_dir, push_run.trace_path, {"peak_gamma_f": 1.0})
    assert all(r == 1.0 for r in rep["ratios"].values())
    assert rep["passed"]


def test_compare_rejects_schema_mismatch(push_run, tmp_path):
    bad = tmp_path / "trace.csv"
    lines = push_run.trace_path.read_text().splitlines()
    header_at = next(i for i, l in enumerate(lines) if not l.startswith("#"))
    lines[header_at] += ",extra"
    lines[header_at + 1:] = [l + ",0" for l in lines[header_at + 1:]]
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(ScenarioError):
        compare(push_run.trace_path, bad)


def test_thresholds():
    m = {"peak_ee_force": 12.0, "wiped_fraction": 0.8}
    fails = check_thresholds(m, {"max": {"peak_ee_force": 10}, "min": {"wiped_fraction": 0.9}})
    assert len(fails) == 2
    assert not check_thresholds(m, {"max": {"peak_ee_force": 20}})


@pytest.mark.parametrize("change, needle", [
    ({"colour": "red"}, "unknown key"),
    ({"controller": "magic"}, "controller"),
    ({"duration": 0}, "duration"),
    ({"params": {"gain": 1}}, "params"),
    ({"model": "nowhere.json"}, "not found"),
])
def test_scenario_validation(change, needle):
    with pytest.raises(ScenarioError, match=needle):
        short_push(**change)


def test_malformed_scenario_file(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{\n  "name": "x",\n  oops\n}')
    with pytest.raises(ScenarioError, match="line 3"):
        load_scenario(p)


def test_random_ink_follows_seed():
    ink = {"origin": [0, 0], "cell": 0.02, "shape": [6, 6], "cells": "random", "fill": 0.5}
    a, b, c = _build_board(ink, 1), _build_board(ink, 1), _build_board(ink, 2)
    assert np.array_equal(a.inked, b.inked)
    assert not np.array_equal(a.inked, c.inked)
    assert _build_board(dict(ink, fill=0.0), 3).inked.sum() >= 1
