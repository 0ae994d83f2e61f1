import json
import math

import numpy as np
import pytest

from favardlab.cocycle import LinearSystem, fit_dichotomy
from favardlab.harness import (
    ExperimentConfig,
    ExperimentReport,
    _judge,
    compatibility_in_distribution,
    distributional_cocycle_check,
    green_solution,
    law_shift_sup,
    ode_residual,
    run_convergence_experiment,
    run_experiment,
    run_hyperbolic_experiment,
    run_periodic_experiment,
)
from favardlab.sde import Gaussian, PointMass, SdeSystem, moment_odes
from favardlab.signals import constant, trig, Stacked

R2 = math.sqrt(2.0)
COS = trig((1.0,), cos={(1,): 1.0})
COS_R2 = trig((R2,), cos={(1,): 1.0})
OU = SdeSystem.scalar(-1.0, 0.0, 1.0)
DIAG = LinearSystem.constant(np.diag([-1.0, 1.0]))


def _hyp(f, name="hyp", A=DIAG):
    return ExperimentConfig(name, "hyperbolic_deterministic", SdeSystem(A, f, constant([0.0, 0.0])), 1, 1e-3, (0.0, 10.0))


def test_config_validation():
    with pytest.raises(ValueError, match="class_label"):
        ExperimentConfig("x", "chaotic", OU, 10, 1e-3, (0.0, 1.0))
    with pytest.raises(ValueError, match="positive"):
        ExperimentConfig("x", "convergence", OU, 10, 1e-3, (0.0, 1.0), tolerances={"beta": 0.0})
    with pytest.raises(ValueError, match="empty"):
        ExperimentConfig("x", "convergence", OU, 10, 1e-3, (1.0, 1.0))
    with pytest.raises(ValueError, match="4 driver periods"):
        ExperimentConfig("x", "periodic", OU, 10, 1e-3, (0.0, 10.0), params={"period": 2 * math.pi})


def test_judge_is_a_function_of_metrics():
    cfg = ExperimentConfig("x", "convergence", OU, 10, 1e-3, (0.0, 1.0), tolerances={"beta": 0.1})
    rules = [("a", "<=", "beta", 0.05), ("b", ">=", "rate", 0.9)]
    assert _judge(cfg, {"a": 0.09, "b": 0.95}, rules).passed
    assert not _judge(cfg, {"a": 0.11, "b": 0.95}, rules).passed
    assert not _judge(cfg, {"a": 0.01, "b": math.nan}, rules).passed
    assert not _judge(cfg, {"a": 0.01}, rules).passed


def test_green_solution_matches_undetermined_coefficients():
    f = Stacked((COS, COS_R2))
    cert = fit_dichotomy(DIAG, 10.0, 1e-3)
    sol = green_solution(DIAG, cert, f, (0.0, 5.0), 1e-3, 20.0)
    t = sol.times
    # x1' = -x1 + cos t and x2' = x2 + cos(w t) with w = sqrt 2
    exact = np.column_stack([(np.cos(t) + np.sin(t)) / 2, (-np.cos(R2 * t) + R2 * np.sin(R2 * t)) / 3])
    assert np.max(np.abs(sol.values - exact)) < 1e-7
    assert ode_residual(DIAG, f, sol) < 1e-6


def test_hyperbolic_experiment():
    rep = run_hyperbolic_experiment(_hyp(Stacked((COS, COS_R2))))
    assert rep.passed
    m = rep.metrics
    assert abs(m["nu"] - 1.0) < 0.1 and m["projection_defect"] <= 1e-10
    assert m["rigidity_margin"] >= 1.0 and m["ode_residual"] < 1e-6 and m["sup_ratio"] <= 1.0


def test_hyperbolic_zero_forcing_gives_zero():
    rep = run_hyperbolic_experiment(_hyp(constant([0.0, 0.0])))
    assert rep.metrics["sup_norm"] == 0.0


def test_hyperbolic_rotation_fails_with_reason():
    rot = LinearSystem.constant([[0.0, 1.0], [-1.0, 0.0]])
    rep = run_hyperbolic_experiment(_hyp(Stacked((COS, COS_R2)), A=rot))
    assert not rep.passed and rep.metrics["no_dichotomy"] == 1.0
    assert "dichotomy" in rep.notes[0]


def test_law_shift_sup_on_exact_periodic_curve():
    # stationary start of x' = -x + cos t: exact 2pi-periodic law
    sys = SdeSystem.scalar(-1.0, COS, 0.5)
    curve = moment_odes(sys, 0.0, 30.0, [0.5], [[0.125]], 1e-3, 10)
    ts = np.linspace(0.0, 10.0, 41)
    sup = law_shift_sup(curve, [2 * math.pi, math.pi], ts)
    # at the true period only interpolation error remains: 2 * h^2 / 8 * max|m''| with m = (cos t + sin t) / 2
    h = 0.01
    assert sup[0] <= 2 * h**2 / 8 * (R2 / 2) + 1e-9
    assert sup[1] > 0.5


def test_compatibility_in_distribution():
    stationary = moment_odes(OU, 0.0, 60.0, [0.0], [[0.5]], 1e-2, 10)
    frac = compatibility_in_distribution([constant(1.0)], stationary, 0.05, 0.01, (1.0, 20.0), 0.01, 100.0)
    assert frac == 1.0
    # law curve driven by cos(sqrt2 t) against the periods of cos t
    sys = SdeSystem.scalar(-1.0, COS_R2, 0.3)
    curve = moment_odes(sys, -10.0, 60.0, [0.0], [[0.0]], 1e-2, 10)
    frac = compatibility_in_distribution([COS], curve, 0.05, 0.01, (1.0, 20.0), 0.01, 100.0, 0.05,
                                         check_times=np.linspace(0.0, 20.0, 81))
    assert frac < 1.0


def test_deterministic_periodic_reduces_to_point_masses():
    a = trig((1.0,), const=-2.0, sin={(1,): -1.0})
    sys = SdeSystem.scalar(a, COS, 0.0)
    cfg = ExperimentConfig("det", "periodic", sys, 20, 1e-3, (0.0, 4 * 2 * math.pi),
                           params={"period": 2 * math.pi, "k": 20, "repeats": 1})
    rep = run_periodic_experiment(cfg)
    assert rep.passed
    # all paths coincide: beta = 2h / (2 + h) with h < e^{-rate * burn}
    h = math.exp(-rep.metrics["probe_rate"] * rep.metrics["burn_in"])
    assert rep.metrics["max_beta"] <= 2 * h / (2 + h) + 1e-9


def test_convergence_identical_laws_stay_close():
    cfg = ExperimentConfig("same", "convergence", OU, 1000, 1e-3, (0.0, 2.0),
                           params={"initial_laws": [Gaussian(np.zeros(1), np.eye(1))] * 2, "k": 200, "repeats": 2})
    rep = run_convergence_experiment(cfg)
    assert rep.metrics["max_beta"] == 0.0


def test_convergence_unstable_negative_control():
    cfg = ExperimentConfig("up", "convergence", SdeSystem.scalar(1.0, 0.0, 1.0), 500, 1e-3, (0.0, 5.0),
                           params={"initial_laws": [PointMass(np.array([5.0])), Gaussian(np.zeros(1), np.eye(1))],
                                   "k": 200, "repeats": 2})
    rep = run_convergence_experiment(cfg)
    assert not rep.passed and rep.metrics["probe_stable"] == 0.0


def test_run_experiment_writes_strict_json(tmp_path):
    rep = run_experiment(_hyp(Stacked((COS, COS_R2)), name="h"), tmp_path)
    doc = json.loads((tmp_path / "h_report.json").read_text())
    assert doc["pass"] is True and doc["name"] == "h"
    assert any(p.endswith("h_solution.csv") for p in rep.artifacts)
    bad = ExperimentReport("n", "convergence", False, {"x": math.nan}, [])
    bad.write_json(tmp_path / "n.json")
    assert json.loads((tmp_path / "n.json").read_text())["metrics"]["x"] == "nan"


def test_distributional_cocycle_small():
    out = distributional_cocycle_check(OU, Gaussian(np.ones(1), np.eye(1)), 0.5, 0.5, 1000, 1e-3, 5, k=300, repeats=3)
    assert out["beta"] <= 2 * max(out["floor"], 0.05)
