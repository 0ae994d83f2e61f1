import math

import numpy as np
import pytest

from favardlab.errors import DomainError, PreconditionError
from favardlab.sde import (
    Empirical,
    Gaussian,
    PointMass,
    SdeSystem,
    boundedness_probe,
    initial_law_from_dict,
    marginal_law,
    moment_odes,
    pullback_solution,
    simulate_paths,
)
from favardlab.signals import trig
from oracles import ou_moments

OU = SdeSystem.scalar(-1.0, 0.0, 1.0)
COS = trig((1.0,), cos={(1,): 1.0})


def test_moment_odes_match_ou_closed_form():
    curve = moment_odes(OU, 0.0, 5.0, [2.0], [[0.5]], 1e-3, 100)
    m, v = ou_moments(curve.times, 2.0, 0.5)
    assert np.max(np.abs(curve.mean[:, 0] - m)) < 1e-10
    assert np.max(np.abs(curve.cov[:, 0, 0] - v)) < 1e-10


def test_moment_odes_matrix_case():
    # A = diag(-1, -2), g = (1, 1): V_ij' = -(a_i + a_j) V_ij + 1
    from favardlab.cocycle import LinearSystem
    from favardlab.signals import constant

    sys = SdeSystem(LinearSystem.constant(np.diag([-1.0, -2.0])), constant([0.0, 0.0]), constant([1.0, 1.0]))
    curve = moment_odes(sys, 0.0, 2.0, [0.0, 0.0], np.zeros((2, 2)), 1e-3)
    rates = np.array([[2.0, 3.0], [3.0, 4.0]])
    exact = (1 - np.exp(-rates * 2.0)) / rates
    assert np.max(np.abs(curve.cov[-1] - exact)) < 1e-10


def test_ou_ensemble_moments_within_standard_errors():
    n = 4000
    ens = simulate_paths(OU, 0.0, 2.0, PointMass(np.array([1.0])), n, 1e-3, 9, 1000)
    for k, t in enumerate(ens.times[1:], start=1):
        m, v = ou_moments(t, 1.0, 0.0)
        x = ens.paths[:, k, 0]
        assert abs(x.mean() - m) < 3 * math.sqrt(v / n)
        assert abs(x.var(ddof=1) - v) < 3 * v * math.sqrt(2 / (n - 1))


def test_partition_and_worker_invariance():
    a = simulate_paths(OU, 0.0, 1.0, Gaussian(np.zeros(1), np.eye(1)), 2500, 1e-3, 4, 100, workers=1)
    b = simulate_paths(OU, 0.0, 1.0, Gaussian(np.zeros(1), np.eye(1)), 2500, 1e-3, 4, 100, workers=4)
    assert np.array_equal(a.paths, b.paths)
    head = simulate_paths(OU, 0.0, 1.0, Gaussian(np.zeros(1), np.eye(1)), 10, 1e-3, 4, 100)
    assert np.array_equal(head.paths, a.paths[:10])


def test_noise_is_indexed_by_absolute_time():
    full = simulate_paths(OU, -1.0, 1.0, PointMass(np.zeros(1)), 50, 1e-3, 21, 1)
    k = full.index_of(0.0)
    rest = simulate_paths(OU, 0.0, 1.0, Empirical(full.paths[:, k]), 50, 1e-3, 21, 1)
    assert np.array_equal(rest.paths, full.paths[:, k:])


def test_seeds_change_paths_and_grid_is_checked():
    a = simulate_paths(OU, 0.0, 0.1, PointMass(np.zeros(1)), 5, 1e-3, 0)
    b = simulate_paths(OU, 0.0, 0.1, PointMass(np.zeros(1)), 5, 1e-3, 1)
    assert not np.array_equal(a.paths, b.paths)
    with pytest.raises(ValueError):
        simulate_paths(OU, 0.0005, 0.1, PointMass(np.zeros(1)), 5, 1e-3, 0)
    with pytest.raises(DomainError):
        a.index_of(0.0505)
    assert marginal_law(a, 0.05).size == 5


def test_overflow_names_the_path():
    boom = SdeSystem.scalar(200.0, 0.0, 1.0)
    with pytest.raises(OverflowError, match="path"):
        simulate_paths(boom, 0.0, 10.0, PointMass(np.ones(1)), 3, 1e-2, 0)


def test_deterministic_pullback_is_the_periodic_solution():
    # x' = -x + cos t has the bounded solution (cos t + sin t) / 2
    sys = SdeSystem.scalar(-1.0, COS, 0.0)
    ens = pullback_solution(sys, (0.0, 5.0), 4, 1e-3, 0, record_stride=10, check=False)
    exact = (np.cos(ens.times) + np.sin(ens.times)) / 2
    err = np.max(np.abs(ens.paths[:, :, 0] - exact))
    assert err < math.exp(-ens.meta["burn_in"]) + 1e-9


def test_pullback_requires_stability():
    with pytest.raises(PreconditionError) as info:
        pullback_solution(SdeSystem.scalar(1.0, 0.0, 1.0), (0.0, 1.0), 10, 1e-3, 0)
    assert info.value.report is not None and not info.value.report.stable


def test_pullback_self_consistency_and_boundedness():
    ens = pullback_solution(OU, (0.0, 2.0), 2000, 1e-3, 3, record_stride=100)
    assert ens.meta["self_consistent"]
    rep = boundedness_probe(ens, 0.99)
    # stationary N(0, 1/2): the 0.99 quantile of |x| is 2.576 / sqrt 2
    assert rep.radius == pytest.approx(2.576 / math.sqrt(2), rel=0.15)
    assert not rep.growth


def test_initial_laws():
    assert np.allclose(initial_law_from_dict({"kind": "point", "x": 2.0}, 2).x, [2.0, 2.0])
    g = initial_law_from_dict({"kind": "gaussian", "mean": [1.0, 0.0], "cov": [[2.0, 0.5], [0.5, 1.0]]}, 2)
    m, v = g.moments(2)
    assert np.allclose(m, [1.0, 0.0]) and np.allclose(v, [[2.0, 0.5], [0.5, 1.0]])
    with pytest.raises(ValueError):
        initial_law_from_dict({"kind": "cauchy"}, 1)
    with pytest.raises(ValueError):
        Gaussian(np.zeros(2), -np.eye(2)).moments(2)


def test_csv_exports(tmp_path):
    ens = simulate_paths(OU, 0.0, 0.002, PointMass(np.zeros(1)), 2, 1e-3, 0)
    ens.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "path_id,t,x0" and len(lines) == 1 + 2 * 3
    curve = moment_odes(OU, 0.0, 0.01, [0.0], [[0.0]], 1e-3)
    curve.to_csv(tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "t,m0,v00"
    with pytest.raises(DomainError):
        curve.at(1.0)
