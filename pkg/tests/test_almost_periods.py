import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from favardlab.almost_periods import (
    bebutov_distance,
    l_grid,
    levitan_inclusion_check,
    relative_density_gap,
    scan_almost_periods,
    shift_test,
)
from favardlab.signals import bohr_witness, constant, levitan_example, translate, trig

R2 = math.sqrt(2.0)
COS = trig((1.0,), cos={(1,): 1.0})


def test_l_grid():
    ls = l_grid(10.0)
    assert ls[0] == 1.0 and ls[-1] == 10.0
    assert np.all(np.diff(ls) > 0)
    assert np.allclose(ls[1:-1] / ls[:-2], 1.2)


@pytest.mark.parametrize("c1,c2", [(0.0, 0.3), (1.0, -1.0), (0.0, 5.0)])
def test_bebutov_constants(c1, c2):
    # the cap 1/l never drops below 1/l_max and is 1 near t = 0
    assert bebutov_distance(constant(c1), constant(c2), 20.0, 0.01) == pytest.approx(min(abs(c1 - c2), 1.0))


def test_bebutov_far_perturbation_is_small():
    # a bump living only near |t| = 30 is seen through the cap 1/l(30)
    bump = trig((1.0,), cos={(1,): 1.0})
    far = lambda t: np.where(np.abs(np.abs(t) - 30) < 1, 1.0, 0.0)[..., None]

    class Far(type(bump).__mro__[1]):
        dim = 1

        def _eval(self, t):
            return bump(t) + far(t)

    d = bebutov_distance(Far(), bump, 40.0, 0.01)
    assert d <= 1 / 29.0 * 1.2 + 1e-12


qp = st.builds(
    lambda a, b, c: trig((1.0, R2), const=c, cos={(1, 0): a, (0, 1): b}),
    st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1),
)


@settings(max_examples=100, deadline=None)
@given(f=qp, g=qp, h=qp)
def test_bebutov_axioms(f, g, h):
    d = lambda x, y: bebutov_distance(x, y, 20.0, 0.05)
    assert d(f, f) == 0.0
    assert d(f, g) == d(g, f)
    assert d(f, h) <= d(f, g) + d(g, h) + 2 * 0.05


def test_scan_cos_matches_closed_form():
    # max_t |cos(t + tau) - cos t| = 2 |sin(tau / 2)|
    eps, step = 0.1, 1e-3
    rep = scan_almost_periods(COS, eps, (1.0, 20.0), step, 50.0, verify_step=step)
    taus = step * np.arange(1000, 20001)
    exact = 2 * np.abs(np.sin(taus / 2))
    clear_in = taus[exact < eps - 1e-4]
    clear_out = taus[exact > eps + 1e-4]
    found = set(np.round(rep.periods / step).astype(int))
    assert set(np.round(clear_in / step).astype(int)) <= found
    assert not (set(np.round(clear_out / step).astype(int)) & found)
    assert np.allclose(rep.representatives, 2 * np.pi * np.arange(1, 4), atol=2 * step)
    assert relative_density_gap(rep) == pytest.approx(2 * np.pi, abs=0.01)


def test_scan_rejects_bad_input():
    with pytest.raises(ValueError):
        scan_almost_periods(COS, 0.1, (5.0, 1.0), 1e-3, 50.0)
    with pytest.raises(ValueError):
        scan_almost_periods(COS, 0.1, (1.0, 5.0), 1e-3, 5.0)


def test_empty_report_gap_is_window():
    rep = scan_almost_periods(COS, 0.1, (1.0, 5.0), 1e-2, 20.0)
    assert rep.periods.size == 0 and relative_density_gap(rep) == pytest.approx(4.0)


def test_shift_mode_is_bebutov_distance():
    taus = np.array([0.3, 1.0, 6.0])
    _, res = shift_test(bohr_witness(), taus, 10.0, 30.0, 0.01, "shift")
    for tau, r in zip(taus, res):
        assert r == pytest.approx(bebutov_distance(translate(bohr_witness(), tau), bohr_witness(), 30.0, 0.01), abs=1e-12)


def test_quasi_periodic_periods_near_joint_returns():
    # almost periods of cos t + cos sqrt2 t are near common returns of both angles
    eps = 0.3
    rep = scan_almost_periods(bohr_witness(), eps, (1.0, 200.0), 1e-3, 100.0, verify_step=0.01)
    assert rep.periods.size > 0
    for tau in rep.periods:
        off = [abs(math.remainder(w * tau, 2 * math.pi)) for w in (1.0, R2)]
        assert max(off) < eps


def test_levitan_inclusion_from_witness():
    psi = bohr_witness()
    rep = scan_almost_periods(psi, 0.005, (1.0, 6300.0), 1e-3, 200.0, "almost_period", 0.05)
    assert rep.periods.size > 0
    # delta = 0.005 periods of psi are 0.1-shifts of 1/(2 + psi) but not 0.05-shifts
    assert levitan_inclusion_check(levitan_example(), psi, 0.1, 0.005, (1.0, 6300.0), 1e-3, 200.0, 0.05) == 1.0
    assert levitan_inclusion_check(levitan_example(), psi, 0.05, 0.005, (1.0, 6300.0), 1e-3, 200.0, 0.05) < 0.95
    # no periods in the window: vacuous inclusion
    assert levitan_inclusion_check(levitan_example(), psi, 0.1, 0.005, (1.0, 100.0), 1e-3, 200.0, 0.05) == 1.0
