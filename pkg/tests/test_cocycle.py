import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from favardlab.cocycle import (
    DichotomyCertificate,
    LinearSystem,
    cauchy_operator,
    cocycle_residual,
    fit_dichotomy,
    projection_path,
    propagate,
    rigidity_margin,
    stability_probe,
    transition_grid,
    translated_projection,
    verify_dichotomy_bounds,
    write_transition_csv,
)
from favardlab.errors import NoDichotomyError
from favardlab.signals import bohr_witness, levitan_example, Scaled, trig

R2 = math.sqrt(2.0)
S = np.array([[1.0, 2.0], [0.5, 1.5]])
CONJ = S @ np.diag([-1.0, 1.0]) @ np.linalg.inv(S)
P_CONJ = S @ np.diag([1.0, 0.0]) @ np.linalg.inv(S)
QP = LinearSystem.scalar_identity(trig((1.0, R2), const=-2.0, cos={(1, 0): -1.0, (0, 1): -1.0}))


def test_constant_system_matches_expm():
    a = np.array([[-0.5, 2.0], [-1.0, 0.3]])
    sys = LinearSystem.constant(a)
    u = cauchy_operator(sys, -0.4, 1.3, 1e-3).matrix
    assert np.max(np.abs(u - expm(1.7 * a))) < 1e-10


def test_scalar_time_varying_closed_form():
    # x' = -(2 + sin t) x: x(t) = x0 exp(-2t + cos t - 1)
    sys = LinearSystem.scalar_identity(trig((1.0,), const=-2.0, sin={(1,): -1.0}))
    x = propagate(sys, 0.0, 3.0, [1.0], 1e-3)
    assert x[0] == pytest.approx(math.exp(-6.0 + math.cos(3.0) - 1.0), rel=1e-10)


def test_rk4_is_fourth_order():
    # steps small enough that no substeps are inserted (h * |A| <= 0.1)
    sys = LinearSystem.scalar_identity(trig((1.0,), const=-2.0, sin={(1,): -1.0}))
    exact = math.exp(-6.0 + math.cos(3.0) - 1.0)
    e1 = abs(propagate(sys, 0.0, 3.0, [1.0], 0.03)[0] - exact)
    e2 = abs(propagate(sys, 0.0, 3.0, [1.0], 0.015)[0] - exact)
    assert 12 < e1 / e2 < 20


@settings(max_examples=20, deadline=None)
@given(t=st.floats(-2, 2), tau=st.floats(-2, 2))
def test_cocycle_identity(t, tau):
    assert cocycle_residual(QP, t, tau, 1e-3) <= 1e-7
    lev = LinearSystem.scalar_identity(Scaled(levitan_example(), -1.0))
    assert cocycle_residual(lev, t, tau, 1e-3) <= 1e-7


def test_transition_grid_inverse_pairs():
    sys = LinearSystem.constant(CONJ)
    times, fwd, back = transition_grid(sys, 2.0, 1e-3, samples=20)
    eye = np.eye(2)
    for u, v in zip(fwd, back):
        assert np.max(np.abs(u @ v - eye)) < 1e-9


def test_diag_certificate():
    cert = fit_dichotomy(LinearSystem.constant(np.diag([-1.0, 1.0])), 10.0, 1e-3)
    assert np.allclose(cert.P, np.diag([1.0, 0.0]), atol=1e-12)
    assert cert.nu == pytest.approx(1.0, rel=1e-6)
    assert cert.stable_rank == 1
    assert cert.residual <= 1e-6
    assert verify_dichotomy_bounds(cert, 200) <= 1e-6


def test_conjugate_certificate_recovers_projection():
    cert = fit_dichotomy(LinearSystem.constant(CONJ), 10.0, 1e-3)
    assert np.max(np.abs(cert.P - P_CONJ)) < 1e-8
    assert np.linalg.norm(cert.P @ cert.P - cert.P) <= 1e-10
    assert abs(cert.nu - 1.0) < 0.1
    assert verify_dichotomy_bounds(cert, 200) <= 1e-6


def test_stable_system_has_trivial_splitting():
    cert = fit_dichotomy(LinearSystem.constant([[-1.0]]), 10.0, 1e-3)
    assert np.allclose(cert.P, [[1.0]])
    assert cert.nu == pytest.approx(1.0, rel=1e-6)


def test_rotation_has_no_dichotomy():
    with pytest.raises(NoDichotomyError):
        fit_dichotomy(LinearSystem.constant([[0.0, 1.0], [-1.0, 0.0]]), 10.0, 1e-3)


def test_verify_catches_false_certificates():
    good = fit_dichotomy(LinearSystem.constant(CONJ), 10.0, 1e-3)
    inflated = DichotomyCertificate(good.P.copy(), good.N_const, 2 * good.nu, 0.0, 10.0, 1e-3, system=good.system)
    assert verify_dichotomy_bounds(inflated, 200) > 1.0
    zero = LinearSystem.constant([[0.0]])
    fake = DichotomyCertificate(np.eye(1), 1.0, 0.5, 0.0, 10.0, 1e-3, system=zero)
    assert verify_dichotomy_bounds(fake, 200) > 1.0


def test_projection_is_invariant_for_constant_systems():
    sys = LinearSystem.constant(CONJ)
    cert = fit_dichotomy(sys, 10.0, 1e-3)
    assert np.max(np.abs(translated_projection(sys, cert, 1.5, 1e-3) - cert.P)) < 1e-8
    ts, path = projection_path(sys, cert, -5.0, 5.0, 1e-2)
    assert ts.size == path.shape[0]
    assert np.max(np.abs(path - cert.P)) < 1e-9


def test_rigidity_margin_diagonal():
    sys = LinearSystem.constant(np.diag([-1.0, 1.0]))
    cert = fit_dichotomy(sys, 10.0, 1e-3)
    # u0 = (0, 1): |x(10)| = e^10 against e^9 / N
    assert rigidity_margin(sys, cert, 10.0, 1e-3, vectors=[[0.0, 1.0]]) == pytest.approx(math.e, rel=1e-6)
    assert rigidity_margin(sys, cert, 10.0, 1e-3, trials=8) >= 1.0


def test_stability_probe():
    stable = stability_probe(QP, 20.0, 1e-3, 8)
    assert stable.stable and stable.decay_rate == pytest.approx(2.0, abs=0.1)
    flat = stability_probe(LinearSystem.constant([[0.0]]), 20.0, 1e-3, 4)
    assert not flat.stable
    up = stability_probe(LinearSystem.constant([[1.0]]), 20.0, 1e-3, 4)
    assert not up.stable and up.unstable_direction


def test_declared_bound_is_checked():
    with pytest.raises(ValueError):
        LinearSystem.scalar_identity(bohr_witness(), bound=1.0)


def test_transition_csv(tmp_path):
    path = tmp_path / "u.csv"
    write_transition_csv(path, [0.0, 1.0], [np.eye(2), 2 * np.eye(2)])
    lines = path.read_text().splitlines()
    assert lines[0] == "t,u00,u01,u10,u11,norm"
    assert lines[2] == "1,2,0,0,2,2"
