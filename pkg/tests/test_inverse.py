import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from canonsys.core import Matrix2, Polynomial, ValidationError
from canonsys.debranges import HBPolynomial, system_length_from_e
from canonsys.evolve import AtomicMeasure, polynomial_monodromy, spectral_measure_alpha
from canonsys.inverse import (
    RegularHBSpec,
    factor_step,
    factorize,
    free_regular_spec,
    regular_inverse,
    regular_spec_length,
    segment_from_nilpotent,
    solve_finite_measure_inverse,
    solve_polynomial_inverse,
    terminal_segment,
    theta_from_atoms,
)

from _gen import random_atomic_measure

E2 = HBPolynomial.from_e(Polynomial([1.0, -2j, -1.0]))  # (1 - iz)^2


def _coeffs(p: Polynomial, n: int) -> np.ndarray:
    c = np.zeros(n)
    c[: p.coeffs.size] = np.real(p.coeffs)
    return c


def _theta_residual(H, hb: HBPolynomial) -> float:
    P = polynomial_monodromy(H)
    n = hb.degree + 1
    scale = max(np.max(np.abs(_coeffs(hb.theta_plus, n))), np.max(np.abs(_coeffs(hb.theta_minus, n))))
    return max(np.max(np.abs(_coeffs(P[0][0], n) - _coeffs(hb.theta_plus, n))),
               np.max(np.abs(_coeffs(P[1][0], n) - _coeffs(hb.theta_minus, n)))) / scale


def _segments(H):
    return [(s.length, s.angle) for s in H.segments]


# ---------------------------------------------------------------- rank-one pieces


def test_segment_from_nilpotent_examples():
    s = segment_from_nilpotent(Matrix2(0, 1, 0, 0))
    assert s.length == pytest.approx(1.0) and s.angle == pytest.approx(math.pi / 2)
    s = segment_from_nilpotent(Matrix2(0, 0, -1, 0))
    assert s.length == pytest.approx(1.0) and s.angle == pytest.approx(0.0)
    s = segment_from_nilpotent(Matrix2(1, 1, -1, -1))
    assert s.length == pytest.approx(2.0) and s.angle == pytest.approx(math.pi / 4)


def test_segment_from_nilpotent_rejects_bad_input():
    with pytest.raises(ValidationError, match="empty segment"):
        segment_from_nilpotent(Matrix2(0, 0, 0, 0))
    with pytest.raises(ValidationError):
        segment_from_nilpotent(Matrix2(1, 0, 0, 1))
    with pytest.raises(ValidationError):
        segment_from_nilpotent(Matrix2(0, -1, 0, 0))


@given(st.floats(0.1, 5), st.floats(-math.pi / 2 + 0.01, math.pi / 2))
def test_segment_reproduces_its_factor(a, ang):
    from canonsys.evolve import singular_interval_monodromy

    e = (math.cos(ang), math.sin(ang))
    R = singular_interval_monodromy(a, e, 1.0).to_array() - np.eye(2)
    s = segment_from_nilpotent(Matrix2.from_array(R))
    back = singular_interval_monodromy(s.length, (math.cos(s.angle), math.sin(s.angle)), 1.0).to_array()
    assert back - np.eye(2) == pytest.approx(R, abs=1e-9)


def test_terminal_segment_examples():
    s = terminal_segment(HBPolynomial(Polynomial([1.0]), Polynomial([0.0, -1.0])))
    assert s.length == pytest.approx(1.0) and s.angle == pytest.approx(0.0)
    s = terminal_segment(HBPolynomial(Polynomial([1.0, 1.0]), Polynomial([0.0, -1.0])))
    assert s.length == pytest.approx(2.0) and s.angle == pytest.approx(math.pi / 4)
    with pytest.raises(ValidationError, match="not HB"):
        terminal_segment(HBPolynomial(Polynomial([1.0]), Polynomial([0.0, 1.0])))


# ---------------------------------------------------------------- factorization


@pytest.mark.parametrize("method", ["kernel", "leading"])
def test_factor_step_example(method):
    st_ = factor_step(E2, method=method)
    assert st_.S.to_array() == pytest.approx(np.array([[0, -0.5], [0, 0]]), abs=1e-12)
    assert _coeffs(st_.remainder.theta_plus, 2) == pytest.approx([1, 0], abs=1e-12)
    assert _coeffs(st_.remainder.theta_minus, 2) == pytest.approx([0, -2], abs=1e-12)
    # the extracted factor I - lam S = [[1, lam/2], [0, 1]] has R12 >= 0 and R21 <= 0
    R = -st_.S.to_array()
    assert R[0, 1] == pytest.approx(0.5) and R[1, 0] <= 0


def test_factor_step_terminal_case():
    with pytest.raises(ValidationError, match="terminal case"):
        factor_step(HBPolynomial.from_e(Polynomial([1.0, -1j])))


@pytest.mark.parametrize("method", ["spectral", "kernel", "leading"])
def test_polynomial_inverse_examples(method):
    H = solve_polynomial_inverse(Polynomial([1.0, -1j]), method=method)
    assert _segments(H) == [(pytest.approx(1.0), pytest.approx(0.0, abs=1e-12))]
    H = solve_polynomial_inverse(E2, method=method)
    (l1, a1), (l2, a2) = _segments(H)
    assert (l1, l2) == (pytest.approx(2.0, abs=1e-8), pytest.approx(0.5, abs=1e-8))
    assert abs(a1) <= 1e-8 and a2 == pytest.approx(math.pi / 2, abs=1e-8)
    assert H.length == pytest.approx(system_length_from_e(E2), abs=1e-8)


@given(st.integers(0, 10_000))
def test_factorization_steps_are_nilpotent_and_telescope(seed):
    rng = np.random.default_rng(seed)
    hb = theta_from_atoms(random_atomic_measure(rng, 6, min_gap=0.5))
    prod = np.eye(2)
    for st_ in factorize(hb, hb_tol=0.0):
        S = st_.S.to_array().real
        sc = max(1.0, np.max(np.abs(S)))
        assert abs(np.linalg.det(S)) <= 1e-9 * sc ** 2 and abs(np.trace(S)) <= 1e-9 * sc
        assert S[0, 1] <= 1e-9 * sc and S[1, 0] >= -1e-9 * sc
        assert st_.telescoping_residual <= 1e-7
        # product of extracted factors times the remainder gives Theta back at a test point
        lam = 0.37
        prod = prod @ (np.eye(2) - lam * S)
        psi = np.array([st_.remainder.theta_plus(lam), st_.remainder.theta_minus(lam)]).real
        th = np.array([hb.theta_plus(lam), hb.theta_minus(lam)]).real
        assert prod @ psi == pytest.approx(th, rel=1e-7, abs=1e-7)


@pytest.mark.parametrize("method", ["spectral", "kernel", "leading"])
def test_polynomial_inverse_roundtrip(method):
    rng = np.random.default_rng(17)
    for _ in range(15):
        hb = theta_from_atoms(random_atomic_measure(rng, 6, min_gap=0.5))
        H = solve_polynomial_inverse(hb, hb_tol=0.0, method=method)
        assert len(H.segments) == hb.degree
        assert _theta_residual(H, hb) <= 1e-7
        assert H.length == pytest.approx(system_length_from_e(hb), rel=1e-8)
        assert abs(math.cos(H.segments[0].angle)) > 1e-12  # left-end condition


# ---------------------------------------------------------------- finite measures


def test_theta_from_atoms_examples():
    hb = theta_from_atoms(AtomicMeasure([0.0], [1.0]))
    assert _coeffs(hb.theta_plus, 2) == pytest.approx([1, 0]) and _coeffs(hb.theta_minus, 2) == pytest.approx([0, -1])
    hb = theta_from_atoms(AtomicMeasure([0.0, 1.0], [1.0, 1.0]))
    assert _coeffs(hb.theta_plus, 3) == pytest.approx([1, -2, 0])
    assert _coeffs(hb.theta_minus, 3) == pytest.approx([0, -1, 1])
    roots = sorted(np.roots(hb.e.coeffs[::-1]), key=lambda r: r.imag)
    expect = [(1 - (2 + math.sqrt(3)) * 1j) / 2, (1 - (2 - math.sqrt(3)) * 1j) / 2]
    assert roots == pytest.approx(expect)
    d = hb.theta_minus.deriv()
    for t in [0.0, 1.0]:
        assert -1 / (hb.theta_plus(t) * d(t)) == pytest.approx(1.0, rel=1e-10)


@given(st.integers(0, 10_000), st.sampled_from([-1.0, 0.0, 1.0]))
def test_theta_from_atoms_weights(seed, d1):
    mu = random_atomic_measure(np.random.default_rng(seed))
    hb = theta_from_atoms(mu, d1)
    d = hb.theta_minus.deriv()
    w = np.array([-1 / (hb.theta_plus(t) * d(t)) for t in mu.t]).real
    assert w == pytest.approx(mu.w, rel=1e-8)
    assert hb.theta_plus(0.0) == pytest.approx(1.0)


def test_measure_without_zero_atom_rejected():
    with pytest.raises(ValidationError, match="atom at t = 0"):
        theta_from_atoms(AtomicMeasure([1.0], [1.0]))
    with pytest.raises(ValidationError):
        solve_finite_measure_inverse(AtomicMeasure([1.0, 2.0], [1.0, 1.0]))


def test_finite_measure_examples():
    H = solve_finite_measure_inverse(AtomicMeasure([0.0], [1.0]))
    assert _segments(H) == [(pytest.approx(1.0), pytest.approx(0.0, abs=1e-12))]
    mu = AtomicMeasure([0.0, 1.0], [1.0, 1.0])
    H = solve_finite_measure_inverse(mu)
    assert len(H.segments) == 2
    back = spectral_measure_alpha(H, math.pi / 2, (-3, 3))
    assert back.t == pytest.approx(mu.t, abs=1e-7) and back.w == pytest.approx(mu.w, rel=1e-6)


@given(st.integers(0, 10_000), st.sampled_from([-1.0, 0.0, 1.0]))
def test_measure_roundtrip_and_gauge_invariance(seed, d1):
    mu = random_atomic_measure(np.random.default_rng(seed))
    H = solve_finite_measure_inverse(mu, d1)
    assert len(H.segments) == len(mu)
    back = spectral_measure_alpha(H, math.pi / 2, (-6, 6))
    assert back.t == pytest.approx(mu.t, abs=1e-7)
    assert back.w == pytest.approx(mu.w, rel=1e-6)


def test_gauge_changes_the_hamiltonian():
    mu = AtomicMeasure([0.0, 1.0, -2.0], [1.0, 0.5, 2.0])
    H0 = solve_finite_measure_inverse(mu, 0.0)
    H1 = solve_finite_measure_inverse(mu, 1.0)
    assert H0.segments[-1].angle != pytest.approx(H1.segments[-1].angle)
    # d1 fixes the last direction to (1, -d1) up to scale
    assert math.tan(H1.segments[-1].angle) == pytest.approx(-1.0)


def test_spectral_and_factorization_routes_agree():
    mu = AtomicMeasure([0.0, 0.8, -1.5, 2.6], [1.2, 0.4, 2.0, 0.7])
    ref = np.array(_segments(solve_finite_measure_inverse(mu)))
    for method in ["kernel", "leading"]:
        got = np.array(_segments(solve_finite_measure_inverse(mu, method=method)))
        assert got[:, 0] == pytest.approx(ref[:, 0], abs=1e-8)
        # a direction is defined up to sign, so angles agree modulo pi
        turn = np.remainder(got[:, 1] - ref[:, 1] + math.pi / 2, math.pi) - math.pi / 2
        assert np.max(np.abs(turn)) <= 1e-8


# ---------------------------------------------------------------- regular case


def test_regular_spec_validation_and_json():
    with pytest.raises(ValidationError):
        RegularHBSpec(np.array([1.0, 0.0]), np.array([-1.0, -1.0]))
    with pytest.raises(ValidationError):
        RegularHBSpec(np.array([0.0, 1.0]), np.array([-1.0, 0.5]))
    spec = free_regular_spec(math.pi, 9)
    back = RegularHBSpec.from_json(spec.to_json())
    assert np.array_equal(back.zeros, spec.zeros) and np.array_equal(back.residues, spec.residues)


def test_free_regular_length():
    spec = free_regular_spec(math.pi)
    assert regular_spec_length(spec) == pytest.approx(math.pi, abs=1e-6)


def test_regular_inverse_polynomial_case_is_exact():
    mu = AtomicMeasure([0.0, 1.0, -1.7], [1.0, 0.6, 1.4])
    hb = theta_from_atoms(mu)
    spec = RegularHBSpec.from_hb(hb)
    H = solve_polynomial_inverse(hb, hb_tol=0.0)
    res = regular_inverse(spec, len(spec), grid_n=32)
    assert res.length == pytest.approx(H.length, rel=1e-10)
    assert not res.padded
    from canonsys.inverse import cumulative_hamiltonian

    assert res.F == pytest.approx(cumulative_hamiltonian(H, res.grid), abs=1e-8)


def test_regular_inverse_free_system_converges():
    spec = free_regular_spec(math.pi)
    errs = []
    for N in (10, 40):
        res = regular_inverse(spec, N, grid_n=64)
        exact = res.grid[:, None, None] * np.eye(2) / 2
        errs.append(float(np.max(np.abs(res.F - exact))))
        assert res.increments
    assert errs[1] < errs[0]


def test_regular_inverse_rejects_bad_n():
    spec = free_regular_spec(math.pi, 9)
    with pytest.raises(ValidationError):
        regular_inverse(spec, 0)
    with pytest.raises(ValidationError):
        regular_inverse(spec, 10)
