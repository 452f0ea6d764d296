import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from canonsys.core import Polynomial, ValidationError
from canonsys.debranges import (
    HBPolynomial,
    e_from_theta,
    herglotz_decomposition,
    inner_product,
    inner_product_orthogonal,
    inner_product_quadrature,
    is_hermite_biehler,
    kernel_expansion,
    kernel_polynomial,
    log_abs_polynomial,
    membership_check,
    numeric_type,
    reconstruct_second_column,
    reproducing_kernel,
    system_length_from_e,
    theta_from_e,
    thplu_sum,
    trace_derivative_at_zero,
)
from canonsys.evolve import log_abs_de_branges, spectrum_alpha
from canonsys.hamiltonian import Constant, Hamiltonian, RankOne

from _gen import random_upper_points

E1 = Polynomial([1.0, -1j])           # 1 - iz
E2 = Polynomial([1.0, -2j, -1.0])     # (1 - iz)^2


def random_hb(rng: np.random.Generator, deg: int) -> Polynomial:
    """``prod (1 - z / w_k)`` with zeros ``w_k`` in the lower half-plane, so ``E(0) = 1``."""
    w = rng.uniform(-3, 3, deg) - 1j * rng.uniform(0.3, 3, deg)
    E = Polynomial([1.0])
    for wk in w:
        E = E * Polynomial([1.0, -1.0 / wk])
    return E


def _poly_close(p: Polynomial, coeffs, tol=1e-12) -> bool:
    c = np.zeros(max(p.coeffs.size, len(coeffs)), dtype=complex)
    c[: p.coeffs.size] += p.coeffs
    c[: len(coeffs)] -= np.asarray(coeffs, dtype=complex)
    return bool(np.max(np.abs(c)) <= tol)


# ---------------------------------------------------------------- conversions


def test_theta_from_e_examples():
    tp, tm = theta_from_e(E1)
    assert _poly_close(tp, [1.0]) and _poly_close(tm, [0.0, -1.0])
    assert _poly_close(e_from_theta(Polynomial([1.0, 0.0, -1.0]), Polynomial([0.0, -2.0])), E2.coeffs)


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_conversion_roundtrip(seed, deg):
    E = random_hb(np.random.default_rng(seed), deg)
    assert _poly_close(e_from_theta(*theta_from_e(E)), E.coeffs, 0.0)


def test_hb_json_roundtrip():
    hb = HBPolynomial.from_e(E2)
    obj = hb.to_json()
    assert obj["normalized"] is True
    back = HBPolynomial.from_json(obj)
    assert _poly_close(back.e, E2.coeffs, 0.0)
    with pytest.raises(ValidationError):
        HBPolynomial.from_json({"theta_plus": Polynomial([2.0]).to_json(),
                                "theta_minus": Polynomial([0.0, 1.0]).to_json(), "normalized": True})


def test_is_hermite_biehler_examples():
    ok, margin = is_hermite_biehler(E1)
    assert ok and margin == pytest.approx(1.0)
    assert not is_hermite_biehler(Polynomial([1.0, 1j]))[0]
    assert is_hermite_biehler(E2)[0]
    assert not is_hermite_biehler(Polynomial([1.0, -1.0]))[0]  # real zero


# ---------------------------------------------------------------- kernels


def test_kernel_of_linear_e_is_constant():
    rng = np.random.default_rng(0)
    for lam, z in zip(random_upper_points(rng, 5), random_upper_points(rng, 5)):
        assert reproducing_kernel(E1, lam, z) == pytest.approx(1 / math.pi)


def test_kernel_diagonal_identity():
    rng = np.random.default_rng(1)
    E = random_hb(rng, 5)
    for lam in random_upper_points(rng, 20, 3.0):
        expect = (abs(E(lam)) ** 2 - abs(E(np.conj(lam))) ** 2) / (4 * math.pi * lam.imag)
        assert reproducing_kernel(E, lam, lam) == pytest.approx(expect, rel=1e-9)


def test_free_system_kernel_at_zero():
    H = Hamiltonian([Constant(math.pi, np.eye(2) / 2)])
    from canonsys.evolve import transfer_matrices

    for z in [0.3, 1.7 + 0.4j, -2.2]:
        M = transfer_matrices(H, np.array([0.0, z]))
        tp0, tm0 = M[0, 0, 0], M[0, 1, 0]
        tpz, tmz = M[1, 0, 0], M[1, 1, 0]
        K = (tmz * tp0 - tpz * tm0) / (math.pi * (0 - z))
        assert K == pytest.approx(np.sin(math.pi * z / 2) / (math.pi * z))


def test_inner_product_examples():
    assert inner_product(Polynomial([1.0]), Polynomial([1.0]), E1) == pytest.approx(math.pi)
    # int t^2 / (1 + t^2)^2 dt = pi / 2
    assert inner_product(Polynomial([0.0, 1.0]), Polynomial([0.0, 1.0]), E2) == pytest.approx(math.pi / 2)
    with pytest.raises(ValidationError, match="not in H"):
        inner_product(Polynomial([0.0, 1.0]), Polynomial([1.0]), E1)


def test_reproducing_property():
    rng = np.random.default_rng(2)
    E = random_hb(rng, 5)
    lam, mu = random_upper_points(rng, 2, 2.0)
    Kl, Km = kernel_polynomial(E, lam), kernel_polynomial(E, mu)
    # the inner product is linear in the first slot, so <K_lam, K_mu> = K_lam(mu)
    assert inner_product(Kl, Km, E) == pytest.approx(reproducing_kernel(E, lam, mu), rel=1e-9)
    f = Polynomial(rng.normal(size=5) + 1j * rng.normal(size=5))
    assert inner_product(f, Km, E) == pytest.approx(f(mu), rel=1e-9)


def test_kernels_at_two_point_spectrum_are_orthogonal():
    H = Hamiltonian([RankOne(0.8, 0.0), RankOne(1.1, -1.0)])
    from canonsys.evolve import polynomial_monodromy

    P = polynomial_monodromy(H)
    E = e_from_theta(P[0][0], P[1][0])
    t = spectrum_alpha(H, math.pi / 2, (-20, 20))
    assert t.size == 2
    K0, K1 = kernel_polynomial(E, t[0]), kernel_polynomial(E, t[1])
    assert abs(inner_product(K0, K1, E)) <= 1e-9


@given(st.integers(0, 10_000), st.integers(1, 8))
def test_residue_inner_product_matches_quadrature(seed, deg):
    rng = np.random.default_rng(seed)
    E = random_hb(rng, deg)
    f = Polynomial(rng.normal(size=deg))
    g = Polynomial(rng.normal(size=deg) + 1j * rng.normal(size=deg))
    a = inner_product(f, g, E)
    b = inner_product_quadrature(f, g, E)
    scale = math.sqrt(inner_product(f, f, E).real * inner_product(g, g, E).real)
    assert abs(a - b) <= 1e-7 * scale


@given(st.integers(0, 10_000), st.integers(1, 8))
def test_orthogonal_node_inner_product_matches_residues(seed, deg):
    rng = np.random.default_rng(seed)
    E = random_hb(rng, deg)
    f = Polynomial(rng.normal(size=deg))
    g = Polynomial(rng.normal(size=deg))
    scale = math.sqrt(inner_product(f, f, E).real * inner_product(g, g, E).real)
    assert abs(inner_product_orthogonal(f, g, E) - inner_product(f, g, E)) <= 1e-8 * scale


def test_repeated_zero_handled_by_contour():
    # E = (1 - iz)^3 has a triple zero; the residue sum must not depend on root splitting
    E = E1 * E1 * E1
    assert inner_product(Polynomial([1.0]), Polynomial([1.0]), E) == pytest.approx(3 * math.pi / 8, rel=1e-10)


# ---------------------------------------------------------------- Herglotz data


def test_herglotz_examples():
    hd = herglotz_decomposition(E2)
    assert hd.poles == pytest.approx([0.0], abs=1e-14)
    assert hd.residues == pytest.approx([-0.5])
    assert (hd.a, hd.b) == (pytest.approx(0.0, abs=1e-14), pytest.approx(0.5))
    mu0 = 1.7
    hd = herglotz_decomposition(HBPolynomial(Polynomial([1.0]), Polynomial([0.0, -1 / mu0])))
    assert hd.residues == pytest.approx([-mu0])


@given(st.integers(0, 10_000), st.integers(1, 7))
def test_theta_ratio_is_herglotz(seed, deg):
    rng = np.random.default_rng(seed)
    hb = HBPolynomial.from_e(random_hb(rng, deg))
    z = random_upper_points(rng, 100, 4.0)
    assert np.all((hb.theta_plus(z) / hb.theta_minus(z)).imag > 0)
    hd = herglotz_decomposition(hb)
    assert np.all(hd.residues < 0) and hd.b >= 0
    assert hd(z) == pytest.approx(hb.theta_plus(z) / hb.theta_minus(z), rel=1e-8)


# ---------------------------------------------------------------- second column and length


def test_second_column_examples():
    sc = reconstruct_second_column(E1)
    assert _poly_close(sc.phi_plus, [0.0]) and _poly_close(sc.phi_minus, [1.0])
    assert thplu_sum(E1, np.array([1j])) == pytest.approx([0.0])
    sc = reconstruct_second_column(E2)
    assert _poly_close(sc.phi_plus, [0.0, 0.5], 1e-12) and _poly_close(sc.phi_minus, [1.0], 1e-12)


def test_second_column_requires_normalized_input():
    with pytest.raises(ValidationError):
        reconstruct_second_column(Polynomial([2.0, -1j]))


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_second_column_postconditions(seed, deg):
    E = random_hb(np.random.default_rng(seed), deg)
    sc = reconstruct_second_column(E)
    assert sc.det_residual <= 1e-9
    assert sc.thplu_residual <= 1e-8
    assert sc.herglotz_min_im >= -1e-9
    assert trace_derivative_at_zero(E) > 0


def test_length_examples():
    assert system_length_from_e(E1) == pytest.approx(1.0)
    assert system_length_from_e(E2) == pytest.approx(2.5)


# ---------------------------------------------------------------- exponential type


def test_numeric_type_of_polynomial_is_zero():
    E = random_hb(np.random.default_rng(4), 6)
    assert abs(numeric_type(log_abs_polynomial(E), 1e4)) <= 0.02


def test_numeric_type_of_free_systems():
    def free(L):
        H = Hamiltonian([Constant(L, np.eye(2) / 2)])
        return lambda y: log_abs_de_branges(H, 1j * np.asarray(y))

    assert numeric_type(free(2.0), 1e3) == pytest.approx(1.0, rel=0.02)
    f1, f2 = free(1.5), free(2.5)
    assert numeric_type(lambda y: f1(y) + f2(y), 1e3) == pytest.approx(2.0, rel=0.02)


# ---------------------------------------------------------------- membership and expansions


def test_membership_examples():
    E = random_hb(np.random.default_rng(5), 4)
    hb = HBPolynomial.from_e(E)
    assert membership_check(kernel_polynomial(E, 0.3 + 0.7j), E)
    assert not membership_check(E, E)
    g, _ = (hb.theta_plus - 1.0).divide_linear(0.0)
    assert membership_check(g, E)


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_polya_monotonicity(seed, deg):
    rng = np.random.default_rng(seed)
    E = random_hb(rng, deg)
    eps = np.linspace(0.0, 3.0, 61)
    for k in rng.uniform(-4, 4, 20):
        vals = np.abs(E(k + 1j * eps))
        assert np.all(np.diff(vals) >= -1e-10 * vals[1:])


@given(st.integers(0, 10_000), st.integers(2, 6))
def test_kernel_expansion_reconstructs_elements(seed, deg):
    rng = np.random.default_rng(seed)
    E = random_hb(rng, deg)
    hb = HBPolynomial.from_e(E)
    lead = abs(E.lead)
    if abs(hb.theta_plus.lead) < 0.05 * lead:
        # Theta+ is (nearly) of lower degree: it belongs to H(E) or has a zero near infinity
        return
    f = Polynomial(rng.normal(size=deg))
    back = kernel_expansion(f, E)
    c = np.zeros(deg, dtype=complex)
    c[: back.coeffs.size] = back.coeffs
    assert np.max(np.abs(c - f.coeffs)) <= 1e-7 * max(1.0, np.max(np.abs(f.coeffs)))
