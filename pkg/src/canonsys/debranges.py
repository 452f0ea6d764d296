"""Hermite-Biehler polynomials and their de Branges spaces.

An HB polynomial is stored through its real and imaginary parts,
``E = Theta+ + i Theta-``.  The space ``H(E)`` consists of the polynomials
of degree below ``deg E`` with ``<f, g> = int f(t) conj(g(t)) / |E(t)|^2 dt``;
inner products are evaluated exactly by residues in the upper half-plane.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import NumericalError, Polynomial, ValidationError, poly_complex_roots, poly_real_roots

log = logging.getLogger(__name__)

HB_MARGIN = 1e-10


def _real(p: Polynomial) -> Polynomial:
    if not p.is_real:
        if np.max(np.abs(p.coeffs.imag)) > 1e-12 * max(1.0, np.max(np.abs(p.coeffs))):
            raise ValidationError("expected a real-coefficient polynomial")
        return Polynomial(p.coeffs.real)
    return p


@dataclass(frozen=True)
class HBPolynomial:
    """The pair ``(Theta+, Theta-)`` of real polynomials, ``E = Theta+ + i Theta-``."""

    theta_plus: Polynomial
    theta_minus: Polynomial

    def __post_init__(self):
        object.__setattr__(self, "theta_plus", _real(self.theta_plus))
        object.__setattr__(self, "theta_minus", _real(self.theta_minus))

    @classmethod
    def from_e(cls, E: Polynomial) -> "HBPolynomial":
        c = np.asarray(E.coeffs, dtype=complex)
        return cls(Polynomial(c.real), Polynomial(c.imag))

    @property
    def e(self) -> Polynomial:
        n = max(self.theta_plus.coeffs.size, self.theta_minus.coeffs.size)
        c = np.zeros(n, dtype=complex)
        c[: self.theta_plus.coeffs.size] += self.theta_plus.coeffs
        c[: self.theta_minus.coeffs.size] += 1j * self.theta_minus.coeffs
        return Polynomial(c)

    @property
    def e_star(self) -> Polynomial:
        return self.e.star()

    @property
    def degree(self) -> int:
        return max(self.theta_plus.degree, self.theta_minus.degree)

    @property
    def normalized(self) -> bool:
        return bool(abs(self.e(0.0) - 1.0) <= 1e-10)

    def __call__(self, z):
        """Value of ``E`` at ``z``."""
        return self.theta_plus(z) + 1j * self.theta_minus(z)

    def to_json(self) -> dict:
        return {"theta_plus": self.theta_plus.to_json(),
                "theta_minus": self.theta_minus.to_json(),
                "normalized": bool(self.normalized)}

    @classmethod
    def from_json(cls, obj: dict) -> "HBPolynomial":
        if not isinstance(obj, dict):
            raise ValidationError("HB polynomial JSON must be an object")
        if "theta_plus" in obj and "theta_minus" in obj:
            hb = cls(Polynomial.from_json(obj["theta_plus"]), Polynomial.from_json(obj["theta_minus"]))
        elif "e" in obj:
            hb = cls.from_e(Polynomial.from_json(obj["e"]))
        else:
            raise ValidationError("HB polynomial JSON needs 'theta_plus' and 'theta_minus'")
        if obj.get("normalized") and not hb.normalized:
            raise ValidationError("flagged normalized but E(0) != 1")
        return hb


def theta_from_e(E: Polynomial) -> tuple[Polynomial, Polynomial]:
    hb = HBPolynomial.from_e(E)
    return hb.theta_plus, hb.theta_minus


def e_from_theta(theta_plus: Polynomial, theta_minus: Polynomial) -> Polynomial:
    return HBPolynomial(theta_plus, theta_minus).e


def _as_e(E) -> Polynomial:
    return E.e if isinstance(E, HBPolynomial) else E


def _as_hb(E) -> HBPolynomial:
    return E if isinstance(E, HBPolynomial) else HBPolynomial.from_e(E)


def is_hermite_biehler(E, tol: float = HB_MARGIN) -> tuple[bool, float]:
    """Whether every zero of ``E`` lies strictly below the real axis.

    Returns the verdict and the margin ``-max Im(root)``.
    """
    E = _as_e(E)
    if E.degree < 1:
        raise ValidationError("HB check needs degree >= 1")
    roots = poly_complex_roots(E)
    margin = float(-np.max(roots.imag))
    return margin > tol, margin


def require_hb(E, what: str = "E") -> HBPolynomial:
    hb = _as_hb(E)
    ok, margin = is_hermite_biehler(hb.e)
    if not ok:
        raise ValidationError(f"{what} is not strict Hermite-Biehler (margin {margin:.3e})")
    return hb


# --------------------------------------------------------------------------
# kernels and inner products


def kernel_polynomial(E, lam: complex) -> Polynomial:
    """``K_lam`` as a polynomial in z (exact division of the numerator)."""
    hb = _as_hb(E)
    lb = np.conj(lam)
    num = hb.theta_minus * complex(hb.theta_plus(lb)) - hb.theta_plus * complex(hb.theta_minus(lb))
    q, _ = num.divide_linear(lb)
    # numerator / (pi (lb - z)) = -(numerator / (z - lb)) / pi
    return q * (-1.0 / math.pi)


def reproducing_kernel(E, lam: complex, z: complex) -> complex:
    """``K_lam(z) = [Theta-(z) Theta+(conj lam) - Theta+(z) Theta-(conj lam)] / (pi (conj lam - z))``."""
    hb = _as_hb(E)
    lb = np.conj(lam)
    scale = max(1.0, abs(lam), abs(z))
    if abs(lb - z) < 1e-4 * scale:
        return complex(kernel_polynomial(hb, lam)(z))
    num = hb.theta_minus(z) * hb.theta_plus(lb) - hb.theta_plus(z) * hb.theta_minus(lb)
    return complex(num / (math.pi * (lb - z)))


def _clusters(points: np.ndarray, rtol: float) -> list[np.ndarray]:
    n = points.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(points[i] - points[j]) <= rtol * max(1.0, abs(points[i])):
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values()]


def inner_product(f: Polynomial, g: Polynomial, E, cluster_rtol: float = 1e-3) -> complex:
    """``<f, g>_{H(E)} = int f(t) conj(g(t)) / |E(t)|^2 dt`` by residues.

    The integrand ``f g* / (E E*)`` is summed over the zeros of ``E*`` in
    the upper half-plane.  Simple zeros use the closed residue formula;
    groups of nearby zeros (repeated roots included) are handled together by
    a trapezoidal contour integral on a circle that encloses only them, which
    does not depend on how accurately the individual roots are known.
    """
    Ep = _as_e(E)
    n = Ep.degree
    if n < 1:
        raise ValidationError("E must have degree >= 1")
    if f.degree > n - 1 or g.degree > n - 1:
        raise ValidationError("not in H(E): degree must be below deg E")
    if f.degree < 0 or g.degree < 0:
        return 0.0j
    Es = Ep.star()
    gs = g.star()
    dEs = Es.deriv()
    zeros = np.conj(poly_complex_roots(Ep))
    if np.any(zeros.imag <= 0):
        raise ValidationError("E has zeros on or above the real axis")

    def integrand(z):
        return f(z) * gs(z) / (Ep(z) * Es(z))

    total = 0.0j
    for grp in _clusters(zeros, cluster_rtol):
        pts = zeros[grp]
        if pts.size == 1:
            w = pts[0]
            total += 2j * math.pi * f(w) * gs(w) / (Ep(w) * dEs(w))
            continue
        c = pts.mean()
        others = np.delete(zeros, grp)
        dist = [2 * c.imag]
        if others.size:
            dist.append(np.min(np.abs(others - c)))
        spread = np.max(np.abs(pts - c))
        r = 0.5 * min(dist)
        if r <= 2 * spread:
            raise NumericalError("cannot isolate a cluster of zeros of E")
        K = 256
        th = 2 * math.pi * np.arange(K) / K
        zk = c + r * np.exp(1j * th)
        total += np.sum(integrand(zk) * 1j * r * np.exp(1j * th)) * (2 * math.pi / K)
    return complex(total)


def orthogonal_nodes(E) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights with ``<f, g> = sum_k w_k f(t_k) conj(g(t_k))`` on ``H(E)``.

    The kernels at the real zeros of Theta- (or of Theta+, whichever has full
    degree ``deg E``) form an orthogonal basis, so the sum is exact for the
    whole space.  Weights are ``1 / K_t(t)``: ``pi / (-Theta-'(t) Theta+(t))``
    at zeros of Theta-, ``pi / (Theta+'(t) Theta-(t))`` at zeros of Theta+.
    Unlike residues this needs no complex root, so it stays accurate when
    zeros of ``E`` crowd the real axis.
    """
    hb = _as_hb(E)
    n = hb.degree
    if hb.theta_minus.degree == n:
        s, other, sign = hb.theta_minus, hb.theta_plus, -1.0
    elif hb.theta_plus.degree == n:
        s, other, sign = hb.theta_plus, hb.theta_minus, 1.0
    else:
        raise ValidationError("neither Theta+ nor Theta- has full degree")
    t, mult = poly_real_roots(s, with_multiplicity=True)
    if t.size != n or np.any(mult > 1):
        raise NumericalError("expected deg E simple real zeros of the full-degree part")
    ds = s.deriv()
    w = sign * math.pi / (ds(t) * other(t))
    if np.any(w <= 0):
        raise NumericalError("non-positive orthogonal weight; E is not HB")
    return t, np.real(w)


def inner_product_orthogonal(f: Polynomial, g: Polynomial, E) -> complex:
    """``<f, g>_{H(E)}`` through :func:`orthogonal_nodes`."""
    Ep = _as_e(E)
    if f.degree > Ep.degree - 1 or g.degree > Ep.degree - 1:
        raise ValidationError("not in H(E): degree must be below deg E")
    t, w = orthogonal_nodes(E)
    return complex(np.sum(w * f(t) * np.conj(g(t))))


def inner_product_quadrature(f: Polynomial, g: Polynomial, E) -> complex:
    """The same inner product by adaptive quadrature on the real line."""
    from scipy.integrate import quad

    Ep = _as_e(E)

    def re(t):
        return float(np.real(f(t) * np.conj(g(t)) / abs(Ep(t)) ** 2))

    def im(t):
        return float(np.imag(f(t) * np.conj(g(t)) / abs(Ep(t)) ** 2))

    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=500)
    a = quad(re, -np.inf, np.inf, **opts)[0]
    b = quad(im, -np.inf, np.inf, **opts)[0]
    return complex(a, b)


def gram_matrix(E) -> np.ndarray:
    """``<t^i, t^j>`` for ``0 <= i, j < deg E`` (real symmetric)."""
    Ep = _as_e(E)
    n = Ep.degree
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            v = inner_product(Polynomial.monomial(i), Polynomial.monomial(j), Ep).real
            G[i, j] = G[j, i] = v
    return G


def norm_squared(f: Polynomial, E) -> float:
    return float(inner_product(f, f, E).real)


# --------------------------------------------------------------------------
# Herglotz data


@dataclass(frozen=True)
class HerglotzData:
    """``Theta+/Theta- = sum mu_j / (z - t_j) + a + b z`` with ``mu_j < 0``, ``b >= 0``."""

    poles: np.ndarray
    residues: np.ndarray
    a: float
    b: float

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = self.a + self.b * z
        for t, m in zip(self.poles, self.residues):
            out = out + m / (z - t)
        return out


def herglotz_decomposition(E) -> HerglotzData:
    hb = _as_hb(E)
    tm, tp = hb.theta_minus, hb.theta_plus
    if tm.degree < 0:
        raise ValidationError("Theta- vanishes identically")
    if tm.degree == 0:
        raise ValidationError("Theta- is a nonzero constant; it has no zeros")
    roots, mult = poly_real_roots(tm, with_multiplicity=True)
    if roots.size != tm.degree or np.any(mult > 1):
        raise ValidationError("Theta- must have only real simple zeros")
    d = tm.deriv()
    res = np.array([tp(t) / d(t) for t in roots])
    q, _ = tp.divmod(tm)
    if q.degree > 1:
        raise ValidationError("deg Theta+ exceeds deg Theta- + 1: not Hermite-Biehler")
    qc = np.zeros(2)
    qc[: q.coeffs.size] = np.real(q.coeffs)
    return HerglotzData(roots, res, float(qc[0]), float(qc[1]))


# --------------------------------------------------------------------------
# the second column


@dataclass(frozen=True)
class SecondColumn:
    """``Phi = (Phi+, Phi-)`` rebuilt from ``E`` with the diagnostics of the construction."""

    phi_plus: Polynomial
    phi_minus: Polynomial
    det_residual: float
    thplu_residual: float
    herglotz_min_im: float


def _g_poly(theta: Polynomial, v: np.ndarray) -> Polynomial:
    """``(1/pi) <(theta - theta(lam)) / (. - lam), g>`` as a polynomial in lam.

    With ``v_i = <t^i, g>`` the coefficient of ``lam^m`` is
    ``(1/pi) sum_i theta_{m+1+i} v_i``.
    """
    th = np.real(theta.coeffs)
    n = th.size - 1
    if n < 1:
        return Polynomial([0.0])
    c = np.zeros(n)
    for m in range(n):
        idx = np.arange(m + 1, n + 1)
        c[m] = np.dot(th[idx], v[idx - m - 1]) / math.pi
    return Polynomial(c)


def thplu_sum(E, lam) -> np.ndarray:
    """``sum_tau mu_tau [1/(tau - lam) - 1/tau]`` over zeros tau of Theta+,
    ``mu_tau = 1 / (Theta+'(tau) Theta-(tau))``."""
    hb = _as_hb(E)
    lam = np.asarray(lam, dtype=complex)
    if hb.theta_plus.degree < 1:
        return np.zeros_like(lam)
    taus = poly_real_roots(hb.theta_plus)
    d = hb.theta_plus.deriv()
    out = np.zeros_like(lam)
    for t in taus:
        mu = 1.0 / (d(t) * hb.theta_minus(t))
        out = out + mu * (1.0 / (t - lam) - 1.0 / t)
    return out


def _herglotz_points(n: int = 50) -> np.ndarray:
    k = np.arange(n)
    return (np.cos(2.4 * k) * 4.0) + 1j * (0.05 + 3.0 * (k + 0.5) / n)


def reconstruct_second_column(E, check: bool = True) -> SecondColumn:
    """Rebuild ``Phi`` from ``E`` so that ``[Theta, Phi]`` is the monodromy.

    ``Phi- = 1 + lam G-``, ``Phi+ = lam G+`` with
    ``G+-(lam) = (1/pi) <(Theta+- - Theta+-(lam)) / (. - lam), (Theta+ - 1)/t>``.
    Expanding the difference quotient in monomials turns G+- into exact
    polynomials whose coefficients are inner products ``<t^i, (Theta+ - 1)/t>``.
    """
    hb = require_hb(E)
    if not hb.normalized:
        raise ValidationError("E must satisfy E(0) = 1")
    g, rem = (hb.theta_plus - 1.0).divide_linear(0.0)
    n = hb.degree
    v = np.array([inner_product(Polynomial.monomial(i), g, hb).real for i in range(n)])
    v = np.concatenate([v, [0.0]])
    gp = _g_poly(hb.theta_plus, v)
    gm = _g_poly(hb.theta_minus, v)
    phi_plus = gp.shift_up(1) if gp.degree >= 0 else Polynomial([0.0])
    phi_minus = 1.0 + gm.shift_up(1) if gm.degree >= 0 else Polynomial([1.0])
    det = hb.theta_plus * phi_minus - hb.theta_minus * phi_plus - 1.0
    scale = max(1.0, float(np.max(np.abs(hb.theta_plus.coeffs))), float(np.max(np.abs(hb.theta_minus.coeffs))))
    det_res = float(np.max(np.abs(det.coeffs))) / scale
    pts = _herglotz_points()
    ratio_p = phi_plus(pts) / hb.theta_plus(pts)
    thplu_res = float(np.max(np.abs(ratio_p - thplu_sum(hb, pts))))
    min_im = float(min(np.min((phi_minus(pts) / hb.theta_minus(pts)).imag),
                       np.min(ratio_p.imag) if phi_plus.degree >= 0 else 0.0))
    if check and det_res > 1e-6:
        raise NumericalError(f"second column fails det = 1 (residual {det_res:.2e})")
    return SecondColumn(phi_plus, phi_minus, det_res, thplu_res, min_im)


def system_length_from_e(E) -> float:
    """``L = (1/pi) ||(Theta+ - 1)/lam||^2 - Theta-'(0)``."""
    hb = require_hb(E)
    if not hb.normalized:
        raise ValidationError("E must satisfy E(0) = 1")
    g, _ = (hb.theta_plus - 1.0).divide_linear(0.0)
    nrm = norm_squared(g, hb) if g.degree >= 0 else 0.0
    return nrm / math.pi - float(hb.theta_minus.deriv()(0.0))


def trace_derivative_at_zero(E) -> float:
    """``tr J dN/dlam (0)`` for ``N = [Theta, Phi]``; positive by construction."""
    hb = _as_hb(E)
    sc = reconstruct_second_column(hb)
    return float(sc.phi_plus.deriv()(0.0) - hb.theta_minus.deriv()(0.0))


# --------------------------------------------------------------------------
# exponential type


def log_abs_polynomial(E: Polynomial) -> Callable[[np.ndarray], np.ndarray]:
    """``y -> ln |E(i y)|`` through the factored form (no overflow)."""
    roots = poly_complex_roots(E)
    lead = abs(E.lead)

    def f(y):
        z = 1j * np.asarray(y, dtype=float)
        return math.log(lead) + np.sum(np.log(np.abs(z[..., None] - roots)), axis=-1)

    return f


def numeric_type(log_abs_e: Callable[[np.ndarray], np.ndarray], y_max: float = 1e4,
                 samples: int = 64) -> float:
    """Least-squares slope of ``ln |E(i y)|`` against ``y`` over ``[y_max/10, y_max]``.

    ``log_abs_e`` must accept an array of ``y`` and return ``ln |E(i y)|``.
    """
    y = np.linspace(y_max / 10.0, y_max, samples)
    vals = np.asarray(log_abs_e(y), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite values of ln|E(iy)|")
    slope, _ = np.polyfit(y, vals, 1)
    return float(slope)


# --------------------------------------------------------------------------
# membership and expansions


def membership_check(f: Polynomial, E, grid: np.ndarray | None = None) -> bool:
    """Whether ``f`` lies in ``H(E)``.

    Checks the degree condition and the pointwise kernel bound
    ``|f(z)|^2 <= ||f||^2 (|E(z)|^2 - |E(conj z)|^2) / (4 pi Im z)`` on a grid
    in the upper half-plane.
    """
    Ep = _as_e(E)
    if f.degree > Ep.degree - 1:
        return False
    if f.degree < 0:
        return True
    if grid is None:
        xs = np.linspace(-5, 5, 11)
        grid = (xs[:, None] + 1j * np.array([0.1, 1.0, 5.0])[None, :]).ravel()
    nrm = norm_squared(f, Ep)
    lhs = np.abs(f(grid)) ** 2
    kzz = (np.abs(Ep(grid)) ** 2 - np.abs(Ep(np.conj(grid))) ** 2) / (4 * math.pi * grid.imag)
    return bool(np.all(lhs <= nrm * kzz * (1 + 1e-9) + 1e-300))


def kernel_expansion(f: Polynomial, E) -> Polynomial:
    """``sum_tau f(tau) K_tau / K_tau(tau)`` over the zeros of Theta+."""
    hb = _as_hb(E)
    taus = poly_real_roots(hb.theta_plus)
    out = Polynomial([0.0])
    for t in taus:
        K = kernel_polynomial(hb, t)
        out = out + K * (complex(f(t)) / complex(K(t)))
    return out
