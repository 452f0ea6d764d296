"""Inverse spectral problems on a finite interval.

Three solvers are provided:

* :func:`solve_polynomial_inverse` factors the monodromy of a polynomial
  Hermite-Biehler function into rank-one pieces, one degree at a time;
* :func:`solve_finite_measure_inverse` builds that polynomial from a finite
  atomic spectral measure first;
* :func:`regular_inverse` approximates the Hamiltonian of a regular HB
  function given by its Herglotz data, through polynomial truncations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Matrix2, NumericalError, Polynomial, ValidationError
from .debranges import (HB_MARGIN, HBPolynomial, herglotz_decomposition, inner_product_orthogonal, is_hermite_biehler,
                        kernel_polynomial, system_length_from_e)
from .evolve import AtomicMeasure
from .hamiltonian import Hamiltonian, RankOne, Sampled
from .jacobi import jacobi_from_spectral_data, jacobi_to_hamiltonian

log = logging.getLogger(__name__)

NIL_TOL = 1e-9


def _pad(c: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=c.dtype)
    out[: min(n, c.size)] = c[:n]
    return out


def _coef_scale(hb: HBPolynomial) -> float:
    return max(1.0, float(np.max(np.abs(hb.theta_plus.coeffs))),
               float(np.max(np.abs(hb.theta_minus.coeffs))))


def _require_normalized_hb(hb: HBPolynomial, hb_tol: float = HB_MARGIN) -> None:
    if hb.degree < 1:
        raise ValidationError("E must have degree >= 1")
    if not hb.normalized:
        raise ValidationError(f"E must satisfy E(0) = 1, got {complex(hb.e(0.0))}")
    ok, margin = is_hermite_biehler(hb.e, hb_tol)
    if not ok:
        raise ValidationError(f"E is not strict Hermite-Biehler (margin {margin:.3e})")


# --------------------------------------------------------------------------
# rank-one pieces


def segment_from_nilpotent(R: Matrix2) -> RankOne:
    """The rank-one segment whose monodromy is ``I + lam R``.

    ``length = R12 - R21``, ``e- = sqrt(R12/length)``,
    ``e+ = sign(R11) sqrt(-R21/length)``.
    """
    A = np.real(R.to_array())
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A)) <= 1e-14:
        raise ValidationError("empty segment: R vanishes")
    if np.max(np.abs(A @ A)) > NIL_TOL * scale ** 2:
        raise ValidationError("R is not nilpotent")
    if A[0, 1] < -NIL_TOL * scale or A[1, 0] > NIL_TOL * scale:
        raise ValidationError("R has the wrong off-diagonal signs for a rank-one piece")
    a = float(A[0, 1] - A[1, 0])
    # R = a (e-, -e+)^T e^T: both rows are multiples of e, so read the
    # direction off the larger row (linear in rounding noise, unlike the
    # square roots) and fix the sign by e- >= 0.
    row = A[0] if np.dot(A[0], A[0]) >= np.dot(A[1], A[1]) else A[1]
    ep, em = row / np.hypot(row[0], row[1])
    if em < 0 or (em == 0 and ep < 0):
        ep, em = -ep, -em
    return RankOne(a, math.atan2(em, ep))


def terminal_segment(hb: HBPolynomial) -> RankOne:
    """Degree-one case ``Theta = (1 + a lam, b lam)``: ``R = [[a, -a^2/b], [b, -a]]``."""
    if hb.degree != 1:
        raise ValidationError("terminal segment needs a degree-one E")
    tp = _pad(np.real(hb.theta_plus.coeffs), 2)
    tm = _pad(np.real(hb.theta_minus.coeffs), 2)
    if abs(tp[0] - 1.0) > 1e-10 or abs(tm[0]) > 1e-10:
        raise ValidationError("terminal segment needs Theta(0) = (1, 0)")
    a, b = float(tp[1]), float(tm[1])
    if b >= 0:
        raise ValidationError("not HB: Theta- = b lam needs b < 0")
    return segment_from_nilpotent(Matrix2(a, -a * a / b, b, -a))


# --------------------------------------------------------------------------
# one factorization step


@dataclass(frozen=True)
class FactorizationStep:
    """``Theta = (I - lam S) Psi``; the extracted piece has monodromy ``I - lam S``."""

    S: Matrix2
    segment: RankOne
    remainder: HBPolynomial
    match_residual: float
    telescoping_residual: float


def _peel_system(theta: tuple[Polynomial, Polynomial], theta1: tuple[Polynomial, Polynomial],
                 n: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Solve ``Theta1 = (L0 + lam L1) Theta`` row by row by coefficient matching.

    Both sides equal ``(1, 0)`` at ``lam = 0``, so the first column of ``L0``
    is ``(1, 0)`` exactly; the remaining three unknowns of each row are fitted
    to the higher coefficients.
    """
    tp = _pad(np.real(theta[0].coeffs), n + 2)
    tm = _pad(np.real(theta[1].coeffs), n + 2)
    A = np.stack([tp, tm, np.roll(tp, 1), np.roll(tm, 1)], axis=1)
    L0 = np.zeros((2, 2))
    L1 = np.zeros((2, 2))
    res = 0.0
    for r in range(2):
        rhs = _pad(np.real(theta1[r].coeffs), n + 2)
        x0 = 1.0 if r == 0 else 0.0
        b = rhs[1:] - x0 * A[1:, 0]
        y, *_ = np.linalg.lstsq(A[1:, 1:], b, rcond=None)
        x = np.concatenate([[x0], y])
        res = max(res, float(np.max(np.abs(A @ x - rhs))) / max(1.0, float(np.max(np.abs(rhs)))))
        L0[r] = x[:2]
        L1[r] = x[2:]
    return L0, L1, res


def _kernel_route(hb: HBPolynomial, n: int) -> tuple[np.ndarray, Polynomial, Polynomial, float]:
    c = _pad(np.asarray(hb.e.coeffs, dtype=complex), n + 1)
    cn = c[n]
    rot = -cn / np.conj(cn)
    e = Polynomial((c + rot * np.conj(c))[:n])
    nrm = inner_product_orthogonal(e, e, hb).real
    if not nrm > 0:
        raise NumericalError("vanishing norm of the cancelling combination")
    KX = kernel_polynomial(hb, 1j) - e * (np.conj(complex(e(1j))) / nrm)
    Ehat = KX * Polynomial([1j, 1.0])
    ch = _pad(np.asarray(Ehat.coeffs, dtype=complex), n + 1)
    if abs(ch[n]) > 1e-7 * max(1e-300, float(np.max(np.abs(ch)))):
        raise NumericalError("projected kernel has full degree; factorization degeneracy")
    ch = ch[:n]
    if abs(ch[0]) == 0:
        raise NumericalError("projected kernel vanishes at 0")
    h1 = HBPolynomial.from_e(Polynomial(ch / ch[0]))
    L0, L1, res = _peel_system((hb.theta_plus, hb.theta_minus), (h1.theta_plus, h1.theta_minus), n)
    if res > 1e-8:
        raise NumericalError(f"pencil coefficient matching residual {res:.2e} exceeds 1e-8")
    cond = np.linalg.cond(L0)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(f"L0 is singular (condition number {cond:.3e})")
    L0i = np.linalg.inv(L0)
    psi_p = h1.theta_plus * L0i[0, 0] + h1.theta_minus * L0i[0, 1]
    psi_m = h1.theta_plus * L0i[1, 0] + h1.theta_minus * L0i[1, 1]
    return L0i @ L1, psi_p, psi_m, res


def _leading_route(hb: HBPolynomial, n: int) -> tuple[np.ndarray, Polynomial, Polynomial, float]:
    tp = _pad(np.real(hb.theta_plus.coeffs), n + 1)
    tm = _pad(np.real(hb.theta_minus.coeffs), n + 1)
    top = np.array([tp[n], tm[n]])
    nxt = np.array([tp[n - 1], tm[n - 1]])
    Jtop = np.array([-top[1], top[0]])
    d = float(Jtop @ nxt)
    if d == 0:
        raise NumericalError("leading coefficients are parallel; factorization degeneracy")
    S = -np.outer(top, Jtop) / d
    # Psi = (I + lam S) Theta; its top two coefficients cancel
    psi_p = hb.theta_plus + (hb.theta_plus * S[0, 0] + hb.theta_minus * S[0, 1]).shift_up(1)
    psi_m = hb.theta_minus + (hb.theta_plus * S[1, 0] + hb.theta_minus * S[1, 1]).shift_up(1)
    return S, psi_p, psi_m, 0.0


def factor_step(hb: HBPolynomial, hb_tol: float = HB_MARGIN,
                method: str = "kernel") -> FactorizationStep:
    """Split off the rank-one piece adjacent to the right endpoint.

    ``method="kernel"``: the subspace ``X`` of ``H(E)`` orthogonal to
    ``e = E + c E*`` (``c`` chosen to cancel the leading coefficient) is a
    de Branges space one dimension smaller.  Its reproducing kernel at ``i``
    is the projection of ``K_i`` onto ``X``, and ``E1 = (z + i) K^X_i``
    (normalized at 0) is an HB function of ``X``.  The polynomials
    ``Theta1`` of ``E1`` and ``Theta`` are related by a linear pencil
    ``L0 + lam L1``, found by coefficient matching; then ``S = L0^{-1} L1``
    and ``Psi = L0^{-1} Theta1``.

    ``method="leading"``: ``S`` is the unique nilpotent matrix for which
    ``(I + lam S) Theta`` drops one degree,
    ``S = -theta_n (J theta_n)^T / <J theta_n, theta_{n-1}>`` in terms of the
    top coefficient vectors.
    """
    n = hb.degree
    if n < 2:
        raise ValidationError("terminal case: degree < 2, use terminal_segment")
    _require_normalized_hb(hb, hb_tol)
    if method == "kernel":
        S, psi_p, psi_m, res = _kernel_route(hb, n)
    elif method == "leading":
        S, psi_p, psi_m, res = _leading_route(hb, n)
    else:
        raise ValidationError(f"unknown factorization method {method!r}")
    sc = max(1.0, float(np.max(np.abs(S))))
    if (abs(np.linalg.det(S)) > NIL_TOL * sc ** 2 or abs(np.trace(S)) > NIL_TOL * sc
            or S[0, 1] > NIL_TOL * sc or S[1, 0] < -NIL_TOL * sc):
        raise NumericalError(f"extracted S is not of rank-one form: {S.tolist()}")
    cp = _pad(np.real(psi_p.coeffs), n)
    cm = _pad(np.real(psi_m.coeffs), n)
    cp[0], cm[0] = 1.0, 0.0
    psi_p, psi_m = Polynomial(cp), Polynomial(cm)
    rem = HBPolynomial(psi_p, psi_m)
    ok, margin = is_hermite_biehler(rem.e, hb_tol)
    if not ok:
        raise NumericalError(f"factorization degeneracy: remainder not HB (margin {margin:.3e})")
    # Theta = (I - lam S) Psi
    back_p = psi_p - (psi_p * S[0, 0] + psi_m * S[0, 1]).shift_up(1)
    back_m = psi_m - (psi_p * S[1, 0] + psi_m * S[1, 1]).shift_up(1)
    tel = max(float(np.max(np.abs(_pad(np.real((back_p - hb.theta_plus).coeffs), n + 2)))),
              float(np.max(np.abs(_pad(np.real((back_m - hb.theta_minus).coeffs), n + 2)))))
    tel /= _coef_scale(hb)
    seg = segment_from_nilpotent(Matrix2.from_array(-S))
    return FactorizationStep(Matrix2.from_array(S), seg, rem, res, tel)


def factorize(hb: HBPolynomial, hb_tol: float = HB_MARGIN,
              method: str = "kernel") -> list[FactorizationStep]:
    """All steps down to degree one, in extraction order (right end first)."""
    _require_normalized_hb(hb, hb_tol)
    steps = []
    cur = hb
    while cur.degree >= 2:
        st = factor_step(cur, hb_tol, method)
        steps.append(st)
        cur = st.remainder
    return steps


def _chain_from_reversed_measure(t: np.ndarray, nu: np.ndarray, a: float) -> list[RankOne]:
    """Segments of the chain whose reflection ``x -> L - x`` has pi/2 measure ``(t, nu)``.

    The reflected system has Hamiltonian ``D H D`` with ``D = diag(1, -1)``,
    its monodromy is ``D M^{-1} D`` and its first column is ``(Phi-, Theta-)``.
    So its pi/2 spectrum is the zero set of ``Theta-`` again, with masses
    ``-Theta+(t_j) / Theta-'(t_j)``.  Its first direction is proportional
    to ``(1, a)``, and its first length follows from the normalization of
    the first Lanczos vector.  Reflecting back reverses the order and
    negates the angles.
    """
    order = np.argsort(t)
    t, nu = t[order], nu[order]
    if np.any(~(nu > 0)):
        raise NumericalError("reflected spectral masses must be positive")
    jm = jacobi_from_spectral_data(t, nu)
    e1 = np.array([1.0, a]) / math.hypot(1.0, a)
    chain = jacobi_to_hamiltonian(jm, e1, (1.0 + a * a) / float(nu.sum()))
    if chain.next_direction is not None:
        log.warning("reflected chain does not end at the pi/2 boundary: next direction %s",
                    chain.next_direction)
    return [RankOne.from_vector(float(l), (e[0], -e[1])) for l, e in zip(chain.lengths[::-1], chain.vectors[::-1])]


def chain_from_herglotz(poles, residues, a: float = 0.0, b: float = 0.0) -> Hamiltonian:
    """Rank-one Hamiltonian with ``Theta+/Theta- = sum r_j/(z - t_j) + a + b z``.

    Needs one pole at 0, residues ``r_j < 0`` and ``b >= 0``; the monodromy
    then has ``Theta(0) = (1, 0)`` as soon as ``r_0 Theta-'(0) = 1``, which
    is the normalization of the reflected masses ``-r_j``.  A positive ``b``
    is the final segment with direction ``(0, 1)``.
    """
    t = np.asarray(poles, dtype=float).reshape(-1)
    r = np.asarray(residues, dtype=float).reshape(-1)
    if t.shape != r.shape or t.size < 1:
        raise ValidationError("need one residue per pole")
    if np.any(~(r < 0)):
        raise ValidationError("Herglotz residues must be negative")
    if np.min(np.abs(t)) != 0.0:
        raise ValidationError("one pole must sit at 0 (normalization Theta-(0) = 0)")
    if b < 0:
        raise ValidationError("b must be nonnegative")
    segs = _chain_from_reversed_measure(t, -r, float(a))
    if b > 0:
        segs.append(RankOne(float(b), math.pi / 2))
    return Hamiltonian(segs, trace_normalized=True)


def _spectral_segments(hb: HBPolynomial) -> list[RankOne]:
    hd = herglotz_decomposition(hb)
    scale = max(1.0, float(np.max(np.abs(hb.theta_plus.coeffs))))
    poles = hd.poles.copy()
    k0 = int(np.argmin(np.abs(poles)))
    poles[k0] = 0.0
    b = hd.b if hd.b > 1e-14 * scale else 0.0
    return list(chain_from_herglotz(poles, hd.residues, hd.a, b).segments)


def solve_polynomial_inverse(E, hb_tol: float = HB_MARGIN, method: str = "spectral") -> Hamiltonian:
    """Rank-one Hamiltonian whose monodromy has first column ``Theta``.

    The result has exactly ``deg E`` segments and total length
    ``system_length_from_e(E)``.  ``hb_tol`` is the required distance of the
    zeros of ``E`` from the real axis; polynomials assembled from valid
    spectral data pass 0, since they are HB by construction.

    ``method="spectral"`` (default) reads the Herglotz data of
    ``Theta+/Theta-``, peels the last segment ``(0, 1)`` of length ``b`` if
    ``b > 0``, and rebuilds the remaining chain from the spectral measure of
    the reflected system by Lanczos iteration.  ``"kernel"`` and
    ``"leading"`` factor one degree at a time (see :func:`factor_step`);
    they are exact in exact arithmetic but lose digits when spectral
    atoms cluster.
    """
    hb = E if isinstance(E, HBPolynomial) else HBPolynomial.from_e(E)
    _require_normalized_hb(hb, hb_tol)
    if method == "spectral":
        segs = _spectral_segments(hb)
    else:
        steps = factorize(hb, hb_tol, method)
        last = steps[-1].remainder if steps else hb
        segs = [terminal_segment(last)] + [st.segment for st in reversed(steps)]
    H = Hamiltonian(segs, trace_normalized=True)
    if len(H.segments) != hb.degree:
        log.warning("adjacent extracted pieces are parallel; %d segments for degree %d",
                    len(H.segments), hb.degree)
    return H


# --------------------------------------------------------------------------
# finite atomic measures


def _zero_atom(mu: AtomicMeasure) -> int:
    if len(mu) == 0:
        raise ValidationError("empty measure")
    scale = max(1.0, float(np.max(np.abs(mu.t))))
    idx = np.flatnonzero(np.abs(mu.t) <= 1e-14 * scale)
    if idx.size != 1:
        raise ValidationError("the measure must have an atom at t = 0 (with positive mass)")
    return int(idx[0])


def theta_from_atoms(mu: AtomicMeasure, d1: float = 0.0) -> HBPolynomial:
    """HB polynomial whose alpha = pi/2 spectral measure is ``mu``.

    ``Theta-(z) = -(1/mu_0) z prod_{t_j != 0} (1 - z/t_j)`` and
    ``Theta+ = (sum_j r_j / (z - t_j) + d1) Theta-`` with
    ``r_j = -1 / (mu_j Theta-'(t_j)^2)``.
    """
    k0 = _zero_atom(mu)
    t = np.delete(np.array(mu.t, dtype=float), k0)
    w0 = float(mu.w[k0])
    w = np.delete(np.array(mu.w, dtype=float), k0)

    def prod_except(j: int) -> Polynomial:
        p = Polynomial([1.0])
        for k, tk in enumerate(t):
            if k != j:
                p = p * Polynomial([1.0, -1.0 / tk])
        return p

    # quotients Theta-/(z - t) and Theta-'(t), both as exact products
    base = Polynomial([0.0, -1.0 / w0])
    tm = base * prod_except(-1)
    # the atom at 0: Theta-/z = -(1/w0) prod, Theta-'(0) = -1/w0, r_0 = -w0
    tp = tm * float(d1) + prod_except(-1) * 1.0
    for j, (tj, wj) in enumerate(zip(t, w)):
        others = np.delete(t, j)
        dtj = float(np.prod(1.0 - tj / others)) / w0 if others.size else 1.0 / w0
        r = -1.0 / (wj * dtj ** 2)
        q = base * prod_except(j) * (-1.0 / tj)
        tp = tp + q * r
    hb = HBPolynomial(Polynomial(np.real(tp.coeffs)), Polynomial(np.real(tm.coeffs)))
    ok, margin = is_hermite_biehler(hb.e, 0.0)
    if not ok:
        raise NumericalError(f"assembled E is not HB (margin {margin:.3e})")
    return hb


def _reflected_masses(mu: AtomicMeasure) -> np.ndarray:
    """``1 / (mu_j Theta-'(t_j)^2)`` from products over the nodes, atom at 0 included."""
    k0 = _zero_atom(mu)
    t = np.array(mu.t, dtype=float)
    w0 = float(mu.w[k0])
    out = np.empty(t.size)
    for j in range(t.size):
        if j == k0:
            d = -1.0 / w0
        else:
            others = np.delete(t, [j, k0])
            d = float(np.prod(1.0 - t[j] / others)) / w0
        out[j] = 1.0 / (float(mu.w[j]) * d * d)
    return out


def solve_finite_measure_inverse(mu: AtomicMeasure, d1: float = 0.0,
                                 method: str = "spectral") -> Hamiltonian:
    """Rank-one Hamiltonian whose alpha = pi/2 spectral measure is ``mu``.

    ``d1`` is the constant in the Herglotz expansion of ``Theta+/Theta-``
    and fixes the direction of the last segment, ``(1, -d1)`` up to scale.
    With the default ``method="spectral"`` the polynomial ``E`` is never
    formed: the masses of the reflected system come straight from ``mu``.
    """
    if method == "spectral":
        nu = _reflected_masses(mu)
        segs = _chain_from_reversed_measure(np.array(mu.t, dtype=float), nu, float(d1))
        return Hamiltonian(segs, trace_normalized=True)
    return solve_polynomial_inverse(theta_from_atoms(mu, d1), hb_tol=0.0, method=method)


# --------------------------------------------------------------------------
# the regular case


@dataclass(frozen=True)
class RegularHBSpec:
    """Herglotz data of ``Theta+/Theta- = sum mu_j / (z - t_j) + a + b z``.

    ``zeros`` are ordered by modulus with ``zeros[0] = 0``.  When
    ``theta_minus_prime`` is given it holds ``Theta-'(t_j)`` for every zero
    (needed to evaluate the length series accurately); otherwise those
    values come from the finite product over the listed zeros.  ``complete``
    marks a zero list that is the whole zero set (the polynomial case).
    """

    zeros: np.ndarray
    residues: np.ndarray
    a: float = 0.0
    b: float = 0.0
    theta_minus_prime_0: float | None = None
    theta_minus_prime: np.ndarray | None = field(default=None, compare=False)
    complete: bool = False

    def __post_init__(self):
        t = np.asarray(self.zeros, dtype=float)
        m = np.asarray(self.residues, dtype=float)
        if t.ndim != 1 or t.shape != m.shape or t.size < 1:
            raise ValidationError("zeros and residues must be equal-length nonempty lists")
        if t[0] != 0.0:
            raise ValidationError("the first zero must be t_0 = 0")
        if np.any(np.diff(np.abs(t)) < 0):
            raise ValidationError("zeros must be ordered by non-decreasing modulus")
        if np.unique(t).size != t.size:
            raise ValidationError("duplicate zeros")
        if np.any(m >= 0):
            raise ValidationError("Herglotz residues must be negative")
        if self.b < 0:
            raise ValidationError("the linear coefficient b must be nonnegative")
        d0 = self.theta_minus_prime_0
        if d0 is None:
            d0 = 1.0 / m[0]
        if abs(m[0] * d0 - 1.0) > 1e-10:
            raise ValidationError("normalization Theta+(0) = mu_0 Theta-'(0) = 1 fails")
        object.__setattr__(self, "zeros", t)
        object.__setattr__(self, "residues", m)
        object.__setattr__(self, "theta_minus_prime_0", float(d0))
        if self.theta_minus_prime is not None:
            p = np.asarray(self.theta_minus_prime, dtype=float)
            if p.shape != t.shape:
                raise ValidationError("theta_minus_prime must have one value per zero")
            object.__setattr__(self, "theta_minus_prime", p)

    def __len__(self) -> int:
        return self.zeros.size

    def to_json(self) -> dict:
        out = {"zeros": self.zeros.tolist(), "residues": self.residues.tolist(),
               "a": self.a, "b": self.b, "theta_minus_prime_0": self.theta_minus_prime_0,
               "complete": self.complete}
        if self.theta_minus_prime is not None:
            out["theta_minus_prime"] = self.theta_minus_prime.tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "RegularHBSpec":
        if not isinstance(obj, dict) or "zeros" not in obj or "residues" not in obj:
            raise ValidationError("regular spectral data JSON needs 'zeros' and 'residues'")
        try:
            return cls(np.array(obj["zeros"], dtype=float), np.array(obj["residues"], dtype=float),
                       float(obj.get("a", 0.0)), float(obj.get("b", 0.0)),
                       None if obj.get("theta_minus_prime_0") is None else float(obj["theta_minus_prime_0"]),
                       None if obj.get("theta_minus_prime") is None
                       else np.array(obj["theta_minus_prime"], dtype=float),
                       bool(obj.get("complete", False)))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad regular spectral data: {exc}") from exc

    @classmethod
    def from_hb(cls, hb: HBPolynomial) -> "RegularHBSpec":
        """Complete spectral data of a normalized polynomial HB function."""
        from .debranges import herglotz_decomposition

        hd = herglotz_decomposition(hb)
        order = np.lexsort((-hd.poles, np.abs(hd.poles)))
        t = hd.poles[order]
        t[0] = 0.0 if abs(t[0]) < 1e-12 else t[0]
        d = hb.theta_minus.deriv()
        return cls(t, hd.residues[order], hd.a, max(hd.b, 0.0), float(d(0.0)),
                   np.array([float(d(x)) for x in t]), complete=True)


def free_regular_spec(length: float, count: int = 401) -> RegularHBSpec:
    """Spectral data of the free system ``H = I/2`` on ``[0, length]``.

    ``Theta- = -sin(z L/2)``: zeros ``2 pi j / L``, residues ``-2/L``,
    ``Theta-'(0) = -L/2``; zeros are ordered by modulus, positive first.
    """
    if not length > 0:
        raise ValidationError("length must be positive")
    if count < 1:
        raise ValidationError("count must be positive")
    j = np.zeros(count, dtype=int)
    for k in range(1, count):
        j[k] = (k + 1) // 2 if k % 2 else -(k // 2)
    t = 2 * math.pi * j / length
    mu = np.full(count, -2.0 / length)
    dtm = -(length / 2) * np.cos(t * length / 2)
    return RegularHBSpec(t, mu, 0.0, 0.0, -length / 2, dtm)


def _theta_minus_prime(spec: RegularHBSpec, n: int | None = None) -> np.ndarray:
    if spec.theta_minus_prime is not None:
        return spec.theta_minus_prime[:n]
    t = spec.zeros[:n]
    out = np.empty(t.size)
    for k, tk in enumerate(t):
        others = np.delete(t[1:], k - 1) if k > 0 else t[1:]
        p = np.prod(1.0 - tk / others) if others.size else 1.0
        out[k] = spec.theta_minus_prime_0 * (p if k == 0 else -p)
    return out


def _length_terms(spec: RegularHBSpec) -> np.ndarray:
    """Terms ``w_j f(t_j)^2`` of ``(1/pi) ||(Theta+ - 1)/lam||^2`` over zeros of Theta-."""
    t, mu = spec.zeros, spec.residues
    d = _theta_minus_prime(spec)
    w = -1.0 / (mu * d * d)
    f = np.empty(t.size)
    nz = t[1:]
    f[1:] = (mu[1:] * d[1:] - 1.0) / nz
    d0 = spec.theta_minus_prime_0
    # Theta+'(0); the sums pair symmetric zeros when ordered by modulus
    f[0] = d0 * (spec.a - np.sum(mu[1:] / nz)) - np.sum(1.0 / nz)
    return w * f * f


def _tail(t: np.ndarray, terms: np.ndarray, frac: float = 0.5) -> float:
    """Estimate of the omitted terms beyond the last listed zero on one side.

    Consecutive terms are summed in pairs (this absorbs sign or parity
    patterns such as every other term vanishing), and the partial sums over
    the last ``frac`` of the pairs are fitted by ``S + A/T + B/T^2`` with
    ``T`` the cut between pairs.  The estimate is ``S`` minus the last
    partial sum.
    """
    n = t.size - t.size % 2
    if n < 16:
        return 0.0
    t, v = t[:n], terms[:n]
    P = np.cumsum(v[0::2] + v[1::2])
    T = np.empty(P.size)
    T[:-1] = 0.5 * (t[1:-1:2] + t[2::2])
    T[-1] = t[-1] + 0.5 * (t[-1] - t[-2])
    k = max(6, int(frac * P.size))
    X = np.column_stack([np.ones(k), 1.0 / T[-k:], 1.0 / T[-k:] ** 2])
    coef, *_ = np.linalg.lstsq(X, P[-k:], rcond=None)
    return float(coef[0] - P[-1])


def regular_spec_length(spec: RegularHBSpec, tail: bool = True) -> float:
    """``L = (1/pi) ||(Theta+ - 1)/lam||^2 - Theta-'(0)``.

    For complete (polynomial) spectral data the norm is computed exactly in
    ``H(E)``.  Otherwise it is expanded over the orthogonal family of
    kernels at the zeros of ``Theta-``, with a tail estimate for the
    unlisted zeros on each side.
    """
    if spec.complete:
        return system_length_from_e(_truncated_hb(spec, len(spec)))
    if spec.b > 0:
        log.warning("b > 0: the kernel expansion over zeros of Theta- misses one direction")
    terms = _length_terms(spec)
    total = float(np.sum(terms))
    if tail:
        t = spec.zeros
        pos, neg = t > 0, t < 0
        total += _tail(t[pos], terms[pos]) + _tail(-t[neg], terms[neg])
    return total - spec.theta_minus_prime_0


def _truncated_hb(spec: RegularHBSpec, N: int) -> HBPolynomial:
    """``Theta-^N = Theta-'(0) z prod (1 - z/t_j)`` and ``Theta+^N`` from the first ``N`` residues.

    The quotients ``Theta-^N / (z - t_j)`` are formed as products, so
    ``Theta+^N(0) = mu_0 Theta-'(0)`` holds to rounding.
    """
    t = spec.zeros[:N]
    mu = spec.residues[:N]
    d0 = spec.theta_minus_prime_0
    facs = [Polynomial([1.0, -1.0 / tj]) for tj in t[1:]]

    def prod_except(j: int) -> Polynomial:
        p = Polynomial([1.0])
        for k, f in enumerate(facs):
            if k != j:
                p = p * f
        return p

    full = prod_except(-1)
    tm = Polynomial([0.0, d0]) * full
    tp = tm * Polynomial([spec.a, spec.b]) + full * (mu[0] * d0)
    for j, (tj, m) in enumerate(zip(t[1:], mu[1:])):
        tp = tp + Polynomial([0.0, d0 * m * (-1.0 / tj)]) * prod_except(j)
    return HBPolynomial(Polynomial(np.real(tp.coeffs)), Polynomial(np.real(tm.coeffs)))


def cumulative_hamiltonian(H: Hamiltonian, x: np.ndarray) -> np.ndarray:
    """``int_0^x H`` at each point of ``x`` (exact for piecewise constant H)."""
    x = np.asarray(x, dtype=float)
    starts, mats, lens = [], [], []
    for p in H.pieces():
        starts.append(p.start)
        lens.append(p.length)
        mats.append(p.matrix)
    starts = np.array(starts)
    lens = np.array(lens)
    mats = np.array(mats)
    cum = np.concatenate([np.zeros((1, 2, 2)), np.cumsum(lens[:, None, None] * mats, axis=0)])
    k = np.clip(np.searchsorted(starts, x, side="right") - 1, 0, len(starts) - 1)
    dx = np.clip(x - starts[k], 0.0, lens[k])
    return cum[k] + dx[:, None, None] * mats[k]


@dataclass
class RegularInverseResult:
    hamiltonian: Hamiltonian
    grid: np.ndarray
    F: np.ndarray
    length: float
    approximant_lengths: dict[int, float]
    increments: dict[int, float]
    padded: bool
    warnings: list[str] = field(default_factory=list)


def _window_integral(spec_L: float, HN: Hamiltonian, grid: np.ndarray) -> tuple[np.ndarray, bool]:
    LN = HN.length
    lN = max(spec_L, LN)
    pad = lN - LN
    segs = list(HN.segments)
    if pad > 1e-14 * lN:
        segs = [RankOne(pad, math.pi / 2)] + segs
    Ht = Hamiltonian(segs)
    s = lN - spec_L
    G = cumulative_hamiltonian(Ht, np.concatenate([[s], s + grid]))
    return G[1:] - G[0], pad > 1e-14 * lN


def regular_inverse(spec: RegularHBSpec, N: int, grid_n: int = 64,
                    history: int = 3) -> RegularInverseResult:
    """Approximate Hamiltonian on ``[0, L]`` from the first ``N`` zeros of the spectral data.

    For each truncation ``M`` (the last ``history + 1`` values up to ``N``)
    the polynomial ``E_M`` is built from the first ``M`` zeros, inverted
    exactly, padded on the left with a ``diag(0, 1)`` piece up to length
    ``L`` and integrated over the last stretch of length ``L``:
    ``F_M(x) = int_{l_M - L}^{l_M - L + x} H_M`` with ``l_M = max(L, L_M)``.
    The returned Hamiltonian is the cell average of ``F_N`` on the grid.
    """
    if N < 1:
        raise ValidationError("N must be >= 1")
    if N > len(spec):
        raise ValidationError(f"N = {N} exceeds the {len(spec)} zeros listed in the spectral data")
    if grid_n < 1:
        raise ValidationError("grid_n must be positive")
    L = regular_spec_length(spec)
    grid = np.linspace(0.0, L, grid_n + 1)
    Fs: dict[int, np.ndarray] = {}
    lengths: dict[int, float] = {}
    warnings: list[str] = []
    padded = False
    for M in range(max(1, N - history), N + 1):
        try:
            HM = chain_from_herglotz(spec.zeros[:M], spec.residues[:M], spec.a, spec.b)
        except (ValidationError, NumericalError) as exc:
            raise NumericalError(f"truncation N = {M} fails: {exc}") from exc
        lengths[M] = HM.length
        Fs[M], pd = _window_integral(L, HM, grid)
        if M == N:
            padded = pd
            first = HM.segments[0]
            if pd or (isinstance(first, RankOne) and abs(math.cos(first.angle)) < 1e-12):
                warnings.append("first segment has direction (0, 1)")
    incr = {M: float(np.max(np.abs(Fs[M] - Fs[M - 1]))) for M in Fs if M - 1 in Fs}
    F = Fs[N]
    cells = np.diff(F, axis=0) / np.diff(grid)[:, None, None]
    cells = 0.5 * (cells + np.swapaxes(cells, 1, 2))
    H = Hamiltonian([Sampled(L, cells)])
    return RegularInverseResult(H, grid, F, L, lengths, incr, padded, warnings)
