"""Fundamental solutions, spectra and spectral measures of canonical systems.

The system is ``J Y' = z H Y`` with ``J = [[0, -1], [1, 0]]``.  On a piece
where ``H`` is a constant matrix the transfer matrix is the exact exponential
``exp(-z h J H) = cos(w) I + sin(w)/w * (-z h J H)`` with
``w = z h sqrt(det H)``; for a rank-one ``H`` this reduces to the nilpotent
factor ``I + z h R``.  Pieces further to the right multiply on the left.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import Complex2Vector, Matrix2, Polynomial, ValidationError
from .hamiltonian import Hamiltonian, RankOne

log = logging.getLogger(__name__)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


# --------------------------------------------------------------------------
# elementary factors


def _factor(mat: np.ndarray, z: np.ndarray, h) -> np.ndarray:
    """``exp(-z h J H)`` for constant ``H``; broadcasts over ``z`` and ``h``."""
    a, b, c = mat[0, 0], mat[0, 1], mat[1, 1]
    zh = np.asarray(z) * np.asarray(h)
    det = max(a * c - b * b, 0.0)
    w = zh * math.sqrt(det)
    cw = np.cos(w)
    sw = np.sinc(w / np.pi)
    out = np.empty(np.shape(zh) + (2, 2), dtype=complex)
    out[..., 0, 0] = cw + sw * zh * b
    out[..., 0, 1] = sw * zh * c
    out[..., 1, 0] = -sw * zh * a
    out[..., 1, 1] = cw - sw * zh * b
    return out


def singular_interval_monodromy(a: float, e: Sequence[float], lam: complex) -> Matrix2:
    """Transfer matrix ``I + lam R`` of a rank-one interval of length ``a``.

    ``R = [[a e- e+, a e-^2], [-a e+^2, -a e- e+]]`` is nilpotent.
    """
    ep, em = float(e[0]), float(e[1])
    if abs(math.hypot(ep, em) - 1.0) > 1e-12:
        raise ValidationError("e must be a unit vector")
    if not a > 0:
        raise ValidationError("interval length must be positive")
    return Matrix2(1 + lam * a * em * ep, lam * a * em * em,
                   -lam * a * ep * ep, 1 - lam * a * em * ep)


def _check_x(H: Hamiltonian, x: float | None) -> float:
    if x is None:
        if H.is_semiaxis:
            raise ValidationError("x is required for a system on the semiaxis")
        return H.length
    if x < 0 or x > H.length * (1 + 1e-14) + 1e-14:
        raise ValidationError(f"x = {x} out of range [0, {H.length}]")
    return min(float(x), H.length)


# --------------------------------------------------------------------------
# transfer matrices


def transfer_matrices(H: Hamiltonian, z, x: float | None = None) -> np.ndarray:
    """``M(x, z)`` for an array of ``z``; returns shape ``z.shape + (2, 2)``."""
    x = _check_x(H, x)
    z = np.asarray(z, dtype=complex)
    M = np.broadcast_to(np.eye(2, dtype=complex), z.shape + (2, 2)).copy()
    for p in H.pieces(x):
        M = _factor(p.matrix, z, p.length) @ M
    return M


def transfer_matrices_scaled(H: Hamiltonian, z, x: float | None = None,
                             max_growth: float = 30.0) -> tuple[np.ndarray, np.ndarray]:
    """Overflow-free ``M(x, z) = exp(s) * Mhat``; returns ``(Mhat, s)``.

    Pieces are split so that no single factor grows by more than about
    ``exp(max_growth)``; the running product is renormalized after each one.
    """
    x = _check_x(H, x)
    z = np.asarray(z, dtype=complex)
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    max_len = max_growth / zmax if zmax > 0 else math.inf
    M = np.broadcast_to(np.eye(2, dtype=complex), z.shape + (2, 2)).copy()
    s = np.zeros(z.shape)
    for p in H.pieces(x, max_len=max_len):
        M = _factor(p.matrix, z, p.length) @ M
        sc = np.max(np.abs(M), axis=(-2, -1))
        M /= sc[..., None, None]
        s += np.log(sc)
    return M, s


def monodromy(H: Hamiltonian, z: complex, x: float | None = None) -> Matrix2:
    """The fundamental matrix ``M(x, z)`` with ``M(0, z) = I``."""
    return Matrix2.from_array(transfer_matrices(H, np.asarray(z, dtype=complex), x))


@dataclass(frozen=True)
class SolutionPair:
    """Columns of the fundamental matrix: ``theta`` from (1, 0), ``phi`` from (0, 1)."""

    theta: Complex2Vector
    phi: Complex2Vector
    x: float
    z: complex

    def wronskian(self) -> complex:
        return self.theta.plus * self.phi.minus - self.theta.minus * self.phi.plus


def fundamental_columns(H: Hamiltonian, z: complex, x: float | None = None) -> SolutionPair:
    M = monodromy(H, z, x)
    th, ph = M.columns()
    return SolutionPair(th, ph, _check_x(H, x), complex(z))


def de_branges_function(H: Hamiltonian, z, x: float | None = None):
    """``E(z) = Theta+(x, z) + i Theta-(x, z)`` (vectorized over z)."""
    M = transfer_matrices(H, z, x)
    return M[..., 0, 0] + 1j * M[..., 1, 0]


def log_abs_de_branges(H: Hamiltonian, z, x: float | None = None) -> np.ndarray:
    """``ln |E(z)|`` evaluated without overflow."""
    M, s = transfer_matrices_scaled(H, z, x)
    return s + np.log(np.abs(M[..., 0, 0] + 1j * M[..., 1, 0]))


def polynomial_monodromy(H: Hamiltonian, x: float | None = None) -> list[list[Polynomial]]:
    """Transfer matrix of an all-rank-one Hamiltonian as polynomials in z.

    Both columns are carried in the frame ``(e, Je)`` of the current
    segment, where a segment only updates the ``Je`` component:
    ``alpha <- alpha - z l beta``.  Frame changes use the cosine and the
    sine between neighbouring directions computed from their components,
    which avoids the cancellation that long, nearly parallel segments
    cause in the plain matrix product.
    """
    x = _check_x(H, x)
    one, zero = Polynomial([1.0]), Polynomial([0.0])
    z = Polynomial([0.0, 1.0])
    frame = np.array([1.0, 0.0])
    cols = [[one, zero], [zero, one]]  # (beta, alpha) of each column
    for p in H.pieces(x):
        if not p.rank_one:
            raise ValidationError("polynomial monodromy needs an all-rank-one Hamiltonian")
        wgt = float(p.e @ p.e)
        u = p.e / math.sqrt(wgt)
        c = float(frame @ u)
        sn = float(frame[0] * u[1] - frame[1] * u[0])
        frame = u
        out = []
        for beta, alpha in cols:
            beta, alpha = beta * c + alpha * sn, alpha * c - beta * sn
            out.append([beta, alpha - z * beta * (wgt * p.length)])
        cols = out
    f0, f1 = float(frame[0]), float(frame[1])
    # back to the standard basis: Y = beta e + alpha Je with Je = (-e-, e+)
    y = [[beta * f0 - alpha * f1, beta * f1 + alpha * f0] for beta, alpha in cols]
    return [[y[0][0], y[1][0]], [y[0][1], y[1][1]]]


# --------------------------------------------------------------------------
# quadrature along the system


def integrate_along(H: Hamiltonian, z, x: float | None,
                    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """``int_0^x fn(H(t), M(t, z)) dt`` by Gauss-Legendre on short pieces.

    ``fn`` receives the constant matrix of the piece and the stack of
    transfer matrices at the quadrature nodes (shape ``(nodes,) + z.shape +
    (2, 2)``) and must return an array whose first axis runs over nodes.
    Pieces are split so that ``|z| h <= 1``; the integrand is then resolved
    to rounding error by ten nodes.
    """
    x = _check_x(H, x)
    z = np.asarray(z, dtype=complex)
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    max_len = 1.0 / zmax if zmax > 0 else math.inf
    M = np.broadcast_to(np.eye(2, dtype=complex), z.shape + (2, 2)).copy()
    total = None
    for p in H.pieces(x, max_len=max_len):
        s = 0.5 * p.length * (1.0 + _GL_X)
        hz = s.reshape((-1,) + (1,) * z.ndim)
        Mn = _factor(p.matrix, z[None, ...], hz) @ M[None, ...]
        vals = fn(p.matrix, Mn)
        contrib = 0.5 * p.length * np.tensordot(_GL_W, vals, axes=(0, 0))
        total = contrib if total is None else total + contrib
        M = _factor(p.matrix, z, p.length) @ M
    return total


def greens_matrix(H: Hamiltonian, lam: complex, z: complex, x: float | None = None) -> Matrix2:
    """``(z - conj(lam)) int_0^x M(t, lam)^* H(t) M(t, z) dt`` by quadrature."""
    zz = np.array([lam, z], dtype=complex)

    def fn(mat, Mn):
        A = Mn[:, 0]
        B = Mn[:, 1]
        return np.conj(np.swapaxes(A, -1, -2)) @ mat @ B

    val = integrate_along(H, zz, x, fn)
    return Matrix2.from_array((z - np.conj(lam)) * val)


def accumulated_hamiltonian(H: Hamiltonian, x: float | None = None) -> np.ndarray:
    """``int_0^x H(s) ds`` (equal to ``J dM/dz (x, 0)``)."""
    x = _check_x(H, x)
    out = np.zeros((2, 2))
    for p in H.pieces(x):
        out += p.length * p.matrix
    return out


def _chain_norms(H: Hamiltonian, lam: np.ndarray, x: float) -> np.ndarray:
    # Theta in the frame (e, Je) of the current segment: <e, Theta> is constant
    # along the segment and the segment contributes l <e, Theta>^2 exactly.
    beta = np.ones(lam.shape)
    alpha = np.zeros(lam.shape)
    frame = np.array([1.0, 0.0])
    total = np.zeros(lam.shape)
    log_scale = np.zeros(lam.shape)
    for p in H.pieces(x):
        wgt = float(p.e @ p.e)
        u = p.e / math.sqrt(wgt)
        c = float(frame @ u)
        sn = float(frame[0] * u[1] - frame[1] * u[0])
        beta, alpha = beta * c + alpha * sn, alpha * c - beta * sn
        frame = u
        total = total + wgt * p.length * beta ** 2
        alpha = alpha - lam * wgt * p.length * beta
        r = np.hypot(beta, alpha)
        big = r > 1e100
        if np.any(big):
            f = np.where(big, r, 1.0)
            beta, alpha, total = beta / f, alpha / f, total / f ** 2
            log_scale = log_scale + 2 * np.log(f)
    return total * np.exp(log_scale)


def theta_norms(H: Hamiltonian, lam, x: float | None = None) -> np.ndarray:
    """``int_0^x <H Theta, Theta>`` for real ``lam`` (vectorized).

    All-rank-one systems are summed segment by segment in the rotating frame
    of the segment directions, which keeps full relative accuracy when long,
    almost parallel segments follow each other.
    """
    lam = np.asarray(lam, dtype=float)
    xx = _check_x(H, x)
    if all(isinstance(sg, RankOne) for sg in H.segments):
        return _chain_norms(H, lam, xx)

    def fn(mat, Mn):
        th = Mn[..., :, 0].real
        return np.einsum("...i,ij,...j->...", th, mat, th)

    return np.real(integrate_along(H, lam.astype(complex), x, fn))


def theta_energy(H: Hamiltonian, z, x: float | None = None) -> np.ndarray:
    """``int_0^x Theta^* H Theta`` for complex ``z`` (vectorized)."""
    z = np.asarray(z, dtype=complex)

    def fn(mat, Mn):
        th = Mn[..., :, 0]
        return np.real(np.einsum("...i,ij,...j->...", np.conj(th), mat, th))

    return integrate_along(H, z, x, fn)


# --------------------------------------------------------------------------
# spectra


def prufer_angle(H: Hamiltonian, lam, x: float | None = None) -> np.ndarray:
    """Continuous argument of ``Theta(x, lam)`` for real ``lam``.

    The argument starts at 0 for ``x = 0`` and is followed along the system on
    steps short enough that it changes by less than one radian per step, so
    the branch is unambiguous.  At fixed ``x`` it is strictly decreasing in
    ``lam``, its derivative being ``-||Theta||^2 / |Theta|^2``.
    """
    x = _check_x(H, x)
    lam = np.asarray(lam, dtype=float)
    lmax = float(np.max(np.abs(lam))) if lam.size else 0.0
    max_len = 1.0 / lmax if lmax > 0 else math.inf
    y = np.zeros(lam.shape + (2,))
    y[..., 0] = 1.0
    phi = np.zeros(lam.shape)
    ang = np.zeros(lam.shape)
    # on runs of rank-one pieces Theta is kept in the frame (e, Je) of the
    # current direction; the frame change uses <Je_old, e_new> computed from
    # the components, so nearly parallel neighbours lose no digits
    frame = None
    for p in H.pieces(x, max_len=max_len):
        if p.rank_one:
            wgt = float(p.e @ p.e)
            u = p.e / math.sqrt(wgt)
            if frame is None:
                beta = y[..., 0] * u[0] + y[..., 1] * u[1]
                alpha = y[..., 1] * u[0] - y[..., 0] * u[1]
            else:
                c = float(frame @ u)
                sn = float(frame[0] * u[1] - frame[1] * u[0])
                beta, alpha = beta * c + alpha * sn, alpha * c - beta * sn
            frame = u
            new_alpha = alpha - lam * wgt * p.length * beta
            d = np.arctan2(new_alpha, beta) - np.arctan2(alpha, beta)
            phi += (d + np.pi) % (2 * np.pi) - np.pi
            r = np.hypot(beta, new_alpha)
            beta, alpha = beta / r, new_alpha / r
            continue
        if frame is not None:
            y = (beta[..., None] * frame + alpha[..., None] * np.array([-frame[1], frame[0]]))
            ang = np.arctan2(y[..., 1], y[..., 0])
            frame = None
        F = _factor(p.matrix, lam, p.length).real
        y = np.einsum("...ij,...j->...i", F, y)
        y /= np.linalg.norm(y, axis=-1, keepdims=True)
        new = np.arctan2(y[..., 1], y[..., 0])
        d = new - ang
        d = (d + np.pi) % (2 * np.pi) - np.pi
        phi += d
        ang = new
    return phi


def _check_boundary(H: Hamiltonian, alpha: float) -> None:
    if H.is_semiaxis:
        raise ValidationError("spectra need a Hamiltonian of finite length")
    last = H.segments[-1]
    if isinstance(last, RankOne):
        d = (last.angle - alpha) / math.pi
        if abs(d - round(d)) < 1e-12:
            raise ValidationError("degenerate boundary condition: the last segment is "
                                  "rank-one with direction (cos alpha, sin alpha)")
    first = H.segments[0]
    if isinstance(first, RankOne):
        d = (first.angle - math.pi / 2) / math.pi
        if abs(d - round(d)) < 1e-12:
            log.warning("left-end condition fails: the first segment has direction (0, 1)")


def spectrum_alpha(H: Hamiltonian, alpha: float, window: tuple[float, float],
                   tol: float = 1e-13) -> np.ndarray:
    """Eigenvalues in ``window`` for the boundary condition at angle ``alpha``.

    They are the real zeros of ``Theta+(L, .) cos(alpha) + Theta-(L, .) sin(alpha)``,
    i.e. the points where the Prufer angle equals ``alpha + pi/2`` modulo pi.
    Since the angle is monotone, every eigenvalue is bracketed by value and
    found by simultaneous bisection; none can be missed.
    """
    lo, hi = map(float, window)
    if not lo < hi:
        raise ValidationError("window must satisfy lo < hi")
    _check_boundary(H, alpha)
    phi_lo, phi_hi = prufer_angle(H, np.array([lo, hi]))
    base = alpha + math.pi / 2
    kmin = math.ceil((phi_hi - base) / math.pi - 1e-12)
    kmax = math.floor((phi_lo - base) / math.pi + 1e-12)
    if kmax < kmin:
        return np.zeros(0)
    targets = base + math.pi * np.arange(kmin, kmax + 1)
    a = np.full(targets.shape, lo)
    b = np.full(targets.shape, hi)
    scale = max(1.0, abs(lo), abs(hi))
    for _ in range(200):
        mid = 0.5 * (a + b)
        f = prufer_angle(H, mid)
        right = f > targets  # still above the target: root lies to the right
        a = np.where(right, mid, a)
        b = np.where(right, b, mid)
        if np.max(b - a) <= tol * scale:
            break
    roots = 0.5 * (a + b)
    # Theta(L, 0) = (1, 0), so z = 0 is an eigenvalue exactly when cos(alpha) = 0
    if abs(math.cos(alpha)) <= 1e-15:
        k = np.flatnonzero((a <= 0.0) & (0.0 <= b) | (np.abs(roots) <= 2 * tol * scale))
        if k.size:
            roots[k[np.argmin(np.abs(roots[k]))]] = 0.0
    return np.sort(roots)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite list of atoms ``t`` with positive weights ``w``."""

    t: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        if t.shape != w.shape or t.ndim != 1:
            raise ValidationError("atoms and weights must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(w))):
            raise ValidationError("atoms and weights must be finite")
        if np.any(w <= 0):
            raise ValidationError("atom weights must be positive")
        order = np.argsort(t, kind="stable")
        t, w = t[order], w[order]
        if t.size > 1 and np.any(np.diff(t) == 0):
            raise ValidationError("duplicate atoms")
        t.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return self.t.size

    def to_json(self) -> dict:
        return {"atoms": [{"t": float(a), "w": float(b)} for a, b in zip(self.t, self.w)]}

    @classmethod
    def from_json(cls, obj: dict) -> "AtomicMeasure":
        if not isinstance(obj, dict) or not isinstance(obj.get("atoms"), list):
            raise ValidationError("measure JSON needs an 'atoms' list")
        try:
            t = [float(a["t"]) for a in obj["atoms"]]
            w = [float(a["w"]) for a in obj["atoms"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad atom entry: {exc}") from exc
        return cls(np.array(t), np.array(w))

    def to_csv(self) -> str:
        lines = ["t,w"] + [f"{a!r},{b!r}" for a, b in zip(self.t.tolist(), self.w.tolist())]
        return "\n".join(lines) + "\n"


def spectral_measure_alpha(H: Hamiltonian, alpha: float,
                           window: tuple[float, float]) -> AtomicMeasure:
    """Atoms at the alpha-spectrum with weights ``1 / ||Theta(., lam_k)||^2``."""
    lam = spectrum_alpha(H, alpha, window)
    if lam.size == 0:
        return AtomicMeasure(np.zeros(0), np.zeros(0))
    norms = theta_norms(H, lam)
    return AtomicMeasure(lam, 1.0 / norms)

