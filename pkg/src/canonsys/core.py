"""Fixed-size complex linear algebra, polynomials and root finding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TRIM_RTOL = 1e-12


class CanonError(Exception):
    """Base class for library errors."""


class ValidationError(CanonError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(CanonError, ArithmeticError):
    """A numerical gate (residual, drift, conditioning) failed."""


# --------------------------------------------------------------------------
# 2x2 algebra


@dataclass(frozen=True)
class Complex2Vector:
    plus: complex
    minus: complex

    def to_array(self) -> np.ndarray:
        return np.array([self.plus, self.minus], dtype=complex)

    @classmethod
    def from_array(cls, v: Sequence[complex]) -> "Complex2Vector":
        return cls(complex(v[0]), complex(v[1]))


@dataclass(frozen=True)
class Matrix2:
    """A 2x2 complex matrix stored entrywise."""

    m11: complex
    m12: complex
    m21: complex
    m22: complex

    @classmethod
    def identity(cls) -> "Matrix2":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, a) -> "Matrix2":
        a = np.asarray(a)
        if a.shape != (2, 2):
            raise ValidationError(f"expected a 2x2 array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("matrix entries must be finite")
        return cls(complex(a[0, 0]), complex(a[0, 1]), complex(a[1, 0]), complex(a[1, 1]))

    def to_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=complex)

    def __matmul__(self, other):
        if isinstance(other, Matrix2):
            return mat2_mul(self, other)
        if isinstance(other, Complex2Vector):
            return Complex2Vector(
                self.m11 * other.plus + self.m12 * other.minus,
                self.m21 * other.plus + self.m22 * other.minus,
            )
        return NotImplemented

    def __add__(self, other: "Matrix2") -> "Matrix2":
        return Matrix2(self.m11 + other.m11, self.m12 + other.m12,
                       self.m21 + other.m21, self.m22 + other.m22)

    def __sub__(self, other: "Matrix2") -> "Matrix2":
        return Matrix2(self.m11 - other.m11, self.m12 - other.m12,
                       self.m21 - other.m21, self.m22 - other.m22)

    def scale(self, c: complex) -> "Matrix2":
        return Matrix2(c * self.m11, c * self.m12, c * self.m21, c * self.m22)

    def det(self) -> complex:
        return self.m11 * self.m22 - self.m12 * self.m21

    def trace(self) -> complex:
        return self.m11 + self.m22

    def adjoint(self) -> "Matrix2":
        c = np.conj
        return Matrix2(c(self.m11), c(self.m21), c(self.m12), c(self.m22))

    def inv(self) -> "Matrix2":
        d = self.det()
        if d == 0:
            raise NumericalError("singular 2x2 matrix")
        return Matrix2(self.m22 / d, -self.m12 / d, -self.m21 / d, self.m11 / d)

    def norm(self) -> float:
        """Spectral norm."""
        return float(np.linalg.norm(self.to_array(), 2))

    def columns(self) -> tuple[Complex2Vector, Complex2Vector]:
        return Complex2Vector(self.m11, self.m21), Complex2Vector(self.m12, self.m22)


J = Matrix2(0.0, -1.0, 1.0, 0.0)


def mat2_mul(a: Matrix2, b: Matrix2) -> Matrix2:
    return Matrix2(
        a.m11 * b.m11 + a.m12 * b.m21,
        a.m11 * b.m12 + a.m12 * b.m22,
        a.m21 * b.m11 + a.m22 * b.m21,
        a.m21 * b.m12 + a.m22 * b.m22,
    )


def mat2_product(factors: Iterable[Matrix2]) -> Matrix2:
    """Left-to-right product of the given factors."""
    out = Matrix2.identity()
    for f in factors:
        out = out @ f
    return out


# --------------------------------------------------------------------------
# polynomials


class Polynomial:
    """Polynomial with ascending coefficients (real or complex).

    Trailing coefficients below ``TRIM_RTOL`` times the largest one are
    dropped on construction, so :attr:`degree` reflects analytic cancellation
    of leading terms.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[complex] | np.ndarray, trim: bool = True):
        c = np.atleast_1d(np.asarray(coeffs))
        if c.ndim != 1:
            raise ValidationError("polynomial coefficients must be one-dimensional")
        if np.iscomplexobj(c):
            c = c.astype(complex)
            if np.all(c.imag == 0):
                c = c.real.copy()
        else:
            c = c.astype(float)
        if not np.all(np.isfinite(c)):
            raise ValidationError("polynomial coefficients must be finite")
        if c.size == 0:
            c = np.zeros(1)
        if trim:
            c = _trim(c)
        c.setflags(write=False)
        self.coeffs = c

    # construction helpers
    @classmethod
    def from_roots(cls, roots: Sequence[complex], lead: complex = 1.0) -> "Polynomial":
        c = np.array([1.0 + 0j])
        for r in roots:
            c = np.convolve(c, [-r, 1.0])
        return cls(lead * c)

    @classmethod
    def monomial(cls, k: int, c: complex = 1.0) -> "Polynomial":
        out = np.zeros(k + 1, dtype=complex if isinstance(c, complex) else float)
        out[k] = c
        return cls(out)

    # basic properties
    @property
    def degree(self) -> int:
        if self.coeffs.size == 1 and self.coeffs[0] == 0:
            return -1
        return self.coeffs.size - 1

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.coeffs)

    @property
    def lead(self) -> complex:
        return self.coeffs[-1]

    def __repr__(self) -> str:
        return f"Polynomial({self.coeffs.tolist()!r})"

    def __call__(self, z):
        z = np.asarray(z)
        out = np.zeros_like(z, dtype=np.result_type(z, self.coeffs, float))
        for c in self.coeffs[::-1]:
            out = out * z + c
        return out if out.ndim else out[()]

    # arithmetic
    def _coerce(self, other) -> "Polynomial":
        return other if isinstance(other, Polynomial) else Polynomial([other])

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        n = max(self.coeffs.size, other.coeffs.size)
        a = np.zeros(n, dtype=np.result_type(self.coeffs, other.coeffs))
        a[: self.coeffs.size] += self.coeffs
        a[: other.coeffs.size] += other.coeffs
        return Polynomial(a)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(-self.coeffs)

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return Polynomial(np.convolve(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "Polynomial":
        return Polynomial(self.coeffs / c)

    def shift_up(self, k: int = 1) -> "Polynomial":
        """Multiply by ``z**k``."""
        return Polynomial(np.concatenate([np.zeros(k, dtype=self.coeffs.dtype), self.coeffs]))

    def deriv(self) -> "Polynomial":
        if self.coeffs.size == 1:
            return Polynomial([0.0])
        k = np.arange(1, self.coeffs.size)
        return Polynomial(self.coeffs[1:] * k)

    def star(self) -> "Polynomial":
        """``p*(z) = conj(p(conj z))``: conjugate the coefficients."""
        return Polynomial(np.conj(self.coeffs))

    def real_part(self) -> "Polynomial":
        return Polynomial(np.real(self.coeffs))

    def imag_part(self) -> "Polynomial":
        return Polynomial(np.imag(self.coeffs))

    def divmod(self, other: "Polynomial") -> tuple["Polynomial", "Polynomial"]:
        if other.degree < 0:
            raise ZeroDivisionError("division by the zero polynomial")
        num = self.coeffs.astype(np.result_type(self.coeffs, other.coeffs, float)).copy()
        den = other.coeffs
        if num.size < den.size:
            return Polynomial([0.0]), Polynomial(num)
        q = np.zeros(num.size - den.size + 1, dtype=num.dtype)
        for k in range(q.size - 1, -1, -1):
            q[k] = num[k + den.size - 1] / den[-1]
            num[k : k + den.size] -= q[k] * den
        return Polynomial(q), Polynomial(num[: den.size - 1] if den.size > 1 else [0.0])

    def divide_linear(self, root: complex) -> tuple["Polynomial", complex]:
        """Synthetic division by ``(z - root)``; returns quotient and remainder."""
        c = self.coeffs
        if c.size == 1:
            return Polynomial([0.0]), c[0]
        dtype = np.result_type(c, np.asarray(root))
        q = np.zeros(c.size - 1, dtype=dtype)
        acc = c[-1]
        for k in range(c.size - 2, -1, -1):
            q[k] = acc
            acc = c[k] + acc * root
        return Polynomial(q, trim=False), acc

    def allclose(self, other: "Polynomial", atol: float = 1e-10) -> bool:
        n = max(self.coeffs.size, other.coeffs.size)
        a = np.zeros(n, dtype=complex)
        b = np.zeros(n, dtype=complex)
        a[: self.coeffs.size] = self.coeffs
        b[: other.coeffs.size] = other.coeffs
        return bool(np.max(np.abs(a - b)) <= atol)

    # serialization
    def to_json(self) -> dict:
        if self.is_real:
            return {"coeffs": [float(c) for c in self.coeffs]}
        return {"coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj: dict) -> "Polynomial":
        if not isinstance(obj, dict) or "coeffs" not in obj:
            raise ValidationError("polynomial JSON must be an object with a 'coeffs' list")
        raw = obj["coeffs"]
        if not isinstance(raw, list) or not raw:
            raise ValidationError("'coeffs' must be a non-empty list")
        vals = []
        for c in raw:
            if isinstance(c, (list, tuple)):
                if len(c) != 2:
                    raise ValidationError("complex coefficients are written as [re, im]")
                vals.append(complex(float(c[0]), float(c[1])))
            elif isinstance(c, (int, float)) and not isinstance(c, bool):
                vals.append(float(c))
            else:
                raise ValidationError(f"bad coefficient {c!r}")
        return cls(vals)


RealPolynomial = Polynomial


def _trim(c: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(c))
    if scale == 0:
        return c[:1] * 0
    n = c.size
    while n > 1 and abs(c[n - 1]) <= TRIM_RTOL * scale:
        n -= 1
    return c[:n].copy()


# --------------------------------------------------------------------------
# root finding


def aberth_roots(coeffs: Sequence[complex], maxiter: int = 500) -> np.ndarray:
    """All complex roots of a polynomial by Aberth-Ehrlich iteration.

    Seeds lie on a circle whose radius is the geometric mean of the root
    moduli, rotated by a fixed offset, so the result is deterministic.
    """
    c = np.asarray(coeffs, dtype=complex)
    c = _trim(c)
    n = c.size - 1
    if n < 1:
        raise ValidationError("constant polynomial has no roots")
    # exact roots at the origin
    k0 = 0
    while k0 < n and c[k0] == 0:
        k0 += 1
    zeros = np.zeros(k0, dtype=complex)
    c = c[k0:]
    n = c.size - 1
    if n == 0:
        return zeros
    monic = c / c[-1]
    if n == 1:
        return np.concatenate([zeros, [-monic[0]]])
    dc = monic[1:] * np.arange(1, n + 1)
    radius = abs(monic[0]) ** (1.0 / n)
    cauchy = 1.0 + np.max(np.abs(monic[:-1]))
    radius = min(max(radius, 1e-8), cauchy)
    z = radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    for _ in range(maxiter):
        p = np.polyval(monic[::-1], z)
        dp = np.polyval(dc[::-1], z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            w = ratio / (1.0 - ratio * inv.sum(axis=1))
        w = np.where(np.isfinite(w), w, 0.0)
        z = z - w
        if np.all(np.abs(w) <= 4e-16 * np.maximum(1.0, np.abs(z))):
            break
    # one Newton polish per root where the derivative is well away from zero
    p = np.polyval(monic[::-1], z)
    dp = np.polyval(dc[::-1], z)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = p / dp
    good = np.isfinite(step) & (np.abs(step) < 1e-6 * np.maximum(1.0, np.abs(z)))
    z = np.where(good, z - np.where(good, step, 0), z)
    return np.concatenate([zeros, z])


def _as_coeffs(p) -> np.ndarray:
    if isinstance(p, Polynomial):
        return p.coeffs
    return np.asarray(p)


def poly_complex_roots(p) -> np.ndarray:
    """All complex roots; real-coefficient inputs get exactly conjugate pairs."""
    c = _as_coeffs(p)
    roots = aberth_roots(c)
    if np.iscomplexobj(c) and np.any(np.imag(c) != 0):
        return roots
    return _pair_conjugates(roots)


def _pair_conjugates(roots: np.ndarray, real_tol: float = 1e-10) -> np.ndarray:
    roots = np.array(roots, dtype=complex)
    scale = np.maximum(1.0, np.abs(roots))
    real_mask = np.abs(roots.imag) <= real_tol * scale
    out = list(roots[real_mask].real.astype(complex))
    upper = [r for r in roots[~real_mask] if r.imag > 0]
    lower = [r for r in roots[~real_mask] if r.imag < 0]
    used = [False] * len(lower)
    for r in upper:
        best, bestd = None, math.inf
        for k, s in enumerate(lower):
            if not used[k] and abs(np.conj(s) - r) < bestd:
                best, bestd = k, abs(np.conj(s) - r)
        if best is None:
            out.append(r)
            continue
        used[best] = True
        m = 0.5 * (r + np.conj(lower[best]))
        out.extend([m, np.conj(m)])
    out.extend(s for k, s in enumerate(lower) if not used[k])
    return np.array(out, dtype=complex)


def poly_real_roots(p, tol: float = 1e-9, with_multiplicity: bool = False):
    """Real roots of a real polynomial, sorted, refined by Newton steps.

    Roots whose imaginary part is below ``tol`` (relative to ``max(1, |z|)``)
    are treated as real.  Roots closer than ``1e-6`` relative are merged and
    reported with their multiplicity when ``with_multiplicity`` is set.
    """
    c = np.real_if_close(_as_coeffs(p))
    poly = Polynomial(c)
    if poly.degree < 1:
        raise ValidationError("constant polynomial has no roots")
    roots = poly_complex_roots(poly)
    scale = np.maximum(1.0, np.abs(roots))
    real = np.sort(roots[np.abs(roots.imag) <= max(tol, 1e-7) * scale].real)
    dp = poly.deriv()
    groups: list[list[float]] = []
    for r in real:
        if groups and abs(r - groups[-1][-1]) <= 1e-6 * max(1.0, abs(r)):
            groups[-1].append(r)
        else:
            groups.append([r])
    values, mult = [], []
    for g in groups:
        x = float(np.mean(g))
        if len(g) == 1:
            for _ in range(3):
                d = dp(x)
                if d == 0:
                    break
                step = poly(x) / d
                if not np.isfinite(step) or abs(step) > 1e-6 * max(1.0, abs(x)):
                    break
                x -= float(np.real(step))
        values.append(x)
        mult.append(len(g))
    values = np.asarray(values, dtype=float)
    if with_multiplicity:
        return values, np.asarray(mult, dtype=int)
    return values
