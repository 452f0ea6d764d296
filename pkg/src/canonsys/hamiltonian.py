"""Hamiltonians of canonical systems, trace normalization and reductions.

A Hamiltonian is an ordered list of segments covering ``[0, L)`` from the
left.  Three segment kinds are supported:

* :class:`RankOne` -- ``H = w <., e> e`` with ``e = (cos a, sin a)``;
* :class:`Constant` -- a fixed positive semidefinite matrix;
* :class:`Sampled` -- ``n`` matrices on a uniform grid of cells, ``H`` being
  constant on each cell.

The last segment may have infinite length, which describes a system on the
semiaxis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from .core import NumericalError, ValidationError

log = logging.getLogger(__name__)

PSD_TOL = 1e-12


def _check_psd(m: np.ndarray, what: str) -> None:
    if m.shape != (2, 2):
        raise ValidationError(f"{what}: expected a 2x2 matrix")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{what}: non-finite entries")
    if abs(m[0, 1] - m[1, 0]) > 1e-12 * max(1.0, np.abs(m).max()):
        raise ValidationError(f"{what}: matrix is not symmetric")
    lo = np.linalg.eigvalsh(0.5 * (m + m.T))[0]
    if lo < -PSD_TOL * max(1.0, np.abs(m).max()):
        raise ValidationError(f"{what}: matrix is not positive semidefinite (min eigenvalue {lo:.3e})")


def _check_length(length: float, allow_inf: bool = True) -> None:
    if not (length > 0) or (math.isinf(length) and not allow_inf) or math.isnan(length):
        raise ValidationError(f"segment length must be positive, got {length!r}")


@dataclass(frozen=True)
class RankOne:
    """``H = weight * <., e> e`` with ``e = (cos angle, sin angle)``.

    ``direction`` optionally stores ``e`` itself.  Near-vertical directions
    lose relative precision in ``cos(angle)``, and inverse solutions with
    long, almost parallel segments need the components to full precision;
    :meth:`from_vector` keeps them.
    """

    length: float
    angle: float
    weight: float = 1.0
    direction: tuple[float, float] | None = None

    def __post_init__(self):
        _check_length(self.length)
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValidationError("rank-one weight must be positive")
        if self.direction is not None:
            c, s = (float(v) for v in self.direction)
            r = math.hypot(c, s)
            if not r > 0:
                raise ValidationError("rank-one direction must be nonzero")
            object.__setattr__(self, "direction", (c / r, s / r))

    @classmethod
    def from_vector(cls, length: float, e, weight: float = 1.0) -> "RankOne":
        c, s = (float(v) for v in e)
        return cls(length, math.atan2(s, c), weight, (c, s))

    @property
    def e(self) -> np.ndarray:
        if self.direction is not None:
            return np.array(self.direction)
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    @property
    def matrix(self) -> np.ndarray:
        e = self.e
        return self.weight * np.outer(e, e)

    def trace(self) -> float:
        return self.weight


@dataclass(frozen=True)
class Constant:
    length: float
    matrix: np.ndarray = field(compare=False)

    def __post_init__(self):
        _check_length(self.length)
        m = np.array(self.matrix, dtype=float)
        _check_psd(m, "constant segment")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __eq__(self, other):
        return (isinstance(other, Constant) and self.length == other.length
                and np.array_equal(self.matrix, other.matrix))

    def trace(self) -> float:
        return float(self.matrix[0, 0] + self.matrix[1, 1])


@dataclass(frozen=True)
class Sampled:
    """Cell-wise constant Hamiltonian: ``matrices[k]`` on the k-th of n equal cells."""

    length: float
    matrices: np.ndarray = field(compare=False)

    def __post_init__(self):
        _check_length(self.length, allow_inf=False)
        m = np.array(self.matrices, dtype=float)
        if m.ndim != 3 or m.shape[1:] != (2, 2) or m.shape[0] < 1:
            raise ValidationError("sampled segment needs an (n, 2, 2) array of matrices")
        for k in range(m.shape[0]):
            _check_psd(m[k], f"sampled segment cell {k}")
        m = 0.5 * (m + np.swapaxes(m, 1, 2))
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)

    def __eq__(self, other):
        return (isinstance(other, Sampled) and self.length == other.length
                and np.array_equal(self.matrices, other.matrices))

    @property
    def n(self) -> int:
        return self.matrices.shape[0]

    @property
    def cell(self) -> float:
        return self.length / self.n


Segment = Union[RankOne, Constant, Sampled]


@dataclass(frozen=True)
class Piece:
    """Sub-interval on which H is a constant matrix (a flattened segment view)."""

    start: float
    length: float
    matrix: np.ndarray
    rank_one: bool
    e: np.ndarray | None = None


class Hamiltonian:
    """Ordered segments of a canonical system Hamiltonian starting at x = 0."""

    def __init__(self, segments: Sequence[Segment], trace_normalized: bool | None = None):
        segs = list(segments)
        if not segs:
            raise ValidationError("a Hamiltonian needs at least one segment")
        for s in segs[:-1]:
            if math.isinf(s.length):
                raise ValidationError("only the last segment may have infinite length")
        self.segments: tuple[Segment, ...] = tuple(_merge_rank_one(segs))
        actual = self._trace_is_one()
        if trace_normalized is None:
            trace_normalized = actual
        elif trace_normalized and not actual:
            raise ValidationError("flagged trace_normalized but tr H != 1 somewhere")
        self.trace_normalized = bool(trace_normalized)

    def _trace_is_one(self) -> bool:
        for s in self.segments:
            if isinstance(s, Sampled):
                tr = s.matrices[:, 0, 0] + s.matrices[:, 1, 1]
                if np.max(np.abs(tr - 1)) > 1e-10:
                    return False
            elif abs(s.trace() - 1) > 1e-10:
                return False
        return True

    def __repr__(self) -> str:
        return f"Hamiltonian({list(self.segments)!r}, trace_normalized={self.trace_normalized})"

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def length(self) -> float:
        return float(sum(s.length for s in self.segments))

    @property
    def is_semiaxis(self) -> bool:
        return math.isinf(self.segments[-1].length)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.length for s in self.segments])])

    def pieces(self, x: float | None = None, max_len: float = math.inf):
        """Yield constant pieces covering ``[0, x]``, each of length <= ``max_len``."""
        if x is None:
            x = self.length
        if x > self.length * (1 + 1e-14) + 1e-14:
            raise ValidationError(f"x = {x} exceeds the Hamiltonian length {self.length}")
        full = x >= self.length
        pos = 0.0
        for seg in self.segments:
            if pos >= x and not full:
                return
            if isinstance(seg, Sampled):
                cells = [(seg.cell, seg.matrices[k], False, None) for k in range(seg.n)]
            elif isinstance(seg, RankOne):
                cells = [(seg.length, seg.matrix, True, math.sqrt(seg.weight) * seg.e)]
            else:
                cells = [(seg.length, seg.matrix, False, None)]
            for ln, mat, r1, e in cells:
                if pos >= x and not full:
                    return
                # compare end points instead of subtracting, so that a short
                # piece after very long ones is not clipped by rounding
                take = ln if pos + ln <= x or full else x - pos
                if take <= 0:
                    continue
                if r1:
                    # a rank-one piece is exact in one step
                    yield Piece(pos, take, mat, True, e)
                else:
                    k = 1 if not math.isfinite(max_len) else max(1, math.ceil(take / max_len))
                    h = take / k
                    for i in range(k):
                        yield Piece(pos + i * h, h, mat, False, None)
                pos += take

    def matrix_at(self, x: float) -> np.ndarray:
        if x < 0 or x > self.length:
            raise ValidationError("x out of range")
        pos = 0.0
        for seg in self.segments:
            if x <= pos + seg.length:
                if isinstance(seg, Sampled):
                    k = min(seg.n - 1, int((x - pos) / seg.cell))
                    return seg.matrices[k].copy()
                return np.array(seg.matrix)
            pos += seg.length
        return np.array(self.segments[-1].matrix)

    def truncate(self, x: float) -> "Hamiltonian":
        """The restriction of H to ``[0, x]``."""
        out, pos = [], 0.0
        for seg in self.segments:
            if pos >= x:
                break
            take = min(seg.length, x - pos)
            if take < seg.length:
                if isinstance(seg, Sampled):
                    k = max(1, int(round(take / seg.cell)))
                    if abs(k * seg.cell - take) > 1e-12 * max(1.0, take):
                        raise ValidationError("sampled segments can only be cut at cell boundaries")
                    seg = Sampled(take, seg.matrices[:k])
                elif isinstance(seg, RankOne):
                    seg = replace(seg, length=take)
                else:
                    seg = Constant(take, seg.matrix)
            out.append(seg)
            pos += take
        return Hamiltonian(out)

    def tail(self, x: float) -> list[Segment]:
        """Segments covering ``[x, length)``, shifted to start at 0."""
        out, pos = [], 0.0
        for seg in self.segments:
            end = pos + seg.length
            if end <= x:
                pos = end
                continue
            skip = max(0.0, x - pos)
            if skip > 0:
                if isinstance(seg, Sampled):
                    k = int(round(skip / seg.cell))
                    if abs(k * seg.cell - skip) > 1e-12 * max(1.0, skip) or k >= seg.n:
                        raise ValidationError("sampled segments can only be cut at cell boundaries")
                    seg = Sampled(seg.length - skip, seg.matrices[k:])
                elif isinstance(seg, RankOne):
                    seg = replace(seg, length=seg.length - skip)
                else:
                    seg = Constant(seg.length - skip, seg.matrix)
            out.append(seg)
            pos = end
        return out

    # serialization
    def to_json(self) -> dict:
        segs = []
        for s in self.segments:
            ln = s.length if math.isfinite(s.length) else "inf"
            if isinstance(s, RankOne):
                d = {"length": ln, "kind": "rank_one", "angle": s.angle}
                if s.direction is not None:
                    d["e"] = list(s.direction)
                if s.weight != 1.0:
                    d["weight"] = s.weight
            elif isinstance(s, Constant):
                d = {"length": ln, "kind": "constant", "matrix": s.matrix.tolist()}
            else:
                d = {"length": ln, "kind": "sampled", "n": s.n, "matrices": s.matrices.tolist()}
            segs.append(d)
        return {"trace_normalized": self.trace_normalized, "segments": segs}

    @classmethod
    def from_json(cls, obj: dict) -> "Hamiltonian":
        if not isinstance(obj, dict) or not isinstance(obj.get("segments"), list):
            raise ValidationError("Hamiltonian JSON needs a 'segments' list")
        segs: list[Segment] = []
        for k, d in enumerate(obj["segments"]):
            if not isinstance(d, dict) or "kind" not in d or "length" not in d:
                raise ValidationError(f"segment {k}: needs 'kind' and 'length'")
            ln = d["length"]
            ln = math.inf if ln in ("inf", "Infinity") else float(ln)
            kind = d["kind"]
            if kind == "rank_one":
                w = float(d.get("weight", 1.0))
                if "e" in d:
                    segs.append(RankOne.from_vector(ln, np.asarray(d["e"], dtype=float).reshape(2), w))
                else:
                    segs.append(RankOne(ln, float(d["angle"]), w))
            elif kind == "constant":
                segs.append(Constant(ln, np.asarray(d["matrix"], dtype=float)))
            elif kind == "sampled":
                m = np.asarray(d["matrices"], dtype=float)
                if "n" in d and int(d["n"]) != m.shape[0]:
                    raise ValidationError(f"segment {k}: 'n' does not match the number of matrices")
                segs.append(Sampled(ln, m))
            else:
                raise ValidationError(f"segment {k}: unknown kind {kind!r}")
        flag = obj.get("trace_normalized")
        return cls(segs, None if flag is None else bool(flag))


def _same_direction(a: RankOne, b: RankOne) -> bool:
    ea, eb = a.e, b.e
    return abs(ea[0] * eb[1] - ea[1] * eb[0]) < 4 * np.finfo(float).eps


def _merge_rank_one(segs: list[Segment]) -> list[Segment]:
    out: list[Segment] = []
    for s in segs:
        prev = out[-1] if out else None
        if (isinstance(s, RankOne) and isinstance(prev, RankOne)
                and _same_direction(s, prev) and s.weight == prev.weight):
            out[-1] = replace(prev, length=prev.length + s.length)
        else:
            out.append(s)
    return out


def free_hamiltonian(length: float = math.inf) -> Hamiltonian:
    """``H = I/2`` on ``[0, length)``."""
    return Hamiltonian([Constant(length, 0.5 * np.eye(2))])


# --------------------------------------------------------------------------
# trace normalization


@dataclass(frozen=True)
class Reparametrization:
    """Monotone map ``xi(x) = int_0^x tr H`` stored as a piecewise linear table."""

    grid: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)

    def inverse(self, xi):
        # leftmost preimage on flat stretches
        xi = np.asarray(xi, dtype=float)
        idx = np.searchsorted(self.values, xi, side="left")
        idx = np.clip(idx, 1, self.grid.size - 1)
        v0, v1 = self.values[idx - 1], self.values[idx]
        g0, g1 = self.grid[idx - 1], self.grid[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(v1 > v0, (xi - v0) / (v1 - v0), 1.0)
        out = g0 + t * (g1 - g0)
        return out if out.ndim else float(out)


def normalize_trace(H: Hamiltonian) -> tuple[Hamiltonian, Reparametrization]:
    """Rescale so that ``tr H == 1``.

    A segment of trace ``tau`` and length ``l`` becomes one of length
    ``tau * l`` carrying ``H / tau``.  Stretches where the trace vanishes are
    removed with a logged warning.  Sampled segments whose trace is not
    constant are split into constant segments.
    """
    out: list[Segment] = []
    grid, vals = [0.0], [0.0]

    def push(length, tau, seg_factory):
        x0, v0 = grid[-1], vals[-1]
        if tau <= 0:
            log.warning("excising zero-trace stretch of length %g at x = %g", length, x0)
        else:
            out.append(seg_factory(tau * length, tau))
        grid.append(x0 + length)
        vals.append(v0 + tau * length)

    for seg in H.segments:
        if math.isinf(seg.length):
            tau = seg.trace()
            if tau <= 0:
                raise ValidationError("infinite zero-trace segment")
            if isinstance(seg, RankOne):
                out.append(replace(seg, length=math.inf, weight=1.0))
            else:
                out.append(Constant(math.inf, seg.matrix / tau))
            continue
        if isinstance(seg, RankOne):
            push(seg.length, seg.weight, lambda ln, tau, s=seg: replace(s, length=ln, weight=1.0))
        elif isinstance(seg, Constant):
            push(seg.length, seg.trace(), lambda ln, tau, s=seg: Constant(ln, s.matrix / tau))
        else:
            tr = seg.matrices[:, 0, 0] + seg.matrices[:, 1, 1]
            if np.all(tr > 0) and np.ptp(tr) <= 1e-14 * tr.max():
                tau = float(tr[0])
                push(seg.length, tau, lambda ln, t, s=seg: Sampled(ln, s.matrices / t))
            else:
                for k in range(seg.n):
                    push(seg.cell, float(tr[k]),
                         lambda ln, t, m=seg.matrices[k]: Constant(ln, m / t))
    if not out:
        raise ValidationError("Hamiltonian has zero trace everywhere")
    rep = Reparametrization(np.asarray(grid), np.asarray(vals))
    return Hamiltonian(out, trace_normalized=True), rep


def exact_type(H: Hamiltonian) -> float:
    """``int_0^L sqrt(det H(x)) dx`` over a finite Hamiltonian."""
    if H.is_semiaxis:
        raise ValidationError("exact_type needs a finite total length")
    p = 0.0
    for s in H.segments:
        if isinstance(s, RankOne):
            continue
        if isinstance(s, Constant):
            p += s.length * math.sqrt(max(np.linalg.det(s.matrix), 0.0))
        else:
            d = np.clip(np.linalg.det(s.matrices), 0.0, None)
            p += s.cell * float(np.sum(np.sqrt(d)))
    return p


# --------------------------------------------------------------------------
# reductions


@dataclass(frozen=True)
class BoundaryContext:
    """Values of the two lambda = 0 Schroedinger solutions at both endpoints."""

    h: float
    y1_0: float
    dy1_0: float
    y2_0: float
    dy2_0: float
    y1_1: float
    dy1_1: float
    y2_1: float
    dy2_1: float
    wronskian_drift: float


def _rk4_linear(rhs: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray,
                a: float, b: float, steps: int) -> np.ndarray:
    """Classical RK4 over ``steps`` equal steps; returns the state after each step."""
    h = (b - a) / steps
    y = np.array(y0, dtype=float)
    out = np.empty((steps, y.size))
    for i in range(steps):
        x = a + i * h
        k1 = rhs(x, y)
        k2 = rhs(x + h / 2, y + h / 2 * k1)
        k3 = rhs(x + h / 2, y + h / 2 * k2)
        k4 = rhs(x + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i] = y
    return out


def _sampled_function(values: np.ndarray | Callable, length: float) -> Callable[[float], float]:
    if callable(values):
        return values
    v = np.asarray(values, dtype=float)
    if v.ndim == 0:
        c = float(v)
        return lambda x: c
    if v.size == 1:
        c = float(v[0])
        return lambda x: c
    xs = np.linspace(0.0, length, v.size)
    return lambda x: float(np.interp(x, xs, v))


def _integrate_with_check(rhs, y0, length, grid_n):
    """RK4 on a fine grid, with a half-step Richardson comparison.

    Returns the state at the cell midpoints and at the endpoint, plus the
    estimated global error.
    """
    sub = 8
    fine = _rk4_linear(rhs, y0, 0.0, length, 2 * grid_n * sub)
    coarse = _rk4_linear(rhs, y0, 0.0, length, grid_n * sub)
    err = float(np.max(np.abs(fine[1::2] - coarse)) / 15.0)
    mids = fine[sub - 1 :: 2 * sub]
    return mids, fine[-1], err


def schrodinger_to_canonical(q, h: float, grid_n: int = 256, length: float = 1.0,
                             normalize: bool = True) -> tuple[Hamiltonian, BoundaryContext]:
    """Canonical system of ``-y'' + q y = lambda y`` on ``(0, length)``.

    The two real solutions of the equation at ``lambda = 0`` are fixed by
    ``y1(0) = 1, y1'(0) = h`` and ``y2(0) = 0, y2'(0) = 1``, which gives the
    Wronskian ``y1' y2 - y2' y1 = -1``.  The Hamiltonian
    ``[[y1^2, y1 y2], [y1 y2, y2^2]]`` is sampled at cell midpoints.

    Parameters
    ----------
    q : array_like or callable
        Potential, either a callable or samples on a uniform grid over
        ``[0, length]`` (linearly interpolated).
    h : float
        Left boundary parameter in ``y'(0) = h y(0)``.
    grid_n : int
        Number of cells of the produced sampled Hamiltonian (>= 16).
    """
    if grid_n < 16:
        raise ValidationError("grid_n must be at least 16")
    qf = _sampled_function(q, length)

    def rhs(x, y):
        qq = qf(x)
        return np.array([y[1], qq * y[0], y[3], qq * y[2]])

    y0 = np.array([1.0, float(h), 0.0, 1.0])
    mids, end, err = _integrate_with_check(rhs, y0, length, grid_n)
    wr = mids[:, 1] * mids[:, 2] - mids[:, 3] * mids[:, 0]
    drift = float(max(np.max(np.abs(wr + 1.0)), err))
    if drift > 1e-6:
        raise NumericalError(f"grid too coarse: Wronskian drift {drift:.2e}; increase grid_n")
    if drift > 1e-8:
        log.warning("Wronskian drift %.2e exceeds 1e-8", drift)
    y1, y2 = mids[:, 0], mids[:, 2]
    mats = np.empty((grid_n, 2, 2))
    mats[:, 0, 0] = y1 * y1
    mats[:, 0, 1] = mats[:, 1, 0] = y1 * y2
    mats[:, 1, 1] = y2 * y2
    H = Hamiltonian([Sampled(length, mats)])
    if normalize:
        H, _ = normalize_trace(H)
    ctx = BoundaryContext(float(h), 1.0, float(h), 0.0, 1.0,
                          float(end[0]), float(end[1]), float(end[2]), float(end[3]), drift)
    return H, ctx


def dirac_to_canonical(Q, grid_n: int = 256, length: float = 1.0,
                       normalize: bool = True) -> Hamiltonian:
    """Canonical system of the Dirac system ``J X' + Q X = 0``.

    ``Q`` is a symmetric 2x2 real matrix function (callable, constant matrix,
    or ``(m, 2, 2)`` samples on a uniform grid).  The fundamental matrix with
    ``X(0) = I`` has unit determinant and ``H = X^T X``.
    """
    if grid_n < 16:
        raise ValidationError("grid_n must be at least 16")
    if callable(Q):
        Qf = Q
    else:
        Qa = np.asarray(Q, dtype=float)
        if Qa.shape == (2, 2):
            Qf = lambda x: Qa
        elif Qa.ndim == 3 and Qa.shape[1:] == (2, 2):
            xs = np.linspace(0.0, length, Qa.shape[0])
            Qf = lambda x: np.array([[np.interp(x, xs, Qa[:, i, j]) for j in range(2)]
                                     for i in range(2)])
        else:
            raise ValidationError("Q must be a 2x2 matrix, (m, 2, 2) samples or a callable")
    Jm = np.array([[0.0, -1.0], [1.0, 0.0]])
    q0 = np.asarray(Qf(0.0))
    if abs(q0[0, 1] - q0[1, 0]) > 1e-12:
        raise ValidationError("Q must be symmetric")

    def rhs(x, y):
        X = y.reshape(2, 2)
        return (Jm @ np.asarray(Qf(x)) @ X).ravel()

    mids, _, err = _integrate_with_check(rhs, np.eye(2).ravel(), length, grid_n)
    X = mids.reshape(-1, 2, 2)
    drift = float(max(np.max(np.abs(np.linalg.det(X) - 1.0)), err))
    if drift > 1e-6:
        raise NumericalError(f"determinant drift {drift:.2e}; increase grid_n")
    mats = np.swapaxes(X, 1, 2) @ X
    H = Hamiltonian([Sampled(length, mats)])
    if normalize:
        H, _ = normalize_trace(H)
    return H


def string_to_canonical(rho, length: float = 1.0, normalize: bool = True) -> Hamiltonian:
    """Canonical system ``diag(rho, 1)`` of a string with density ``rho``.

    ``rho`` is a scalar or cell values on a uniform grid over ``(0, length)``;
    runs of equal values become one constant segment.  The spectral parameter
    of the produced system is the square root of the string's parameter;
    spectra are not translated back.
    """
    r = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(~np.isfinite(r)) or np.any(r <= 0):
        raise ValidationError("string density must be positive")
    cell = length / r.size
    segs: list[Segment] = []
    k = 0
    while k < r.size:
        j = k
        while j + 1 < r.size and r[j + 1] == r[k]:
            j += 1
        segs.append(Constant((j - k + 1) * cell, np.diag([r[k], 1.0])))
        k = j + 1
    H = Hamiltonian(segs)
    if normalize:
        H, _ = normalize_trace(H)
    return H


def boundary_parameter_map(y1: float, dy1: float, y2: float, dy2: float, h_r: float) -> float:
    """Map the right Schroedinger boundary parameter to the canonical one.

    Returns ``(y2' - h_r y2) / (-y1' + h_r y1)`` at the endpoint, with
    ``h_r = inf`` read projectively as ``-y2 / y1`` and a vanishing
    denominator giving ``inf``.
    """
    if math.isinf(h_r):
        num, den = -y2, y1
    else:
        num, den = dy2 - h_r * y2, -dy1 + h_r * y1
    scale = max(abs(y1), abs(dy1), abs(y2), abs(dy2), 1.0) * max(1.0, abs(h_r) if math.isfinite(h_r) else 1.0)
    if abs(num) <= 1e-14 * scale and abs(den) <= 1e-14 * scale:
        raise ValidationError("degenerate boundary data")
    if abs(den) <= 1e-14 * scale:
        return math.inf
    return num / den
