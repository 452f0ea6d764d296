"""Weyl theory on the semiaxis.

For ``z`` in the upper half plane the truncation to ``[0, X]`` defines the
fractional linear map ``G_X`` with matrix ``conj(M(X, z)^{-1})``.  It sends
the upper half plane onto a disk ``D_X``; the disks nest as ``X`` grows and
shrink to the point ``-conj(m(z))``, where ``m`` is the Weyl coefficient
making ``Phi - m Theta`` square integrable against ``H``.

The inverse problem for a spectral measure ``mu`` on the line is solved by
finite atomic approximations: ``mu / pi`` restricted to a window is split
into cells of equal mass, each cell becomes one atom, a vanishing atom is
put at 0, and the finite inverse is solved exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .core import NumericalError, ValidationError
from .evolve import AtomicMeasure, theta_energy, transfer_matrices_scaled
from .hamiltonian import Hamiltonian, RankOne, Sampled
from .inverse import cumulative_hamiltonian, solve_finite_measure_inverse

log = logging.getLogger(__name__)

DISK_CHECK_TOL = 1e-7


# --------------------------------------------------------------------------
# disks


def _mobius(G: np.ndarray, w: complex) -> complex:
    a, b, c, d = G[0, 0], G[0, 1], G[1, 0], G[1, 1]
    if math.isinf(abs(w)):
        return a / c
    return (a * w + b) / (c * w + d)


def _circumcircle(p: complex, q: complex, r: complex) -> tuple[complex, float]:
    # center solves |c - p| = |c - q| = |c - r|
    ax, ay, bx, by, cx, cy = p.real, p.imag, q.real, q.imag, r.real, r.imag
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        raise NumericalError("boundary images are collinear")
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    c = complex(ux, uy)
    return c, abs(c - p)


@dataclass(frozen=True)
class WeylDisk:
    """Image of the upper half plane under ``G_X`` at the point ``z``.

    ``circumcircle_residual`` compares the disk with the circle through the
    images of 0, 1 and infinity; ``energy_residual`` compares the diameter
    with ``1 / (Im z int_0^X Theta^* H Theta)``.  Both are NaN when the
    disk was computed without checks.
    Both are relative to the radius.
    """

    center: complex
    radius: float
    X: float
    z: complex
    boundary_point: complex
    circumcircle_residual: float = float("nan")
    energy_residual: float = float("nan")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, w: complex, slack: float = 1e-9) -> bool:
        return abs(w - self.center) <= self.radius * (1.0 + slack) + slack

    def to_json(self) -> dict:
        return {"X": self.X, "z": [self.z.real, self.z.imag],
                "center": [self.center.real, self.center.imag], "radius": self.radius,
                "boundary_point": [self.boundary_point.real, self.boundary_point.imag],
                "circumcircle_residual": _nan_none(self.circumcircle_residual),
                "energy_residual": _nan_none(self.energy_residual)}


def _nan_none(v: float):
    return None if math.isnan(v) else v


def _check_z(z) -> complex:
    z = complex(z)
    if not z.imag > 0:
        raise ValidationError(f"z must lie in the upper half plane, got {z}")
    return z


def weyl_disk(H: Hamiltonian, X: float, z: complex, check: bool = True) -> WeylDisk:
    """The disk ``D_X = G_X(C+)``.

    The center is the image of the reflection of the pole of ``G_X``,
    ``center = G_X(Theta+/Theta-)``, and the radius is its distance to
    ``G_X(inf) = -conj(Phi-/Theta-)``.  This form stays accurate when the
    disk is tiny; the circle through the images of 0, 1 and infinity is
    computed as a cross-check.  With ``check=True`` the diameter is also
    compared with the energy formula by quadrature.
    """
    z = _check_z(z)
    if not X > 0:
        raise ValidationError("X must be positive")
    if X > H.length:
        raise ValidationError(f"X = {X} exceeds the Hamiltonian length {H.length}")
    Mh, _ = transfer_matrices_scaled(H, np.array(z), X)
    th_p, th_m = Mh[0, 0], Mh[1, 0]
    ph_p, ph_m = Mh[0, 1], Mh[1, 1]
    if th_m == 0:
        raise NumericalError("Theta-(X, z) vanishes off the real axis")
    G = np.conj(np.array([[ph_m, -ph_p], [-th_m, th_p]]))
    inf_img = _mobius(G, math.inf)
    center = _mobius(G, th_p / th_m)
    radius = abs(center - inf_img)
    if not center.imag > 0:
        raise NumericalError("Weyl disk center left the upper half plane; G_X is not J-contractive")
    cres = float("nan")
    eres = float("nan")
    if check:
        # the circumcircle is ill-conditioned when the three images crowd
        # together on the circle, so it is only judged when they are spread
        pts = (_mobius(G, 0.0), _mobius(G, 1.0), inf_img)
        cc, rc = _circumcircle(*pts)
        cres = max(abs(cc - center), abs(rc - radius)) / radius
        spread = min(abs(pts[0] - pts[1]), abs(pts[1] - pts[2]), abs(pts[0] - pts[2])) / radius
        if spread > 1e-2 and cres > DISK_CHECK_TOL:
            log.warning("circumcircle cross-check off by %.2e (relative)", cres)
        energy = float(np.real(theta_energy(H, np.array([z]), X)[0]))
        diam = 1.0 / (z.imag * energy)
        eres = abs(diam - 2.0 * radius) / (2.0 * radius)
        if eres > DISK_CHECK_TOL:
            log.warning("diameter differs from the energy formula by %.2e (relative)", eres)
    return WeylDisk(complex(center), float(radius), float(X), z, complex(inf_img), float(cres), eres)


def _is_vertical(seg) -> bool:
    return isinstance(seg, RankOne) and abs(seg.e[0]) < 1e-14


def m_function(H: Hamiltonian, z: complex, tol: float = 1e-8, x0: float = 1.0,
               x_max: float = 1e12) -> complex:
    """Weyl coefficient ``m(z)`` of a system on the semiaxis.

    When the last (infinite) segment is rank-one with direction ``e`` the
    square-integrable solution is the one with ``<e, U> = 0`` there, so
    ``m = <e, Phi(x_0)> / <e, Theta(x_0)>`` at the start ``x_0`` of that
    segment; this is the common point of all Weyl disks.  Otherwise ``X``
    is doubled until the disk diameter is below ``tol`` and
    ``m = -conj(center)``.
    """
    z = _check_z(z)
    if not H.is_semiaxis:
        raise ValidationError("m_function needs a Hamiltonian on the semiaxis (last segment infinite)")
    if all(_is_vertical(s) for s in H.segments):
        raise ValidationError("H = diag(0, 1) a.e.: the Weyl coefficient is not defined")
    last = H.segments[-1]
    start = float(sum(s.length for s in H.segments[:-1]))
    if isinstance(last, RankOne):
        e = last.e
        if start > 0:
            Mh, _ = transfer_matrices_scaled(Hamiltonian(H.segments[:-1]), np.array(z))
        else:
            Mh = np.eye(2, dtype=complex)
        num = e[0] * Mh[0, 1] + e[1] * Mh[1, 1]
        den = e[0] * Mh[0, 0] + e[1] * Mh[1, 0]
        if den == 0:
            raise NumericalError("Theta is orthogonal to the tail direction")
        return complex(num / den)
    X = max(x0, start + x0)
    while True:
        disk = weyl_disk(H, X, z, check=False)
        if disk.diameter < tol:
            return complex(-np.conj(disk.center))
        if X >= x_max:
            raise NumericalError(f"limit-circle-like truncation: diameter {disk.diameter:.3e} "
                                 f"at X = {X:.3e} is still above tol = {tol:.1e}")
        X = min(2.0 * X, x_max)


def spectral_density(H: Hamiltonian, t_grid, eps: float, tol: float = 1e-10) -> np.ndarray:
    """``Im m(t + i eps) / pi`` on the grid."""
    if not eps > 0:
        raise ValidationError("eps must be positive")
    t = np.asarray(t_grid, dtype=float).reshape(-1)
    return np.array([m_function(H, complex(x, eps), tol).imag / math.pi for x in t])


# --------------------------------------------------------------------------
# measures on the line


@dataclass(frozen=True)
class MeasureDescriptor:
    """Absolutely continuous density plus finitely many atoms.

    ``kind`` is one of ``"power"`` (density ``c |t|^p``; Lebesgue measure
    is ``c = 1, p = 0``), ``"sampled"`` (piecewise linear through
    ``(t, values)`` and zero outside) or ``"none"`` (atoms only).
    """

    kind: str
    params: dict = field(default_factory=dict, compare=False)
    atoms: AtomicMeasure | None = None

    def __post_init__(self):
        if self.kind not in ("power", "sampled", "none"):
            raise ValidationError(f"unknown density kind {self.kind!r}")
        if self.kind == "power":
            c, p = float(self.params.get("c", 1.0)), float(self.params.get("p", 0.0))
            if c < 0 or p <= -1:
                raise ValidationError("power density needs c >= 0 and p > -1")
        if self.kind == "sampled":
            t = np.asarray(self.params.get("t"), dtype=float)
            v = np.asarray(self.params.get("values"), dtype=float)
            if t.ndim != 1 or t.shape != v.shape or t.size < 2 or np.any(np.diff(t) <= 0):
                raise ValidationError("sampled density needs increasing t and matching values")
            if np.any(v < 0):
                raise ValidationError("density values must be nonnegative")

    @classmethod
    def lebesgue(cls, c: float = 1.0) -> "MeasureDescriptor":
        return cls("power", {"c": c, "p": 0.0})

    def density(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return float(self.params.get("c", 1.0)) * np.abs(t) ** float(self.params.get("p", 0.0))
        if self.kind == "sampled":
            ts = np.asarray(self.params["t"], dtype=float)
            return np.interp(t, ts, np.asarray(self.params["values"], dtype=float), left=0.0, right=0.0)
        return np.zeros_like(t)

    def support(self) -> tuple[float, float]:
        if self.kind == "sampled":
            ts = self.params["t"]
            return float(ts[0]), float(ts[-1])
        if self.kind == "none":
            return 0.0, 0.0
        return -math.inf, math.inf

    def to_json(self) -> dict:
        out = {"kind": self.kind, "params": {k: (list(v) if isinstance(v, (list, np.ndarray)) else v)
                                             for k, v in self.params.items()}}
        if self.atoms is not None:
            out["atoms"] = self.atoms.to_json()["atoms"]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "MeasureDescriptor":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ValidationError("measure descriptor JSON needs 'kind'")
        atoms = AtomicMeasure.from_json({"atoms": obj["atoms"]}) if obj.get("atoms") else None
        return cls(str(obj["kind"]), dict(obj.get("params", {})), atoms)


def tail_is_integrable(mu: MeasureDescriptor, decades: int = 6) -> bool:
    """Numerical test of ``int dmu / (1 + t^2) < inf``.

    Power densities are decided exactly (``p < 1``).  Otherwise the
    weighted mass of the decades ``[10^k, 10^(k+1)]`` on both sides must
    decay geometrically.
    """
    if mu.kind == "power":
        return float(mu.params.get("c", 1.0)) == 0.0 or float(mu.params.get("p", 0.0)) < 1.0
    lo, hi = mu.support()
    if math.isfinite(lo) and math.isfinite(hi):
        return True
    f = lambda t: float(mu.density(t)) / (1.0 + t * t)  # noqa: E731
    chunks = []
    for k in range(decades):
        a, b = 10.0 ** k, 10.0 ** (k + 1)
        chunks.append(integrate.quad(f, a, b, limit=200)[0] + integrate.quad(f, -b, -a, limit=200)[0])
    chunks = np.maximum(np.array(chunks), 1e-300)
    slope = np.polyfit(np.arange(decades // 2, decades), np.log10(chunks[decades // 2:]), 1)[0]
    return bool(slope < -0.1)


def herglotz_transform(mu: MeasureDescriptor, z: complex, a: float = 0.0) -> complex:
    """``a + (1/pi) int (1/(t - z) - t/(1 + t^2)) dmu(t)``."""
    z = _check_z(z)
    if not tail_is_integrable(mu):
        raise ValidationError("int dmu / (1 + t^2) diverges")
    total = complex(a)
    if mu.atoms is not None:
        t, w = mu.atoms.t, mu.atoms.w
        total += np.sum(w * (1.0 / (t - z) - t / (1.0 + t * t))) / math.pi
    if mu.kind == "none":
        return total
    if mu.kind == "power" and float(mu.params.get("p", 0.0)) == 0.0:
        # closed form for a constant density
        return total + 1j * float(mu.params.get("c", 1.0))
    lo, hi = mu.support()

    def part(fn):
        pts = [x for x in (z.real,) if lo < x < hi]
        if math.isinf(lo):
            val = integrate.quad(fn, -math.inf, z.real, limit=400)[0] + \
                integrate.quad(fn, z.real, math.inf, limit=400)[0]
        else:
            val = integrate.quad(fn, lo, hi, points=pts or None, limit=400)[0]
        return val

    re = part(lambda t: float(mu.density(t)) * ((t - z.real) / ((t - z.real) ** 2 + z.imag ** 2)
                                                - t / (1.0 + t * t)))
    im = part(lambda t: float(mu.density(t)) * z.imag / ((t - z.real) ** 2 + z.imag ** 2))
    return total + complex(re, im) / math.pi


def herglotz_test_points(n: int = 10) -> np.ndarray:
    """Fixed points in the upper half plane used for m-function checks."""
    k = np.arange(n)
    return (-2.0 + 4.0 * k / max(n - 1, 1)) + 1j * (1.5 + 1.5 * ((k * 7) % n) / max(n - 1, 1))


# --------------------------------------------------------------------------
# the singular inverse problem


@dataclass(frozen=True)
class Schedule:
    """Approximation schedule: sizes ``N``, windows ``[-s_N, s_N]``, output range and grid.

    ``grid_n`` is the number of output cells on ``[0, x_max]``.  ``None``
    picks cells about eight segments of the last approximant wide: ``H_N``
    only converges weakly, so finer cells resolve single rank-one segments.
    ``G`` is always sampled at ``diag_n + 1`` points for the Cauchy diagnostics.
    """

    n_list: tuple[int, ...]
    windows: tuple[float, ...]
    x_max: float
    grid_n: int | None = None
    diag_n: int = 256

    def __post_init__(self):
        if len(self.n_list) < 1 or len(self.n_list) != len(self.windows):
            raise ValidationError("need one window per N")
        if any(n < 1 for n in self.n_list) or any(not s > 0 for s in self.windows):
            raise ValidationError("N must be >= 1 and windows positive")
        if not self.x_max > 0 or (self.grid_n is not None and self.grid_n < 1) or self.diag_n < 1:
            raise ValidationError("x_max, grid_n and diag_n must be positive")

    @classmethod
    def from_json(cls, obj: dict) -> "Schedule":
        try:
            n_list = tuple(int(n) for n in obj["N"])
            if "s" in obj:
                windows = tuple(float(s) for s in obj["s"])
            else:
                f = float(obj.get("s_factor", 1.0))
                windows = tuple(f * n for n in n_list)
            grid_n = obj.get("grid_n")
            return cls(n_list, windows, float(obj["x_max"]),
                       None if grid_n is None else int(grid_n), int(obj.get("diag_n", 256)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad schedule: {exc}") from exc

    def to_json(self) -> dict:
        return {"N": list(self.n_list), "s": list(self.windows), "x_max": self.x_max,
                "grid_n": self.grid_n, "diag_n": self.diag_n}


def atomize(mu: MeasureDescriptor, n: int, s: float, resolution: int = 64) -> AtomicMeasure:
    """``mu / pi`` on ``[-s, s]`` as at most ``n`` atoms, plus the atom ``1/n`` of ``mu`` at 0.

    Atoms of ``mu`` inside the window are kept; the density is cut into
    cells of equal mass (quantiles), each replaced by one atom at its
    barycenter carrying its mass.
    """
    ts, ws = [], []
    if mu.atoms is not None:
        inside = np.abs(mu.atoms.t) <= s
        ts.extend(mu.atoms.t[inside].tolist())
        ws.extend((mu.atoms.w[inside] / math.pi).tolist())
    cells = n - len(ts)
    if mu.kind != "none" and cells >= 1:
        lo, hi = max(-s, mu.support()[0]), min(s, mu.support()[1])
        grid = np.linspace(lo, hi, cells * resolution + 1)
        dens = mu.density(grid) / math.pi
        mass = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
        first = integrate.cumulative_trapezoid(dens * grid, grid, initial=0.0)
        total = mass[-1]
        if total > 0:
            cuts = np.interp(np.linspace(0.0, total, cells + 1), mass, grid)
            m_at = np.interp(cuts, grid, mass)
            f_at = np.interp(cuts, grid, first)
            for k in range(cells):
                dm = m_at[k + 1] - m_at[k]
                if dm > 0:
                    ts.append((f_at[k + 1] - f_at[k]) / dm)
                    ws.append(dm)
    t = np.array(ts, dtype=float)
    w = np.array(ws, dtype=float)
    zero = np.flatnonzero(np.abs(t) <= 1e-14 * max(1.0, s))
    if zero.size:
        w[zero[0]] += 1.0 / (math.pi * n)
        t[zero[0]] = 0.0
    else:
        t = np.append(t, 0.0)
        w = np.append(w, 1.0 / (math.pi * n))
    return AtomicMeasure(t, w)


@dataclass
class SingularInverseResult:
    hamiltonian: Hamiltonian
    semiaxis: Hamiltonian
    grid: np.ndarray
    G: np.ndarray
    approximant_lengths: dict[int, float]
    increments: dict[int, float]
    warnings: list[str] = field(default_factory=list)


def _continued(HN: Hamiltonian) -> Hamiltonian:
    # the finite system's pi/2 measure belongs to the semiaxis system
    # continued by the singular ray with direction (0, 1)
    return Hamiltonian(list(HN.segments) + [RankOne(math.inf, math.pi / 2)])


def _auto_cells(H: Hamiltonian, x_max: float, per_cell: int = 8) -> int:
    longest = max(p.length for p in H.pieces(x_max))
    return max(1, int(x_max // (per_cell * longest)))


def inverse_singular(mu: MeasureDescriptor, schedule: Schedule) -> SingularInverseResult:
    """Approximate the semiaxis system whose spectral measure is ``mu``.

    For each ``N`` in the schedule, ``mu`` is atomized on ``[-s_N, s_N]``
    (see :func:`atomize`) and the finite inverse is solved; ``G_N(x) =
    int_0^x H_N`` is sampled on the diagnostic grid, the finite system being
    continued by ``diag(0, 1)``.  The output on ``[0, x_max]`` is the cell
    average (difference quotient) of the last ``G_N`` on the output cells;
    the ``semiaxis`` field continues it with the last approximant, which is
    what the m-function is evaluated on.
    """
    if not tail_is_integrable(mu):
        raise ValidationError("int dmu / (1 + t^2) diverges: the tail condition fails")
    grid = np.linspace(0.0, schedule.x_max, schedule.diag_n + 1)
    Gs: dict[int, np.ndarray] = {}
    lengths: dict[int, float] = {}
    warnings: list[str] = []
    HN = None
    for n, s in zip(schedule.n_list, schedule.windows):
        atoms = atomize(mu, n, s)
        HN = solve_finite_measure_inverse(atoms)
        lengths[n] = HN.length
        if HN.length < schedule.x_max:
            warnings.append(f"N = {n}: approximant length {HN.length:.4g} < x_max; continued by diag(0, 1)")
        with np.errstate(invalid="ignore"):
            Gs[n] = cumulative_hamiltonian(_continued(HN), grid)
    keys = list(Gs)
    incr = {keys[i]: float(np.max(np.abs(Gs[keys[i]] - Gs[keys[i - 1]]))) for i in range(1, len(keys))}
    G = Gs[keys[-1]]
    last = _continued(HN)
    n_cells = schedule.grid_n or _auto_cells(last, schedule.x_max)
    knots = np.linspace(0.0, schedule.x_max, n_cells + 1)
    with np.errstate(invalid="ignore"):
        Gk = cumulative_hamiltonian(last, knots)
    cells = np.diff(Gk, axis=0) / np.diff(knots)[:, None, None]
    cells = 0.5 * (cells + np.swapaxes(cells, 1, 2))
    H = Hamiltonian([Sampled(schedule.x_max, cells)])
    semi = Hamiltonian([Sampled(schedule.x_max, cells)] + last.tail(schedule.x_max))
    return SingularInverseResult(H, semi, grid, G, lengths, incr, warnings)
