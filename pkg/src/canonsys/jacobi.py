"""Rank-one chains and Jacobi matrices.

A chain of rank-one segments with lengths ``l_j`` and unit directions
``e_j`` acts on the values ``v_j = sqrt(l_j) <e_j, Theta>`` like a
tridiagonal (Jacobi) matrix with

* ``rho_j = -1 / (<J e_j, e_{j+1}> sqrt(l_j l_{j+1}))``,
* ``q_j l_j = cot(j, j+1) - cot(j, j-1)``, where
  ``cot(j, k) = <e_j, e_k> / <J e_j, e_k>`` and ``e_0 = (0, 1)``.

The last diagonal entry needs the direction after the last segment; a
finite chain uses ``(0, 1)``, the boundary condition at angle pi/2, unless
a ``next_direction`` is stored.  With that convention the eigenvalues of the
finite Jacobi section are the pi/2 spectrum of the chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError
from .hamiltonian import Hamiltonian, RankOne

E0 = np.array([0.0, 1.0])


def _perp(e: np.ndarray) -> np.ndarray:
    return np.array([-e[1], e[0]])


def _cot(a: np.ndarray, b: np.ndarray) -> float:
    s = float(_perp(a) @ b)
    if s == 0.0:
        raise ValidationError("consecutive directions are parallel")
    return float(a @ b) / s


@dataclass(frozen=True)
class JacobiMatrix:
    """Finite section: diagonal ``q`` (length n), off-diagonal ``rho`` (length n - 1)."""

    q: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        r = np.asarray(self.rho, dtype=float).reshape(-1)
        if q.ndim != 1 or r.ndim != 1 or r.size != q.size - 1:
            raise ValidationError("need len(rho) = len(q) - 1")
        if np.any(r == 0):
            raise ValidationError("off-diagonal entries must be nonzero")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "rho", r)

    def __len__(self) -> int:
        return self.q.size

    def matrix(self) -> np.ndarray:
        return np.diag(self.q) + np.diag(self.rho, 1) + np.diag(self.rho, -1)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix())

    def section(self, depth: int) -> "JacobiMatrix":
        if not 1 <= depth <= len(self):
            raise ValidationError("depth out of range")
        return JacobiMatrix(self.q[:depth], self.rho[: depth - 1])

    def to_json(self) -> dict:
        return {"q": self.q.tolist(), "rho": self.rho.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "JacobiMatrix":
        if not isinstance(obj, dict) or "q" not in obj or "rho" not in obj:
            raise ValidationError("Jacobi JSON needs 'q' and 'rho'")
        return cls(np.array(obj["q"], dtype=float), np.array(obj["rho"], dtype=float))


@dataclass(frozen=True)
class RankOneChain:
    """Segments with lengths ``l_j > 0`` and unit directions ``e_j`` (rows of ``vectors``).

    ``next_direction`` is the direction following the last segment, used
    for the last diagonal entry; ``None`` means the boundary vector (0, 1).
    """

    lengths: np.ndarray
    vectors: np.ndarray
    next_direction: np.ndarray | None = field(default=None)

    def __post_init__(self):
        l = np.atleast_1d(np.asarray(self.lengths, dtype=float))
        v = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if v.shape != (l.size, 2):
            raise ValidationError("need one 2-vector per length")
        if np.any(~(l > 0)) or not np.all(np.isfinite(l)):
            raise ValidationError("lengths must be positive and finite")
        if np.any(np.abs(np.linalg.norm(v, axis=1) - 1.0) > 1e-12):
            raise ValidationError("directions must be unit vectors")
        for j in range(l.size - 1):
            if abs(float(_perp(v[j]) @ v[j + 1])) < 1e-14:
                raise ValidationError(f"directions {j + 1} and {j + 2} are parallel")
        if abs(v[0, 0]) < 1e-14:
            raise ValidationError("left-end condition violated: e1 = (0, +-1)")
        object.__setattr__(self, "lengths", l)
        object.__setattr__(self, "vectors", v)
        if self.next_direction is not None:
            nd = np.asarray(self.next_direction, dtype=float)
            object.__setattr__(self, "next_direction", nd / np.linalg.norm(nd))

    def __len__(self) -> int:
        return self.lengths.size

    @property
    def angles(self) -> np.ndarray:
        return np.arctan2(self.vectors[:, 1], self.vectors[:, 0])

    def to_hamiltonian(self) -> Hamiltonian:
        return Hamiltonian([RankOne.from_vector(float(a), e) for a, e in zip(self.lengths, self.vectors)],
                           trace_normalized=True)

    @classmethod
    def from_hamiltonian(cls, H: Hamiltonian) -> "RankOneChain":
        lens, vecs = [], []
        for s in H.segments:
            if not isinstance(s, RankOne) or math.isinf(s.length):
                raise ValidationError("chain conversion needs finite rank-one segments only")
            lens.append(s.length * s.weight)
            vecs.append(s.e)
        return cls(np.array(lens), np.array(vecs))

    def oriented(self) -> "RankOneChain":
        """Same Hamiltonian with signs of ``e_j`` fixed by ``e1+ > 0`` and ``<J e_j, e_{j+1}> < 0``."""
        v = self.vectors.copy()
        if v[0, 0] < 0:
            v[0] = -v[0]
        for j in range(len(v) - 1):
            if _perp(v[j]) @ v[j + 1] > 0:
                v[j + 1] = -v[j + 1]
        return RankOneChain(self.lengths, v, self.next_direction)

    def to_json(self) -> dict:
        out = {"lengths": self.lengths.tolist(), "vectors": self.vectors.tolist()}
        if self.next_direction is not None:
            out["next_direction"] = self.next_direction.tolist()
        return out


def hamiltonian_to_jacobi(chain: RankOneChain | Hamiltonian) -> JacobiMatrix:
    """Jacobi section of the same size as the chain."""
    if isinstance(chain, Hamiltonian):
        chain = RankOneChain.from_hamiltonian(chain)
    ch = chain.oriented()
    e, l = ch.vectors, ch.lengths
    n = len(ch)
    nxt = E0 if ch.next_direction is None else ch.next_direction
    q = np.empty(n)
    rho = np.empty(n - 1)
    for j in range(n):
        left = E0 if j == 0 else e[j - 1]
        right = nxt if j == n - 1 else e[j + 1]
        q[j] = (_cot(e[j], right) - _cot(e[j], left)) / l[j]
        if j < n - 1:
            rho[j] = -1.0 / (float(_perp(e[j]) @ e[j + 1]) * math.sqrt(l[j] * l[j + 1]))
    return JacobiMatrix(q, rho)


def jacobi_to_hamiltonian(jm: JacobiMatrix, e1, delta1: float) -> RankOneChain:
    """The chain with first direction ``e1`` and first length ``delta1``.

    Each step turns ``e_j`` by the angle ``theta`` with
    ``cot(theta) = q_j l_j + cot(j, j-1)`` and ``sin(theta) < 0`` (so that
    ``rho_j > 0``), then takes ``l_{j+1} = 1 / (rho_j^2 sin^2(theta) l_j)``.
    The turn computed from the last ``q`` gives ``next_direction``.
    """
    e1 = np.asarray(e1, dtype=float)
    if e1.shape != (2,) or abs(np.linalg.norm(e1) - 1.0) > 1e-12:
        raise ValidationError("e1 must be a unit 2-vector")
    if abs(e1[0]) < 1e-14:
        raise ValidationError("left-end condition violated: e1 = (0, +-1)")
    if not delta1 > 0:
        raise ValidationError("delta1 must be positive")
    if np.any(jm.rho <= 0):
        raise ValidationError("off-diagonal entries must be positive")
    n = len(jm)
    vecs = [e1 if e1[0] > 0 else -e1]
    lens = [float(delta1)]
    cot_prev = _cot(vecs[0], E0)
    nxt = None
    for j in range(n):
        c = jm.q[j] * lens[j] + cot_prev
        s = -1.0 / math.sqrt(1.0 + c * c)
        co = -c / math.sqrt(1.0 + c * c)
        ej = vecs[j]
        new = co * ej + s * _perp(ej)
        new /= np.linalg.norm(new)
        if j == n - 1:
            nxt = new
            break
        lens.append(1.0 / (jm.rho[j] ** 2 * s * s * lens[j]))
        vecs.append(new)
        cot_prev = -c
    if nxt is not None and abs(nxt[0]) < 1e-9:
        nxt = None
    return RankOneChain(np.array(lens), np.array(vecs), nxt)


def jacobi_from_spectral_data(t, w) -> JacobiMatrix:
    """Jacobi matrix with eigenvalues ``t`` and first-component weights ``w / sum(w)``.

    Lanczos iteration on ``diag(t)`` from the vector ``sqrt(w / sum w)``,
    with full reorthogonalization (applied twice) so the Krylov basis stays
    orthogonal to rounding error.
    """
    t = np.asarray(t, dtype=float)
    w = np.asarray(w, dtype=float)
    if t.ndim != 1 or t.shape != w.shape or t.size < 1:
        raise ValidationError("need equal-length 1-d nodes and weights")
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")
    if np.unique(t).size != t.size:
        raise ValidationError("nodes must be distinct")
    n = t.size
    Q = np.zeros((n, n))
    Q[:, 0] = np.sqrt(w / w.sum())
    q = np.zeros(n)
    rho = np.zeros(n - 1)
    for k in range(n):
        v = t * Q[:, k]
        q[k] = Q[:, k] @ v
        if k == n - 1:
            break
        for _ in range(2):
            v -= Q[:, : k + 1] @ (Q[:, : k + 1].T @ v)
        b = float(np.linalg.norm(v))
        if b == 0.0:
            raise ValidationError("Krylov space collapsed; nodes with zero weight?")
        rho[k] = b
        Q[:, k + 1] = v / b
    return JacobiMatrix(q, rho)


def chain_eigenvalues(chain: RankOneChain | Hamiltonian) -> np.ndarray:
    """Eigenvalues of the Jacobi section of a finite chain (its pi/2 spectrum)."""
    return hamiltonian_to_jacobi(chain).eigenvalues()
