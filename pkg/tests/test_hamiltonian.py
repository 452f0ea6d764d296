import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from canonsys.core import ValidationError
from canonsys.hamiltonian import (
    Constant,
    Hamiltonian,
    RankOne,
    Sampled,
    boundary_parameter_map,
    dirac_to_canonical,
    exact_type,
    free_hamiltonian,
    normalize_trace,
    schrodinger_to_canonical,
    string_to_canonical,
)

from _gen import random_hamiltonian

JM = np.array([[0.0, -1.0], [1.0, 0.0]])


def _segments_close(A: Hamiltonian, B: Hamiltonian, tol: float = 1e-10) -> bool:
    if len(A.segments) != len(B.segments):
        return False
    for a, b in zip(A.segments, B.segments):
        if type(a) is not type(b) or abs(a.length - b.length) > tol * max(1.0, a.length):
            return False
        ma = a.matrices if isinstance(a, Sampled) else a.matrix
        mb = b.matrices if isinstance(b, Sampled) else b.matrix
        if np.max(np.abs(ma - mb)) > tol:
            return False
    return True


# ---------------------------------------------------------------- validation


def test_segment_validation():
    with pytest.raises(ValidationError):
        Constant(1.0, np.array([[1.0, 0.0], [0.0, -0.1]]))
    with pytest.raises(ValidationError):
        RankOne(0.0, 0.3)
    with pytest.raises(ValidationError):
        Hamiltonian([Constant(math.inf, np.eye(2) / 2), RankOne(1.0, 0.0)])
    with pytest.raises(ValidationError):
        Hamiltonian([Constant(1.0, np.eye(2))], trace_normalized=True)


def test_adjacent_parallel_rank_one_segments_merge():
    H = Hamiltonian([RankOne(1.0, 0.4), RankOne(2.0, 0.4 + math.pi)])
    assert len(H.segments) == 1 and H.length == pytest.approx(3.0)


def test_json_roundtrip():
    rng = np.random.default_rng(3)
    H = random_hamiltonian(rng, 4.0, 5)
    back = Hamiltonian.from_json(json.loads(json.dumps(H.to_json())))
    assert _segments_close(H, back, 0.0)
    semi = free_hamiltonian()
    assert Hamiltonian.from_json(semi.to_json()).is_semiaxis


# ---------------------------------------------------------------- normalize_trace


def test_normalize_already_normalized_is_identity():
    H = Hamiltonian([Constant(1.0, np.eye(2) / 2), RankOne(2.0, 0.3)])
    Hn, rep = normalize_trace(H)
    assert _segments_close(H, Hn, 0.0)
    assert rep(np.array([0.0, 1.5, 3.0])) == pytest.approx([0.0, 1.5, 3.0])


def test_normalize_diag_2_0():
    Hn, rep = normalize_trace(Hamiltonian([Constant(1.0, np.diag([2.0, 0.0]))]))
    assert Hn.length == pytest.approx(2.0)
    assert Hn.segments[0].matrix == pytest.approx(np.diag([1.0, 0.0]))
    assert rep(np.array([0.25, 0.5, 1.0])) == pytest.approx([0.5, 1.0, 2.0])


def test_normalize_scaled_rank_one():
    Hn, _ = normalize_trace(Hamiltonian([RankOne(1.0, 0.7, weight=4.0)]))
    (s,) = Hn.segments
    assert s.length == pytest.approx(4.0) and s.angle == pytest.approx(0.7) and s.weight == 1.0


def test_zero_trace_stretch_is_excised():
    H = Hamiltonian([Constant(1.0, np.eye(2) / 2), Constant(1.0, np.zeros((2, 2))), RankOne(1.0, 0.2)])
    Hn, rep = normalize_trace(H)
    assert Hn.length == pytest.approx(2.0)
    assert rep(1.5) == pytest.approx(1.0)


@given(st.integers(0, 10_000))
def test_normalize_is_idempotent_and_preserves_total_trace(seed):
    rng = np.random.default_rng(seed)
    segs = []
    for _ in range(int(rng.integers(1, 5))):
        scale = float(rng.uniform(0.2, 5.0))
        if rng.random() < 0.5:
            A = rng.normal(size=(2, 2))
            segs.append(Constant(float(rng.uniform(0.1, 2)), scale * (A @ A.T + 0.1 * np.eye(2))))
        else:
            segs.append(RankOne(float(rng.uniform(0.1, 2)), float(rng.uniform(-1.5, 1.5)), weight=scale))
    H = Hamiltonian(segs)
    once, _ = normalize_trace(H)
    twice, _ = normalize_trace(once)
    assert _segments_close(once, twice, 1e-10)
    total = sum(s.length * s.trace() for s in H.segments)
    assert once.length == pytest.approx(total, rel=1e-10)


# ---------------------------------------------------------------- exact_type


def test_exact_type_examples():
    assert exact_type(Hamiltonian([Constant(2.0, np.eye(2) / 2)])) == pytest.approx(1.0)
    assert exact_type(Hamiltonian([RankOne(1.0, 0.2), RankOne(2.0, 1.0)])) == 0.0
    assert exact_type(Hamiltonian([Constant(2.0, np.eye(2) / 2), RankOne(3.0, 0.1)])) == pytest.approx(1.0)


@given(st.integers(0, 10_000))
def test_exact_type_invariant_under_normalization(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2, 2))
    M = A @ A.T + 0.05 * np.eye(2)
    H = Hamiltonian([Constant(float(rng.uniform(0.2, 3)), M)])
    assert exact_type(normalize_trace(H)[0]) == pytest.approx(exact_type(H), rel=1e-8)


# ---------------------------------------------------------------- reductions


def test_schrodinger_free_h0():
    H, ctx = schrodinger_to_canonical(np.zeros(33), 0.0, 64, normalize=False)
    x = (np.arange(64) + 0.5) / 64
    expect = np.stack([np.ones_like(x), x, x, x * x], axis=1).reshape(-1, 2, 2)
    assert H.segments[0].matrices == pytest.approx(expect, abs=1e-12)
    assert ctx.y2_1 == pytest.approx(1.0) and ctx.wronskian_drift <= 1e-8


def test_schrodinger_slope_condition():
    _, ctx = schrodinger_to_canonical(np.zeros(33), 1.0, 64, normalize=False)
    assert ctx.y1_1 == pytest.approx(2.0) and ctx.dy1_0 == pytest.approx(1.0)


def test_schrodinger_constant_potential():
    _, ctx = schrodinger_to_canonical(np.ones(33), 0.0, 64, normalize=False)
    assert ctx.y1_1 == pytest.approx(math.cosh(1.0), abs=1e-10)
    assert ctx.dy1_1 == pytest.approx(math.sinh(1.0), abs=1e-10)


def test_schrodinger_output_is_rank_one_and_normalized():
    q = np.sin(np.linspace(0, 1, 50) * 7.0) * 3.0
    H, ctx = schrodinger_to_canonical(q, -0.4, 128)
    m = np.array([p.matrix for p in H.pieces()])
    tr = m[:, 0, 0] + m[:, 1, 1]
    assert np.all(np.linalg.det(m) <= 1e-10 * tr**2)
    assert H.trace_normalized and ctx.wronskian_drift <= 1e-8


def test_schrodinger_coarse_grid_rejected():
    with pytest.raises(ValidationError):
        schrodinger_to_canonical(np.zeros(5), 0.0, 8)


def test_dirac_zero_potential():
    H = dirac_to_canonical(np.zeros((2, 2)), 16)
    assert H.length == pytest.approx(2.0)
    assert all(np.allclose(m, np.eye(2) / 2) for m in H.segments[0].matrices)


def test_dirac_constant_against_matrix_exponential():
    c = 0.8
    Q = np.diag([c, -c])
    n = 64
    H = dirac_to_canonical(Q, n, normalize=False)
    x = (np.arange(n) + 0.5) / n
    for xi, m in zip(x, H.segments[0].matrices):
        X = expm(JM @ Q * xi)
        assert m == pytest.approx(X.T @ X, abs=1e-8)


def test_dirac_random_smooth_potential_is_psd_rank_two():
    rng = np.random.default_rng(5)
    a, b, c = rng.normal(size=3)
    H = dirac_to_canonical(lambda x: np.array([[a * math.cos(x), b], [b, c * x]]), 64, normalize=False)
    m = H.segments[0].matrices
    assert np.allclose(m, np.swapaxes(m, 1, 2))
    assert np.all(np.linalg.eigvalsh(m)[:, 0] > 0)


def test_string_examples():
    (s,) = string_to_canonical(1.0).segments
    assert s.matrix == pytest.approx(np.eye(2) / 2) and s.length == pytest.approx(2.0)
    (s,) = string_to_canonical(4.0).segments
    assert s.matrix == pytest.approx(np.diag([0.8, 0.2])) and s.length == pytest.approx(5.0)
    H = string_to_canonical([1.0, 1.0, 4.0, 4.0])
    assert len(H.segments) == 2


def test_string_rejects_nonpositive_density():
    with pytest.raises(ValidationError):
        string_to_canonical([1.0, 0.0])


def test_boundary_parameter_map():
    # y1 = 1, y2 = x evaluated at x = 1
    h_r = 0.3
    assert boundary_parameter_map(1.0, 0.0, 1.0, 1.0, h_r) == pytest.approx((1 - h_r) / h_r)
    assert boundary_parameter_map(1.0, 0.0, 1.0, 1.0, math.inf) == pytest.approx(-1.0)
    assert math.isinf(boundary_parameter_map(1.0, 0.0, 1.0, 1.0, 0.0))
