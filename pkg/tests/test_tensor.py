import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ptfcs.errors import DegenerateEnvironmentError, DimensionError, InvalidConfigError
from ptfcs.tensor import as_tensor, contract, householder, svd_truncated, truncation_rank, vector_to_e1_unitary


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_contract_identity_with_vector():
    out = contract(np.eye(2), [1], np.array([1.0, 0.0]), [0])
    assert np.allclose(out, [1, 0])


def test_contract_vector_norm():
    v = np.array([3.0, 4.0])
    assert contract(v, [0], v, [0]) == pytest.approx(25.0)


def test_contract_full_is_frobenius(rng):
    t = crandn(rng, 3, 4, 5)
    val = contract(t.conj(), [0, 1, 2], t, [0, 1, 2])
    assert val == pytest.approx(np.linalg.norm(t) ** 2, rel=1e-12)


def test_contract_extent_mismatch():
    with pytest.raises(DimensionError):
        contract(np.ones((2, 3)), [1], np.ones((2, 3)), [0])


def test_contract_associative(rng):
    a, b, c = crandn(rng, 3, 4), crandn(rng, 4, 5), crandn(rng, 5, 2)
    left = contract(contract(a, [1], b, [0]), [1], c, [0])
    right = contract(a, [1], contract(b, [1], c, [0]), [0])
    assert np.allclose(left, right, atol=1e-12)


def test_contract_bilinear(rng):
    a1, a2, b = crandn(rng, 3, 4), crandn(rng, 3, 4), crandn(rng, 4, 2)
    x, y = 0.3 - 1j, 2.0 + 0.5j
    lhs = contract(x * a1 + y * a2, [1], b, [0])
    rhs = x * contract(a1, [1], b, [0]) + y * contract(a2, [1], b, [0])
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_as_tensor_reshape_checks():
    assert as_tensor(range(6), (2, 3)).shape == (2, 3)
    with pytest.raises(DimensionError):
        as_tensor(range(6), (4, 2))


def test_permutation_keeps_entries_and_norm(rng):
    t = crandn(rng, 2, 3, 4)
    p = t.transpose(2, 0, 1)
    assert np.allclose(np.sort_complex(p.ravel()), np.sort_complex(t.ravel()))
    assert np.linalg.norm(p) == pytest.approx(np.linalg.norm(t))


def test_svd_identity_chi1():
    r = svd_truncated(np.eye(2), 1)
    assert np.allclose(r.singular_values, [1.0])
    assert r.discarded_weight == pytest.approx(1.0)


def test_svd_diag():
    r = svd_truncated(np.diag([3.0, 4.0]), 1)
    assert np.allclose(r.singular_values, [4.0])
    assert r.discarded_weight == pytest.approx(3.0)


def test_svd_no_truncation(rng):
    m = crandn(rng, 8, 8)
    r = svd_truncated(m, 8, 0.0)
    assert np.allclose(r.reconstruct(), m, atol=1e-12)
    assert np.allclose(r.left_isometry.conj().T @ r.left_isometry, np.eye(8), atol=1e-12)
    assert np.allclose(r.right_isometry.conj().T @ r.right_isometry, np.eye(8), atol=1e-12)


def test_svd_cutoff_and_error(rng):
    u, _ = np.linalg.qr(crandn(rng, 5, 5))
    v, _ = np.linalg.qr(crandn(rng, 5, 5))
    s = np.array([1.0, 0.5, 1e-3, 1e-8, 1e-10])
    m = (u * s) @ v.conj().T
    r = svd_truncated(m, 5, cutoff=1e-6)
    assert r.rank == 3
    assert np.linalg.norm(m - r.reconstruct(), 2) == pytest.approx(1e-8, rel=1e-4)


def test_svd_invalid_chi():
    with pytest.raises(InvalidConfigError):
        svd_truncated(np.eye(2), 0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(-10, 10)))
def test_svd_reconstructs_property(m):
    r = svd_truncated(m, 10, 0.0)
    assert np.allclose(r.reconstruct(), m, atol=1e-10)
    s = r.singular_values
    assert np.all(s >= 0) and np.all(np.diff(s) <= 1e-12)


def test_e1_unitary_examples():
    w = vector_to_e1_unitary(np.array([3.0, 4.0]))
    out = w @ np.array([3.0, 4.0])
    assert abs(out[0]) == pytest.approx(5.0) and abs(out[1]) < 1e-13
    w = vector_to_e1_unitary(np.array([1.0, 0, 0]))
    assert np.allclose(np.abs(w), np.eye(3), atol=1e-13)


def test_e1_unitary_random(rng):
    v = crandn(rng, 16)
    w = vector_to_e1_unitary(v)
    assert np.allclose(w.conj().T @ w, np.eye(16), atol=1e-12)
    out = w @ v
    assert out[0] == pytest.approx(np.linalg.norm(v))
    assert np.max(np.abs(out[1:])) < 1e-12


def test_e1_unitary_degenerate():
    with pytest.raises(DegenerateEnvironmentError):
        vector_to_e1_unitary(np.zeros(3))


def test_householder_apply_matches_matrix(rng):
    h = householder(crandn(rng, 6))
    x = crandn(rng, 6, 3)
    assert np.allclose(h.apply(x), h.matrix() @ x)
    y = crandn(rng, 2, 6)
    assert np.allclose(h.apply_right(y), y @ h.matrix())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False), min_size=1, max_size=12))
def test_e1_unitary_property(vals):
    v = np.array(vals, dtype=complex)
    if np.linalg.norm(v) < 1e-6:
        return
    w = vector_to_e1_unitary(v)
    assert np.allclose(w.conj().T @ w, np.eye(len(v)), atol=1e-12)
    out = w @ v
    assert np.max(np.abs(out[1:]), initial=0) < 1e-12 * max(1.0, np.linalg.norm(v))


def test_truncation_rank_respects_multiplets():
    s = np.array([3.0, 2.0, 1.0, 1.0, 1.0, 0.5])
    assert truncation_rank(s, 3, 0.0) == 3
    assert truncation_rank(s, 3, 0.0, multiplet_rtol=1e-10) == 2
    assert truncation_rank(s, 5, 0.0, multiplet_rtol=1e-10) == 5
    assert truncation_rank(np.ones(4), 2, 0.0, multiplet_rtol=1e-10) == 0
