import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptfcs.circuit import ChargeConvention, GateParams, build_xxz_gate, fold_gate
from ptfcs.errors import DegenerateEnvironmentError, IncompatibleTensorsError, InvalidConfigError
from ptfcs.fcs import charge_distribution, mgf, mgf_grid
from ptfcs.oracles import exact_mgf_statevector
from ptfcs.process_tensor import (
    BondEnvironments,
    CrossBlockMode,
    Scheme,
    Side,
    TruncationConfig,
    bond_environments,
    build_process_tensors,
    check_compatible,
    grow,
    init_process_tensor,
    iterate_process_tensors,
    mirror,
    no_intervention_norm,
    side_gate,
    truncate_bond_normalized,
)
from ptfcs.tensor import svd

from conftest import random_charge_conserving_gate, xxz

CONV = ChargeConvention.xxz()
EXACT = TruncationConfig(chi_max=4096, cutoff=0.0)


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        TruncationConfig(chi_max=1)
    with pytest.raises(InvalidConfigError):
        TruncationConfig(cutoff=-1.0)
    assert TruncationConfig(cross_block_mode="zero-cross").cross_block_mode is CrossBlockMode.ZERO_CROSS


def test_init_is_normalized_product():
    g = xxz(0.3, 0.1)
    pt = init_process_tensor(fold_gate(g), Side.LEFT, g.params, EXACT)
    assert pt.depth == 1 and len(pt.site_tensors) == 2
    assert no_intervention_norm(pt) == pytest.approx(1.0, abs=1e-14)
    assert pt.chi_profile == [1]


def test_tensors_are_read_only():
    pt, _ = build_process_tensors(xxz(0.3, 0.2), EXACT, 3)
    with pytest.raises(ValueError):
        pt.site_tensors[0][0, 0, 0] = 1.0


@pytest.mark.parametrize("jp", [0.0, 0.3, 1.0])
def test_dual_unitary_stays_product(jp):
    for left, right in iterate_process_tensors(xxz(np.pi / 4, jp), TruncationConfig(chi_max=8), 10):
        assert set(left.chi_profile) == {1}
        assert set(right.chi_profile) == {1}


def test_identity_gate_is_trivial_environment():
    """With no dynamics the environment hands each output back unchanged: a wire b_t -> a_{t+1}."""
    left, _ = build_process_tensors(xxz(0, 0), EXACT, 4)
    assert left.chi_profile == [1, 4, 1, 4, 1, 4, 1]
    ts = left.site_tensors
    e = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(ts[0].reshape(-1), e)
    assert np.allclose(ts[-1].reshape(-1), e)
    for t in range(left.depth - 1):
        wire = np.einsum("xbk,kay->ba", ts[2 * t + 1], ts[2 * t + 2])
        assert np.allclose(wire / wire[0, 0], np.eye(4), atol=1e-13)


@pytest.mark.parametrize("j,jp", [(0.25, 0.0), (0.4, 0.7), (0.5, 0.5)])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_untruncated_matches_statevector(j, jp, n):
    g = xxz(j, jp)
    left, right = build_process_tensors(g, EXACT, n)
    for lam in (0.0, 0.7, 2.9):
        ref = exact_mgf_statevector(j, jp, max(n, 2), n, lam)
        assert mgf(left, right, g, CONV, lam) == pytest.approx(ref, abs=1e-12)


def test_asymmetric_gate_matches_statevector(rng):
    g = random_charge_conserving_gate(rng)
    assert not g.is_swap_symmetric()
    left, right = build_process_tensors(g, EXACT, 3)
    for lam in (0.4, 2.0):
        ref = exact_mgf_statevector(0, 0, 3, 3, lam, gate=g)
        assert mgf(left, right, g, CONV, lam) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("j,jp", [(0.25, 0.0), (0.25, 0.25), (0.5, 1.0), (0.37, -0.6)])
@pytest.mark.parametrize("chi", [2, 4, 8, 16])
def test_normalization_preserved(j, jp, chi):
    g = xxz(j, jp)
    for left, right in iterate_process_tensors(g, TruncationConfig(chi_max=chi), 24):
        assert abs(no_intervention_norm(left) - 1) < 1e-11
        assert left.max_bond <= chi
    assert abs(mgf(left, right, g, CONV, 0.0) - 1) < 1e-11


def test_normalization_random_gates(rng):
    for _ in range(3):
        g = random_charge_conserving_gate(rng)
        for left, right in iterate_process_tensors(g, TruncationConfig(chi_max=4), 16):
            pass
        assert abs(no_intervention_norm(left) - 1) < 1e-11
        assert abs(no_intervention_norm(right) - 1) < 1e-11
        assert abs(mgf(left, right, g, CONV, 0.0) - 1) < 1e-11


def test_headline_regression_chi4_depth20():
    left, right = build_process_tensors(xxz(0.5, 0.5), TruncationConfig(chi_max=4), 20)
    assert abs(no_intervention_norm(left) - 1) < 1e-12


def test_naive_truncation_breaks_normalization():
    g = xxz(0.5, 0.5)
    left, right = build_process_tensors(g, TruncationConfig(chi_max=6, scheme=Scheme.NAIVE), 20)
    assert abs(mgf(left, right, g, CONV, 0.0) - 1) > 1e-6


def test_zero_cross_loses_causality():
    """Zeroing the cross blocks keeps each bond's overlap but not later normalizations."""
    g = xxz(0.5, 0.5)
    cfg = TruncationConfig(chi_max=8, cross_block_mode=CrossBlockMode.ZERO_CROSS)
    left, right = build_process_tensors(g, cfg, 16)
    assert abs(mgf(left, right, g, CONV, 0.0) - 1) > 1e-9


def test_keep_cross_normalized():
    g = xxz(0.5, 0.5)
    cfg = TruncationConfig(chi_max=8, cross_block_mode=CrossBlockMode.KEEP_CROSS)
    left, right = build_process_tensors(g, cfg, 16)
    assert abs(mgf(left, right, g, CONV, 0.0) - 1) < 1e-11


def test_bond_environments_overlap():
    left, _ = build_process_tensors(xxz(0.3, 0.8), TruncationConfig(chi_max=6), 8)
    for b in range(len(left.site_tensors) - 1):
        envs = bond_environments(left, b)
        assert envs.overlap() == pytest.approx(1.0, abs=1e-10)


def test_bond_environments_dual_unitary_scalars():
    left, _ = build_process_tensors(xxz(np.pi / 4, 0.4), TruncationConfig(chi_max=6), 4)
    envs = bond_environments(left, 3)
    assert envs.past.shape == (1, 1) and envs.future.shape == (1, 1)
    assert abs(abs(envs.past[0, 0] * envs.future[0, 0]) - 1) < 1e-12


def test_bond_index_range():
    left, _ = build_process_tensors(xxz(0.3, 0.2), EXACT, 2)
    with pytest.raises(InvalidConfigError):
        bond_environments(left, 3)


def _random_bond(rng, s, rows=6, cols=6):
    u, _ = np.linalg.qr(rng.normal(size=(rows, rows)) + 1j * rng.normal(size=(rows, rows)))
    v, _ = np.linalg.qr(rng.normal(size=(cols, cols)) + 1j * rng.normal(size=(cols, cols)))
    k = len(s)
    theta = (u[:, :k] * s) @ v[:, :k].conj().T
    p = rng.normal(size=rows) + 1j * rng.normal(size=rows)
    f = rng.normal(size=cols) + 1j * rng.normal(size=cols)
    f /= p @ theta @ f
    return theta, BondEnvironments(p.reshape(-1, 1), f.reshape(-1, 1))


@pytest.mark.parametrize("mode", [CrossBlockMode.KEEP_COLUMN, CrossBlockMode.KEEP_CROSS])
def test_truncate_exact_rank(rng, mode):
    theta, envs = _random_bond(rng, np.array([1.0, 0.5, 0.2]))
    res = truncate_bond_normalized(theta, envs, TruncationConfig(chi_max=4, cross_block_mode=mode))
    assert np.allclose(res.below @ res.above, theta, atol=1e-12)
    assert res.discarded_weight < 1e-12


def test_zero_cross_not_exact_at_low_rank(rng):
    """Dropping the cross blocks discards weight even when nothing needs truncating."""
    theta, envs = _random_bond(rng, np.array([1.0, 0.5, 0.2]))
    res = truncate_bond_normalized(theta, envs, TruncationConfig(chi_max=4, cross_block_mode="zero-cross"))
    assert not np.allclose(res.below @ res.above, theta, atol=1e-6)
    val = envs.past[:, 0] @ res.below @ res.above @ envs.future[:, 0]
    assert val == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("mode", list(CrossBlockMode))
def test_truncate_chi2_keeps_overlap(rng, mode):
    for _ in range(20):
        theta, envs = _random_bond(rng, np.sort(rng.uniform(0.1, 1, 6))[::-1])
        res = truncate_bond_normalized(theta, envs, TruncationConfig(chi_max=2, cross_block_mode=mode))
        val = envs.past[:, 0] @ res.below @ res.above @ envs.future[:, 0]
        assert val == pytest.approx(1.0, abs=1e-13)
        assert res.below.shape[1] <= 2


def test_truncate_tail_bound(rng):
    theta, envs = _random_bond(rng, np.array([1.0, 1e-1, 1e-9]))
    res = truncate_bond_normalized(theta, envs, TruncationConfig(chi_max=2, cutoff=1e-6))
    err = np.linalg.norm(res.below @ res.above - theta, 2)
    assert res.discarded_weight < 1e-8
    assert err <= 2e-9


def test_truncate_degenerate(rng):
    theta, envs = _random_bond(rng, np.array([1.0, 0.5]))
    bad = BondEnvironments(np.zeros_like(envs.past), envs.future)
    with pytest.raises(DegenerateEnvironmentError):
        truncate_bond_normalized(theta, bad, TruncationConfig(chi_max=2))


@settings(max_examples=25, deadline=None)
@given(
    st.floats(-1.5, 1.5),
    st.floats(-1.5, 1.5),
    st.sampled_from([2, 3, 5]),
    st.integers(2, 10),
)
def test_normalization_property(j, jp, chi, depth):
    g = build_xxz_gate(GateParams(j, jp))
    left, right = build_process_tensors(g, TruncationConfig(chi_max=chi), depth)
    assert abs(no_intervention_norm(left) - 1) < 1e-11
    assert abs(mgf(left, right, g, CONV, 0.0) - 1) < 1e-11


def test_mirror_symmetry():
    g = xxz(0.35, 0.55)
    left, right = build_process_tensors(g, TruncationConfig(chi_max=8), 8)
    for lam in (0.5, 2.5):
        a = mgf(left, right, g, CONV, lam)
        b = mgf(mirror(right), mirror(left), g, CONV, lam)
        assert a == pytest.approx(b, abs=1e-10)


def test_grow_one_step_equals_exact():
    g = xxz(0.4, 0.7)
    pt = init_process_tensor(side_gate(g, Side.LEFT), Side.LEFT, g.params, EXACT)
    two = grow(pt, side_gate(g, Side.LEFT), EXACT)
    assert two.depth == 2
    assert mgf(two, mirror(two), g, CONV, 1.3) == pytest.approx(exact_mgf_statevector(0.4, 0.7, 2, 2, 1.3), abs=1e-12)


def test_grow_rejects_tilted_gate():
    from ptfcs.circuit import build_tilted_gate

    g = xxz(0.4, 0.7)
    pt = init_process_tensor(None, Side.LEFT, g.params, EXACT)
    with pytest.raises(InvalidConfigError):
        grow(pt, build_tilted_gate(g, CONV, 0.3), EXACT)


def test_check_compatible():
    left, right = build_process_tensors(xxz(0.3, 0.2), EXACT, 2)
    other, _ = build_process_tensors(xxz(0.3, 0.25), EXACT, 2)
    deeper, _ = build_process_tensors(xxz(0.3, 0.2), EXACT, 3)
    with pytest.raises(IncompatibleTensorsError):
        check_compatible(right, left)
    with pytest.raises(IncompatibleTensorsError):
        check_compatible(left, mirror(other))
    with pytest.raises(IncompatibleTensorsError):
        check_compatible(deeper, right)
    with pytest.raises(IncompatibleTensorsError):
        check_compatible(left, right, depth=3)


def test_discarded_weight_recorded():
    left, _ = build_process_tensors(xxz(0.4, 0.4), TruncationConfig(chi_max=4), 10)
    assert len(left.discarded_weights) >= left.depth - 1
    assert left.total_discarded_weight > 0
    exact, _ = build_process_tensors(xxz(0.4, 0.4), EXACT, 4)
    assert exact.total_discarded_weight < 1e-10


def test_svd_basis_reduction_keeps_dual_unitary_small():
    """Numerically null singular values are dropped before truncation."""
    left, _ = build_process_tensors(xxz(np.pi / 4, 0.2), EXACT, 6)
    assert left.max_bond == 1
    _, s, _ = svd(np.eye(3))
    assert len(s) == 3


def test_discarded_weight_trend():
    """Per-bond weights are relative to the leading singular value; more χ discards less overall."""
    for j, jp in [(0.25, 0.0), (0.5, 1.0)]:
        g = xxz(j, jp)
        w = [build_process_tensors(g, TruncationConfig(chi_max=c), 12)[0].total_discarded_weight for c in (2, 32)]
        assert w[1] < w[0]


@pytest.mark.parametrize("j,jp,chi", [(0.25, 0.25, 8), (0.5, 1.0, 16)])
def test_truncation_keeps_generating_function_real(j, jp, chi):
    # the exact network is symmetric under swapping bra and ket; a cut that
    # splits a degenerate multiplet would break this and make Z complex
    g = xxz(j, jp)
    for left, right in iterate_process_tensors(g, TruncationConfig(chi_max=chi), 16):
        table = mgf_grid(left, right, g, ChargeConvention.xxz())
        assert table.max_imag() < 1e-12
        assert charge_distribution(table).asymmetry() < 1e-12
