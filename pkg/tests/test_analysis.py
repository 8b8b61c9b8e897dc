import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptfcs.analysis import (
    cumulant_ratios,
    curve_residual,
    fit_power_law,
    local_exponent,
    rate_function_curves,
    scaling_collapse,
    scan_z,
)
from ptfcs.circuit import PAULI_Z, ChargeConvention
from ptfcs.errors import DomainError, WindowError
from ptfcs.fcs import (
    CumulantSeries,
    Cumulants,
    FcsTable,
    charge_distribution,
    correlator_series,
    cumulants_from_distribution,
    lambda_grid,
)
from ptfcs.oracles import du_mgf, ff_correlator
from ptfcs.process_tensor import TruncationConfig, build_process_tensors

from conftest import xxz


def _synthetic(n, npts=201):
    lam = lambda_grid(npts)
    return FcsTable(n, lam, np.exp(-((lam * n ** (1 / 3)) ** 2)).astype(complex))


def _du_table(n, npts=None):
    lam = lambda_grid(npts or 4 * n + 1)
    return FcsTable(n, lam, np.array([du_mgf(x, n) for x in lam], dtype=complex))


def test_fit_synthetic_power_law():
    ns = np.arange(8, 65)
    fit = fit_power_law(np.column_stack([ns, 0.3 * ns**0.5]), window=(8, 64))
    assert fit.exponent == pytest.approx(0.5, abs=1e-12)
    assert fit.amplitude == pytest.approx(0.3, abs=1e-12)
    assert fit.residual < 1e-12
    assert fit.fit_window == (8, 64)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 100))
def test_fit_recovers_planted_exponent(p, a):
    ns = np.arange(1, 40)
    fit = fit_power_law(np.column_stack([ns, a * ns**p]))
    assert fit.exponent == pytest.approx(p, abs=1e-10)
    assert fit.residual >= 0
    assert fit.n_points >= 4


def test_default_window_skips_transient():
    ns = np.arange(1, 30)
    fit = fit_power_law(np.column_stack([ns, ns.astype(float)]))
    assert fit.fit_window == (9, 29)
    short = fit_power_law(np.column_stack([np.arange(1, 6), np.arange(1, 6.0)]))
    assert short.fit_window == (1, 5)


def test_fit_errors():
    ns = np.arange(1, 10.0)
    with pytest.raises(DomainError):
        fit_power_law(np.column_stack([ns, ns - 3]), window=(1, 9))
    with pytest.raises(WindowError):
        fit_power_law(np.column_stack([ns, ns]), window=(2, 4))


def test_fit_dual_unitary_variance():
    ns = np.arange(1, 20)
    assert fit_power_law(np.column_stack([ns, ns / 2])).exponent == pytest.approx(1.0, abs=1e-12)


def test_fit_free_fermion_correlator():
    ns = np.arange(20, 61)
    vals = [ff_correlator(0.25, 64, int(n)) for n in ns]
    fit = fit_power_law(np.column_stack([ns, vals]), window=(20, 60))
    assert -1.3 <= fit.exponent <= -0.8


@pytest.mark.parametrize("power,z", [(1.0, 1.0), (0.5, 2.0), (2 / 3, 1.5)])
def test_local_exponent_power_law(power, z):
    ns = np.arange(1, 30)
    out = local_exponent(np.column_stack([ns, 1.7 * ns**power]))
    assert len(out) == len(ns) - 1
    assert np.allclose([b for _, b in out], z, atol=1e-8)


def test_local_exponent_errors():
    with pytest.raises(DomainError):
        local_exponent([(1, 1.0), (3, 2.0), (2, 3.0)])
    with pytest.raises(DomainError):
        local_exponent([(1, 1.0), (2, 0.0)])


def test_local_exponent_engine_dual_unitary():
    g = xxz(np.pi / 4, 0.3)
    cfg = TruncationConfig(chi_max=4)
    rows = []
    for n in range(1, 9):
        left, right = build_process_tensors(g, cfg, n)
        from ptfcs.fcs import mgf_grid

        c = cumulants_from_distribution(charge_distribution(mgf_grid(left, right, g, ChargeConvention.xxz())))
        rows.append((n, c.kappa(2)))
    assert np.allclose([z for _, z in local_exponent(rows)], 1.0, atol=1e-8)


def test_cumulant_ratios():
    gauss = CumulantSeries([Cumulants(3, (0.0, 2.0, 0.0, 0.0, 0.0, 0.0), 0.0, 0.0)])
    (e,) = cumulant_ratios(gauss)
    assert e.gamma4 == 0 and e.gamma6 == 0 and not e.flagged
    series = CumulantSeries()
    for n in (1, 4):
        series.append(cumulants_from_distribution(charge_distribution(_du_table(n))))
    one, four = cumulant_ratios(series)
    assert four.gamma4 == pytest.approx(-0.25)
    assert one.gamma6 == pytest.approx(4.0)
    zero = CumulantSeries([Cumulants(2, (0.0,) * 6, None, None)])
    (z,) = cumulant_ratios(zero)
    assert z.flagged and np.isnan(z.gamma4)


def test_collapse_synthetic():
    tables = [_synthetic(16), _synthetic(32)]
    assert scaling_collapse(tables, 1.5).collapse_residual < 1e-10
    assert scaling_collapse(tables, 1.0).collapse_residual > 0.1


def test_collapse_order_and_refinement_invariance():
    a = scaling_collapse([_synthetic(16), _synthetic(32), _synthetic(8)], 1.2).collapse_residual
    b = scaling_collapse([_synthetic(32), _synthetic(8), _synthetic(16)], 1.2).collapse_residual
    c = scaling_collapse([_synthetic(8, 801), _synthetic(16, 801), _synthetic(32, 801)], 1.2).collapse_residual
    assert a == b
    assert c == pytest.approx(a, abs=1e-6)


def test_collapse_errors():
    with pytest.raises(WindowError):
        scaling_collapse([_synthetic(16)], 1.5)
    with pytest.raises(DomainError):
        scaling_collapse([_synthetic(16), _synthetic(32)], 0.0)
    with pytest.raises(WindowError):
        curve_residual([(np.array([0.0, 1.0]), np.zeros(2)), (np.array([2.0, 3.0]), np.zeros(2))])


def test_rate_function_dual_unitary():
    # Z = ((1 + cos λ)/2)^n, so ln Z / n does not depend on n
    res = rate_function_curves([_du_table(4, 81), _du_table(8, 81)])
    assert res.collapse_residual < 1e-12
    for lam, y in res.rescaled_curves:
        assert np.allclose(y, np.log((1 + np.cos(lam)) / 2), atol=1e-12)


def test_scan_z_picks_planted_value():
    tables = [_synthetic(8), _synthetic(32)]
    scan = scan_z(tables, [1.0, 1.25, 1.5, 1.75, 2.0])
    assert min(scan, key=lambda t: t[1])[0] == 1.5


def test_correlator_fit_from_engine():
    g = xxz(np.pi / 4 - 0.05, 0.0)
    left, right = build_process_tensors(g, TruncationConfig(chi_max=4096, cutoff=0.0), 4)
    vals, _ = correlator_series(left, right, g, PAULI_Z)
    assert vals[0] == pytest.approx(1.0)
