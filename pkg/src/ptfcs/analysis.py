"""Post-processing of correlator and cumulant series.

Power-law fits in log-log space, the finite-difference local exponent,
kurtosis/sextosis series and the scaling collapse of ``ln Z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, WindowError
from .fcs import CumulantSeries, FcsTable

# transient layers dropped by the default fit window
DEFAULT_SKIP = 8
MIN_FIT_POINTS = 4
# κ₂ below this is treated as underflow when forming ratios
RATIO_FLOOR = 1e-300


@dataclass(frozen=True)
class SeriesFit:
    exponent: float
    amplitude: float
    fit_window: tuple[int, int]
    residual: float
    n_points: int

    def predict(self, n) -> np.ndarray:
        return self.amplitude * np.asarray(n, dtype=float) ** self.exponent


def _as_series(series) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(list(series) if not isinstance(series, np.ndarray) else series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError("expected a list of (n, value) pairs")
    return arr[:, 0], arr[:, 1]


def fit_power_law(series, window: tuple[float, float] | None = None) -> SeriesFit:
    """Least-squares fit of ``value = A n^p`` in log-log space.

    ``window`` is inclusive; by default the first ``DEFAULT_SKIP`` depths
    are dropped as transient.  When that leaves too few points the whole
    series is used.
    """
    n, v = _as_series(series)
    if window is None:
        lo = n.min() + DEFAULT_SKIP
        mask = n >= lo
        if mask.sum() < MIN_FIT_POINTS:
            mask = np.ones_like(n, dtype=bool)
    else:
        mask = (n >= window[0]) & (n <= window[1])
    n, v = n[mask], v[mask]
    if len(n) < MIN_FIT_POINTS:
        raise WindowError(f"fit window holds {len(n)} points, need at least {MIN_FIT_POINTS}")
    if np.any(n <= 0) or np.any(v <= 0):
        raise DomainError("power-law fit needs positive n and values inside the window")
    x, y = np.log(n), np.log(v)
    coef, *_ = np.linalg.lstsq(np.column_stack([x, np.ones_like(x)]), y, rcond=None)
    p, c = coef
    resid = float(np.sqrt(np.mean((y - (p * x + c)) ** 2)))
    return SeriesFit(float(p), float(np.exp(c)), (int(n.min()), int(n.max())), resid, len(n))


def local_exponent(series) -> list[tuple[float, float]]:
    """``z(n)`` from ``1/z(n) = Δ ln κ₂ / Δ ln n`` with forward differences."""
    n, k2 = _as_series(series)
    if len(n) < 2:
        raise DomainError("need at least two depths")
    if np.any(np.diff(n) <= 0):
        raise DomainError("depth grid must be strictly increasing")
    if np.any(k2 <= 0) or np.any(n <= 0):
        raise DomainError("local exponent needs positive n and κ₂")
    inv_z = np.diff(np.log(k2)) / np.diff(np.log(n))
    with np.errstate(divide="ignore"):
        z = np.where(inv_z != 0, 1.0 / inv_z, np.inf)
    return [(float(a), float(b)) for a, b in zip(n[:-1], z)]


@dataclass(frozen=True)
class RatioEntry:
    depth: int
    gamma4: float
    gamma6: float
    flagged: bool = False


def cumulant_ratios(series: CumulantSeries | Iterable) -> list[RatioEntry]:
    """Kurtosis and sextosis per depth; entries with vanishing κ₂ are flagged (NaN)."""
    out = []
    for c in series:
        k2, k4, k6 = c.kappa(2), c.kappa(4), c.kappa(6)
        if not k2 > RATIO_FLOOR:
            out.append(RatioEntry(c.depth, float("nan"), float("nan"), True))
        else:
            out.append(RatioEntry(c.depth, k4 / k2**2, k6 / k2**3))
    return out


# ---------------------------------------------------------------------------
# scaling collapse


@dataclass(frozen=True)
class CollapseResult:
    z: float | None
    depths: tuple[int, ...]
    rescaled_curves: tuple[tuple[np.ndarray, np.ndarray], ...]
    collapse_residual: float


def _half_curve(table: FcsTable) -> tuple[np.ndarray, np.ndarray]:
    """``(λ, ln Z)`` on ``[0, π]`` plus the first grid point past π.

    The extra point lets the interpolant reach π itself on any grid.  The
    curve stops before the first non-positive ``Z`` so it stays connected.
    """
    lam = np.asarray(table.lambdas, dtype=float)
    z = np.asarray(table.values).real
    order = np.argsort(lam)
    lam, z = lam[order], z[order]
    past = np.flatnonzero(lam > np.pi + 1e-12)
    stop = past[0] + 1 if len(past) else len(lam)
    lam, z = lam[:stop], z[:stop]
    bad = np.flatnonzero(~(z > 0))
    if len(bad):
        lam, z = lam[: bad[0]], z[: bad[0]]
    return lam, np.log(z)


def _interpolant(x: np.ndarray, y: np.ndarray):
    if len(x) >= 4:
        return CubicSpline(x, y, bc_type="not-a-knot", extrapolate=False)
    return lambda g: np.interp(g, x, y)


def curve_residual(
    curves: Sequence[tuple[np.ndarray, np.ndarray]],
    n_samples: int = 512,
    domain: tuple[float, float] | None = None,
) -> float:
    """RMS pairwise difference of interpolated curves on their common domain.

    Curves are interpolated with not-a-knot cubic splines, which reproduce
    polynomials up to degree three exactly.  ``domain`` further clips the
    overlap.
    """
    if len(curves) < 2:
        raise WindowError("need at least two curves")
    if any(len(x) < 2 for x, _ in curves):
        raise WindowError("a curve has fewer than two usable points")
    lo = max(float(x.min()) for x, _ in curves)
    hi = min(float(x.max()) for x, _ in curves)
    if domain is not None:
        lo, hi = max(lo, domain[0]), min(hi, domain[1])
    if not hi > lo:
        raise WindowError("rescaled domains do not overlap")
    grid = np.linspace(lo, hi, n_samples)
    ys = [_interpolant(np.asarray(x, float), np.asarray(y, float))(grid) for x, y in curves]
    diffs = [np.mean((ys[i] - ys[j]) ** 2) for i in range(len(ys)) for j in range(i + 1, len(ys))]
    return float(np.sqrt(np.mean(diffs)))


def _check_tables(tables: Sequence[FcsTable]) -> list[FcsTable]:
    tables = sorted(tables, key=lambda t: t.depth)
    if len(tables) < 2:
        raise WindowError("need tables at two or more depths")
    return tables


def scaling_collapse(tables: Sequence[FcsTable], z: float) -> CollapseResult:
    """Plot ``ln Z`` against ``λ n^{1/(2z)}`` and measure how well the depths coincide."""
    if not z > 0:
        raise DomainError(f"z must be positive, got {z}")
    tables = _check_tables(tables)
    curves = []
    for t in tables:
        lam, lz = _half_curve(t)
        curves.append((lam * t.depth ** (1.0 / (2.0 * z)), lz))
    limit = np.pi * min(t.depth for t in tables) ** (1.0 / (2.0 * z))
    res = curve_residual(curves, domain=(0.0, limit))
    return CollapseResult(float(z), tuple(t.depth for t in tables), tuple(curves), res)


def rate_function_curves(tables: Sequence[FcsTable]) -> CollapseResult:
    """``ln Z / n`` against λ; these coincide when ``Z ~ e^{-n F(λ)}``."""
    tables = _check_tables(tables)
    curves = []
    for t in tables:
        lam, lz = _half_curve(t)
        curves.append((lam, lz / t.depth))
    res = curve_residual(curves, domain=(0.0, np.pi))
    return CollapseResult(None, tuple(t.depth for t in tables), tuple(curves), res)


def scan_z(tables: Sequence[FcsTable], z_grid: Iterable[float]) -> list[tuple[float, float]]:
    """Collapse residual for each ``z`` of a user-supplied grid."""
    return [(float(z), scaling_collapse(tables, z).collapse_residual) for z in z_grid]
