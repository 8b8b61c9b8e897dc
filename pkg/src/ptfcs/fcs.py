"""Counting statistics from a pair of process tensors.

The central column holds one folded gate per time step.  Step ``t`` reads
``a_t`` from both process tensors, applies the (tilted) gate and writes
``b_t`` back.  All λ-dependence sits in this column, so the process tensors
are built once and reused for every counting field.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .circuit import (
    ChargeConvention,
    TwoSiteGate,
    build_tilted_gate,
    fold_gate,
    left_multiplication,
    tilt_components,
)
from .errors import AliasingError, InvalidConfigError, TruncationQualityError
from .process_tensor import TemporalMPS, check_compatible
from .tensor import CArray

MAX_ORDER = 6
# imaginary residue and negativity tolerated before a distribution is flagged
IMAG_TOL = 1e-8
NEG_TOL = 1e-8
# bytes allowed for the largest intermediate of one batched step
_CHUNK_BYTES = 1 << 29


@dataclass(frozen=True)
class FcsTable:
    depth: int
    lambdas: np.ndarray
    values: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.lambdas)

    def max_imag(self) -> float:
        return float(np.max(np.abs(self.values.imag)))

    def reflection_error(self) -> float:
        """``max |Z(2π - λ) - conj Z(λ)|`` over the uniform grid."""
        v = self.values
        mirrored = v[(-np.arange(len(v))) % len(v)]
        return float(np.max(np.abs(mirrored - v.conj())))


@dataclass(frozen=True)
class ChargeDistribution:
    depth: int
    support: np.ndarray
    probabilities: np.ndarray
    max_imag_residue: float = 0.0

    @property
    def total(self) -> float:
        return float(self.probabilities.sum())

    @property
    def min_probability(self) -> float:
        return float(self.probabilities.min())

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.probabilities - self.probabilities[::-1])))

    def as_dict(self) -> dict[int, float]:
        return {int(q): float(p) for q, p in zip(self.support, self.probabilities)}

    def quality_issues(self) -> list[str]:
        issues = []
        if self.max_imag_residue > IMAG_TOL:
            issues.append(f"imaginary residue {self.max_imag_residue:.3g}")
        if self.min_probability < -NEG_TOL:
            issues.append(f"negative probability {self.min_probability:.3g}")
        return issues

    def check(self) -> None:
        """Raise :class:`TruncationQualityError` if the table looks unphysical."""
        issues = self.quality_issues()
        if issues:
            raise TruncationQualityError(f"depth {self.depth}: " + "; ".join(issues))


@dataclass(frozen=True)
class Cumulants:
    depth: int
    kappas: tuple[float, ...]
    gamma4: float | None
    gamma6: float | None

    def kappa(self, r: int) -> float:
        return self.kappas[r - 1]

    @property
    def ratios_defined(self) -> bool:
        return self.gamma4 is not None


@dataclass
class CumulantSeries:
    entries: list[Cumulants] = field(default_factory=list)

    def append(self, c: Cumulants) -> None:
        self.entries.append(c)

    @property
    def depths(self) -> np.ndarray:
        return np.array([c.depth for c in self.entries])

    def kappa(self, r: int) -> np.ndarray:
        return np.array([c.kappa(r) for c in self.entries])

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


# ---------------------------------------------------------------------------
# column contraction


def _chunk_size(chi: int, dd: int) -> int:
    per = 16 * dd * dd * chi * chi * 16
    return max(1, _CHUNK_BYTES // max(per, 1))


def _step(env: CArray, l0, l1, r0, r1, apply_gate: Callable[[CArray], CArray]) -> CArray:
    """Advance batched environments ``env[B, l, r]`` over one time step.

    ``apply_gate`` maps ``x[B, k, s, a, c]`` to ``y[B, k, s, b, d]``.
    """
    bsz, cl, cr = env.shape
    dd = l0.shape[1]
    kl, kr = l0.shape[2], r0.shape[2]
    x = env.transpose(0, 2, 1).reshape(bsz * cr, cl) @ l0.reshape(cl, dd * kl)
    x = x.reshape(bsz, cr, dd, kl).transpose(0, 2, 3, 1).reshape(bsz * dd * kl, cr)
    x = (x @ r0.reshape(cr, dd * kr)).reshape(bsz, dd, kl, dd, kr)
    x = x.transpose(0, 2, 4, 1, 3)  # B, k, s, a, c
    y = apply_gate(x)  # B, k, s, b, d
    ml, mr = l1.shape[2], r1.shape[2]
    y = y.transpose(0, 2, 4, 1, 3).reshape(bsz * kr * dd, kl * dd) @ l1.reshape(kl * dd, ml)
    y = y.reshape(bsz, kr, dd, ml).transpose(0, 3, 1, 2).reshape(bsz * ml, kr * dd)
    return (y @ r1.reshape(kr * dd, mr)).reshape(bsz, ml, mr)


def _gate_applier(gates: CArray) -> Callable[[CArray], CArray]:
    """Apply one gate (``[a, c, b, d]``) or a batch of gates (``[B, a, c, b, d]``)."""
    dd = gates.shape[-1]

    def apply(x: CArray) -> CArray:
        bsz, kl, kr = x.shape[:3]
        xm = x.reshape(bsz, kl * kr, dd * dd)
        if gates.ndim == 4:
            y = xm @ gates.reshape(dd * dd, dd * dd)
        else:
            y = np.matmul(xm, gates.reshape(-1, dd * dd, dd * dd))
        return y.reshape(bsz, kl, kr, dd, dd)

    return apply


def _sites(pt: TemporalMPS, t: int) -> tuple[CArray, CArray]:
    return pt.site_tensors[2 * t], pt.site_tensors[2 * t + 1]


def contract_column(left: TemporalMPS, right: TemporalMPS, steps: Sequence[CArray]) -> CArray:
    """Full contraction with one gate tensor per step.

    Each entry of ``steps`` is ``[a, c, b, d]`` or a batch ``[B, a, c, b, d]``
    (all batched entries must share ``B``).  Returns an array of length ``B``.
    """
    if len(steps) != left.depth:
        raise InvalidConfigError(f"need {left.depth} column entries, got {len(steps)}")
    bsz = max((s.shape[0] for s in steps if s.ndim == 5), default=1)
    env = np.ones((bsz, 1, 1), dtype=np.complex128)
    for t, g in enumerate(steps):
        l0, l1 = _sites(left, t)
        r0, r1 = _sites(right, t)
        env = _step(env, l0, l1, r0, r1, _gate_applier(g))
    return env[:, 0, 0]


def _tilted_batch(gate: TwoSiteGate, conv: ChargeConvention, lams: np.ndarray) -> CArray:
    comps = tilt_components(gate, conv)
    out = 0
    for w, t in comps.items():
        out = out + np.exp(1j * w * lams)[:, None, None, None, None] * t[None]
    out = np.ascontiguousarray(out, dtype=np.complex128)
    # keep λ = 0 bit-identical to the untilted gate
    zero = lams == 0
    if np.any(zero):
        out[zero] = fold_gate(gate).tensor
    return out


def mgf(left: TemporalMPS, right: TemporalMPS, gate: TwoSiteGate, conv: ChargeConvention, lam: float) -> complex:
    """``Z(λ, n)`` for ``n = left.depth``."""
    check_compatible(left, right)
    tilted = build_tilted_gate(gate, conv, lam).tensor
    return complex(contract_column(left, right, [tilted] * left.depth)[0])


def mgf_values(
    left: TemporalMPS,
    right: TemporalMPS,
    gate: TwoSiteGate,
    conv: ChargeConvention,
    lams,
    threads: int = 1,
) -> np.ndarray:
    """``Z(λ, n)`` for many λ at once, batched and optionally threaded.

    Results do not depend on ``threads``: chunks are fixed by size alone and
    reassembled in order.
    """
    check_compatible(left, right)
    build_tilted_gate(gate, conv, 0.0)  # validates charge conservation
    lams = np.asarray(lams, dtype=np.float64).ravel()
    chi = max(left.max_bond, right.max_bond)
    size = _chunk_size(chi, left.physical_dim)
    chunks = [lams[i : i + size] for i in range(0, len(lams), size)]

    def run(chunk: np.ndarray) -> np.ndarray:
        batch = _tilted_batch(gate, conv, chunk)
        return contract_column(left, right, [batch] * left.depth)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.complex128)


def lambda_grid(n_points: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n_points) / n_points


def default_points(depth: int) -> int:
    return 4 * depth + 1


def mgf_grid(
    left: TemporalMPS,
    right: TemporalMPS,
    gate: TwoSiteGate,
    conv: ChargeConvention,
    n_points: int | None = None,
    threads: int = 1,
) -> FcsTable:
    """Sample ``Z`` on ``λ_k = 2πk / n_points``.

    Raises:
        AliasingError: if ``n_points < 2n + 1``.
    """
    n = left.depth
    n_points = default_points(n) if n_points is None else int(n_points)
    if n_points < 2 * n + 1:
        raise AliasingError(f"{n_points} points cannot resolve charges |q| <= {n}; need >= {2 * n + 1}")
    lams = lambda_grid(n_points)
    return FcsTable(n, lams, mgf_values(left, right, gate, conv, lams, threads))


# ---------------------------------------------------------------------------
# distributions and cumulants


def charge_distribution(table: FcsTable, strict: bool = False) -> ChargeDistribution:
    """Invert the Fourier series ``Z(λ) = Σ_q P(q) e^{iλq}`` on ``|q| <= n``."""
    n = table.depth
    npt = table.n_points
    if npt < 2 * n + 1:
        raise AliasingError(f"{npt} points cannot resolve charges |q| <= {n}")
    q = np.arange(-n, n + 1)
    coeffs = np.fft.fft(table.values) / npt  # coefficient of e^{iλq} sits at -q mod npt
    raw = coeffs[(-q) % npt]
    dist = ChargeDistribution(n, q, raw.real.copy(), float(np.max(np.abs(raw.imag))))
    if strict:
        dist.check()
    return dist


def moments_to_cumulants(moments: Sequence[float]) -> list[float]:
    """``κ_1..κ_R`` from raw moments ``m_1..m_R`` (``m_0 = 1``)."""
    m = [1.0] + list(moments)
    kap: list[float] = [0.0]
    for r in range(1, len(m)):
        acc = m[r]
        for j in range(1, r):
            acc -= math.comb(r - 1, j - 1) * kap[j] * m[r - j]
        kap.append(acc)
    return kap[1:]


def _ratios(kappas: Sequence[float]) -> tuple[float | None, float | None]:
    k2 = kappas[1]
    if k2 <= 1e-12:
        return None, None
    return kappas[3] / k2**2, kappas[5] / k2**3


def cumulants_from_distribution(dist: ChargeDistribution) -> Cumulants:
    q = dist.support.astype(np.float64)
    p = dist.probabilities
    moments = [float(np.sum(q**r * p)) for r in range(1, MAX_ORDER + 1)]
    kap = moments_to_cumulants(moments)
    g4, g6 = _ratios(kap)
    return Cumulants(dist.depth, tuple(kap), g4, g6)


def _series_log(z: np.ndarray) -> np.ndarray:
    """Power-series coefficients of ``ln Z`` (constant term ``ln z_0``)."""
    k = len(z)
    out = np.zeros(k, dtype=np.complex128)
    out[0] = np.log(z[0])
    for m in range(1, k):
        acc = m * z[m]
        for j in range(1, m):
            acc -= j * out[j] * z[m - j]
        out[m] = acc / (m * z[0])
    return out


def mgf_taylor(
    left: TemporalMPS, right: TemporalMPS, gate: TwoSiteGate, conv: ChargeConvention, order: int = MAX_ORDER
) -> np.ndarray:
    """Taylor coefficients ``z_k`` of ``Z(λ) = Σ_k z_k λ^k`` up to ``order``.

    The tilted gate is a finite Fourier sum ``Σ_w e^{iwλ} T_w``; its Taylor
    coefficients are propagated through the column as a truncated power series.
    """
    check_compatible(left, right)
    build_tilted_gate(gate, conv, 0.0)
    comps = tilt_components(gate, conv)
    k = order + 1
    coef = np.zeros((k,) + next(iter(comps.values())).shape, dtype=np.complex128)
    for w, t in comps.items():
        for j in range(k):
            coef[j] += (1j * w) ** j / math.factorial(j) * t
    dd = left.physical_dim
    cm = coef.reshape(k, dd * dd, dd * dd)

    def apply(x: CArray) -> CArray:
        bsz, kl, kr = x.shape[:3]
        xm = x.reshape(bsz, kl * kr, dd * dd)
        y = np.zeros_like(xm)
        for a in range(bsz):
            for j in range(a + 1):
                y[a] += xm[a - j] @ cm[j]
        return y.reshape(bsz, kl, kr, dd, dd)

    env = np.zeros((k, 1, 1), dtype=np.complex128)
    env[0] = 1.0
    for t in range(left.depth):
        l0, l1 = _sites(left, t)
        r0, r1 = _sites(right, t)
        env = _step(env, l0, l1, r0, r1, apply)
    return env[:, 0, 0]


def cumulants_taylor(
    left: TemporalMPS, right: TemporalMPS, gate: TwoSiteGate, conv: ChargeConvention
) -> Cumulants:
    """Cumulants from exact λ-derivatives of ``ln Z`` at ``λ = 0``.

    Equivalent to the Fourier route up to rounding; cheaper when only
    low-order cumulants are needed because the cost does not grow with ``n``.
    """
    z = mgf_taylor(left, right, gate, conv, MAX_ORDER)
    lg = _series_log(z)
    kap = [float(((-1j) ** r * math.factorial(r) * lg[r]).real) for r in range(1, MAX_ORDER + 1)]
    g4, g6 = _ratios(kap)
    return Cumulants(left.depth, tuple(kap), g4, g6)


# ---------------------------------------------------------------------------
# local correlator


def _single_site_slot(op: CArray, dd: int) -> CArray:
    """Column entry acting with ``op`` on the left line and trivially on the right."""
    return np.einsum("ba,dc->acbd", op, np.eye(dd))


def _top_step(top: CArray, l0, l1, r0, r1, g: CArray) -> CArray:
    y = np.tensordot(l1, top, axes=(2, 0))  # k, b, p
    y = np.tensordot(y, r1, axes=(2, 2))  # k, b, s, d
    y = np.tensordot(g, y, axes=([2, 3], [1, 3]))  # a, c, k, s
    y = np.tensordot(l0, y, axes=([1, 2], [0, 2]))  # l, c, s
    return np.tensordot(y, r0, axes=([1, 2], [1, 2]))  # l, r


def correlator_series(
    left: TemporalMPS,
    right: TemporalMPS,
    gate: TwoSiteGate,
    observable: CArray,
    n_max: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """``<O_0(n) O_0(0)>`` for ``n = 0..n_max`` from one pair of tensors.

    The observable is inserted on the bottom slot of the column (which then
    carries no gate) and after the central gate of step ``n``; the remaining
    slots carry the untilted gate.  Tensors of depth ``D`` give ``n <= D - 1``.

    Returns ``(values, imag_parts)``.
    """
    check_compatible(left, right)
    d_max = left.depth - 1
    n_max = d_max if n_max is None else n_max
    if n_max > d_max or n_max < 0:
        raise InvalidConfigError(f"depth-{left.depth} tensors give correlators up to n = {d_max}")
    dd = left.physical_dim
    sup = left_multiplication(np.asarray(observable, dtype=np.complex128))
    if sup.shape != (dd, dd):
        raise InvalidConfigError("observable does not match the local dimension")
    plain = fold_gate(gate).tensor
    depth = left.depth
    # top[m]: contraction of slots m..depth-1 with untilted gates
    top = [None] * (depth + 1)
    top[depth] = np.ones((1, 1), dtype=np.complex128)
    for m in range(depth - 1, 0, -1):
        l0, l1 = _sites(left, m)
        r0, r1 = _sites(right, m)
        top[m] = _top_step(top[m + 1], l0, l1, r0, r1, plain)
    vals, imags = [], []
    l0, l1 = _sites(left, 0)
    r0, r1 = _sites(right, 0)
    env0 = np.ones((1, 1, 1), dtype=np.complex128)
    both = _single_site_slot(sup @ sup, dd)
    e = _step(env0, l0, l1, r0, r1, _gate_applier(both))[0]
    v = complex(np.sum(e * top[1]))
    vals.append(v.real)
    imags.append(v.imag)
    bottom = _step(env0, l0, l1, r0, r1, _gate_applier(_single_site_slot(sup, dd)))
    last = np.einsum("acxd,bx->acbd", plain, sup)
    for n in range(1, n_max + 1):
        l0, l1 = _sites(left, n)
        r0, r1 = _sites(right, n)
        e = _step(bottom, l0, l1, r0, r1, _gate_applier(last))[0]
        v = complex(np.sum(e * top[n + 1]))
        vals.append(v.real)
        imags.append(v.imag)
        bottom = _step(bottom, l0, l1, r0, r1, _gate_applier(plain))
    return np.array(vals), np.array(imags)


def local_correlator(
    left: TemporalMPS, right: TemporalMPS, gate: TwoSiteGate, observable: CArray, n: int
) -> float:
    """``<O_0(n) O_0(0)>``; needs tensors of depth at least ``n + 1``."""
    vals, _ = correlator_series(left, right, gate, observable, n)
    return float(vals[n])
