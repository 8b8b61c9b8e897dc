"""Exact reference values.

Three independent routes: free-fermion determinants on the match-gate line
``j' = 0``, closed forms at the dual-unitary point ``j = π/4``, and dense
statevector evolution of a finite chain.

Lattice sites ``l = -N+1, ..., N`` map to indices ``l + N - 1``; the
interface sits between ``l = 0`` and ``l = 1``.  Even bonds ``(l, l+1)``
with ``l`` even act second in each step (``U = U_e U_o``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circuit import ChargeConvention, GateParams, TwoSiteGate, build_xxz_gate
from .errors import FeasibilityError, InvalidConfigError, LightConeError
from .tensor import CArray

MAX_QUBITS = 12


@dataclass(frozen=True)
class SingleParticleOp:
    matrix: CArray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def half_size(self) -> int:
        return self.size // 2

    def index(self, site: int) -> int:
        """Matrix index of lattice site ``site``."""
        n = self.half_size
        if not -n + 1 <= site <= n:
            raise InvalidConfigError(f"site {site} outside [{-n + 1}, {n}]")
        return site + n - 1

    def unitarity_error(self) -> float:
        m = self.matrix
        return float(np.linalg.norm(m.conj().T @ m - np.eye(self.size), ord=2))


def _check_depth(n: int, half_size: int, margin: int = 0) -> None:
    """``margin=1`` for two-point functions: a local operator at site 0 needs one extra cell."""
    if half_size < 1:
        raise InvalidConfigError(f"half_size must be >= 1, got {half_size}")
    if n < 0:
        raise InvalidConfigError(f"depth must be >= 0, got {n}")
    if n + margin > half_size:
        raise LightConeError(
            f"depth {n} needs half_size >= {n + margin}, got {half_size}; the light cone leaves the lattice"
        )


def _layer(j: float, half_size: int, parity: int) -> CArray:
    size = 2 * half_size
    c, s = np.cos(2 * j), np.sin(2 * j)
    m = np.eye(size, dtype=np.complex128)
    for l in range(-half_size + 1, half_size):
        if l % 2 != parity:
            continue
        i = l + half_size - 1
        m[i : i + 2, i : i + 2] = [[c, -1j * s], [-1j * s, c]]
    return m


def ff_step_matrix(j: float, half_size: int) -> SingleParticleOp:
    """One-step single-particle propagator ``U_e U_o``."""
    if half_size < 1:
        raise InvalidConfigError(f"half_size must be >= 1, got {half_size}")
    return SingleParticleOp(_layer(j, half_size, 0) @ _layer(j, half_size, 1))


def counting_operator(half_size: int) -> np.ndarray:
    """Diagonal of ``T``: +1 on the left half, -1 on the right half."""
    return np.concatenate([np.ones(half_size), -np.ones(half_size)])


def ff_correlator(j: float, half_size: int, n: int) -> float:
    """``|[U^n]_{00}|^2``; exact for ``n < half_size``."""
    _check_depth(n, half_size, margin=1 if n else 0)
    u = ff_step_matrix(j, half_size)
    i0 = u.index(0)
    un = np.linalg.matrix_power(u.matrix, n)
    return float(abs(un[i0, i0]) ** 2)


def ff_mgf(j: float, half_size: int, n: int, lam: float) -> complex:
    """``det[(1 + e^{iλT/2} U^n e^{-iλT/2} U^{-n}) / 2]``."""
    _check_depth(n, half_size)
    u = ff_step_matrix(j, half_size).matrix
    un = np.linalg.matrix_power(u, n)
    ph = np.exp(0.5j * lam * counting_operator(half_size))
    a = (ph[:, None] * un * ph.conj()[None, :]) @ un.conj().T
    return complex(np.linalg.det(0.5 * (np.eye(len(a)) + a)))


def ff_mgf_grid(j: float, half_size: int, n: int, lams) -> np.ndarray:
    _check_depth(n, half_size)
    u = ff_step_matrix(j, half_size).matrix
    un = np.linalg.matrix_power(u, n)
    tc = counting_operator(half_size)
    out = []
    for lam in np.atleast_1d(lams):
        ph = np.exp(0.5j * lam * tc)
        a = (ph[:, None] * un * ph.conj()[None, :]) @ un.conj().T
        out.append(np.linalg.det(0.5 * (np.eye(len(a)) + a)))
    return np.asarray(out, dtype=np.complex128)


def du_mgf(lam: float, n: int) -> float:
    """``((1 + cos λ) / 2)^n``."""
    if n < 0:
        raise InvalidConfigError(f"depth must be >= 0, got {n}")
    return float(((1.0 + np.cos(lam)) / 2.0) ** n)


def du_mgf_generic(gate: TwoSiteGate, conv: ChargeConvention, lam: float, n: int) -> complex:
    """``(Tr[e^{iλg} U e^{-iλg} U^†] / d^2)^n`` for a dual-unitary ``gate``."""
    if n < 0:
        raise InvalidConfigError(f"depth must be >= 0, got {n}")
    ph = np.exp(1j * lam * conv.generator_diagonal)
    u = gate.matrix
    base = np.trace((ph[:, None] * u * ph.conj()[None, :]) @ u.conj().T) / len(u)
    return complex(base**n)


# ---------------------------------------------------------------------------
# dense statevector


def _apply_gate(psi: np.ndarray, u: np.ndarray, i: int, nq: int) -> np.ndarray:
    b = psi.shape[0]
    v = psi.reshape(b, 2**i, 4, 2 ** (nq - i - 2))
    return np.einsum("ab,xibr->xiar", u, v, optimize=True).reshape(b, -1)


def _evolve(psi: np.ndarray, gate: np.ndarray, half_size: int, n: int) -> np.ndarray:
    nq = 2 * half_size
    odd = [l + half_size - 1 for l in range(-half_size + 1, half_size) if l % 2 != 0]
    even = [l + half_size - 1 for l in range(-half_size + 1, half_size) if l % 2 == 0]
    for _ in range(n):
        for i in odd + even:
            psi = _apply_gate(psi, gate, i, nq)
    return psi


@lru_cache(maxsize=8)
def _basis_charges(half_size: int) -> tuple[np.ndarray, np.ndarray]:
    nq = 2 * half_size
    idx = np.arange(2**nq)
    bits = (idx[:, None] >> (nq - 1 - np.arange(nq))[None, :]) & 1
    ups = 1 - bits  # |0> is up and carries one charge
    return ups[:, :half_size].sum(1), ups.sum(1)


def transition_weights(gate: TwoSiteGate, half_size: int, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sparse list of ``|<a|U^n|b>|^2`` restricted to charge-conserving pairs.

    Returns ``(a, b, w)`` index arrays and weights.
    """
    nq = 2 * half_size
    if nq > MAX_QUBITS:
        raise FeasibilityError(f"{nq} qubits exceed the dense limit of {MAX_QUBITS}")
    _check_depth(n, half_size)
    _, total = _basis_charges(half_size)
    rows, cols, ws = [], [], []
    for c in np.unique(total):
        sector = np.flatnonzero(total == c)
        psi = np.zeros((len(sector), 2**nq), dtype=np.complex128)
        psi[np.arange(len(sector)), sector] = 1.0
        psi = _evolve(psi, gate.matrix, half_size, n)
        amp = psi[:, sector]  # [b, a]
        w = np.abs(amp) ** 2
        bb, aa = np.meshgrid(sector, sector, indexing="ij")
        rows.append(aa.ravel())
        cols.append(bb.ravel())
        ws.append(w.ravel())
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(ws)


def exact_distribution_statevector(gate: TwoSiteGate, half_size: int, n: int) -> dict[int, float]:
    """``P(q)`` with ``q`` the charge moved from the right half to the left half."""
    a, b, w = transition_weights(gate, half_size, n)
    left, _ = _basis_charges(half_size)
    q = left[a] - left[b]
    d = 2.0 ** (2 * half_size)
    out: dict[int, float] = {}
    for qq in np.unique(q):
        out[int(qq)] = float(w[q == qq].sum() / d)
    return out


def exact_mgf_statevector(
    j: float, jprime: float, half_size: int, n: int, lam: float, gate: TwoSiteGate | None = None
) -> complex:
    """``Tr[e^{iλΔ/2} U^n e^{-iλΔ/2} U^{†n}] / 2^{2N}`` with ``Δ = N_left - N_right``."""
    gate = gate or build_xxz_gate(GateParams(j, jprime))
    dist = exact_distribution_statevector(gate, half_size, n)
    return complex(sum(p * np.exp(1j * lam * q) for q, p in dist.items()))


def exact_correlator_statevector(
    j: float, jprime: float, half_size: int, n: int, gate: TwoSiteGate | None = None
) -> float:
    """``Tr[Z_0(n) Z_0] / 2^{2N}``; exact for ``n < half_size``."""
    _check_depth(n, half_size, margin=1 if n else 0)
    gate = gate or build_xxz_gate(GateParams(j, jprime))
    a, b, w = transition_weights(gate, half_size, n)
    nq = 2 * half_size
    i0 = half_size - 1
    z0 = 1 - 2 * ((np.arange(2**nq) >> (nq - 1 - i0)) & 1)
    return float(np.sum(w * z0[a] * z0[b]) / 2.0**nq)

