"""Two-site gates of the U(1)-symmetric brickwork circuit and their folded forms.

Conventions used throughout the package:

* computational basis ``|0> = |up>``, Pauli ``Z = diag(1, -1)``;
* an operator ``|k><l|`` is vectorized to index ``l * d + k`` (bra index
  first), so ``rho -> U rho U^†`` becomes ``conj(U) ⊗ U``;
* a folded two-site gate is a rank-4 tensor with legs
  ``(in_left, in_right, out_left, out_right)``, each of extent ``d**2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .errors import ConventionViolationError, DimensionError, InvalidConfigError, UnsupportedModelError
from .tensor import CArray

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

_UNITARY_TOL = 1e-12


@dataclass(frozen=True)
class GateParams:
    """XXZ couplings: the gate is ``exp(-i j (XX + YY) - i jprime ZZ)``."""

    j: float
    jprime: float
    local_dim: int = 2

    def __post_init__(self):
        if self.local_dim < 2:
            raise InvalidConfigError(f"local_dim must be >= 2, got {self.local_dim}")

    @property
    def anisotropy(self) -> float | None:
        """``jprime / j``; ``None`` when ``j == 0``."""
        if self.j == 0:
            return None
        return self.jprime / self.j


@dataclass(frozen=True)
class TwoSiteGate:
    matrix: CArray
    params: GateParams | None = None

    @property
    def local_dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def unitarity_error(self) -> float:
        m = self.matrix
        return float(np.linalg.norm(m.conj().T @ m - np.eye(len(m)), ord=2))

    def swapped(self) -> "TwoSiteGate":
        """The same gate with its two sites exchanged."""
        d = self.local_dim
        t = self.matrix.reshape(d, d, d, d).transpose(1, 0, 3, 2).reshape(d * d, d * d)
        return TwoSiteGate(np.ascontiguousarray(t), self.params)

    def is_swap_symmetric(self, tol: float = 1e-14) -> bool:
        return bool(np.max(np.abs(self.swapped().matrix - self.matrix)) <= tol)


@dataclass(frozen=True)
class ChargeConvention:
    """Local charge ``N`` (integer spectrum) and the interface generator ``(N0 - N1) / 2``.

    Moving one elementary charge across the interface shifts ``N0 - N1`` by 2,
    so with branch tilts of ``±λ/2`` a transfer contributes ``e^{±iλ}`` and the
    generating function is ``2π``-periodic in ``λ``.
    """

    local_charge: NDArray[np.float64]
    interface_generator: NDArray[np.float64] = field(init=False)

    def __post_init__(self):
        n = np.asarray(self.local_charge, dtype=np.float64)
        if n.ndim != 2 or n.shape[0] != n.shape[1]:
            raise DimensionError("local charge must be a square matrix")
        if not np.allclose(n, np.diag(np.diag(n))):
            raise UnsupportedModelError("local charge must be diagonal in the computational basis")
        object.__setattr__(self, "local_charge", n)
        eye = np.eye(len(n))
        g = (np.kron(n, eye) - np.kron(eye, n)) / 2.0
        object.__setattr__(self, "interface_generator", g)

    @property
    def local_dim(self) -> int:
        return len(self.local_charge)

    @property
    def charges(self) -> NDArray[np.float64]:
        return np.diag(self.local_charge).copy()

    @property
    def generator_diagonal(self) -> NDArray[np.float64]:
        return np.diag(self.interface_generator).copy()

    @classmethod
    def xxz(cls) -> "ChargeConvention":
        """Up-spin count ``N = (Z + 1) / 2``."""
        return cls((PAULI_Z.real + np.eye(2)) / 2.0)


def build_xxz_gate(params: GateParams) -> TwoSiteGate:
    """Exact exponential of the 4x4 XXZ generator."""
    if params.local_dim != 2:
        raise UnsupportedModelError("the XXZ gate is defined for local_dim = 2 only")
    h = params.j * (np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y))
    h = h + params.jprime * np.kron(PAULI_Z, PAULI_Z)
    # Hermitian generator: exponentiate through its eigenbasis
    w, v = scipy.linalg.eigh(h)
    u = (v * np.exp(-1j * w)) @ v.conj().T
    return TwoSiteGate(np.ascontiguousarray(u), params)


def gate_from_hamiltonian(h: CArray, params: GateParams | None = None) -> TwoSiteGate:
    """``exp(-i h)`` for a Hermitian two-site generator ``h``."""
    h = np.asarray(h, dtype=np.complex128)
    if not np.allclose(h, h.conj().T, atol=1e-13):
        raise InvalidConfigError("generator must be Hermitian")
    w, v = scipy.linalg.eigh(h)
    return TwoSiteGate(np.ascontiguousarray((v * np.exp(-1j * w)) @ v.conj().T), params)


def commutator_norm(gate: TwoSiteGate, conv: ChargeConvention) -> float:
    d = conv.local_dim
    eye = np.eye(d)
    total = np.kron(conv.local_charge, eye) + np.kron(eye, conv.local_charge)
    m = gate.matrix
    return float(np.linalg.norm(m @ total - total @ m, ord=2))


@dataclass(frozen=True)
class FoldedGate:
    """Vectorized two-site superoperator, legs ``(in_left, in_right, out_left, out_right)``."""

    tensor: CArray
    tilt: float = 0.0

    @property
    def local_dim(self) -> int:
        return int(round(np.sqrt(self.tensor.shape[0])))

    def as_matrix(self) -> CArray:
        """``(out_left, out_right) x (in_left, in_right)`` matrix form."""
        dd = self.tensor.shape[0]
        return self.tensor.transpose(2, 3, 0, 1).reshape(dd * dd, dd * dd)


def _fold(bra: CArray, ket: CArray, d: int) -> CArray:
    # conj(bra) ⊗ ket on (bra_out, ket_out) x (bra_in, ket_in), split into
    # per-site folded legs ordered (in_l, in_r, out_l, out_r)
    sup = np.kron(bra.conj(), ket).reshape([d] * 8)
    # axes: bo_l, bo_r, ko_l, ko_r, bi_l, bi_r, ki_l, ki_r
    t = sup.transpose(4, 6, 5, 7, 0, 2, 1, 3)
    return np.ascontiguousarray(t.reshape(d * d, d * d, d * d, d * d))


def fold_gate(gate: TwoSiteGate) -> FoldedGate:
    """``conj(U) ⊗ U`` reshaped to four folded legs."""
    if gate.unitarity_error() > 1e-10:
        raise InvalidConfigError("gate is not unitary")
    return FoldedGate(_fold(gate.matrix, gate.matrix, gate.local_dim), 0.0)


def conjugated_gate(gate: TwoSiteGate, conv: ChargeConvention, mu: float) -> CArray:
    """``e^{i mu g} U e^{-i mu g}`` with ``g`` the interface generator."""
    phase = np.exp(1j * mu * conv.generator_diagonal)
    return phase[:, None] * gate.matrix * phase.conj()[None, :]


def build_tilted_gate(gate: TwoSiteGate, conv: ChargeConvention, lam: float) -> FoldedGate:
    """Central gate tilted by the counting field ``lam``.

    The ket branch evolves with ``U^(+λ/2)`` and the bra branch with
    ``U^(-λ/2)``, where ``U^(μ) = e^{iμg} U e^{-iμg}``.  Then
    ``(I|U_λ^n|I) = Σ_q P(q) e^{iλq}`` with ``q`` the number of charges moved
    from the right half to the left half.  At ``lam == 0`` the result equals
    :func:`fold_gate` exactly.

    Raises:
        ConventionViolationError: if ``gate`` does not conserve the total charge.
    """
    if conv.local_dim != gate.local_dim:
        raise DimensionError("charge convention and gate disagree on the local dimension")
    if commutator_norm(gate, conv) > 1e-10:
        raise ConventionViolationError("gate does not commute with the total two-site charge")
    if lam == 0:
        return fold_gate(gate)
    ket = conjugated_gate(gate, conv, lam / 2.0)
    bra = conjugated_gate(gate, conv, -lam / 2.0)
    return FoldedGate(_fold(bra, ket, gate.local_dim), float(lam))


def tilt_components(gate: TwoSiteGate, conv: ChargeConvention) -> dict[float, CArray]:
    """Split the tilted folded gate by counting-field frequency.

    Returns ``{w: T_w}`` such that ``build_tilted_gate(gate, conv, lam).tensor``
    equals ``sum_w exp(1j * w * lam) * T_w``.  Frequencies are multiples of 1/2;
    only the combination of many gates restricts the total to integers.
    """
    d = gate.local_dim
    g2 = conv.generator_diagonal.reshape(d, d)
    # folded site index f = bra * d + ket; pair value g(bra pair) + g(ket pair)
    h = g2[:, None, :, None] + g2[None, :, None, :]
    h = h.reshape(d * d, d * d)
    freq = 0.5 * (h[None, None, :, :] - h[:, :, None, None])
    base = fold_gate(gate).tensor
    out: dict[float, CArray] = {}
    for w in np.unique(np.round(2 * freq) / 2):
        comp = np.where(np.isclose(freq, w), base, 0.0)
        if np.any(comp != 0):
            out[float(w)] = comp
    return out


def vectorized_identity(d: int) -> CArray:
    """``|I_1) = d^{-1/2} Σ_k |k>|k>``, the normalized vectorized identity."""
    if d < 2:
        raise InvalidConfigError(f"local dimension must be >= 2, got {d}")
    v = np.zeros(d * d, dtype=np.complex128)
    v[np.arange(d) * (d + 1)] = 1.0 / np.sqrt(d)
    return v


def vectorize(op: CArray) -> CArray:
    """Map an operator to its folded vector (index ``l * d + k`` for ``|k><l|``)."""
    return np.ascontiguousarray(np.asarray(op, dtype=np.complex128).T).ravel()


def left_multiplication(op: CArray) -> CArray:
    """Folded single-site superoperator ``conj(O) ⊗ 1`` as a (out, in) matrix."""
    op = np.asarray(op, dtype=np.complex128)
    return np.kron(op.conj(), np.eye(len(op)))


def close_with_identities(folded: FoldedGate) -> complex:
    """Contract all four legs of a folded gate with ``|I_1)``."""
    e = vectorized_identity(folded.local_dim)
    return complex(np.einsum("abcd,a,b,c,d->", folded.tensor, e, e, e, e))
