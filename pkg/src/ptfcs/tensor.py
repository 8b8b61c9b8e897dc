"""Dense complex tensor algebra.

Tensors are plain C-ordered ``numpy`` arrays of ``complex128`` (row-major,
last index fastest); every leg ordering elsewhere in the package is defined
relative to that layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .errors import DegenerateEnvironmentError, DimensionError, InvalidConfigError

CArray = NDArray[np.complex128]

# norm below which a vector cannot define a rotation
_DEGENERATE_NORM = 1e-300


def as_tensor(data, shape: Sequence[int] | None = None) -> CArray:
    """Return ``data`` as a contiguous complex128 array, optionally reshaped."""
    arr = np.ascontiguousarray(data, dtype=np.complex128)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if any(s <= 0 for s in shape):
            raise DimensionError(f"extents must be positive, got {shape}")
        if int(np.prod(shape)) != arr.size:
            raise DimensionError(f"cannot view {arr.size} entries as shape {shape}")
        arr = arr.reshape(shape)
    return arr


def contract(a: CArray, legs_a: Sequence[int], b: CArray, legs_b: Sequence[int]) -> CArray:
    """Sum over paired legs of ``a`` and ``b``.

    The result carries the remaining legs of ``a`` (in order) followed by the
    remaining legs of ``b``.

    Raises:
        DimensionError: if the leg lists differ in length or a paired extent
            does not match.
    """
    legs_a = list(legs_a)
    legs_b = list(legs_b)
    if len(legs_a) != len(legs_b):
        raise DimensionError("leg lists must have equal length")
    for la, lb in zip(legs_a, legs_b):
        if a.shape[la] != b.shape[lb]:
            raise DimensionError(
                f"leg {la} of a has extent {a.shape[la]} but leg {lb} of b has {b.shape[lb]}"
            )
    return np.tensordot(a, b, axes=(legs_a, legs_b))


@dataclass(frozen=True)
class SvdResult:
    """``m ≈ left_isometry @ diag(singular_values) @ right_isometry.conj().T``."""

    left_isometry: CArray
    singular_values: NDArray[np.float64]
    right_isometry: CArray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return len(self.singular_values)

    def reconstruct(self) -> CArray:
        return (self.left_isometry * self.singular_values) @ self.right_isometry.conj().T


def svd(m: CArray) -> tuple[CArray, NDArray[np.float64], CArray]:
    """Economic SVD, falling back to the slower QR-iteration driver if gesdd fails."""
    try:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd", check_finite=False)


def truncation_rank(
    s: NDArray[np.float64],
    chi_max: int,
    cutoff: float,
    scale: float | None = None,
    multiplet_rtol: float = 0.0,
) -> int:
    """Number of leading singular values kept.

    Values below ``cutoff * scale`` are dropped (``scale`` defaults to the
    largest value of ``s``); at most ``chi_max`` survive.  With
    ``multiplet_rtol > 0`` the cut is moved down until it no longer splits a
    group of values equal to that relative tolerance; otherwise ties at the
    boundary are resolved by position in ``s``.
    """
    if len(s) == 0:
        return 0
    if scale is None:
        scale = float(s[0])
    keep = int(np.count_nonzero(s >= cutoff * scale)) if cutoff > 0 else len(s)
    k = min(keep, chi_max)
    if multiplet_rtol > 0:
        while 0 < k < len(s) and s[k] > 0 and s[k - 1] - s[k] <= multiplet_rtol * s[k - 1]:
            k -= 1
    return k


def svd_truncated(m: CArray, chi_max: int, cutoff: float = 0.0) -> SvdResult:
    """Truncated singular value decomposition.

    Keeps at most ``chi_max`` singular values and drops any value smaller than
    ``cutoff`` times the largest one.  The spectral-norm reconstruction error
    equals the largest discarded singular value.
    """
    if chi_max < 1:
        raise InvalidConfigError(f"chi_max must be positive, got {chi_max}")
    if cutoff < 0:
        raise InvalidConfigError(f"cutoff must be non-negative, got {cutoff}")
    u, s, vh = svd(np.asarray(m, dtype=np.complex128))
    k = truncation_rank(s, chi_max, cutoff)
    return SvdResult(
        left_isometry=u[:, :k],
        singular_values=s[:k],
        right_isometry=vh[:k].conj().T,
        discarded_weight=float(np.sum(s[k:])),
    )


@dataclass(frozen=True)
class Householder:
    """Unitary ``W = diag(phase, 1, ..., 1) (1 - 2 u u^†)`` with ``W v = |v| e_0``.

    Stored implicitly so it can be applied to tall matrices in O(rows * len(v)).
    """

    u: CArray
    phase: complex

    @property
    def size(self) -> int:
        return len(self.u)

    def matrix(self) -> CArray:
        w = np.eye(self.size, dtype=np.complex128) - 2.0 * np.outer(self.u, self.u.conj())
        w[0] *= self.phase
        return w

    def apply(self, x: CArray) -> CArray:
        """``W @ x`` for a vector or a matrix with ``size`` rows."""
        y = x - 2.0 * np.outer(self.u, self.u.conj() @ x).reshape(x.shape)
        y[0] *= self.phase
        return y

    def apply_right(self, x: CArray) -> CArray:
        """``x @ W`` for a matrix with ``size`` columns."""
        x = np.array(x, dtype=np.complex128, copy=True)
        x[..., 0] *= self.phase
        return x - 2.0 * np.multiply.outer(x @ self.u, self.u.conj())


def householder(v: CArray) -> Householder:
    """Rotation taking ``v`` onto the positive real multiple of the first basis vector."""
    v = np.asarray(v, dtype=np.complex128).ravel()
    norm = float(np.linalg.norm(v))
    if not np.isfinite(norm) or norm < _DEGENERATE_NORM:
        raise DegenerateEnvironmentError(f"cannot align a vector of norm {norm:g}")
    x0 = v[0]
    # via the angle: x0 / |x0| is NaN for subnormal x0
    sign = np.exp(1j * np.angle(x0)) if x0 != 0 else 1.0 + 0.0j
    # reflect onto -sign*|v| e0, avoiding cancellation in u
    alpha = -sign * norm
    u = v.copy()
    u[0] -= alpha
    u /= np.linalg.norm(u)
    # (1 - 2uu^†) v = alpha e0; the phase row maps alpha to |v|
    return Householder(u=u, phase=np.conj(alpha) / norm)


def vector_to_e1_unitary(v: CArray) -> CArray:
    """Unitary ``W`` with ``W @ v = (|v|, 0, ..., 0)``.

    Built from a single Householder reflection followed by a phase on the first
    row, so the surviving component is real and positive.

    Raises:
        DegenerateEnvironmentError: if ``|v| < 1e-300``.
    """
    return householder(v).matrix()
