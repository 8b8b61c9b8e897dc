"""Left and right process tensors as temporal MPSs.

Site layout of a depth-``n`` process tensor (bottom to top)::

    a_0, b_0, a_1, b_1, ..., a_{n-1}, b_{n-1}

``a_t`` is the folded state the environment feeds into the central gate at
step ``t``; ``b_t`` is what the central gate hands back.  ``a_0`` is the
infinite-temperature pin and ``b_{n-1}`` the trace cap, both stored as
product tensors of shape ``(1, d*d, 1)``.  The no-intervention closure pairs
``a_t`` with ``b_t``.

Each site tensor has legs ``(bond_below, physical, bond_above)``.  Bonds
inside a pair ``(a_t, b_t)`` are inherited from the previous depth; bonds
between ``b_t`` and ``a_{t+1}`` are the ones compressed during growth.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

import numpy as np
import scipy.linalg

from .circuit import FoldedGate, GateParams, TwoSiteGate, fold_gate, vectorized_identity
from .errors import DegenerateEnvironmentError, DimensionError, IncompatibleTensorsError, InvalidConfigError
from .tensor import CArray, householder, svd, truncation_rank

# singular values below this fraction of the largest are numerically null and
# carry no direction worth preserving
_NULL_RTOL = 1e-14
# a cut inside a degenerate multiplet picks an arbitrary subspace and breaks
# the bra/ket (hermiticity) symmetry of the folded network
_MULTIPLET_RTOL = 1e-10
_DEGENERATE_NORM = 1e-300


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class CrossBlockMode(str, enum.Enum):
    """How the gauged bond matrix ``M = [[m00, r], [c, B]]`` is compressed.

    ``ZERO_CROSS`` keeps ``m00`` and a truncated ``B`` (block diagonal).
    ``KEEP_CROSS`` additionally keeps both ``r`` and ``c`` exactly.
    ``KEEP_COLUMN`` keeps the whole first column ``(m00, c)`` and a truncated
    ``B``; this is the column the future closure selects, so contracting the
    compressed tensor with the closure above the bond stays exact.
    """

    ZERO_CROSS = "zero-cross"
    KEEP_CROSS = "keep-cross"
    KEEP_COLUMN = "keep-column"


class Scheme(str, enum.Enum):
    PRESERVING = "preserving"
    NAIVE = "naive"


@dataclass(frozen=True)
class TruncationConfig:
    chi_max: int = 64
    cutoff: float = 1e-12
    cross_block_mode: CrossBlockMode = CrossBlockMode.KEEP_COLUMN
    scheme: Scheme = Scheme.PRESERVING

    def __post_init__(self):
        if int(self.chi_max) != self.chi_max or self.chi_max < 2:
            raise InvalidConfigError(f"chi_max must be an integer >= 2, got {self.chi_max}")
        if not np.isfinite(self.cutoff) or self.cutoff < 0:
            raise InvalidConfigError(f"cutoff must be a non-negative real, got {self.cutoff}")
        object.__setattr__(self, "chi_max", int(self.chi_max))
        object.__setattr__(self, "cross_block_mode", CrossBlockMode(self.cross_block_mode))
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def min_rank_budget(self) -> int:
        return {CrossBlockMode.KEEP_CROSS: 2}.get(self.cross_block_mode, 1)


def _readonly(a: CArray) -> CArray:
    a = np.array(a, dtype=np.complex128, copy=True, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TemporalMPS:
    """Process tensor of one side as a temporal MPS.

    Sites alternate ``a_0, b_0, a_1, b_1, ...`` with legs
    ``(bond_below, phys, bond_above)``.  ``discarded_weights`` holds one entry
    per compressed bond: the discarded singular values summed and divided by
    the largest one.
    """

    side: Side
    depth: int
    site_tensors: tuple[CArray, ...]
    gate_params: GateParams | None
    trunc_config: TruncationConfig
    discarded_weights: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        tensors = tuple(_readonly(t) for t in self.site_tensors)
        object.__setattr__(self, "site_tensors", tensors)
        object.__setattr__(self, "discarded_weights", tuple(float(w) for w in self.discarded_weights))
        if self.depth < 1:
            raise InvalidConfigError(f"depth must be >= 1, got {self.depth}")
        if len(tensors) != 2 * self.depth:
            raise DimensionError(f"expected {2 * self.depth} site tensors, got {len(tensors)}")
        for i, t in enumerate(tensors):
            if t.ndim != 3:
                raise DimensionError(f"site {i} has rank {t.ndim}, expected 3")
            if i and tensors[i - 1].shape[2] != t.shape[0]:
                raise DimensionError(f"bond mismatch between sites {i - 1} and {i}")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[2] != 1:
            raise DimensionError("outer bonds must have extent 1")

    @property
    def physical_dim(self) -> int:
        return self.site_tensors[0].shape[1]

    @property
    def chi_profile(self) -> list[int]:
        """Extents of the ``2n - 1`` internal bonds, bottom to top."""
        return [t.shape[2] for t in self.site_tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.chi_profile, default=1)

    @property
    def total_discarded_weight(self) -> float:
        return float(sum(self.discarded_weights))

    def num_parameters(self) -> int:
        return int(sum(t.size for t in self.site_tensors))


@dataclass(frozen=True)
class BondEnvironments:
    """Closure environments on either side of a bond.

    Both arrays have shape ``(chi, w)``: ``w = d*d`` when the bond cuts a
    closure pair (the open leg waits for its partner) and ``w = 1`` otherwise.
    """

    past: CArray
    future: CArray

    def overlap(self) -> complex:
        return complex(np.sum(self.past * self.future))


@dataclass(frozen=True)
class BondTruncation:
    below: CArray
    above: CArray
    discarded_weight: float


# ---------------------------------------------------------------------------
# construction


def _pin(d: int) -> CArray:
    return vectorized_identity(d).reshape(1, d * d, 1)


def init_process_tensor(
    gate: FoldedGate | None,
    side: Side | str,
    params: GateParams | None,
    cfg: TruncationConfig,
    local_dim: int = 2,
) -> TemporalMPS:
    """Depth-1 process tensor: the pin ``|I_1)`` and the cap ``(I_1|``.

    No environment gate lies inside the depth-1 light cone, so ``gate`` only
    fixes the local dimension when given.
    """
    if gate is not None:
        local_dim = gate.local_dim
    pin = _pin(local_dim)
    return TemporalMPS(Side(side), 1, (pin, pin), params, cfg, (0.0,))


def _right_canonical(tensors: list[CArray]) -> list[CArray]:
    out = list(tensors)
    for i in range(len(out) - 1, 0, -1):
        t = out[i]
        chl, p, chu = t.shape
        r, q = scipy.linalg.rq(t.reshape(chl, p * chu), mode="economic", check_finite=False)
        out[i] = q.reshape(q.shape[0], p, chu)
        out[i - 1] = np.tensordot(out[i - 1], r, axes=(2, 0))
    return out


def _pair_block(lo: CArray, hi: CArray, g: CArray) -> CArray:
    """Apply the folded environment gate to an old pair.

    ``lo``/``hi`` carry the old legs ``a'`` and ``b'``; ``g`` has legs
    ``(a', y, b', x)``.  Returns ``theta[bl, y, x, bu]``.
    """
    two = np.tensordot(lo, hi, axes=(2, 0))  # bl, a', b', bu
    th = np.tensordot(two, g, axes=([1, 2], [0, 2]))  # bl, bu, y, x
    return th.transpose(0, 2, 3, 1)


def _right_environments(old: list[CArray], g: CArray, d: int) -> list[CArray]:
    """``R[k][bl, y]``: closure of new pairs ``k..n-1`` plus the cap."""
    n = len(old) // 2
    envs: list[CArray] = [None] * (n + 1)  # type: ignore[list-item]
    envs[n] = vectorized_identity(d).reshape(1, d * d)
    for k in range(n - 1, -1, -1):
        th = _pair_block(old[2 * k], old[2 * k + 1], g)
        envs[k] = np.tensordot(th, envs[k + 1], axes=([2, 3], [1, 0]))
    return envs


def grow(pt: TemporalMPS, gate: FoldedGate, cfg: TruncationConfig | None = None) -> TemporalMPS:
    """Extend ``pt`` by one time step.

    ``gate`` is the untilted folded gate as seen from ``pt``'s side (for a
    right process tensor pass the gate with its sites exchanged).  The new
    column of environment gates is applied pair by pair from bottom to top and
    every freshly created bond is compressed on the way.
    """
    cfg = cfg or pt.trunc_config
    if gate.tilt != 0.0:
        raise InvalidConfigError("process tensors are grown with the untilted gate")
    dd = pt.physical_dim
    d = int(round(np.sqrt(dd)))
    if gate.tensor.shape[0] != dd:
        raise DimensionError("gate and process tensor disagree on the local dimension")
    n = pt.depth
    g = gate.tensor
    old = _right_canonical([np.asarray(t) for t in pt.site_tensors])
    fut = _right_environments(old, g, d)

    new_sites: list[CArray] = [_pin(d)]
    weights: list[float] = []
    past = vectorized_identity(d).reshape(1, dd)  # P[bl, y]
    for t in range(n):
        th = _pair_block(old[2 * t], old[2 * t + 1], g)
        chl, _, _, chu = th.shape
        theta = th.reshape(chl * dd, dd * chu)
        fv = fut[t + 1].T.reshape(dd * chu)
        envs = BondEnvironments(past.reshape(chl * dd, 1), fv.reshape(-1, 1))
        if cfg.scheme is Scheme.NAIVE:
            res = truncate_bond_naive(theta, cfg)
        else:
            res = truncate_bond_normalized(theta, envs, cfg)
        weights.append(res.discarded_weight)
        k = res.below.shape[1]
        below = res.below.reshape(chl, dd, k)
        above = res.above.reshape(k, dd, chu)
        if t < n - 1:
            # inherited bond: an SVD instead of QR drops numerically null directions
            uq, sq, vq = svd(above.reshape(k * dd, chu))
            keep = max(1, int(np.count_nonzero(sq > _NULL_RTOL * sq[0]))) if len(sq) else 0
            above = uq[:, :keep].reshape(k, dd, keep)
            r = sq[:keep, None] * vq[:keep]
            old[2 * t + 2] = np.tensordot(r, old[2 * t + 2], axes=(1, 0))
        new_sites.append(below)
        new_sites.append(above)
        # P[r, x] for the next pair
        tmp = np.tensordot(past, below, axes=([0, 1], [0, 1]))  # k
        past = np.tensordot(tmp, above, axes=(0, 0))  # x, r
        past = past.T
    new_sites.append(_pin(d))
    return TemporalMPS(
        pt.side, n + 1, tuple(new_sites), pt.gate_params, cfg, pt.discarded_weights + tuple(weights)
    )


# ---------------------------------------------------------------------------
# truncation


def truncate_bond_naive(theta: CArray, cfg: TruncationConfig) -> BondTruncation:
    """Plain truncated SVD; does not protect the normalization."""
    u, s, vh = svd(theta)
    k = max(1, truncation_rank(s, cfg.chi_max, cfg.cutoff))
    return BondTruncation(u[:, :k], s[:k, None] * vh[:k], float(np.sum(s[k:]) / s[0]) if len(s) else 0.0)


def truncate_bond_normalized(
    theta: CArray, envs: BondEnvironments, cfg: TruncationConfig
) -> BondTruncation:
    """Compress ``theta`` while keeping its closure overlap exact.

    ``theta`` is the bond matrix with rows ``(bond_below, phys)`` and columns
    ``(phys, bond_above)``; ``envs.past`` and ``envs.future`` are the closure
    vectors over rows and columns.  The SVD basis is rotated so that both
    closures select the first basis vector; the entry ``M[0, 0]`` (and, by
    mode, its row and column) is then kept exactly and only the orthogonal
    block is truncated.

    Raises:
        DegenerateEnvironmentError: if a closure has no weight on the bond.
    """
    theta = np.asarray(theta, dtype=np.complex128)
    pv = np.asarray(envs.past, dtype=np.complex128).reshape(-1)
    fv = np.asarray(envs.future, dtype=np.complex128).reshape(-1)
    if pv.shape[0] != theta.shape[0] or fv.shape[0] != theta.shape[1]:
        raise DimensionError("environment vectors do not match the bond matrix")
    u, s, vh = svd(theta)
    if len(s) == 0 or s[0] == 0.0:
        raise DegenerateEnvironmentError("bond matrix vanishes")
    r = int(np.count_nonzero(s > _NULL_RTOL * s[0]))
    null_weight = float(np.sum(s[r:])) / float(s[0])
    u, s, vh = u[:, :r], s[:r], vh[:r]

    p = pv @ u
    f = vh @ fv
    for name, v in (("past", p), ("future", f)):
        nv = np.linalg.norm(v)
        if not np.isfinite(nv) or nv < _DEGENERATE_NORM:
            raise DegenerateEnvironmentError(f"{name} closure has norm {nv:g} on this bond")
    if cfg.cross_block_mode is CrossBlockMode.KEEP_COLUMN:
        return _keep_column(u, s, vh, p, f, cfg, null_weight)
    wp = householder(p).matrix()
    wf = householder(f).matrix()
    # theta = (u wp^T) m (wf vh), with both closures selecting m[0, 0]
    m = (wp.conj() * s[None, :]) @ wf.conj().T

    budget = cfg.chi_max - cfg.min_rank_budget
    b = m[1:, 1:]
    ub, sb, vbh = svd(b) if b.size else (np.zeros((r - 1, 0)), np.zeros(0), np.zeros((0, r - 1)))
    k = truncation_rank(sb, budget, cfg.cutoff, float(s[0]), _MULTIPLET_RTOL) if budget > 0 else 0
    discarded = float(np.sum(sb[k:])) / float(s[0]) + null_weight
    ub, sbk, vbh = ub[:, :k], sb[:k], vbh[:k]

    e0 = np.zeros((r, 1), dtype=np.complex128)
    e0[0, 0] = 1.0
    lower_x = np.zeros((r, k), dtype=np.complex128)
    lower_x[1:] = ub
    lower_y = np.zeros((k, r), dtype=np.complex128)
    lower_y[:, 1:] = sbk[:, None] * vbh
    if cfg.cross_block_mode is CrossBlockMode.ZERO_CROSS:
        x = np.hstack([e0, lower_x])
        y = np.vstack([m[0:1, 0:1] * e0.T, lower_y])
    else:
        row = m[0:1].copy()
        row[0, 0] = 0.0
        x = np.hstack([m[:, 0:1], e0, lower_x])
        y = np.vstack([e0.T, row, lower_y])
    # orthonormalize the lower factor so the bond is left-canonical
    qx, rx = scipy.linalg.qr(x, mode="economic", check_finite=False)
    y = rx @ y
    below = (u @ wp.T) @ qx
    above = y @ (wf @ vh)
    return BondTruncation(below, above, discarded)


def _keep_column(u, s, vh, p, f, cfg: TruncationConfig, null_weight: float) -> BondTruncation:
    # theta @ future in the singular basis; its direction is kept exactly and
    # the remainder is compressed to chi_max - 1 further directions
    v = s * f
    q0 = v / np.linalg.norm(v)
    # phase: the closure overlap of the first bond vector is real positive
    ph = p @ q0
    if abs(ph) > 0:
        q0 = q0 * (abs(ph) / ph)
    rest = s[None, :] * np.eye(len(s)) - np.outer(q0, q0.conj() * s)
    ub, sb, _ = svd(rest)
    k = truncation_rank(sb, cfg.chi_max - 1, cfg.cutoff, float(s[0]), _MULTIPLET_RTOL)
    q = np.hstack([q0[:, None], ub[:, :k]])
    q, _ = scipy.linalg.qr(q, mode="economic", check_finite=False)
    # QR may flip the phase of the first column; undo it
    q[:, 0] *= (q0.conj() @ q[:, 0]).conj() / abs(q0.conj() @ q[:, 0])
    below = u @ q
    above = (q.conj().T * s[None, :]) @ vh
    return BondTruncation(below, above, float(np.sum(sb[k:])) / float(s[0]) + null_weight)


# ---------------------------------------------------------------------------
# closures


def _pair_closure(env: CArray, lo: CArray, hi: CArray) -> CArray:
    """Advance a closure vector over one pair ``(a_t, b_t)`` with ``a_t = b_t``."""
    tmp = np.tensordot(env, lo, axes=(0, 0))  # a, k
    return np.tensordot(tmp, hi, axes=([0, 1], [1, 0]))


def no_intervention_norm(pt: TemporalMPS) -> complex:
    """Contract every pair ``(a_t, b_t)`` with the identity channel."""
    env = np.ones(1, dtype=np.complex128)
    ts = pt.site_tensors
    for t in range(pt.depth):
        env = _pair_closure(env, ts[2 * t], ts[2 * t + 1])
    return complex(env[0])


def bond_environments(pt: TemporalMPS, bond_index: int) -> BondEnvironments:
    """Closure environments of the bond between sites ``bond_index`` and ``bond_index + 1``."""
    ts = pt.site_tensors
    nb = len(ts) - 1
    if not 0 <= bond_index < nb:
        raise InvalidConfigError(f"bond index must lie in [0, {nb - 1}], got {bond_index}")
    cut_pair = bond_index % 2 == 0
    env = np.ones(1, dtype=np.complex128)
    for t in range(bond_index // 2 + (0 if cut_pair else 1)):
        env = _pair_closure(env, ts[2 * t], ts[2 * t + 1])
    if cut_pair:
        past = np.tensordot(env, ts[bond_index], axes=(0, 0)).T  # chi, a
    else:
        past = env.reshape(-1, 1)
    top = np.ones(1, dtype=np.complex128)
    first_full = bond_index // 2 + 1
    for t in range(pt.depth - 1, first_full - 1, -1):
        top = np.tensordot(np.tensordot(ts[2 * t + 1], top, axes=(2, 0)), ts[2 * t], axes=([1, 0], [1, 2]))
    if cut_pair:
        future = np.tensordot(ts[bond_index + 1], top, axes=(2, 0))  # chi, b
    else:
        future = top.reshape(-1, 1)
    return BondEnvironments(past, future)


# ---------------------------------------------------------------------------
# both sides


def mirror(pt: TemporalMPS) -> TemporalMPS:
    """Reinterpret a process tensor as the one of the reflected circuit.

    Reflection exchanges the two halves and the two sites of every gate, so
    the left process tensor of a gate is the right one of its swapped gate.
    The tensors themselves are unchanged.
    """
    other = Side.RIGHT if pt.side is Side.LEFT else Side.LEFT
    return replace(pt, side=other)


def side_gate(gate: TwoSiteGate, side: Side | str) -> FoldedGate:
    """Folded environment gate as seen from ``side``."""
    return fold_gate(gate if Side(side) is Side.LEFT else gate.swapped())


def iterate_process_tensors(
    gate: TwoSiteGate, cfg: TruncationConfig, max_depth: int
) -> Iterator[tuple[TemporalMPS, TemporalMPS]]:
    """Yield ``(left, right)`` for depths ``1..max_depth``.

    Only the current depth is kept in memory.  A swap-symmetric gate has
    identical left and right tensors and is grown once.
    """
    if max_depth < 1:
        raise InvalidConfigError(f"depth must be >= 1, got {max_depth}")
    symmetric = gate.is_swap_symmetric()
    gl = side_gate(gate, Side.LEFT)
    gr = gl if symmetric else side_gate(gate, Side.RIGHT)
    left = init_process_tensor(gl, Side.LEFT, gate.params, cfg)
    right = mirror(left) if symmetric else init_process_tensor(gr, Side.RIGHT, gate.params, cfg)
    for n in range(1, max_depth + 1):
        if n > 1:
            left = grow(left, gl, cfg)
            right = mirror(left) if symmetric else grow(right, gr, cfg)
        yield left, right


def build_process_tensors(
    gate: TwoSiteGate, cfg: TruncationConfig, depth: int
) -> tuple[TemporalMPS, TemporalMPS]:
    for pair in iterate_process_tensors(gate, cfg, depth):
        last = pair
    return last


def check_compatible(left: TemporalMPS, right: TemporalMPS, depth: int | None = None) -> None:
    if left.side is not Side.LEFT or right.side is not Side.RIGHT:
        raise IncompatibleTensorsError("expected a left and a right process tensor")
    if left.depth != right.depth:
        raise IncompatibleTensorsError(f"depths differ: {left.depth} vs {right.depth}")
    if left.gate_params != right.gate_params:
        raise IncompatibleTensorsError("process tensors were built for different gates")
    if left.physical_dim != right.physical_dim:
        raise IncompatibleTensorsError("local dimensions differ")
    if depth is not None and left.depth < depth:
        raise IncompatibleTensorsError(f"need depth >= {depth}, tensors have {left.depth}")


__all__: Sequence[str] = (
    "BondEnvironments",
    "BondTruncation",
    "CrossBlockMode",
    "Scheme",
    "Side",
    "TemporalMPS",
    "TruncationConfig",
    "bond_environments",
    "build_process_tensors",
    "check_compatible",
    "grow",
    "init_process_tensor",
    "iterate_process_tensors",
    "mirror",
    "no_intervention_norm",
    "side_gate",
    "truncate_bond_naive",
    "truncate_bond_normalized",
)
