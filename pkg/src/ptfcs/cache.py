"""On-disk cache of process tensors, keyed by gate and truncation settings.

Layout::

    <root>/.lock
    <root>/<key>/key.json
    <root>/<key>/{left,right}_<depth>.ptmps

Tensors do not depend on the counting field, so one cached pair serves
every λ grid and every observable.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Iterator

from filelock import FileLock, Timeout

from .circuit import GateParams, TwoSiteGate
from .errors import CacheMismatchError, PersistenceError
from .io import read_ptmps, write_ptmps
from .process_tensor import (
    Side,
    TemporalMPS,
    TruncationConfig,
    grow,
    init_process_tensor,
    mirror,
    side_gate,
)


def cache_key(params: GateParams, cfg: TruncationConfig) -> dict:
    return {
        "j": float(params.j),
        "jprime": float(params.jprime),
        "local_dim": params.local_dim,
        "chi_max": cfg.chi_max,
        "cutoff": float(cfg.cutoff),
        "cross_block_mode": cfg.cross_block_mode.value,
        "scheme": cfg.scheme.value,
    }


def _digest(key: dict) -> str:
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:16]


class ProcessTensorCache:
    """Exclusive handle on a cache directory; use as a context manager."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = FileLock(str(self.root / ".lock"))

    def __enter__(self) -> "ProcessTensorCache":
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            self._lock.acquire(timeout=0)
        except Timeout:
            raise PersistenceError(f"cache {self.root} is locked by another process") from None
        except OSError as exc:
            raise PersistenceError(f"cannot open cache {self.root}: {exc}") from exc
        return self

    def __exit__(self, *exc) -> None:
        self._lock.release()

    def entry_dir(self, params: GateParams, cfg: TruncationConfig) -> Path:
        key = cache_key(params, cfg)
        d = self.root / _digest(key)
        meta = d / "key.json"
        if meta.exists():
            stored = json.loads(meta.read_text())
            if stored != key:
                raise CacheMismatchError(f"cache entry {d} holds {stored}, expected {key}")
        else:
            d.mkdir(parents=True, exist_ok=True)
            meta.write_text(json.dumps(key, sort_keys=True, indent=1) + "\n")
        return d

    @staticmethod
    def _path(d: Path, side: Side, depth: int) -> Path:
        return d / f"{side.value}_{depth}.ptmps"

    def depths(self, params: GateParams, cfg: TruncationConfig, side: Side) -> list[int]:
        d = self.entry_dir(params, cfg)
        pat = re.compile(rf"{side.value}_(\d+)\.ptmps$")
        return sorted(int(m.group(1)) for p in d.iterdir() if (m := pat.match(p.name)))

    def load(self, params: GateParams, cfg: TruncationConfig, side: Side, depth: int) -> TemporalMPS:
        pt = read_ptmps(self._path(self.entry_dir(params, cfg), side, depth))
        if pt.gate_params != params or pt.trunc_config != cfg or pt.side is not side or pt.depth != depth:
            raise CacheMismatchError(f"cached {side.value} tensor at depth {depth} does not match the request")
        return pt

    def store(self, pt: TemporalMPS) -> Path:
        if pt.gate_params is None:
            raise CacheMismatchError("only tensors with gate parameters can be cached")
        d = self.entry_dir(pt.gate_params, pt.trunc_config)
        return write_ptmps(pt, self._path(d, pt.side, pt.depth))


def walk_depths(
    gate: TwoSiteGate,
    cfg: TruncationConfig,
    max_depth: int,
    cache: ProcessTensorCache | None = None,
    save_every: int = 0,
    start_at: int = 1,
    resume: bool = False,
) -> Iterator[tuple[TemporalMPS, TemporalMPS]]:
    """Yield ``(left, right)`` for depths ``start_at..max_depth``.

    With a cache, growth restarts from the deepest stored pair not beyond
    ``start_at`` and the final pair (plus every ``save_every``-th) is stored.
    ``resume=True`` instead restarts from the deepest stored pair not beyond
    ``max_depth`` and yields from there on, skipping shallower depths.
    """
    params = gate.params
    symmetric = gate.is_swap_symmetric()
    gl = side_gate(gate, Side.LEFT)
    gr = gl if symmetric else side_gate(gate, Side.RIGHT)
    left = right = None
    if cache is not None and params is not None:
        common = set(cache.depths(params, cfg, Side.LEFT))
        common &= set(cache.depths(params, cfg, Side.RIGHT))
        limit = max_depth if resume else max(start_at, 1)
        usable = [n for n in common if n <= limit]
        if usable:
            n0 = max(usable)
            left = cache.load(params, cfg, Side.LEFT, n0)
            right = cache.load(params, cfg, Side.RIGHT, n0)
    if left is None:
        left = init_process_tensor(gl, Side.LEFT, params, cfg)
        right = mirror(left) if symmetric else init_process_tensor(gr, Side.RIGHT, params, cfg)
    while True:
        n = left.depth
        if n >= start_at or resume:
            if cache is not None and params is not None:
                if n == max_depth or (save_every and n % save_every == 0):
                    cache.store(left)
                    cache.store(right)
            yield left, right
        if n >= max_depth:
            return
        left = grow(left, gl, cfg)
        right = mirror(left) if symmetric else grow(right, gr, cfg)
