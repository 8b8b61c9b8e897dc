import os
import sys

import numpy as np
import pytest

from ptfcs.circuit import ChargeConvention, GateParams, build_xxz_gate, gate_from_hamiltonian
from ptfcs.process_tensor import CrossBlockMode, Scheme, Side, TemporalMPS, TruncationConfig

EXTENDED = os.environ.get("PTFCS_EXTENDED", "") not in ("", "0")


def pytest_collection_modifyitems(config, items):
    if EXTENDED:
        return
    skip = pytest.mark.skip(reason="extended runtime; set PTFCS_EXTENDED=1")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdicts, one line per criterion."""
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "VERDICTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)


@pytest.fixture
def conv():
    return ChargeConvention.xxz()


@pytest.fixture
def rng():
    return np.random.default_rng(20260418)


def xxz(j, jp):
    return build_xxz_gate(GateParams(j, jp))


def random_charge_conserving_gate(rng):
    """exp(-i h) with h block-diagonal in the total up-spin number."""
    h = np.zeros((4, 4), dtype=complex)
    h[0, 0], h[3, 3] = rng.normal(size=2)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h[1:3, 1:3] = a + a.conj().T
    return gate_from_hamiltonian(h)


def random_temporal_mps(rng, depth=None) -> TemporalMPS:
    """Arbitrary complex tensors and settings; only the container is exercised."""
    depth = depth or int(rng.integers(1, 5))
    n = 2 * depth
    bonds = [1] + [int(rng.integers(1, 6)) for _ in range(n - 1)] + [1]
    tensors = [
        rng.normal(size=(bonds[i], 4, bonds[i + 1])) + 1j * rng.normal(size=(bonds[i], 4, bonds[i + 1]))
        for i in range(n)
    ]
    cfg = TruncationConfig(
        chi_max=int(rng.integers(2, 100)),
        cutoff=float(rng.choice([0.0, 1e-12, 1e-8])),
        cross_block_mode=list(CrossBlockMode)[int(rng.integers(0, len(CrossBlockMode)))],
        scheme=list(Scheme)[int(rng.integers(0, len(Scheme)))],
    )
    params = GateParams(float(rng.normal()), float(rng.normal())) if rng.random() < 0.8 else None
    side = Side.LEFT if rng.random() < 0.5 else Side.RIGHT
    return TemporalMPS(side, depth, tuple(tensors), params, cfg, tuple(rng.random(int(rng.integers(0, 6)))))


def same_temporal_mps(a: TemporalMPS, b: TemporalMPS) -> bool:
    """Bit-level equality of tensors and metadata."""
    return (
        a.side is b.side
        and a.depth == b.depth
        and a.gate_params == b.gate_params
        and a.trunc_config == b.trunc_config
        and a.discarded_weights == b.discarded_weights
        and len(a.site_tensors) == len(b.site_tensors)
        and all(x.shape == y.shape and x.tobytes() == y.tobytes() for x, y in zip(a.site_tensors, b.site_tensors))
    )
