"""Full counting statistics of charge transfer in brickwork circuits via process tensors."""

__version__ = "0.1.0"

from .circuit import (  # noqa: E402
    PAULI_Z,
    ChargeConvention,
    FoldedGate,
    GateParams,
    TwoSiteGate,
    build_tilted_gate,
    build_xxz_gate,
    fold_gate,
)
from .errors import *  # noqa: E402,F401,F403
from .fcs import (  # noqa: E402
    ChargeDistribution,
    Cumulants,
    CumulantSeries,
    FcsTable,
    charge_distribution,
    correlator_series,
    cumulants_from_distribution,
    cumulants_taylor,
    local_correlator,
    mgf,
    mgf_grid,
    mgf_values,
)
from .process_tensor import (  # noqa: E402
    CrossBlockMode,
    Scheme,
    Side,
    TemporalMPS,
    TruncationConfig,
    build_process_tensors,
    grow,
    init_process_tensor,
    iterate_process_tensors,
    no_intervention_norm,
)
