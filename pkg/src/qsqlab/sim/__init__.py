"""Dense small-system simulation: circuits, channels, Haar sampling and distances."""

from .channels import (
    Channel,
    DenseSuperop,
    DepolarizedUnitary,
    UnitaryChannel,
    apply_channel,
    apply_on_register,
    apply_tensor_power,
    channel_ptm,
    choi,
    depolarizing,
    identity_channel,
    maximally_depolarizing,
    maximally_entangled,
    random_density,
)
from .circuits import (
    BrickworkCircuit,
    Gate,
    HeisenbergObservable,
    brickwork_pairs,
    build_rqc,
    heisenberg_evolve,
    heisenberg_evolve_pauli,
    light_cone,
)
from .distances import (
    DiamondValue,
    d_avg,
    d_avg_mc,
    diamond_depolarized,
    diamond_lower_bound,
    diamond_unitary_pair,
    gamma_for_diamond_norm,
    purity,
    trace_norm,
)
from .haar import haar_state, haar_unitary

__all__ = [
    "BrickworkCircuit",
    "Channel",
    "DenseSuperop",
    "DepolarizedUnitary",
    "DiamondValue",
    "Gate",
    "HeisenbergObservable",
    "UnitaryChannel",
    "apply_channel",
    "apply_on_register",
    "apply_tensor_power",
    "brickwork_pairs",
    "build_rqc",
    "channel_ptm",
    "choi",
    "d_avg",
    "d_avg_mc",
    "depolarizing",
    "diamond_depolarized",
    "diamond_lower_bound",
    "diamond_unitary_pair",
    "gamma_for_diamond_norm",
    "haar_state",
    "haar_unitary",
    "heisenberg_evolve",
    "heisenberg_evolve_pauli",
    "identity_channel",
    "light_cone",
    "maximally_depolarizing",
    "maximally_entangled",
    "purity",
    "random_density",
    "trace_norm",
]
