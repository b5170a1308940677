"""Quantum statistical-query learning laboratory.

Pauli algebra, a dense small-system simulator, tolerance-tau query oracles, learners for
few-body observables and shallow circuits, noise tooling and Monte-Carlo experiments.
"""

from .errors import ConfigurationError, InconsistentPriorError, QSQLabError, ResourceLimitError
from .noise import (
    NoiseEstimate,
    RobustWrapConfig,
    calibrate_c_est,
    estimate_depolarizing,
    wrap_robust,
)
from .observable_learner import (
    LearnedObservable,
    LearnObservableParams,
    exhaustive_alphas,
    learn_observable,
    query_budget,
)
from .oracles import (
    KQPStatOracle,
    OracleConfig,
    QPStatOracle,
    QStatOracle,
    QueryLedger,
    flip_operator,
)
from .pauli import (
    ObservableSum,
    PauliString,
    ProductStabState,
    enumerate_low_weight,
    expectation_stab,
    observable_infinity_norm,
    pauli_decompose,
    pauli_product,
    sample_stab_product,
)
from .shallow_learner import (
    LearnedCircuitModel,
    ReconstructedChannel,
    ShallowLearnParams,
    learn_heisenberg_observables,
    reconstruct_channel,
    verify_model,
)

__version__ = "0.1.0"
