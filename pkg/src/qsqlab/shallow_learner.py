"""Learning a shallow circuit through its 3n Heisenberg-evolved single-qubit Paulis.

``QPStat(rho, P_i, tau)`` on a unitary ``U`` is the same query as ``QStat`` of
``U^dag P_i U``, so each of the 3n observables is learned with the few-body observable
learner at accuracy ``epsilon / 6n`` and confidence ``1 - delta / 3n``, every one from a
fresh query set. The learned observables determine the Pauli-transfer matrix of
``U^dag`` column by column, and the model channel is its transpose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from . import _caps
from .errors import ConfigurationError
from .observable_learner import (
    LearnedObservable,
    LearnObservableParams,
    learn_observable,
    query_budget,
)
from .oracles import OracleConfig, QPStatOracle
from .pauli import ObservableSum, PauliString, pauli_coefficients
from .serialize import decode_array, encode_array
from .sim.channels import Channel, DenseSuperop, UnitaryChannel
from .sim.circuits import light_cone
from .sim.distances import d_avg
from .sim.haar import haar_state

SUPPORT_MODES = ("unknown-support", "geometric")
_RECON_CHUNK = 256


@dataclass(frozen=True)
class ShallowLearnParams:
    n: int
    d: int
    epsilon: float
    delta: float
    support_mode: str = "unknown-support"
    k_cap: int | None = None

    def __post_init__(self):
        if self.n < 2 or self.d < 1:
            raise ConfigurationError("need n >= 2 and d >= 1")
        if self.support_mode not in SUPPORT_MODES:
            raise ConfigurationError(f"unknown support mode {self.support_mode!r}")
        if not 0 < self.epsilon <= 1 or not 0 < self.delta < 1:
            raise ConfigurationError("epsilon must lie in (0, 1] and delta in (0, 1)")
        cone_bound = min(self.n, 2 * self.d)
        if self.k_cap is None:
            object.__setattr__(self, "k_cap", cone_bound)
        if not 1 <= self.k_cap <= self.n:
            raise ConfigurationError(f"k_cap must lie in [1, n], got {self.k_cap}")
        if self.support_mode == "geometric" and self.k_cap < cone_bound:
            raise ConfigurationError(f"geometric mode needs k_cap >= min(n, 2d) = {cone_bound}")

    @property
    def epsilon_each(self) -> float:
        return self.epsilon / (6 * self.n)

    @property
    def delta_each(self) -> float:
        return self.delta / (3 * self.n)

    def sub_params(self, site: int) -> LearnObservableParams:
        if self.support_mode == "geometric":
            cone = light_cone(self.n, self.d, [site])
            return LearnObservableParams(
                self.n, min(self.k_cap, len(cone)), self.epsilon_each, self.delta_each, cone
            )
        return LearnObservableParams(self.n, self.k_cap, self.epsilon_each, self.delta_each)

    def oracle_tau(self) -> float:
        """Largest oracle tolerance every sub-run accepts: ``(eps/6n) / (4 (6 sqrt 2)**k_cap)``."""
        return self.epsilon_each / (4 * (6 * math.sqrt(2)) ** self.k_cap)

    def expected_queries(self) -> int:
        return sum(query_budget(self.sub_params(i)).N for i in range(self.n)) * 3

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "support_mode": self.support_mode,
            "k_cap": self.k_cap,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ShallowLearnParams":
        return cls(
            int(data["n"]),
            int(data["d"]),
            float(data["epsilon"]),
            float(data["delta"]),
            data["support_mode"],
            int(data["k_cap"]),
        )


@dataclass
class LearnedCircuitModel:
    params: ShallowLearnParams
    observables: dict[tuple[int, str], LearnedObservable] = field(repr=False)
    ledger_total: int = 0

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def per_observable_budget(self) -> tuple[float, float]:
        return (self.params.epsilon_each, self.params.delta_each)

    def estimate(self, site: int, pauli: str) -> ObservableSum:
        return self.observables[(site, pauli)].estimate

    def to_json(self) -> dict:
        return {
            "params": self.params.to_json(),
            "ledger_total": self.ledger_total,
            "per_observable_budget": list(self.per_observable_budget),
            "observables": [
                {"site": i, "pauli": p, "learned": obs.to_json()}
                for (i, p), obs in sorted(self.observables.items())
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "LearnedCircuitModel":
        return cls(
            ShallowLearnParams.from_json(data["params"]),
            {
                (int(e["site"]), e["pauli"]): LearnedObservable.from_json(e["learned"])
                for e in data["observables"]
            },
            int(data["ledger_total"]),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, LearnedCircuitModel):
            return NotImplemented
        return (
            self.params == other.params
            and self.ledger_total == other.ledger_total
            and self.observables == other.observables
        )


def learn_heisenberg_observables(
    oracle,
    params: ShallowLearnParams,
    seed: int | np.random.SeedSequence = 0,
    sampling: str = "iid",
) -> LearnedCircuitModel:
    """Learn all ``U^dag P_i U`` for ``P in {X, Y, Z}`` and every qubit ``i``.

    ``oracle`` is a QPStat-style oracle (or a facade around one). Sub-run ``3i + j``
    draws its input states from its own child of ``seed``.
    """
    if oracle.n != params.n:
        raise ConfigurationError(f"oracle acts on {oracle.n} qubits, params say {params.n}")
    if oracle.tau > params.oracle_tau() * (1 + 1e-12):
        raise ConfigurationError(
            f"oracle tolerance {oracle.tau:.3e} exceeds the per-observable requirement "
            f"{params.oracle_tau():.3e}"
        )
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = seq.spawn(3 * params.n)
    start = oracle.ledger.total
    learned: dict[tuple[int, str], LearnedObservable] = {}
    for i in range(params.n):
        sub = params.sub_params(i)
        for j, p in enumerate("XYZ"):
            view = oracle.as_qstat(PauliString.single(params.n, i, p), label=f"qpstat:{p}{i}")
            rng = np.random.default_rng(children[3 * i + j])
            learned[(i, p)] = learn_observable(view, sub, rng=rng, sampling=sampling)
    return LearnedCircuitModel(params, learned, oracle.ledger.total - start)


@dataclass
class ReconstructedChannel:
    n: int
    ptm: DenseSuperop

    @property
    def channel(self) -> DenseSuperop:
        return self.ptm

    def to_json(self) -> dict:
        return {"n": self.n, "ptm": encode_array(self.ptm.ptm_matrix)}

    @classmethod
    def from_json(cls, data: Mapping) -> "ReconstructedChannel":
        return cls(int(data["n"]), DenseSuperop(decode_array(data["ptm"])))

    def __eq__(self, other) -> bool:
        return isinstance(other, ReconstructedChannel) and self.n == other.n and self.ptm == other.ptm


def reconstruct_channel(model: LearnedCircuitModel) -> ReconstructedChannel:
    """Assemble the model PTM from products of the learned Heisenberg observables.

    Column ``Q`` of the PTM of ``U^dag`` holds the Pauli coefficients of
    ``prod_i O_{i, Q_i}`` (sites ascending, ``O_{i, I} = I``).
    """
    n = model.n
    _caps.check("superop", n, "channel reconstruction")
    dim = 2**n
    eye = np.eye(dim, dtype=complex)
    factors = [
        [eye] + [model.estimate(i, p).to_dense() for p in "XYZ"]
        for i in range(n)
    ]
    # Prefix products over sites 0..n-2, then the last site chunk by chunk.
    prefix = np.stack(factors[0])
    for i in range(1, n - 1):
        site = np.stack(factors[i])
        prefix = np.einsum("aij,bjk->abik", prefix, site).reshape(-1, dim, dim)
    last = np.stack(factors[n - 1])
    size = 4**n
    r_dag = np.empty((size, size))
    per = max(1, _RECON_CHUNK // 4)
    for start in range(0, prefix.shape[0], per):
        block = np.einsum("aij,bjk->abik", prefix[start : start + per], last).reshape(-1, dim, dim)
        cols = slice(4 * start, 4 * start + block.shape[0])
        r_dag[:, cols] = pauli_coefficients(block).real.T
    r_dag[:, 0] = 0.0
    r_dag[0, 0] = 1.0
    return ReconstructedChannel(n, DenseSuperop(r_dag.T))


class Verification(NamedTuple):
    verdict: str
    d_avg_estimate: float
    mode: str
    threshold: float
    queries: int


def verification_inputs(epsilon: float, delta: float) -> int:
    """Number of Haar inputs for the query-based verifier: ``ceil(2 ln(2/delta) / (eps/4)**2)``."""
    return math.ceil(2 * math.log(2 / delta) / (epsilon / 4) ** 2)


def _model_channel(model) -> Channel:
    if isinstance(model, LearnedCircuitModel):
        return reconstruct_channel(model).ptm
    if isinstance(model, ReconstructedChannel):
        return model.ptm
    if isinstance(model, Channel):
        return model
    raise TypeError(f"cannot verify a {type(model).__name__}")


def _clip_spectrum(sigma: np.ndarray) -> np.ndarray:
    sigma = (sigma + sigma.conj().T) / 2
    w, v = np.linalg.eigh(sigma)
    return (v * np.clip(w, -1.0, 1.0)) @ v.conj().T


def verify_model(
    model,
    truth: Channel,
    epsilon: float,
    delta: float,
    mode: str = "oracle-free",
    rng: np.random.Generator | None = None,
    oracle_config: OracleConfig | None = None,
) -> Verification:
    """PASS when the model is close to ``truth`` in average distance, FAIL when it is far.

    ``oracle-free`` computes the average distance exactly. ``query-based`` issues one
    QPStat query on ``truth`` per Haar-random input ``psi``, measuring the model's
    predicted output state at tolerance ``epsilon / 8``, and estimates the average
    infidelity from the responses. Both modes PASS iff the estimate is at most ``epsilon/2``.
    """
    channel = _model_channel(model)
    if channel.n != truth.n:
        raise ConfigurationError("model and truth act on different qubit counts")
    threshold = epsilon / 2
    if mode == "oracle-free":
        if not isinstance(truth, UnitaryChannel):
            raise ConfigurationError("oracle-free verification needs a unitary truth")
        value = d_avg(truth, channel)
        return Verification("PASS" if value <= threshold else "FAIL", value, mode, threshold, 0)
    if mode != "query-based":
        raise ConfigurationError(f"unknown verification mode {mode!r}")
    if rng is None:
        raise ConfigurationError("query-based verification needs an rng")
    tau_v = epsilon / 8
    config = oracle_config or OracleConfig("exact", tau_v, seed=int(rng.integers(2**32)))
    if config.tau > tau_v:
        raise ConfigurationError(f"verifier oracle tolerance must be at most {tau_v}")
    oracle = QPStatOracle(truth, config)
    m = verification_inputs(epsilon, delta)
    psi = haar_state(truth.dim, rng, size=m)
    rho = psi[:, :, None] * psi[:, None, :].conj()
    sigma = channel.apply(rho)
    fidelities = np.array([oracle.query(rho[j], _clip_spectrum(sigma[j])) for j in range(m)])
    value = float(1 - fidelities.mean())
    return Verification("PASS" if value <= threshold else "FAIL", value, mode, threshold, m)
