"""Learning a bounded few-body observable from QStat queries on random product states.

For a product stabilizer state ``psi`` drawn uniformly, ``3**|P| <psi|O|psi><psi|P|psi>``
is an unbiased estimate of the Pauli coefficient ``alpha_P`` of ``O``. All coefficients
are estimated from one shared set of queries, then thresholded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, ResourceLimitError
from .pauli import (
    STAB_TABLE,
    ObservableSum,
    PauliString,
    all_stab_labels,
    enumerate_low_weight,
    low_weight_count,
    sample_stab_counts,
    stab_expectations,
)

SAMPLING_MODES = ("iid", "exhaustive")
EXHAUSTIVE_MAX_QUBITS = 6
# Above this size the all-Pauli tensor contraction gives way to a per-candidate loop.
_TENSOR_MAX_QUBITS = 8


class QueryBudget(NamedTuple):
    N: int
    tau: float


@dataclass(frozen=True)
class LearnObservableParams:
    n: int
    k: int
    epsilon: float
    delta: float
    region: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.region is not None:
            object.__setattr__(self, "region", tuple(sorted(set(int(q) for q in self.region))))
            if any(not 0 <= q < self.n for q in self.region):
                raise ConfigurationError(f"region {self.region} is not inside range({self.n})")
        m = self.n if self.region is None else len(self.region)
        if not 1 <= self.k <= m:
            raise ConfigurationError(f"need 1 <= k <= {m}, got k={self.k}")
        if not 0 < self.epsilon <= 1:
            raise ConfigurationError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def candidate_count(self) -> int:
        m = self.n if self.region is None else len(self.region)
        return low_weight_count(m, self.k)

    @property
    def threshold(self) -> float:
        return 0.5 * self.epsilon / (2 * math.sqrt(2)) ** self.k

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "region": None if self.region is None else list(self.region),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "LearnObservableParams":
        region = data.get("region")
        return cls(
            int(data["n"]),
            int(data["k"]),
            float(data["epsilon"]),
            float(data["delta"]),
            None if region is None else tuple(region),
        )


def query_budget(params: LearnObservableParams) -> QueryBudget:
    """Query count and tolerance that make the learner succeed with probability 1 - delta.

    Each summand lies in ``[-3**k, 3**k]``; Hoeffding with a union bound over the
    ``M_k`` candidates, at accuracy ``epsilon / (4 (2 sqrt 2)**k)``, needs
    ``N = ceil(32 * 72**k * ln(2 M_k / delta) / epsilon**2)``.
    """
    k, eps = params.k, params.epsilon
    tau = eps / (4 * (6 * math.sqrt(2)) ** k)
    n_queries = math.ceil(32 * 72**k * math.log(2 * params.candidate_count / params.delta) / eps**2)
    return QueryBudget(n_queries, tau)


@dataclass
class LearnedObservable:
    estimate: ObservableSum
    support: tuple[int, ...]
    budget: QueryBudget
    raw_alphas: dict[PauliString, float] = field(repr=False)
    threshold: float = 0.0
    sampling: str = "iid"

    def to_json(self) -> dict:
        return {
            "n": self.estimate.n,
            "estimate": self.estimate.to_json(),
            "support": list(self.support),
            "budget": {"N": self.budget.N, "tau": self.budget.tau},
            "threshold": self.threshold,
            "sampling": self.sampling,
            "raw_alphas": [{"pauli": str(p), "alpha": a} for p, a in self.raw_alphas.items()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "LearnedObservable":
        n = int(data["n"])
        return cls(
            estimate=ObservableSum.from_json(data["estimate"], n),
            support=tuple(data["support"]),
            budget=QueryBudget(int(data["budget"]["N"]), float(data["budget"]["tau"])),
            raw_alphas={PauliString.from_str(t["pauli"]): float(t["alpha"]) for t in data["raw_alphas"]},
            threshold=float(data["threshold"]),
            sampling=data["sampling"],
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, LearnedObservable):
            return NotImplemented
        return (
            self.estimate == other.estimate
            and self.support == other.support
            and tuple(self.budget) == tuple(other.budget)
            and self.raw_alphas == other.raw_alphas
            and self.threshold == other.threshold
            and self.sampling == other.sampling
        )


def _pauli_weight_tensor(n: int) -> np.ndarray:
    nonid = (np.arange(4) > 0).astype(np.int64)
    w = np.zeros((4,) * n, dtype=np.int64)
    for q in range(n):
        shape = [1] * n
        shape[q] = 4
        w = w + nonid.reshape(shape)
    return w


def _weighted_alphas(labels: np.ndarray, weights: np.ndarray, candidates: Sequence[PauliString]) -> np.ndarray:
    """``3**|P| sum_s weights[s] <psi_s|P|psi_s>`` for each candidate P."""
    n = labels.shape[1]
    if n <= _TENSOR_MAX_QUBITS:
        f = np.zeros((6,) * n)
        np.add.at(f, tuple(labels.T), weights)
        table = STAB_TABLE.T.astype(float)
        for q in range(n):
            f = np.moveaxis(np.tensordot(table, f, axes=([1], [q])), 0, q)
        f = f * 3.0 ** _pauli_weight_tensor(n)
        flat = f.reshape(-1)
        return np.array([flat[p.index] for p in candidates])
    out = np.empty(len(candidates))
    for j, p in enumerate(candidates):
        out[j] = 3.0**p.weight * np.dot(weights, stab_expectations(labels, p))
    return out


def _exhaustive_counts(n: int, n_queries: int) -> tuple[np.ndarray, np.ndarray]:
    states = 6**n
    if n_queries < states:
        raise ConfigurationError(
            f"exhaustive sampling needs at least 6**n = {states} queries, budget is {n_queries}"
        )
    labels = all_stab_labels(n)
    base, extra = divmod(n_queries, states)
    counts = np.full(states, base, dtype=np.int64)
    counts[:extra] += 1
    return labels, counts


def learn_observable(
    oracle,
    params: LearnObservableParams,
    rng: np.random.Generator | None = None,
    sampling: str = "iid",
) -> LearnedObservable:
    """Learn ``O`` from ``N`` QStat queries and return the thresholded estimate.

    ``sampling="iid"`` draws the ``N`` input states uniformly at random. With
    ``sampling="exhaustive"`` the queries are spread over all ``6**n`` states and every
    state gets weight ``6**-n``, which makes the exact-oracle run deterministic.
    """
    if sampling not in SAMPLING_MODES:
        raise ConfigurationError(f"unknown sampling mode {sampling!r}")
    if oracle.n != params.n:
        raise ConfigurationError(f"oracle acts on {oracle.n} qubits, params say {params.n}")
    budget = query_budget(params)
    if oracle.tau > budget.tau * (1 + 1e-12):
        raise ConfigurationError(
            f"oracle tolerance {oracle.tau:.3e} exceeds the required {budget.tau:.3e}; "
            "the thresholding margin would be negative"
        )
    if sampling == "iid":
        if rng is None:
            raise ConfigurationError("iid sampling needs an rng")
        labels, counts = sample_stab_counts(params.n, budget.N, rng)
        responses = oracle.query_stab_batch(labels, counts)
        weights = responses * (counts / budget.N)
    else:
        if params.n > EXHAUSTIVE_MAX_QUBITS:
            raise ResourceLimitError(f"exhaustive sampling is limited to n <= {EXHAUSTIVE_MAX_QUBITS}")
        labels, counts = _exhaustive_counts(params.n, budget.N)
        responses = oracle.query_stab_batch(labels, counts)
        weights = responses / labels.shape[0]
    candidates = enumerate_low_weight(params.n, params.k, params.region)
    alphas = _weighted_alphas(labels, weights, candidates)
    thr = params.threshold
    kept = [(p, float(a)) for p, a in zip(candidates, alphas) if abs(a) >= thr]
    estimate = ObservableSum(params.n, kept)
    return LearnedObservable(
        estimate=estimate,
        support=estimate.support,
        budget=budget,
        raw_alphas={p: float(a) for p, a in zip(candidates, alphas)},
        threshold=thr,
        sampling=sampling,
    )


def exhaustive_alphas(obs: ObservableSum, k: int) -> dict[PauliString, float]:
    """Exact ``alpha_P`` for every weight-<=k string by averaging over all 6**n states."""
    n = obs.n
    if n > EXHAUSTIVE_MAX_QUBITS:
        raise ResourceLimitError(f"exhaustive enumeration is limited to n <= {EXHAUSTIVE_MAX_QUBITS}")
    labels = all_stab_labels(n)
    values = np.zeros(labels.shape[0])
    for p, c in obs.terms.items():
        values += c * stab_expectations(labels, p)
    candidates = enumerate_low_weight(n, k)
    alphas = _weighted_alphas(labels, values / labels.shape[0], candidates)
    return {p: float(a) for p, a in zip(candidates, alphas)}
