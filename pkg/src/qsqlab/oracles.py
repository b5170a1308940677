"""Statistical-query oracles with tolerance tau and query accounting.

Each oracle hides its target and only answers expectation-value queries. A response to
a query with true value ``v`` is produced by one of four perturbation modes:

``exact``
    ``v`` itself.
``jitter``
    ``v + U(-tau, tau)``.
``adversarial-grid``
    ``v`` rounded to the nearest multiple of ``tau`` with ties toward zero.
``shots``
    The mean of ``m = ceil(c_shots ln(2/delta_shots) / tau**2)`` simulated measurement
    outcomes (binomial for observables with spectrum in {-1, +1}, a Gaussian surrogate
    otherwise). Responses outside ``v +- tau`` are clamped and counted.

Batched product-state queries take a multiplicity per state and return the mean of
that many iid responses, charging every one of them to the ledger.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import _caps
from .errors import ConfigurationError
from .pauli import ObservableSum, PauliString, ProductStabState, stab_expectations
from .sim.channels import Channel, DepolarizedUnitary, UnitaryChannel, apply_tensor_power, validate_density
from .sim.circuits import HeisenbergObservable, heisenberg_evolve_pauli, product_stab_vectors

MODES = ("exact", "jitter", "adversarial-grid", "shots")
NORM_TOL = 1e-9
# Up to this many iid jitter draws per aggregated response are drawn exactly; beyond
# it the mean is drawn from its Gaussian limit clipped to the tolerance.
_EXACT_JITTER_MAX = 256


@dataclass(frozen=True)
class OracleConfig:
    mode: str = "exact"
    tau: float = 0.01
    seed: int = 0
    c_shots: float = 2.0
    delta_shots: float = 1e-6

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown oracle mode {self.mode!r}; expected one of {MODES}")
        if not self.tau > 0:
            raise ConfigurationError(f"tolerance must be positive, got {self.tau}")
        if not self.c_shots > 0 or not 0 < self.delta_shots < 1:
            raise ConfigurationError("c_shots must be positive and delta_shots in (0, 1)")

    def shots_for(self, tau: float) -> int:
        return math.ceil(self.c_shots * math.log(2 / self.delta_shots) / tau**2)

    def to_json(self) -> dict:
        return {"mode": self.mode, "tau": self.tau, "seed": self.seed, "c_shots": self.c_shots}

    @classmethod
    def from_json(cls, data: Mapping) -> "OracleConfig":
        return cls(
            mode=data.get("mode", "exact"),
            tau=float(data["tau"]),
            seed=int(data.get("seed", 0)),
            c_shots=float(data.get("c_shots", 2.0)),
        )


class QueryLedger:
    """Linearisable query counter, total and per operation label."""

    def __init__(self, per_operation: Mapping[str, int] | None = None):
        self._lock = threading.Lock()
        self._counts: dict[str, int] = dict(per_operation or {})

    def record(self, label: str, count: int = 1) -> None:
        if count < 0:
            raise ValueError("query counts cannot be negative")
        with self._lock:
            self._counts[label] = self._counts.get(label, 0) + int(count)

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    @property
    def per_operation(self) -> dict[str, int]:
        with self._lock:
            return dict(sorted(self._counts.items()))

    def merge(self, other: "QueryLedger") -> None:
        for label, count in other.per_operation.items():
            self.record(label, count)

    def to_json(self) -> dict:
        per = self.per_operation
        return {"total": sum(per.values()), "per_operation": per}

    @classmethod
    def from_json(cls, data: Mapping) -> "QueryLedger":
        ledger = cls(data["per_operation"])
        if ledger.total != int(data["total"]):
            raise ValueError("ledger total disagrees with its per-operation counts")
        return ledger

    def __eq__(self, other) -> bool:
        return isinstance(other, QueryLedger) and self.per_operation == other.per_operation

    def __repr__(self) -> str:
        return f"QueryLedger(total={self.total})"


def grid_round(values: np.ndarray, tau: float) -> np.ndarray:
    """Nearest multiple of ``tau``, ties toward zero."""
    values = np.asarray(values, dtype=float)
    return np.sign(values) * np.ceil(np.abs(values) / tau - 0.5) * tau


class _OracleBase:
    kind = "oracle"

    def __init__(self, config: OracleConfig, ledger: QueryLedger | None = None):
        self.config = config
        self.ledger = ledger if ledger is not None else QueryLedger()
        self.clamp_count = 0
        self._rng = np.random.default_rng(config.seed)
        self._lock = threading.Lock()

    @property
    def tau(self) -> float:
        return self.config.tau

    def _respond(self, values, counts=None, tau=None, pm1=False, label=None) -> np.ndarray:
        """Perturb true values per the oracle mode and charge the ledger."""
        values = np.asarray(values, dtype=float)
        counts = np.ones(values.shape, dtype=np.int64) if counts is None else np.asarray(counts, np.int64)
        tau = self.config.tau if tau is None else float(tau)
        if not tau > 0:
            raise ConfigurationError("query tolerance must be positive")
        mode = self.config.mode
        with self._lock:
            if mode == "exact":
                out = values.copy()
            elif mode == "adversarial-grid":
                out = grid_round(values, tau)
            elif mode == "jitter":
                out = self._jitter(values, counts, tau)
            else:
                out = self._shots(values, counts, tau, pm1)
            self.ledger.record(label or self.kind, int(counts.sum()))
        return out

    def _jitter(self, values, counts, tau):
        out = np.empty_like(values)
        out[counts == 0] = values[counts == 0]
        small = (counts <= _EXACT_JITTER_MAX) & (counts > 0)
        for idx in np.flatnonzero(small):
            out.flat[idx] = values.flat[idx] + self._rng.uniform(-tau, tau, counts.flat[idx]).mean()
        big = counts > _EXACT_JITTER_MAX
        if big.any():
            sd = tau / np.sqrt(3 * counts[big])
            out[big] = values[big] + np.clip(self._rng.normal(0.0, sd), -tau, tau)
        return out

    def _shots(self, values, counts, tau, pm1):
        m = self.config.shots_for(tau)
        total = np.maximum(counts * m, 1)
        if pm1:
            p = np.clip((1 + values) / 2, 0.0, 1.0)
            raw = 2 * self._rng.binomial(total, p) / total - 1
        else:
            var = np.clip(1 - values**2, 0.0, None) / total
            raw = self._rng.normal(values, np.sqrt(var))
        outside = np.abs(raw - values) > tau
        self.clamp_count += int(np.count_nonzero(outside))
        return np.clip(raw, values - tau, values + tau)


def _check_norm(matrix: np.ndarray, what: str) -> bool:
    """Validate ``||matrix|| <= 1``; return whether its spectrum lies in {-1, +1}."""
    if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > 1e-10:
        raise ValueError(f"{what} must be Hermitian")
    eig = np.linalg.eigvalsh(matrix)
    if np.max(np.abs(eig)) > 1 + NORM_TOL:
        raise ValueError(f"{what} must have operator norm at most 1")
    return bool(np.all(np.abs(np.abs(eig) - 1) < 1e-9))


def _is_pauli_like(obs) -> bool:
    if isinstance(obs, PauliString):
        return True
    if isinstance(obs, ObservableSum) and len(obs) == 1:
        return abs(abs(next(iter(obs.terms.values()))) - 1) < 1e-12
    return False


class QStatOracle(_OracleBase):
    """``QStat_O``: expectation values ``Tr(O rho)`` of a hidden observable ``O``."""

    kind = "qstat"

    def __init__(self, observable, config: OracleConfig, ledger: QueryLedger | None = None):
        super().__init__(config, ledger)
        if isinstance(observable, HeisenbergObservable):
            self.n = observable.n
            self._heis = observable
            self._sum = None
            self._dense = None
            self._pm1 = _check_norm(observable.dense, "observable")
        elif isinstance(observable, ObservableSum):
            self.n = observable.n
            self._heis = None
            self._sum = observable
            self._dense = None
            if _is_pauli_like(observable):
                self._pm1 = True
            else:
                sites = observable.support
                _caps.check("observable", len(sites), "observable norm check")
                self._pm1 = _check_norm(observable.to_dense(sites), "observable")
        else:
            dense = np.asarray(observable, dtype=complex)
            self.n = dense.shape[0].bit_length() - 1
            self._heis = None
            self._sum = None
            self._dense = dense
            self._pm1 = _check_norm(dense, "observable")

    def _stab_values(self, labels: np.ndarray) -> np.ndarray:
        if self._heis is not None:
            return self._heis.stab_expectations(labels)
        if self._sum is not None:
            out = np.zeros(labels.shape[0])
            for p, c in self._sum.terms.items():
                out += c * stab_expectations(labels, p)
            return out
        vecs = product_stab_vectors(labels)
        return np.einsum("si,ij,sj->s", vecs.conj(), self._dense, vecs).real

    def _dense_target(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense
        if self._heis is not None:
            return self._heis.to_dense_full()
        return self._sum.to_dense()

    def query(self, psi, tau: float | None = None) -> float:
        """One query on a product stabilizer state or a density matrix."""
        if isinstance(psi, ProductStabState):
            if psi.n != self.n:
                raise ValueError(f"state has {psi.n} qubits, oracle expects {self.n}")
            value = self._stab_values(np.array([psi.labels]))[0]
        else:
            rho = validate_density(psi, 2**self.n)
            value = float(np.real(np.trace(self._dense_target() @ rho)))
        return float(self._respond([value], tau=tau, pm1=self._pm1)[0])

    def query_stab_batch(self, labels: np.ndarray, counts: np.ndarray | None = None, tau=None) -> np.ndarray:
        labels = np.asarray(labels)
        if labels.ndim != 2 or labels.shape[1] != self.n:
            raise ValueError(f"labels must have shape (S, {self.n})")
        return self._respond(self._stab_values(labels), counts, tau=tau, pm1=self._pm1)


class QPStatOracle(_OracleBase):
    """``QPStat_E``: expectation values ``Tr(O E(rho))`` for a hidden channel ``E``.

    Pauli observables on product stabilizer inputs are evaluated on the backward light
    cone when the channel is a (possibly depolarized) brickwork circuit.
    """

    kind = "qpstat"

    def __init__(self, channel: Channel, config: OracleConfig, ledger: QueryLedger | None = None):
        super().__init__(config, ledger)
        self._channel = channel
        self.n = channel.n
        self._cones: dict[PauliString, HeisenbergObservable] = {}
        self._cone_lock = threading.Lock()

    def _unitary_and_gamma(self):
        ch = self._channel
        if isinstance(ch, UnitaryChannel):
            return ch, 0.0
        if isinstance(ch, DepolarizedUnitary):
            return ch.unitary_part, ch.gamma
        return None, None

    def _heisenberg(self, pauli: PauliString) -> HeisenbergObservable:
        with self._cone_lock:
            hit = self._cones.get(pauli)
        if hit is not None:
            return hit
        unitary, _ = self._unitary_and_gamma()
        if unitary.circuit is not None:
            obs = heisenberg_evolve_pauli(unitary.circuit, pauli)
        else:
            u = unitary.matrix
            dense = u.conj().T @ pauli.to_dense() @ u
            dense = (dense + dense.conj().T) / 2
            obs = HeisenbergObservable(self.n, tuple(range(self.n)), dense, (str(pauli),))
        with self._cone_lock:
            self._cones[pauli] = obs
        return obs

    def _fast_values(self, labels: np.ndarray, pauli: PauliString) -> np.ndarray | None:
        unitary, gamma = self._unitary_and_gamma()
        if unitary is None:
            return None
        values = self._heisenberg(pauli).stab_expectations(labels)
        if gamma:
            trace_part = 1.0 if pauli.weight == 0 else 0.0
            values = (1 - gamma) * values + gamma * trace_part
        return values

    def _coerce_obs(self, obs):
        if isinstance(obs, str):
            obs = PauliString.from_str(obs)
        if isinstance(obs, (PauliString, ObservableSum)):
            if obs.n != self.n:
                raise ValueError(f"observable has {obs.n} qubits, oracle expects {self.n}")
            return obs
        dense = np.asarray(obs, dtype=complex)
        if dense.shape != (2**self.n,) * 2:
            raise ValueError("dense observable has the wrong dimension")
        return dense

    def _value(self, rho, obs) -> float:
        if isinstance(rho, ProductStabState) and rho.n != self.n:
            raise ValueError(f"state has {rho.n} qubits, oracle expects {self.n}")
        if isinstance(rho, ProductStabState) and isinstance(obs, (PauliString, ObservableSum)):
            labels = np.array([rho.labels])
            terms = [(obs, 1.0)] if isinstance(obs, PauliString) else list(obs.terms.items())
            total = 0.0
            for p, c in terms:
                fast = self._fast_values(labels, p)
                if fast is None:
                    break
                total += c * fast[0]
            else:
                return float(total)
        dense_rho = rho.density() if isinstance(rho, ProductStabState) else validate_density(rho, 2**self.n)
        out = self._channel.apply(dense_rho)
        o = obs.to_dense() if not isinstance(obs, np.ndarray) else obs
        return float(np.real(np.trace(o @ out)))

    def query(self, rho, obs, tau: float | None = None, label: str | None = None) -> float:
        obs = self._coerce_obs(obs)
        if isinstance(obs, np.ndarray):
            pm1 = _check_norm(obs, "observable")
        elif _is_pauli_like(obs):
            pm1 = True
        else:
            pm1 = _check_norm(obs.to_dense(obs.support), "observable") if obs.terms else False
        value = self._value(rho, obs)
        return float(self._respond([value], tau=tau, pm1=pm1, label=label)[0])

    def query_stab_batch(self, labels, counts, pauli: PauliString, tau=None, label=None) -> np.ndarray:
        """Many queries ``QPStat(psi_s, pauli)``, ``counts[s]`` of them on state ``s``."""
        labels = np.asarray(labels)
        pauli = self._coerce_obs(pauli)
        if not isinstance(pauli, PauliString):
            raise TypeError("batched queries take a Pauli string observable")
        values = self._fast_values(labels, pauli)
        if values is None:
            values = np.array([self._value(ProductStabState(tuple(row)), pauli) for row in labels])
        return self._respond(values, counts, tau=tau, pm1=True, label=label)

    def as_qstat(self, pauli: PauliString, label: str | None = None) -> "PauliQueryView":
        """``QPStat(., P, tau)`` viewed as ``QStat`` of the Heisenberg-evolved ``P``."""
        return PauliQueryView(self, pauli, label)


class PauliQueryView:
    """A QStat-shaped handle on a QPStat-style oracle with a fixed output Pauli."""

    def __init__(self, oracle, pauli: PauliString, label: str | None = None):
        self._oracle = oracle
        self.pauli = pauli
        self.n = oracle.n
        self.label = label or f"qpstat:{pauli}"

    @property
    def tau(self) -> float:
        return self._oracle.tau

    @property
    def ledger(self) -> QueryLedger:
        return self._oracle.ledger

    def query(self, psi: ProductStabState, tau=None) -> float:
        return self._oracle.query(psi, self.pauli, tau=tau, label=self.label)

    def query_stab_batch(self, labels, counts=None, tau=None) -> np.ndarray:
        labels = np.asarray(labels)
        if counts is None:
            counts = np.ones(labels.shape[0], dtype=np.int64)
        return self._oracle.query_stab_batch(labels, counts, self.pauli, tau=tau, label=self.label)


class KQPStatOracle(_OracleBase):
    """``kQPStat_E``: ``Tr(O E^{(x)k}(rho))`` on k parallel copies of a hidden channel."""

    kind = "kqpstat"

    def __init__(self, channel: Channel, config: OracleConfig, k: int = 2, ledger: QueryLedger | None = None):
        if k < 2:
            raise ConfigurationError("multi-copy oracles need k >= 2")
        super().__init__(config, ledger)
        _caps.check("state", k * channel.n, "multi-copy oracle")
        self._channel = channel
        self.k = k
        self.n = channel.n

    def query(self, rho: np.ndarray, obs: np.ndarray, tau: float | None = None) -> float:
        dim = 2 ** (self.k * self.n)
        rho = validate_density(rho, dim)
        obs = np.asarray(obs, dtype=complex)
        if obs.shape != (dim, dim):
            raise ValueError(f"observable must act on {self.k * self.n} qubits")
        pm1 = _check_norm(obs, "observable")
        out = apply_tensor_power(self._channel, rho, self.k)
        value = float(np.real(np.trace(obs @ out)))
        return float(self._respond([value], tau=tau, pm1=pm1)[0])


def flip_operator(n: int) -> np.ndarray:
    """SWAP of two n-qubit registers: ``F |a>|b> = |b>|a>``."""
    _caps.check("state", 2 * n, "flip operator")
    dim = 2**n
    return np.eye(dim * dim).reshape(dim, dim, dim, dim).transpose(1, 0, 2, 3).reshape(dim * dim, dim * dim)
