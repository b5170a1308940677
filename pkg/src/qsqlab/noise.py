"""Noise-robust query forwarding and single-query global-depolarizing noise estimation.

If the accessible channel ``Lambda(E)`` satisfies ``||Lambda(E) - E||_diamond <= eta``,
asking it every query at tolerance ``tau - eta`` yields answers within ``tau`` of the
noiseless values, so a learner written for ``E`` runs unchanged on the noisy device.

For ``Lambda(gamma)`` after a unitary, the output purity on any pure input is
``1 - (2 gamma - gamma**2)(1 - 2**-n)``. One two-copy query of the flip operator reads
it off, and inverting the relation brackets ``gamma`` and the diamond norm.
"""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, InconsistentPriorError
from .oracles import KQPStatOracle, PauliQueryView, flip_operator
from .pauli import PauliString
from .sim.channels import DepolarizedUnitary, UnitaryChannel
from .sim.distances import diamond_depolarized, gamma_for_diamond_norm

_TAU_MATCH = 1e-12


@dataclass(frozen=True)
class RobustWrapConfig:
    eta: float
    tau_outer: float

    def __post_init__(self):
        if self.eta < 0:
            raise ConfigurationError("eta must be non-negative")
        if self.eta >= self.tau_outer:
            raise ConfigurationError(f"eta = {self.eta} must be smaller than tau_outer = {self.tau_outer}")

    @property
    def tau_inner(self) -> float:
        return self.tau_outer - self.eta


class RobustOracle:
    """Facade advertising ``tau_outer`` while every query runs at ``tau_outer - eta``.

    Queries and ledger counts pass through to the inner oracle one to one.
    """

    def __init__(self, inner, cfg: RobustWrapConfig):
        if abs(inner.tau - cfg.tau_inner) > _TAU_MATCH * max(1.0, cfg.tau_outer):
            raise ConfigurationError(
                f"inner oracle tolerance {inner.tau} must equal tau_outer - eta = {cfg.tau_inner}"
            )
        self._inner = inner
        self.cfg = cfg
        self.n = inner.n

    @property
    def tau(self) -> float:
        return self.cfg.tau_outer

    @property
    def ledger(self):
        return self._inner.ledger

    @property
    def clamp_count(self) -> int:
        return self._inner.clamp_count

    def _shave(self, tau):
        if tau is None:
            return None
        if tau <= self.cfg.eta:
            raise ConfigurationError(f"query tolerance {tau} does not exceed the noise bound {self.cfg.eta}")
        return tau - self.cfg.eta

    def query(self, rho, obs, tau: float | None = None, label: str | None = None) -> float:
        return self._inner.query(rho, obs, tau=self._shave(tau), label=label)

    def query_stab_batch(self, labels, counts, pauli, tau=None, label=None):
        return self._inner.query_stab_batch(labels, counts, pauli, tau=self._shave(tau), label=label)

    def as_qstat(self, pauli: PauliString, label: str | None = None) -> PauliQueryView:
        return PauliQueryView(self, pauli, label)


def wrap_robust(inner, cfg: RobustWrapConfig) -> RobustOracle:
    return RobustOracle(inner, cfg)


def noisy_for_norm(unitary: UnitaryChannel, eta: float) -> DepolarizedUnitary:
    """Global depolarizing noise after ``unitary`` with diamond norm exactly ``eta``."""
    return DepolarizedUnitary(unitary, gamma_for_diamond_norm(eta, unitary.n))


def output_purity(gamma: float, n: int) -> float:
    return 1 - (2 * gamma - gamma**2) * (1 - 2.0**-n)


@dataclass(frozen=True)
class NoiseEstimate:
    gamma_lo: float
    gamma_hi: float
    dnorm_lo: float
    dnorm_hi: float
    query_alpha: float
    tau_used: float
    c_est: float
    n: int

    @property
    def width(self) -> float:
        return self.dnorm_hi - self.dnorm_lo

    def contains(self, norm: float, slack: float = 1e-12) -> bool:
        return self.dnorm_lo - slack <= norm <= self.dnorm_hi + slack

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: Mapping) -> "NoiseEstimate":
        return cls(**{k: (int(data[k]) if k == "n" else float(data[k])) for k in cls.__dataclass_fields__})


def _gamma_of_x(x: float) -> float:
    return 1 - math.sqrt(max(0.0, 1 - x))


def _interval(alpha: float, tau: float, n: int, gamma_u: float) -> tuple[float, float]:
    """``(x_lo, x_hi)`` with ``x = 2 gamma - gamma**2``, clamped to the prior's range."""
    scale = 1 - 2.0**-n
    x_max = 2 * gamma_u - gamma_u**2
    lo = (1 - alpha - tau) / scale
    hi = (1 - alpha + tau) / scale
    if hi < -1e-12 or lo > x_max + 1e-12:
        raise InconsistentPriorError(
            f"response {alpha} is incompatible with gamma in [0, {gamma_u}] at tolerance {tau}"
        )
    return min(max(lo, 0.0), x_max), min(max(hi, 0.0), x_max)


def _norm_width(alpha: float, tau: float, n: int, gamma_u: float) -> float:
    lo, hi = _interval(alpha, tau, n, gamma_u)
    return diamond_depolarized(_gamma_of_x(hi), n).norm - diamond_depolarized(_gamma_of_x(lo), n).norm


def _worst_width(c: float, gamma_u: float, epsilon: float, n: int, grid: np.ndarray) -> float:
    tau = c * (1 - gamma_u) * epsilon
    scale = 1 - 2.0**-n
    x_max = 2 * gamma_u - gamma_u**2
    worst = 0.0
    for gamma in grid:
        alpha0 = output_purity(gamma, n)
        responses = [alpha0 - tau, alpha0 + tau]
        # The window is widest in gamma when it just touches the clamp at x_max.
        touching = 1 - (x_max - tau / scale) * scale
        if alpha0 - tau < touching < alpha0 + tau:
            responses.append(touching)
        for alpha in responses:
            worst = max(worst, _norm_width(alpha, tau, n, gamma_u))
    return worst


@functools.lru_cache(maxsize=64)
def calibrate_c_est(gamma_u: float, epsilon: float, n: int, step: float = 1e-3) -> float:
    """Largest ``c <= 1/2`` whose worst-case norm-interval width stays within ``epsilon``.

    The worst case ranges over ``gamma`` on a grid of ``[0, gamma_u]`` and over every
    response the tolerance allows.
    """
    if not 0 <= gamma_u < 1:
        raise ConfigurationError("gamma_u must lie in [0, 1)")
    grid = np.append(np.arange(0.0, gamma_u, step), gamma_u)
    if _worst_width(0.5, gamma_u, epsilon, n, grid) <= epsilon:
        return 0.5
    lo, hi = 0.0, 0.5
    for _ in range(60):
        mid = (lo + hi) / 2
        if _worst_width(mid, gamma_u, epsilon, n, grid) <= epsilon:
            lo = mid
        else:
            hi = mid
    return lo


def estimate_depolarizing(
    oracle: KQPStatOracle, gamma_u: float, epsilon: float, c_est: float | None = None
) -> NoiseEstimate:
    """Bracket ``gamma`` and ``||U - Lambda(U)||_diamond`` from a single two-copy query."""
    if oracle.k != 2:
        raise ConfigurationError("the estimator needs a two-copy oracle")
    if not 0 <= gamma_u < 1:
        raise ConfigurationError("gamma_u must lie in [0, 1)")
    if not 0 < epsilon <= 1 - gamma_u:
        raise ConfigurationError(f"epsilon must lie in (0, 1 - gamma_u] = (0, {1 - gamma_u}]")
    n = oracle.n
    if c_est is None:
        c_est = calibrate_c_est(gamma_u, epsilon, n)
    tau = c_est * (1 - gamma_u) * epsilon
    dim = 4**n
    rho = np.zeros((dim, dim))
    rho[0, 0] = 1.0
    alpha = oracle.query(rho, flip_operator(n), tau=tau)
    x_lo, x_hi = _interval(alpha, tau, n, gamma_u)
    g_lo, g_hi = _gamma_of_x(x_lo), _gamma_of_x(x_hi)
    return NoiseEstimate(
        gamma_lo=g_lo,
        gamma_hi=g_hi,
        dnorm_lo=diamond_depolarized(g_lo, n).norm,
        dnorm_hi=diamond_depolarized(g_hi, n).norm,
        query_alpha=float(alpha),
        tau_used=tau,
        c_est=c_est,
        n=n,
    )
