"""Seeded Monte-Carlo experiments with analytic targets and 5-sigma verdicts.

Trials are grouped into fixed-size chunks and chunk ``c`` always draws from child ``c``
of the experiment seed, so statistics do not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError
from .oracles import OracleConfig, QPStatOracle
from .pauli import PauliString
from .shallow_learner import ShallowLearnParams, learn_heisenberg_observables, reconstruct_channel, verify_model
from .sim.channels import Channel, UnitaryChannel, identity_channel, maximally_depolarizing
from .sim.circuits import brickwork_pairs, build_rqc
from .sim.distances import d_avg, diamond_lower_bound
from .sim.haar import haar_unitary

SIGMA = 5.0
CHUNK = 1000


@dataclass
class Verdict:
    name: str
    passed: bool
    measured: float
    bound: float
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "measured": float(self.measured),
            "bound": float(self.bound),
            "detail": self.detail,
        }


@dataclass
class ExperimentReport:
    name: str
    params: dict
    statistics: dict = field(default_factory=dict)
    verdicts: list[Verdict] = field(default_factory=list)
    raw_series: dict[str, list[float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def check(self, name: str, passed: bool, measured: float, bound: float, detail: str = "") -> None:
        self.verdicts.append(Verdict(name, bool(passed), float(measured), float(bound), detail))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "statistics": self.statistics,
            "verdicts": [v.to_json() for v in self.verdicts],
            "passed": self.passed,
            "raw_series": self.raw_series,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ExperimentReport":
        return cls(
            name=data["name"],
            params=dict(data["params"]),
            statistics=dict(data["statistics"]),
            verdicts=[Verdict(**v) for v in data["verdicts"]],
            raw_series={k: list(v) for k, v in data["raw_series"].items()},
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["series", "index", "value"])
        for key, values in self.raw_series.items():
            for i, v in enumerate(values):
                writer.writerow([key, i, repr(float(v))])
        return buf.getvalue()

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        return self.to_json() == other.to_json()


def mean_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _run_chunked(
    fn: Callable[[int, np.random.Generator], np.ndarray],
    trials: int,
    seed: int,
    threads: int = 1,
    chunk: int = CHUNK,
    stream: int = 0,
    concat: bool = True,
):
    """Evaluate ``fn(size, rng)`` on fixed chunks with per-chunk seeds and concatenate."""
    sizes = [min(chunk, trials - s) for s in range(0, trials, chunk)]
    children = np.random.SeedSequence([seed, stream]).spawn(len(sizes))
    jobs = [(size, np.random.default_rng(child)) for size, child in zip(sizes, children)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(*job) for job in jobs]
    if not concat:
        return parts
    return np.concatenate(parts) if parts else np.empty(0)


def _pauli(n: int, pauli) -> PauliString:
    if pauli is None:
        return PauliString.single(n, 0, "Z")
    if isinstance(pauli, str):
        return PauliString.from_str(pauli)
    return pauli


def _basis_state(n: int, psi) -> np.ndarray:
    if psi is None:
        v = np.zeros(2**n, dtype=complex)
        v[0] = 1.0
        return v
    psi = np.asarray(psi, dtype=complex)
    return psi / np.linalg.norm(psi)


def _diag_pauli_expectation(states: np.ndarray, pauli: PauliString) -> np.ndarray:
    """``<phi|P|phi>`` for a batch of state vectors (rows)."""
    dense = pauli.to_dense()
    return np.einsum("si,ij,sj->s", states.conj(), dense, states).real


def haar_second_moment(n: int, tr_o: float, tr_o2: float, purity: float) -> float:
    """``E_U Tr(O U rho U^dag)^2`` under the Haar measure in closed form."""
    dim = 2**n
    denom = dim * (dim**2 - 1)
    return (dim - purity) / denom * tr_o**2 + (dim * purity - 1) / denom * tr_o2


def exp_haar_moments(
    n: int, pauli=None, psi=None, trials: int = 20000, seed: int = 0, threads: int = 1
) -> ExperimentReport:
    """First and second moments and the variance of ``Tr(O U rho U^dag)`` over Haar ``U``."""
    if n > 6:
        raise ConfigurationError("Haar moment experiments are limited to n <= 6")
    if trials < 1000:
        raise ConfigurationError("use at least 1000 trials")
    obs = _pauli(n, pauli)
    v0 = _basis_state(n, psi)
    dim = 2**n

    def chunk(size, rng):
        u = haar_unitary(dim, rng, size=size)
        return _diag_pauli_expectation(u @ v0, obs)

    t = _run_chunked(chunk, trials, seed, threads)
    tr_o = float(dim if obs.weight == 0 else 0)
    first_target = tr_o / dim
    second_target = haar_second_moment(n, tr_o, float(dim), 1.0)
    var_bound = 1 / (dim + 1)
    first, first_se = mean_stderr(t)
    second, second_se = mean_stderr(t**2)
    var = float(np.var(t, ddof=1))
    # Standard error of the sample variance from the fourth central moment.
    centred = t - t.mean()
    var_se = float(np.sqrt(max(0.0, np.mean(centred**4) - var**2) / trials))
    report = ExperimentReport(
        "haar-moments",
        {"n": n, "pauli": str(obs), "trials": trials, "seed": seed},
        {
            "first": first,
            "first_stderr": first_se,
            "second": second,
            "second_stderr": second_se,
            "variance": var,
            "variance_stderr": var_se,
            "first_target": first_target,
            "second_target": second_target,
            "variance_bound": var_bound,
        },
        raw_series={"value": t.tolist()},
    )
    report.check("first-moment", abs(first - first_target) <= SIGMA * first_se + 1e-12, first, first_target)
    report.check(
        "second-moment", abs(second - second_target) <= SIGMA * second_se + 1e-12, second, second_target
    )
    report.check("variance-bound", var <= var_bound + SIGMA * var_se + 1e-12, var, var_bound)
    return report


def rqc_statevectors(n: int, d: int, v0: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Outputs ``U psi`` for ``size`` independent RQC(n, d) samples (gates drawn jointly)."""
    states = np.broadcast_to(v0, (size, 2**n)).reshape((size,) + (2,) * n).copy()
    for layer in range(1, d + 1):
        for a, b in brickwork_pairs(n, layer):
            gates = haar_unitary(4, rng, size=size).reshape(size, 2, 2, 2, 2)
            states = np.moveaxis(states, [a + 1, b + 1], [1, 2])
            shape = states.shape
            states = np.einsum("sijkl,skl...->sij...", gates, states).reshape(shape)
            states = np.moveaxis(states, [1, 2], [a + 1, b + 1])
    return states.reshape(size, 2**n)


def exp_rqc_variance(
    n: int,
    depths: Sequence[int],
    pauli=None,
    psi=None,
    trials: int = 20000,
    seed: int = 0,
    threads: int = 1,
    haar_crosscheck: bool = True,
    check_design: bool = True,
) -> ExperimentReport:
    """Second moments of ``Tr(O U rho U^dag)`` over RQC(n, d) against the growth bound.

    Asserts per depth ``E_RQC[Tr^2] <= (1 + (4/5)**d)**(n/2) E_Haar[Tr^2]`` within a 5-sigma
    band, with the Haar side anchored at its closed form, and optionally the exact
    one-design identity ``E[U rho U^dag] = I / N`` entrywise.
    """
    if n > 8:
        raise ConfigurationError("RQC variance experiments are limited to n <= 8")
    obs = _pauli(n, "Z" * n if pauli is None else pauli)
    v0 = _basis_state(n, psi)
    dim = 2**n
    tr_o = float(dim if obs.weight == 0 else 0)
    haar_anchor = haar_second_moment(n, tr_o, float(dim), 1.0)
    report = ExperimentReport(
        "rqc-variance",
        {"n": n, "depths": list(depths), "pauli": str(obs), "trials": trials, "seed": seed},
    )
    if haar_crosscheck:
        t_haar = _run_chunked(
            lambda size, rng: _diag_pauli_expectation(haar_unitary(dim, rng, size=size) @ v0, obs),
            trials,
            seed,
            threads,
            stream=10_000,
        )
        h_mean, h_se = mean_stderr(t_haar**2)
        report.statistics["haar_mc_second"] = h_mean
        report.statistics["haar_mc_second_stderr"] = h_se
        report.check(
            "haar-anchor", abs(h_mean - haar_anchor) <= SIGMA * h_se + 1e-12, h_mean, haar_anchor,
            "Monte-Carlo Haar second moment against its closed form",
        )
    slopes = []
    for d in depths:
        def chunk(size, rng, d=d):
            states = rqc_statevectors(n, d, v0, size, rng)
            vals = _diag_pauli_expectation(states, obs)
            if not check_design:
                return vals, None
            cross = (states[:, :, None] * states[:, None, :].conj()).reshape(size, -1)
            parts = np.concatenate([cross.real, cross.imag], axis=1)
            return vals, (parts.sum(axis=0), (parts**2).sum(axis=0))

        pieces = _run_chunked(chunk, trials, seed, threads, stream=d, concat=False)
        t = np.concatenate([p[0] for p in pieces])
        second, second_se = mean_stderr(t**2)
        var = float(np.var(t, ddof=1))
        bound = (1 + 0.8**d) ** (n / 2) * haar_anchor
        report.statistics[f"d{d}_second"] = second
        report.statistics[f"d{d}_second_stderr"] = second_se
        report.statistics[f"d{d}_variance"] = var
        report.statistics[f"d{d}_bound"] = bound
        report.raw_series[f"d{d}"] = t.tolist()
        report.check(
            f"intermediate-inequality-d{d}", second - SIGMA * second_se <= bound, second, bound,
            "E_RQC[Tr^2] against (1+(4/5)^d)^(n/2) E_Haar[Tr^2]",
        )
        if check_design:
            s1 = sum(p[1][0] for p in pieces)
            s2 = sum(p[1][1] for p in pieces)
            mu = s1 / trials
            se = np.sqrt(np.maximum(s2 / trials - mu**2, 0.0) * trials / (trials - 1) / trials)
            target = np.concatenate([(np.eye(dim) / dim).reshape(-1), np.zeros(dim * dim)])
            dev = np.abs(mu - target)
            ok = bool(np.all(dev <= SIGMA * se + 1e-12))
            worst = float(np.max(dev / np.maximum(se, 1e-300)))
            report.check(f"one-design-d{d}", ok, worst, SIGMA, "max entrywise deviation in stderr units")
        if var > 0:
            slopes.append((d, math.log(var)))
    if len(slopes) >= 2:
        xs, ys = np.array(slopes).T
        report.statistics["log_variance_slope"] = float(np.polyfit(xs, ys, 1)[0])
    return report


def exp_qnflt(
    n: int, channel: str | Channel = "identity", trials: int = 2000, seed: int = 0, threads: int = 1
) -> ExperimentReport:
    """Mean average distance between a fixed channel and Haar-random unitaries."""
    if n > 5:
        raise ConfigurationError("no-free-lunch experiments are limited to n <= 5")
    dim = 2**n
    if isinstance(channel, Channel):
        fixed, label = channel, type(channel).__name__
    elif channel == "identity":
        fixed, label = identity_channel(n), channel
    elif channel == "depolarizing":
        fixed, label = maximally_depolarizing(n), channel
    elif channel == "random-unitary":
        fixed = UnitaryChannel(haar_unitary(dim, np.random.default_rng([seed, 99])))
        label = channel
    else:
        raise ConfigurationError(f"unknown channel {channel!r}")

    def chunk(size, rng):
        us = haar_unitary(dim, rng, size=size)
        return np.array([d_avg(UnitaryChannel(u), fixed) for u in us])

    vals = _run_chunked(chunk, trials, seed, threads)
    target = 1 - 1 / dim
    mean, se = mean_stderr(vals)
    report = ExperimentReport(
        "qnflt",
        {"n": n, "channel": label, "trials": trials, "seed": seed},
        {"mean": mean, "stderr": se, "target": target, "spread": float(np.ptp(vals))},
        raw_series={"d_avg": vals.tolist()},
    )
    report.check("mean-distance", abs(mean - target) <= SIGMA * se + 1e-12, mean, target)
    if label == "depolarizing":
        worst = float(np.max(np.abs(vals - target)))
        report.check("zero-spread", worst <= 1e-12, worst, 0.0, "every trial equals 1 - 1/N")
    return report


def exp_dep_far(n: int, trials: int = 50, seed: int = 0) -> ExperimentReport:
    """Probe lower bound on the diamond distance of unitaries to the maximally depolarizing channel."""
    if n > 5:
        raise ConfigurationError("this experiment is limited to n <= 5")
    dim = 2**n
    dep = maximally_depolarizing(n)
    rng = np.random.default_rng([seed, 7])
    vals = np.array(
        [diamond_lower_bound(UnitaryChannel(haar_unitary(dim, rng)), dep).distance for _ in range(trials)]
    )
    identity_value = diamond_lower_bound(identity_channel(n), dep).distance
    bound = 1 - 1 / dim
    report = ExperimentReport(
        "dep-far",
        {"n": n, "trials": trials, "seed": seed},
        {"min": float(vals.min()), "identity": identity_value, "bound": bound},
        raw_series={"lower_bound": vals.tolist()},
    )
    report.check("all-trials", bool(np.all(vals >= bound - 1e-12)), float(vals.min()), bound)
    report.check("identity", identity_value >= bound - 1e-12, identity_value, bound)
    return report


@dataclass(frozen=True)
class PRUSettings:
    learner_epsilon: float | None = None
    learner_delta: float = 1 / 6
    verifier_epsilon: float = 1 / 4
    verifier_delta: float = 1 / 6
    k_cap: int | None = None
    support_mode: str = "unknown-support"

    def resolved_epsilon(self, n: int) -> float:
        return 1 / (48 * n) if self.learner_epsilon is None else self.learner_epsilon


def _pru_trial(truth: UnitaryChannel, params: ShallowLearnParams, settings: PRUSettings, seq) -> tuple[int, float, float]:
    learn_seq, verify_seq = seq.spawn(2)
    oracle = QPStatOracle(truth, OracleConfig("exact", params.oracle_tau()))
    model = learn_heisenberg_observables(oracle, params, seed=learn_seq, sampling="exhaustive")
    channel = reconstruct_channel(model).ptm
    result = verify_model(
        channel,
        truth,
        settings.verifier_epsilon,
        settings.verifier_delta,
        mode="query-based",
        rng=np.random.default_rng(verify_seq),
    )
    return int(result.verdict == "PASS"), result.d_avg_estimate, d_avg(truth, channel)


def exp_pru_distinguish(
    n: int = 5,
    d: int = 1,
    trials: int = 30,
    seed: int = 0,
    settings: PRUSettings = PRUSettings(),
    threads: int = 1,
) -> ExperimentReport:
    """Learn-then-verify distinguisher between RQC(n, d) and Haar-random unitaries.

    The learner runs with exact oracles and exhaustive input enumeration, which removes
    the sampling error its randomized guarantee allows for. The verifier is query based.
    """
    if n > 6 or d > 2:
        raise ConfigurationError("the distinguisher experiment is limited to n <= 6 and d <= 2")
    eps_l = settings.resolved_epsilon(n)
    k_cap = min(n, 2 * d) if settings.k_cap is None else settings.k_cap
    params = ShallowLearnParams(n, d, eps_l, settings.learner_delta, settings.support_mode, k_cap)
    root = np.random.SeedSequence([seed, n, d])
    arm_seqs = root.spawn(2)

    def run_arm(arm: int):
        seqs = arm_seqs[arm].spawn(trials)

        def one(seq):
            sample_seq, rest = seq.spawn(2)
            rng = np.random.default_rng(sample_seq)
            if arm == 0:
                truth = UnitaryChannel(circuit=build_rqc(n, d, rng))
            else:
                truth = UnitaryChannel(haar_unitary(2**n, rng))
            return _pru_trial(truth, params, settings, rest)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(one, seqs))
        return [one(s) for s in seqs]

    rows_a, rows_b = run_arm(0), run_arm(1)
    pass_a = float(np.mean([r[0] for r in rows_a]))
    pass_b = float(np.mean([r[0] for r in rows_b]))
    advantage = pass_a - pass_b
    se = math.sqrt(pass_a * (1 - pass_a) / trials + pass_b * (1 - pass_b) / trials)
    report = ExperimentReport(
        "pru-distinguish",
        {
            "n": n,
            "d": d,
            "trials": trials,
            "seed": seed,
            "learner_epsilon": eps_l,
            "learner_delta": settings.learner_delta,
            "verifier_epsilon": settings.verifier_epsilon,
            "verifier_delta": settings.verifier_delta,
            "k_cap": k_cap,
            "support_mode": settings.support_mode,
            "oracle_mode": "exact",
            "sampling": "exhaustive",
        },
        {"pass_rate_rqc": pass_a, "pass_rate_haar": pass_b, "advantage": advantage, "two_arm_stderr": se},
        raw_series={
            "rqc_pass": [r[0] for r in rows_a],
            "haar_pass": [r[0] for r in rows_b],
            "rqc_estimate": [r[1] for r in rows_a],
            "haar_estimate": [r[1] for r in rows_b],
            "rqc_d_avg": [r[2] for r in rows_a],
            "haar_d_avg": [r[2] for r in rows_b],
        },
    )
    report.check("rqc-pass-rate", pass_a >= 2 / 3, pass_a, 2 / 3)
    report.check("haar-pass-rate", pass_b <= 1 / 2, pass_b, 1 / 2)
    report.check("advantage", advantage >= 1 / 6 - SIGMA * se, advantage, 1 / 6, "5-sigma two-arm band")
    return report
