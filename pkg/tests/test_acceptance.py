"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import time

import numpy as np
import pytest

from qsqlab.experiments import exp_haar_moments, exp_pru_distinguish, exp_qnflt, exp_rqc_variance
from qsqlab.noise import RobustWrapConfig, estimate_depolarizing, noisy_for_norm, output_purity, wrap_robust
from qsqlab.observable_learner import LearnObservableParams, exhaustive_alphas, learn_observable, query_budget
from qsqlab.oracles import KQPStatOracle, OracleConfig, QPStatOracle, QStatOracle
from qsqlab.pauli import ObservableSum, PauliString, enumerate_low_weight, observable_infinity_norm, pauli_decompose
from qsqlab.shallow_learner import ShallowLearnParams, learn_heisenberg_observables
from qsqlab.sim import (
    DepolarizedUnitary,
    UnitaryChannel,
    build_rqc,
    choi,
    d_avg,
    diamond_depolarized,
    diamond_lower_bound,
    haar_state,
    haar_unitary,
    heisenberg_evolve,
    identity_channel,
    maximally_depolarizing,
    purity,
    trace_norm,
)


@pytest.fixture
def report(capsys):
    start = time.perf_counter()

    def emit(number: int, title: str, ok: bool, detail: str = ""):
        elapsed = time.perf_counter() - start
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'} {title} ({detail}; {elapsed:.1f}s)")
        assert ok, f"criterion {number} failed: {detail}"

    return emit


def test_criterion_01_coefficient_identity(report):
    rng = np.random.default_rng(101)
    worst = 0.0
    for trial in range(100):
        n = 1 + trial % 4
        k = min(n, 2)
        strings = enumerate_low_weight(n, k)[1:]
        picks = rng.choice(len(strings), size=min(len(strings), 4), replace=False)
        obs = ObservableSum(n, [(strings[i], float(rng.normal())) for i in picks])
        scale = observable_infinity_norm(obs)
        obs = obs * (float(rng.uniform(0.1, 1.0)) / scale)
        dense = pauli_decompose(obs.to_dense(), atol=0)
        alphas = exhaustive_alphas(obs, k)
        worst = max(worst, max(abs(a - dense.coefficient(p)) for p, a in alphas.items()))
    report(1, "coefficient identity", worst <= 1e-10, f"max deviation {worst:.2e} <= 1e-10 over 100 observables")


def test_criterion_02_observable_learner_contract(report):
    hidden = ObservableSum(3, [("ZII", 0.5), ("XXI", 0.25)])
    params = LearnObservableParams(3, 2, 0.4, 0.2)
    budget = query_budget(params)
    needed = (1 - params.delta) * 50 - 3
    lines, ok = [], True
    for mode, sampling in (("exact", "exhaustive"), ("exact", "iid"), ("jitter", "iid"), ("adversarial-grid", "iid")):
        successes, contained = 0, True
        for seed in range(50):
            oracle = QStatOracle(hidden, OracleConfig(mode, budget.tau, seed=seed))
            learned = learn_observable(oracle, params, rng=np.random.default_rng([seed, 2]), sampling=sampling)
            assert oracle.ledger.total == budget.N
            if observable_infinity_norm(learned.estimate - hidden) <= params.epsilon:
                successes += 1
                contained &= set(learned.support) <= {0, 1}
        ok &= contained and successes >= needed
        lines.append(f"{mode}/{sampling} {successes}/50")
    report(2, "observable learner contract", ok, ", ".join(lines) + f", need >= {needed:g} and containment")


def test_criterion_03_shallow_learner_ledger(report):
    params = ShallowLearnParams(5, 1, 0.6, 0.2, "unknown-support", k_cap=2)
    expected = 3 * 5 * query_budget(LearnObservableParams(5, 2, 0.6 / 30, 0.2 / 15)).N
    ok, worst = params.expected_queries() == expected, 0.0
    for seed in range(3):
        circuit = build_rqc(5, 1, np.random.default_rng([seed, 3]))
        oracle = QPStatOracle(UnitaryChannel(circuit=circuit), OracleConfig("exact", params.oracle_tau()))
        model = learn_heisenberg_observables(oracle, params, seed=seed, sampling="exhaustive")
        ok &= model.ledger_total == oracle.ledger.total == expected
        for (i, p), lo in model.observables.items():
            truth = heisenberg_evolve(circuit, i, p).to_observable_sum(atol=0)
            worst = max(worst, observable_infinity_norm(lo.estimate - truth))
    ok &= worst <= params.epsilon_each
    report(3, "shallow learner ledger", ok, f"ledger {expected} per run, max error {worst:.2e} <= {params.epsilon_each:.4f}")


def test_criterion_04_purity_law(report):
    rng = np.random.default_rng(104)
    worst = 0.0
    for n in (1, 2, 3):
        for gamma in np.linspace(0.0, 1.0, 10):
            ch = DepolarizedUnitary(UnitaryChannel(haar_unitary(2**n, rng)), float(gamma))
            psi = haar_state(2**n, rng)
            value = purity(ch.apply(np.outer(psi, psi.conj())))
            worst = max(worst, abs(value - output_purity(float(gamma), n)))
    report(4, "purity law", worst <= 1e-10, f"max deviation {worst:.2e} over 10x3 grid")


def test_criterion_05_noise_estimator(report):
    n, gamma, gamma_u, eps = 3, 0.2, 0.5, 0.05
    true_norm = diamond_depolarized(gamma, n).norm
    failures, widest = 0, 0.0
    for mode in ("exact", "jitter"):
        for seed in range(100):
            u = UnitaryChannel(haar_unitary(2**n, np.random.default_rng([seed, 5])))
            oracle = KQPStatOracle(DepolarizedUnitary(u, gamma), OracleConfig(mode, eps, seed=seed))
            est = estimate_depolarizing(oracle, gamma_u, eps)
            widest = max(widest, est.width)
            failures += not (oracle.ledger.total == 1 and est.contains(true_norm) and est.width <= eps)
    report(5, "noise estimator", failures == 0, f"{failures} failures in 200 runs, widest interval {widest:.4f}")


def test_criterion_06_robust_wrapper(report):
    rng = np.random.default_rng(106)
    eta, tau_outer = 0.03, 0.1
    circuit = build_rqc(5, 2, rng)
    clean = UnitaryChannel(circuit=circuit)
    cfg = RobustWrapConfig(eta, tau_outer)
    violations, total = 0, 0
    for mode in ("jitter", "adversarial-grid", "shots"):
        facade = wrap_robust(QPStatOracle(noisy_for_norm(clean, eta), OracleConfig(mode, cfg.tau_inner, seed=6)), cfg)
        reference = QPStatOracle(clean, OracleConfig("exact", tau_outer))
        for _ in range(15):
            pauli = PauliString.single(5, int(rng.integers(5)), "XYZ"[int(rng.integers(3))])
            labels = rng.integers(0, 6, size=(2300, 5))
            ones = np.ones(len(labels), dtype=np.int64)
            diff = facade.query_stab_batch(labels, ones, pauli) - reference.query_stab_batch(labels, ones, pauli)
            violations += int(np.count_nonzero(np.abs(diff) > tau_outer))
            total += len(labels)
    params = ShallowLearnParams(5, 1, 0.6, 0.2, "unknown-support", k_cap=2)
    tau = params.oracle_tau()
    learn_cfg = RobustWrapConfig(tau / 2, tau)
    worst = 0.0
    for mode in ("exact", "jitter"):
        circuit = build_rqc(5, 1, rng)
        clean = UnitaryChannel(circuit=circuit)
        inner = QPStatOracle(noisy_for_norm(clean, learn_cfg.eta), OracleConfig(mode, learn_cfg.tau_inner, seed=7))
        model = learn_heisenberg_observables(wrap_robust(inner, learn_cfg), params, seed=7, sampling="exhaustive")
        assert model.ledger_total == params.expected_queries()
        for (i, p), lo in model.observables.items():
            worst = max(worst, observable_infinity_norm(lo.estimate - heisenberg_evolve(circuit, i, p).to_observable_sum(atol=0)))
    ok = violations == 0 and total >= 10**5 and worst <= params.epsilon_each
    report(6, "robust wrapper", ok, f"{violations} violations in {total} queries, learner error {worst:.2e}")


def test_criterion_07_haar_moments(report):
    lines, ok = [], True
    for n in (1, 2, 3):
        rep = exp_haar_moments(n, "Z" + "I" * (n - 1), trials=20000, seed=107)
        anchored = rep.statistics["second_target"] == pytest.approx(1 / (2**n + 1), rel=1e-14)
        ok &= rep.passed and anchored
        lines.append(f"n={n} second {rep.statistics['second']:.4f} vs {1 / (2**n + 1):.4f}")
    report(7, "Haar moments", ok, ", ".join(lines))


def test_criterion_08_rqc_checks(report):
    rep = exp_rqc_variance(6, [1, 2, 3, 4], "Z" * 6, trials=20000, seed=108)
    parts = [
        f"d{d} {rep.statistics[f'd{d}_second']:.4f}<={rep.statistics[f'd{d}_bound']:.4f}" for d in (1, 2, 3, 4)
    ]
    design = max(rep.verdict(f"one-design-d{d}").measured for d in (1, 2, 3, 4))
    report(8, "RQC one-design and intermediate inequality", rep.passed, ", ".join(parts) + f", worst design dev {design:.1f} sigma")


def test_criterion_09_qnflt(report):
    lines, ok = [], True
    for n in (1, 2, 3):
        rep = exp_qnflt(n, "identity", trials=2000, seed=109)
        dep = exp_qnflt(n, "depolarizing", trials=200, seed=109)
        ok &= rep.passed and dep.passed and dep.statistics["spread"] <= 1e-12
        lines.append(f"n={n} mean {rep.statistics['mean']:.4f} vs {1 - 2.0**-n}")
    report(9, "no-free-lunch mean distance", ok, ", ".join(lines))


def test_criterion_10_distance_ordering(report):
    ok = True
    for n in (1, 2, 3):
        for gamma in np.linspace(0.0, 1.0, 11):
            gamma = float(gamma)
            avg = d_avg(identity_channel(n), DepolarizedUnitary(identity_channel(n), gamma))
            diamond = trace_norm(choi(DepolarizedUnitary(identity_channel(n), gamma)) - choi(identity_channel(n))) / 2
            ok &= abs(avg - gamma * (1 - 2.0**-n)) <= 1e-12
            ok &= abs(diamond - diamond_depolarized(gamma, n).distance) <= 1e-12
            ok &= avg <= diamond + 1e-12
    rng = np.random.default_rng(110)
    worst_margin = np.inf
    for trial in range(50):
        n = 1 + trial % 3
        value = diamond_lower_bound(UnitaryChannel(haar_unitary(2**n, rng)), maximally_depolarizing(n)).distance
        worst_margin = min(worst_margin, value - (1 - 2.0**-n))
    ok &= worst_margin >= -1e-12
    report(10, "distance ordering and depolarizing geometry", bool(ok), f"min lower-bound margin {worst_margin:.2e}")


def test_criterion_11_pru_distinguisher(report):
    rep = exp_pru_distinguish(5, 1, trials=30, seed=111)
    s = rep.statistics
    ok = s["pass_rate_rqc"] >= 2 / 3 and s["pass_rate_haar"] <= 1 / 2 and s["advantage"] >= 1 / 6
    report(
        11,
        "PRU distinguisher",
        ok,
        f"RQC pass {s['pass_rate_rqc']:.3f}, Haar pass {s['pass_rate_haar']:.3f}, advantage {s['advantage']:.3f}",
    )
