import numpy as np
import pytest

from qsqlab.errors import ConfigurationError, InconsistentPriorError
from qsqlab.noise import (
    _interval,
    NoiseEstimate,
    RobustWrapConfig,
    calibrate_c_est,
    estimate_depolarizing,
    noisy_for_norm,
    output_purity,
    wrap_robust,
)
from qsqlab.oracles import KQPStatOracle, OracleConfig, QPStatOracle
from qsqlab.pauli import PauliString, ProductStabState, sample_stab_counts
from qsqlab.shallow_learner import ShallowLearnParams, learn_heisenberg_observables, reconstruct_channel
from qsqlab.sim import (
    DepolarizedUnitary,
    UnitaryChannel,
    build_rqc,
    d_avg,
    diamond_depolarized,
    haar_state,
    haar_unitary,
    purity,
)

N3_FIXTURE = 0.45573192239858995


def _two_copy(n, gamma, mode="exact", seed=0, tau=0.05):
    u = UnitaryChannel(haar_unitary(2**n, np.random.default_rng(seed + 77)))
    return KQPStatOracle(DepolarizedUnitary(u, gamma), OracleConfig(mode, tau, seed=seed))


def test_wrap_config_validation():
    with pytest.raises(ConfigurationError):
        RobustWrapConfig(0.1, 0.1)
    with pytest.raises(ConfigurationError):
        RobustWrapConfig(-0.01, 0.1)
    assert RobustWrapConfig(0.03, 0.1).tau_inner == pytest.approx(0.07)


def test_wrapper_requires_matching_inner_tolerance():
    inner = QPStatOracle(UnitaryChannel(np.eye(4)), OracleConfig("exact", 0.1))
    with pytest.raises(ConfigurationError):
        wrap_robust(inner, RobustWrapConfig(0.03, 0.1))


def test_zero_eta_facade_is_transparent():
    rng = np.random.default_rng(0)
    circuit = build_rqc(3, 1, rng)
    a = QPStatOracle(UnitaryChannel(circuit=circuit), OracleConfig("jitter", 0.1, seed=4))
    b = QPStatOracle(UnitaryChannel(circuit=circuit), OracleConfig("jitter", 0.1, seed=4))
    facade = wrap_robust(b, RobustWrapConfig(0.0, 0.1))
    labels, counts = sample_stab_counts(3, 500, rng)
    p = PauliString.from_str("IZI")
    np.testing.assert_array_equal(a.query_stab_batch(labels, counts, p), facade.query_stab_batch(labels, counts, p))
    assert facade.ledger.total == a.ledger.total == 500
    assert facade.tau == 0.1


def _boundary_check(eta, tau_outer, queries, mode, seed):
    rng = np.random.default_rng(seed)
    circuit = build_rqc(4, 2, rng)
    clean = UnitaryChannel(circuit=circuit)
    noisy = noisy_for_norm(clean, eta)
    assert diamond_depolarized(noisy.gamma, 4).norm == pytest.approx(eta, rel=1e-12)
    cfg = RobustWrapConfig(eta, tau_outer)
    facade = wrap_robust(QPStatOracle(noisy, OracleConfig(mode, cfg.tau_inner, seed=seed)), cfg)
    reference = QPStatOracle(clean, OracleConfig("exact", tau_outer))
    worst = 0.0
    per_pauli = queries // 12
    for site in range(4):
        for p in "XYZ":
            pauli = PauliString.single(4, site, p)
            labels = rng.integers(0, 6, size=(per_pauli, 4))
            ones = np.ones(per_pauli, dtype=np.int64)
            got = facade.query_stab_batch(labels, ones, pauli)
            want = reference.query_stab_batch(labels, ones, pauli)
            worst = max(worst, float(np.max(np.abs(got - want))))
    assert facade.ledger.total == 12 * per_pauli
    return worst


@pytest.mark.parametrize("mode", ["jitter", "adversarial-grid", "shots"])
def test_wrapper_example_ten_thousand_queries(mode):
    assert _boundary_check(0.03, 0.1, 10_008, mode, seed=1) <= 0.1


def test_wrapper_boundary_hundred_thousand_queries():
    assert _boundary_check(0.03, 0.1, 100_008, "adversarial-grid", seed=2) <= 0.1 + 1e-12


def test_wrapper_shaves_per_query_tolerance():
    inner = QPStatOracle(UnitaryChannel(np.eye(2)), OracleConfig("adversarial-grid", 0.07))
    facade = wrap_robust(inner, RobustWrapConfig(0.03, 0.1))
    value = facade.query(ProductStabState.from_names(["0"]), "Z", tau=0.05)
    assert value == pytest.approx(1.0)
    with pytest.raises(ConfigurationError):
        facade.query(ProductStabState.from_names(["0"]), "Z", tau=0.02)


def test_learner_through_wrapper_on_noisy_rqc52():
    params = ShallowLearnParams(5, 2, 0.6, 0.2, "geometric")
    tau_outer = params.oracle_tau()
    eta = tau_outer / 2
    good = 0
    for seed in range(10):
        circuit = build_rqc(5, 2, np.random.default_rng(300 + seed))
        clean = UnitaryChannel(circuit=circuit)
        cfg = RobustWrapConfig(eta, tau_outer)
        inner = QPStatOracle(noisy_for_norm(clean, eta), OracleConfig("jitter", cfg.tau_inner, seed=seed))
        facade = wrap_robust(inner, cfg)
        model = learn_heisenberg_observables(facade, params, seed=seed, sampling="exhaustive")
        assert model.ledger_total == params.expected_queries()
        good += d_avg(clean, reconstruct_channel(model).ptm) <= params.epsilon
    assert good >= (1 - params.delta) * 10


def test_output_purity_formula_and_input_independence():
    rng = np.random.default_rng(3)
    for n in (1, 2, 3):
        ch = DepolarizedUnitary(UnitaryChannel(haar_unitary(2**n, rng)), 0.35)
        values = []
        for _ in range(20):
            psi = haar_state(2**n, rng)
            values.append(purity(ch.apply(np.outer(psi, psi.conj()))))
        assert max(values) - min(values) <= 1e-10
        assert values[0] == pytest.approx(output_purity(0.35, n), abs=1e-10)


def test_noiseless_example():
    est = estimate_depolarizing(_two_copy(3, 0.0), 0.5, 0.05)
    assert est.query_alpha == pytest.approx(1.0, abs=1e-12)
    assert est.gamma_lo == 0 and est.dnorm_lo == 0
    assert est.contains(0.0)


def test_gamma_02_example():
    oracle = _two_copy(3, 0.2)
    est = estimate_depolarizing(oracle, 0.5, 0.05)
    assert est.query_alpha == pytest.approx(0.685, abs=1e-12)
    assert est.contains(diamond_depolarized(0.2, 3).norm)
    assert est.width <= 0.05
    assert oracle.ledger.total == 1
    assert est.tau_used == pytest.approx(est.c_est * 0.5 * 0.05)


def test_calibration_fixture_and_bounds():
    assert calibrate_c_est(0.5, 0.05, 3) == N3_FIXTURE
    for n in (1, 2, 3, 5):
        c = calibrate_c_est(0.5, 0.05, n)
        assert 0 < c <= 0.5
    assert calibrate_c_est(0.01, 0.05, 3) >= 0.49


@pytest.mark.parametrize("mode", ["jitter", "adversarial-grid", "shots"])
def test_prior_edge_over_hundred_seeds(mode):
    gamma_u, eps = 0.5, 0.05
    true_norm = diamond_depolarized(gamma_u, 2).norm
    for seed in range(100):
        est = estimate_depolarizing(_two_copy(2, gamma_u, mode, seed), gamma_u, eps)
        assert est.contains(true_norm)
        assert est.width <= eps + 1e-12


def test_random_gammas_jitter():
    rng = np.random.default_rng(4)
    for seed in range(100):
        n = int(rng.integers(1, 4))
        gamma = float(rng.uniform(0, 0.5))
        est = estimate_depolarizing(_two_copy(n, gamma, "jitter", seed), 0.5, 0.05)
        assert est.contains(diamond_depolarized(gamma, n).norm)
        assert est.width <= 0.05 + 1e-12


def test_inversion_is_monotone():
    rng = np.random.default_rng(5)
    alphas = np.sort(rng.uniform(output_purity(0.5, 3), 1.0, 1000))
    lows = [_interval(a, 0.01, 3, 0.5)[0] for a in alphas]
    assert all(x >= y - 1e-15 for x, y in zip(lows, lows[1:]))
    gammas = np.linspace(0, 1, 200)
    norms = [diamond_depolarized(g, 3).norm for g in gammas]
    assert all(b >= a for a, b in zip(norms, norms[1:]))


def test_inconsistent_prior():
    with pytest.raises(InconsistentPriorError):
        estimate_depolarizing(_two_copy(2, 0.95, tau=0.01), 0.3, 0.05)


def test_estimator_argument_checks():
    with pytest.raises(ConfigurationError):
        estimate_depolarizing(_two_copy(2, 0.1), 0.5, 0.6)
    with pytest.raises(ConfigurationError):
        estimate_depolarizing(_two_copy(2, 0.1), 1.0, 0.05)


def test_estimate_json_roundtrip():
    est = estimate_depolarizing(_two_copy(2, 0.1), 0.5, 0.05)
    assert NoiseEstimate.from_json(est.to_json()) == est
