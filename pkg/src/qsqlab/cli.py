"""Command-line entry point.

Exit codes: 0 on success, 1 when a checked verdict fails, 2 on configuration errors
(including unknown flags).
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InconsistentPriorError, ResourceLimitError
from .experiments import (
    PRUSettings,
    exp_dep_far,
    exp_haar_moments,
    exp_pru_distinguish,
    exp_qnflt,
    exp_rqc_variance,
)
from .noise import RobustWrapConfig, estimate_depolarizing, wrap_robust
from .observable_learner import LearnObservableParams, learn_observable, query_budget
from .oracles import KQPStatOracle, OracleConfig, QPStatOracle, QStatOracle
from .pauli import ObservableSum, PauliString, observable_infinity_norm
from .serialize import dumps
from .shallow_learner import ShallowLearnParams, learn_heisenberg_observables, reconstruct_channel, verify_model
from .sim.channels import DepolarizedUnitary, UnitaryChannel
from .sim.circuits import build_rqc
from .sim.distances import diamond_depolarized, gamma_for_diamond_norm
from .sim.haar import haar_unitary

EXPERIMENTS = ("check-moments", "variance-decay", "qnflt", "distinguish-pru", "dep-far")


def _common(p: argparse.ArgumentParser, *flags: str) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None, help="write to this path instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--threads", type=int, default=1)
    for flag in flags:
        _FLAGS[flag](p)


_FLAGS = {
    "n": lambda p: p.add_argument("--n", type=int, required=True),
    "d": lambda p: p.add_argument("--d", type=int, default=1),
    "k": lambda p: p.add_argument("--k", type=int, default=None),
    "epsilon": lambda p: p.add_argument("--epsilon", type=float, default=None),
    "delta": lambda p: p.add_argument("--delta", type=float, default=None),
    "tau": lambda p: p.add_argument("--tau", type=float, default=None, help="tighter oracle tolerance"),
    "mode": lambda p: p.add_argument("--mode", choices=("exact", "jitter", "adversarial-grid", "shots"), default="exact"),
    "trials": lambda p: p.add_argument("--trials", type=int, default=None),
    "gamma": lambda p: p.add_argument("--gamma", type=float, default=0.0),
    "gamma-u": lambda p: p.add_argument("--gamma-u", dest="gamma_u", type=float, required=True),
    "eta": lambda p: p.add_argument("--eta", type=float, default=None),
    "noise-gamma": lambda p: p.add_argument("--noise-gamma", dest="noise_gamma", type=float, default=None),
    "sampling": lambda p: p.add_argument("--sampling", choices=("iid", "exhaustive"), default="iid"),
    "observable": lambda p: p.add_argument(
        "--observable", default=None, help='JSON list of {"pauli": ..., "coeff": ...}'
    ),
    "pauli": lambda p: p.add_argument("--pauli", default=None, help="Pauli string such as ZIZ"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsqlab", description="Statistical-query learning laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("learn-observable", help="learn a few-body observable from QStat queries")
    _common(p, "n", "k", "epsilon", "delta", "tau", "mode", "sampling", "observable")
    p = sub.add_parser("learn-circuit", help="learn a random brickwork circuit from QPStat queries")
    _common(p, "n", "d", "k", "epsilon", "delta", "tau", "mode", "sampling", "eta", "noise-gamma")
    p.add_argument("--support-mode", dest="support_mode", choices=("unknown-support", "geometric"), default="unknown-support")
    p.add_argument("--verify-mode", dest="verify_mode", choices=("oracle-free", "query-based"), default="oracle-free")
    p = sub.add_parser("estimate-noise", help="bracket global depolarizing noise with one 2-copy query")
    _common(p, "n", "gamma", "gamma-u", "epsilon", "mode")
    p = sub.add_parser("check-moments", help="Haar first/second moments")
    _common(p, "n", "trials", "pauli")
    p = sub.add_parser("variance-decay", help="RQC second moments for depths 1..d")
    _common(p, "n", "d", "trials", "pauli")
    p = sub.add_parser("qnflt", help="mean average distance to Haar-random unitaries")
    _common(p, "n", "trials")
    p.add_argument("--channel", choices=("identity", "depolarizing", "random-unitary"), default="identity")
    p = sub.add_parser("distinguish-pru", help="learn-then-verify distinguisher, RQC vs Haar")
    _common(p, "n", "d", "trials", "epsilon", "delta")
    p = sub.add_parser("dep-far", help="unitaries against the maximally depolarizing channel")
    _common(p, "n", "trials")
    return parser


def _require(value, name: str, default=None):
    if value is None:
        if default is None:
            raise ConfigurationError(f"--{name} is required for this subcommand")
        return default
    return value


def _oracle_tau(args, budget_tau: float) -> float:
    if args.tau is None:
        return budget_tau
    if not 0 < args.tau <= budget_tau:
        raise ConfigurationError(f"--tau may only tighten the budget tolerance {budget_tau!r}")
    return args.tau


def _cmd_learn_observable(args):
    n = args.n
    if args.observable is None:
        hidden = ObservableSum(n, [(PauliString.single(n, 0, "Z"), 1.0)])
    else:
        hidden = ObservableSum.from_json(json.loads(args.observable), n)
    k = _require(args.k, "k", max(1, min(n, len(hidden.support))))
    params = LearnObservableParams(n, k, _require(args.epsilon, "epsilon"), _require(args.delta, "delta"))
    budget = query_budget(params)
    config = OracleConfig(args.mode, _oracle_tau(args, budget.tau), seed=args.seed)
    oracle = QStatOracle(hidden, config)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 1]))
    learned = learn_observable(oracle, params, rng=rng, sampling=args.sampling)
    error = observable_infinity_norm(learned.estimate - hidden)
    contained = set(learned.support) <= set(hidden.support)
    ok = error <= params.epsilon and contained
    payload = {
        "command": "learn-observable",
        "params": params.to_json(),
        "oracle": config.to_json(),
        "learned": learned.to_json(),
        "ledger": oracle.ledger.to_json(),
        "error": error,
        "support_contained": contained,
        "passed": ok,
    }
    return payload, ok


def _cmd_learn_circuit(args):
    n, d = args.n, args.d
    params = ShallowLearnParams(
        n, d, _require(args.epsilon, "epsilon"), _require(args.delta, "delta"), args.support_mode, args.k
    )
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 2]))
    circuit = build_rqc(n, d, rng)
    truth = UnitaryChannel(circuit=circuit)
    tau = _oracle_tau(args, params.oracle_tau())
    noise = None
    if args.eta is not None or args.noise_gamma is not None:
        eta = _require(args.eta, "eta")
        gamma = gamma_for_diamond_norm(eta, n) if args.noise_gamma is None else args.noise_gamma
        norm = diamond_depolarized(gamma, n).norm
        if norm > eta * (1 + 1e-12):
            raise ConfigurationError(f"noise of diamond norm {norm!r} exceeds --eta {eta!r}")
        cfg = RobustWrapConfig(eta, tau)
        inner = QPStatOracle(DepolarizedUnitary(truth, gamma), OracleConfig(args.mode, cfg.tau_inner, seed=args.seed))
        oracle = wrap_robust(inner, cfg)
        noise = {"gamma": gamma, "diamond_norm": norm, "eta": eta, "tau_outer": tau, "tau_inner": cfg.tau_inner}
    else:
        oracle = QPStatOracle(truth, OracleConfig(args.mode, tau, seed=args.seed))
    model = learn_heisenberg_observables(oracle, params, seed=args.seed, sampling=args.sampling)
    payload = {
        "command": "learn-circuit",
        "circuit": circuit.to_json(),
        "model": model.to_json(),
        "ledger": oracle.ledger.to_json(),
        "expected_queries": params.expected_queries(),
        "noise": noise,
    }
    ok = model.ledger_total == params.expected_queries()
    try:
        recon = reconstruct_channel(model)
    except ResourceLimitError as exc:
        payload["reconstruction"] = None
        payload["verification"] = {"skipped": str(exc)}
        return payload, ok
    verify_rng = np.random.default_rng(np.random.SeedSequence([args.seed, 3]))
    result = verify_model(recon, truth, params.epsilon, params.delta, mode=args.verify_mode, rng=verify_rng)
    payload["reconstruction"] = recon.to_json()
    payload["verification"] = result._asdict()
    return payload, ok and result.verdict == "PASS"


def _cmd_estimate_noise(args):
    n = args.n
    epsilon = _require(args.epsilon, "epsilon")
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 4]))
    truth = DepolarizedUnitary(UnitaryChannel(haar_unitary(2**n, rng)), args.gamma)
    oracle = KQPStatOracle(truth, OracleConfig(args.mode, max(epsilon, 1e-12), seed=args.seed))
    estimate = estimate_depolarizing(oracle, args.gamma_u, epsilon)
    true_norm = diamond_depolarized(args.gamma, n).norm
    contains = estimate.contains(true_norm)
    narrow = estimate.width <= epsilon + 1e-12
    payload = {
        "command": "estimate-noise",
        "estimate": estimate.to_json(),
        "true_norm": true_norm,
        "contains_truth": contains,
        "width_within_epsilon": narrow,
        "ledger": oracle.ledger.to_json(),
    }
    return payload, contains and narrow


def _run_experiment(args):
    trials = args.trials
    if args.command == "check-moments":
        report = exp_haar_moments(args.n, args.pauli, trials=trials or 20000, seed=args.seed, threads=args.threads)
    elif args.command == "variance-decay":
        report = exp_rqc_variance(
            args.n, list(range(1, args.d + 1)), args.pauli, trials=trials or 20000, seed=args.seed, threads=args.threads
        )
    elif args.command == "qnflt":
        report = exp_qnflt(args.n, args.channel, trials=trials or 2000, seed=args.seed, threads=args.threads)
    elif args.command == "distinguish-pru":
        settings = PRUSettings(learner_epsilon=args.epsilon, learner_delta=args.delta or 1 / 6)
        report = exp_pru_distinguish(args.n, args.d, trials or 30, args.seed, settings, threads=args.threads)
    else:
        report = exp_dep_far(args.n, trials or 50, args.seed)
    return report


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigurationError("--threads must be at least 1")
        if args.command in EXPERIMENTS:
            report = _run_experiment(args)
            if args.format == "csv":
                _emit(report.to_csv(), args.output)
            else:
                _emit(dumps({"command": args.command, "report": report.to_json()}), args.output)
            return 0 if report.passed else 1
        if args.format == "csv":
            raise ConfigurationError("CSV output is only available for experiment subcommands")
        handler = {
            "learn-observable": _cmd_learn_observable,
            "learn-circuit": _cmd_learn_circuit,
            "estimate-noise": _cmd_estimate_noise,
        }[args.command]
        payload, ok = handler(args)
    except (ConfigurationError, ResourceLimitError, InconsistentPriorError, ValueError) as exc:
        print(f"qsqlab: error: {exc}", file=sys.stderr)
        return 2
    _emit(dumps(payload), args.output)
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
