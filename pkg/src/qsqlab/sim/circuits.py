"""Brickwork circuits, backward light cones and Heisenberg evolution on the cone."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import _caps
from ..pauli import (
    PAULI_CHARS,
    STAB_VECTORS,
    ObservableSum,
    PauliString,
    ProductStabState,
    all_stab_labels,
    pauli_decompose,
)
from .haar import haar_unitary

UNITARITY_TOL = 1e-10


def brickwork_pairs(n: int, layer: int) -> list[tuple[int, int]]:
    """Adjacent pairs acted on in 1-based ``layer``: odd layers start at qubit 0, even at 1."""
    start = 0 if layer % 2 == 1 else 1
    return [(q, q + 1) for q in range(start, n - 1, 2)]


@dataclass(frozen=True)
class Gate:
    pair: tuple[int, int]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("two-qubit gates must be 4x4")
        err = np.max(np.abs(m.conj().T @ m - np.eye(4)))
        if err > UNITARITY_TOL:
            raise ValueError(f"gate on {self.pair} is not unitary (error {err:.2e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "pair", tuple(int(q) for q in self.pair))


class BrickworkCircuit:
    """Layered circuit of two-qubit gates on the brickwork pattern.

    ``layers[0]`` is applied first. A layer may omit pairs, which then carry the identity.
    """

    def __init__(self, n: int, layers: Sequence[Sequence[Gate]]):
        if n < 2:
            raise ValueError("brickwork circuits need at least two qubits")
        self.n = n
        checked = []
        for idx, layer in enumerate(layers, start=1):
            allowed = set(brickwork_pairs(n, idx))
            gates = tuple(sorted(layer, key=lambda g: g.pair))
            pairs = [g.pair for g in gates]
            if len(set(pairs)) != len(pairs) or not set(pairs) <= allowed:
                raise ValueError(f"layer {idx} pairs {pairs} do not follow the brickwork layout")
            checked.append(gates)
        self.layers: tuple[tuple[Gate, ...], ...] = tuple(checked)

    @property
    def d(self) -> int:
        return len(self.layers)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BrickworkCircuit) or (self.n, self.d) != (other.n, other.d):
            return False
        for la, lb in zip(self.layers, other.layers):
            if [g.pair for g in la] != [g.pair for g in lb]:
                return False
            if any(not np.array_equal(a.matrix, b.matrix) for a, b in zip(la, lb)):
                return False
        return True

    @classmethod
    def from_layer_gates(cls, n: int, layer_gates: Sequence[np.ndarray | None]) -> "BrickworkCircuit":
        """Place one matrix on every pair of each layer; ``None`` leaves a layer empty."""
        layers = []
        for idx, gate in enumerate(layer_gates, start=1):
            layers.append([] if gate is None else [Gate(p, gate) for p in brickwork_pairs(n, idx)])
        return cls(n, layers)

    def apply_to_states(self, states: np.ndarray) -> np.ndarray:
        """Apply the circuit to state vectors of shape (..., 2**n)."""
        states = np.asarray(states, dtype=complex)
        batch = states.shape[:-1]
        t = states.reshape((-1,) + (2,) * self.n)
        for layer in self.layers:
            for gate in layer:
                t = _apply_gate_to_tensor(t, gate.matrix, gate.pair, offset=1)
        return t.reshape(batch + (2**self.n,))

    @functools.cached_property
    def _unitary(self) -> np.ndarray:
        _caps.check("state", self.n, "dense circuit unitary")
        u = self.apply_to_states(np.eye(2**self.n, dtype=complex)).T
        u.setflags(write=False)
        return u

    def unitary(self) -> np.ndarray:
        return self._unitary

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "layers": [
                [
                    {
                        "pair": list(g.pair),
                        "gate": np.stack([g.matrix.real, g.matrix.imag], axis=-1).ravel().tolist(),
                    }
                    for g in layer
                ]
                for layer in self.layers
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BrickworkCircuit":
        layers = []
        for layer in data["layers"]:
            gates = []
            for g in layer:
                flat = np.asarray(g["gate"], dtype=float).reshape(4, 4, 2)
                gates.append(Gate(tuple(g["pair"]), flat[..., 0] + 1j * flat[..., 1]))
            layers.append(gates)
        circuit = cls(int(data["n"]), layers)
        if circuit.d != int(data["d"]):
            raise ValueError("depth field disagrees with the number of layers")
        return circuit


def _apply_gate_to_tensor(t: np.ndarray, gate: np.ndarray, pair, offset: int) -> np.ndarray:
    a, b = pair[0] + offset, pair[1] + offset
    g = gate.reshape(2, 2, 2, 2)
    out = np.tensordot(g, t, axes=([2, 3], [a, b]))
    return np.moveaxis(out, [0, 1], [a, b])


def build_rqc(n: int, d: int, rng: np.random.Generator) -> BrickworkCircuit:
    """Sample from RQC(n, d): every brickwork slot gets an independent Haar gate on U(4)."""
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    layers = []
    for layer in range(1, d + 1):
        pairs = brickwork_pairs(n, layer)
        mats = haar_unitary(4, rng, size=len(pairs))
        layers.append([Gate(p, m) for p, m in zip(pairs, mats)])
    return BrickworkCircuit(n, layers)


def light_cone(n: int, d: int, sites: Sequence[int]) -> tuple[int, ...]:
    """Backward light cone of ``sites`` through a full depth-d brickwork layout."""
    cone = set(sites)
    for layer in range(d, 0, -1):
        for a, b in brickwork_pairs(n, layer):
            if a in cone or b in cone:
                cone.update((a, b))
    return tuple(sorted(cone))


@dataclass(frozen=True)
class HeisenbergObservable:
    """``U^dag P U`` stored densely on its light cone ``support``."""

    n: int
    support: tuple[int, ...]
    dense: np.ndarray = field(repr=False)
    origin: tuple

    def stab_expectations(self, labels: np.ndarray) -> np.ndarray:
        """``<psi|O|psi>`` for a (S, n) array of product stabilizer labels."""
        table = _cone_table(self.dense, len(self.support))
        if not self.support:
            return np.full(labels.shape[0], table[0])
        sub = labels[:, list(self.support)]
        return table[np.ravel_multi_index(sub.T, (6,) * len(self.support))]

    def expectation(self, psi: ProductStabState) -> float:
        vec = psi.vector(self.support)
        return float(np.real(vec.conj() @ self.dense @ vec))

    def to_dense_full(self) -> np.ndarray:
        _caps.check("state", self.n, "full Heisenberg observable")
        return embed_dense(self.dense, self.support, self.n)

    def to_observable_sum(self, atol: float = 1e-12) -> ObservableSum:
        if not self.support:
            return ObservableSum(self.n, [(PauliString(self.n), float(self.dense[0, 0].real))])
        return relabel(pauli_decompose(self.dense, atol=atol), self.support, self.n)


# Memoised per dense matrix identity; cones are small so 6**m stays cheap.
_TABLE_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _cone_table(dense: np.ndarray, m: int) -> np.ndarray:
    key = id(dense)
    hit = _TABLE_CACHE.get(key)
    if hit is not None and hit[0] is dense:
        return hit[1]
    if m == 0:
        table = np.array([dense[0, 0].real])
    else:
        vecs = product_stab_vectors(all_stab_labels(m))
        table = np.einsum("si,ij,sj->s", vecs.conj(), dense, vecs).real
    if len(_TABLE_CACHE) > 4096:
        _TABLE_CACHE.clear()
    _TABLE_CACHE[key] = (dense, table)
    return table


def product_stab_vectors(labels: np.ndarray) -> np.ndarray:
    """State vectors (S, 2**m) for a (S, m) array of stabilizer labels."""
    out = np.ones((labels.shape[0], 1), dtype=complex)
    for q in range(labels.shape[1]):
        v = STAB_VECTORS[labels[:, q]]
        out = (out[:, :, None] * v[:, None, :]).reshape(labels.shape[0], -1)
    return out


def relabel(obs: ObservableSum, sites: Sequence[int], n: int) -> ObservableSum:
    """Map an observable on ``len(sites)`` qubits onto ``sites`` of an n-qubit register."""
    terms = []
    for p, c in obs.terms.items():
        terms.append((PauliString(n, tuple((sites[s], ch) for s, ch in p.ops)), c))
    return ObservableSum(n, terms)


def embed_dense(matrix: np.ndarray, sites: Sequence[int], n: int) -> np.ndarray:
    """Embed an operator acting on sorted ``sites`` into the full n-qubit space."""
    return _expand(np.asarray(matrix), tuple(sites), tuple(range(n)))


def _expand(matrix: np.ndarray, old: tuple[int, ...], new: tuple[int, ...]) -> np.ndarray:
    """Tensor identity factors onto ``matrix`` so it acts on sorted superset ``new``."""
    if old == new:
        return matrix
    extra = [q for q in new if q not in old]
    big = np.kron(matrix, np.eye(2 ** len(extra)))
    current = list(old) + extra
    k = len(current)
    t = big.reshape((2,) * (2 * k))
    perm = [current.index(q) for q in new]
    t = t.transpose(perm + [k + p for p in perm])
    return t.reshape(2**k, 2**k)


def _conjugate(o: np.ndarray, support: tuple[int, ...], gate: np.ndarray, pair) -> np.ndarray:
    """Return ``G^dag O G`` for a gate on ``pair`` (both inside ``support``)."""
    m = len(support)
    pa, pb = support.index(pair[0]), support.index(pair[1])
    t = o.reshape((2,) * (2 * m))
    gd = gate.conj().T.reshape(2, 2, 2, 2)
    t = np.moveaxis(np.tensordot(gd, t, axes=([2, 3], [pa, pb])), [0, 1], [pa, pb])
    g = gate.reshape(2, 2, 2, 2)
    t = np.tensordot(t, g, axes=([m + pa, m + pb], [0, 1]))
    t = np.moveaxis(t, [2 * m - 2, 2 * m - 1], [m + pa, m + pb])
    return t.reshape(2**m, 2**m)


def heisenberg_evolve_pauli(circuit: BrickworkCircuit, pauli: PauliString) -> HeisenbergObservable:
    """``U^dag P U`` via reverse-order conjugation, densified only on the growing cone."""
    if pauli.n != circuit.n:
        raise ValueError("Pauli string and circuit sizes differ")
    support = pauli.support
    o = pauli.to_dense(support) if support else np.ones((1, 1), dtype=complex)
    for layer in reversed(circuit.layers):
        for gate in layer:
            a, b = gate.pair
            if a not in support and b not in support:
                continue
            grown = tuple(sorted(set(support) | {a, b}))
            if len(grown) > len(support):
                _caps.check("state", len(grown), "Heisenberg light cone")
                o = _expand(o, support, grown)
                support = grown
            o = _conjugate(o, support, gate.matrix, gate.pair)
    o = (o + o.conj().T) / 2
    o.setflags(write=False)
    origin = (pauli.support[0], pauli[pauli.support[0]]) if pauli.weight == 1 else (str(pauli),)
    return HeisenbergObservable(circuit.n, support, o, origin)


def heisenberg_evolve(circuit: BrickworkCircuit, site: int, pauli: str) -> HeisenbergObservable:
    """Heisenberg-evolve the single-qubit Pauli ``pauli`` on ``site``."""
    if not 0 <= site < circuit.n:
        raise ValueError(f"site {site} out of range")
    if pauli not in "XYZ" or len(pauli) != 1:
        raise ValueError("pauli must be one of 'X', 'Y', 'Z'")
    return heisenberg_evolve_pauli(circuit, PauliString.single(circuit.n, site, pauli))


def dense_heisenberg(unitary: np.ndarray, pauli: PauliString) -> np.ndarray:
    """``U^dag P U`` with full dense matrices (reference path and non-circuit unitaries)."""
    p = pauli.to_dense()
    return unitary.conj().T @ p @ unitary


__all__ = [
    "PAULI_CHARS",
    "BrickworkCircuit",
    "Gate",
    "HeisenbergObservable",
    "brickwork_pairs",
    "build_rqc",
    "dense_heisenberg",
    "embed_dense",
    "heisenberg_evolve",
    "heisenberg_evolve_pauli",
    "light_cone",
    "product_stab_vectors",
    "relabel",
]
