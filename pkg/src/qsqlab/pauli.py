"""Pauli strings, Pauli-basis observables and single-qubit stabilizer product states.

Conventions used throughout the package:

* Qubit 0 is the leftmost tensor factor (most significant bit of a basis index).
* Textual Pauli strings are site-major, e.g. ``"XIZ"`` is X on qubit 0 and Z on qubit 2.
* Pauli indices are ``I=0, X=1, Y=2, Z=3``; the flattened index of an n-qubit string
  is the base-4 number with qubit 0 as the most significant digit.
* Pauli coefficients of an operator A are ``a_P = Tr(P A) / 2**n`` so that
  ``A = sum_P a_P P``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _caps
from .errors import ResourceLimitError

PAULI_CHARS = "IXYZ"
PAULI_MATRICES = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# Single-qubit stabilizer states, in the order |0>, |1>, |+>, |->, |+y>, |-y>.
STAB_NAMES = ("0", "1", "+", "-", "+y", "-y")
_S = 1 / math.sqrt(2)
STAB_VECTORS = np.array(
    [
        [1, 0],
        [0, 1],
        [_S, _S],
        [_S, -_S],
        [_S, 1j * _S],
        [_S, -1j * _S],
    ],
    dtype=complex,
)
# STAB_TABLE[s, p] = <s|P_p|s>
STAB_TABLE = np.array(
    [
        [1, 0, 0, 1],
        [1, 0, 0, -1],
        [1, 1, 0, 0],
        [1, -1, 0, 0],
        [1, 0, 1, 0],
        [1, 0, -1, 0],
    ],
    dtype=np.int8,
)

_CYCLIC = {(1, 2): 3, (2, 3): 1, (3, 1): 2}


def _single_product(a: int, b: int) -> tuple[complex, int]:
    if a == 0:
        return 1, b
    if b == 0:
        return 1, a
    if a == b:
        return 1, 0
    if (a, b) in _CYCLIC:
        return 1j, _CYCLIC[(a, b)]
    return -1j, _CYCLIC[(b, a)]


@dataclass(frozen=True)
class PauliString:
    """A phase-free Pauli string stored sparsely as ``((site, 'X'|'Y'|'Z'), ...)``."""

    n: int
    ops: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("qubit count must be non-negative")
        cleaned = {}
        for site, char in self.ops:
            if not 0 <= site < self.n:
                raise ValueError(f"site {site} out of range for n={self.n}")
            if char not in "IXYZ":
                raise ValueError(f"unknown Pauli symbol {char!r}")
            if site in cleaned:
                raise ValueError(f"site {site} given twice")
            if char != "I":
                cleaned[site] = char
        object.__setattr__(self, "ops", tuple(sorted(cleaned.items())))

    @classmethod
    def from_str(cls, text: str) -> "PauliString":
        text = text.strip().upper()
        return cls(len(text), tuple((i, c) for i, c in enumerate(text)))

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n)

    @classmethod
    def single(cls, n: int, site: int, char: str) -> "PauliString":
        return cls(n, ((site, char),))

    @classmethod
    def from_index(cls, n: int, index: int) -> "PauliString":
        digits = np.unravel_index(index, (4,) * n) if n else ()
        return cls(n, tuple((q, PAULI_CHARS[int(d)]) for q, d in enumerate(digits)))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(site for site, _ in self.ops)

    @property
    def weight(self) -> int:
        return len(self.ops)

    def __getitem__(self, site: int) -> str:
        for s, c in self.ops:
            if s == site:
                return c
        if not 0 <= site < self.n:
            raise IndexError(site)
        return "I"

    def codes(self) -> list[int]:
        """Per-qubit Pauli indices (0..3) for all n qubits."""
        out = [0] * self.n
        for site, char in self.ops:
            out[site] = PAULI_CHARS.index(char)
        return out

    @property
    def index(self) -> int:
        idx = 0
        for code in self.codes():
            idx = 4 * idx + code
        return idx

    def sort_key(self):
        return (self.support, tuple(c for _, c in self.ops))

    def to_dense(self, sites: Sequence[int] | None = None) -> np.ndarray:
        """Dense matrix on ``sites`` (default: all qubits), which must contain the support."""
        sites = list(range(self.n)) if sites is None else list(sites)
        missing = set(self.support) - set(sites)
        if missing:
            raise ValueError(f"sites {sorted(missing)} of the support are not in {sites}")
        _caps.check("observable", len(sites), "dense Pauli string")
        out = np.ones((1, 1), dtype=complex)
        for site in sites:
            out = np.kron(out, PAULI_MATRICES[PAULI_CHARS.index(self[site])])
        return out

    def __str__(self) -> str:
        return "".join(self[q] for q in range(self.n))

    def __repr__(self) -> str:
        return f"PauliString({str(self)!r})"


def pauli_product(p: PauliString, q: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, R)`` with ``p @ q == phase * R`` as operators."""
    if p.n != q.n:
        raise ValueError(f"qubit counts differ: {p.n} vs {q.n}")
    phase: complex = 1
    ops = []
    for site in sorted(set(p.support) | set(q.support)):
        ph, code = _single_product(PAULI_CHARS.index(p[site]), PAULI_CHARS.index(q[site]))
        phase *= ph
        ops.append((site, PAULI_CHARS[code]))
    return complex(phase), PauliString(p.n, tuple(ops))


class ObservableSum:
    """A Hermitian observable ``sum_P alpha_P P`` with real coefficients."""

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[PauliString, float] | Iterable = ()):
        self.n = n
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[PauliString, float] = {}
        for pauli, coeff in items:
            if isinstance(pauli, str):
                pauli = PauliString.from_str(pauli)
            if pauli.n != n:
                raise ValueError(f"term {pauli} is not on {n} qubits")
            if isinstance(coeff, complex) or np.iscomplexobj(coeff):
                if abs(np.imag(coeff)) > 0:
                    raise ValueError("coefficients must be real")
                coeff = np.real(coeff)
            acc[pauli] = acc.get(pauli, 0.0) + float(coeff)
        self._terms = MappingProxyType(
            {p: c for p, c in sorted(acc.items(), key=lambda kv: kv[0].sort_key()) if c != 0.0}
        )

    @property
    def terms(self) -> Mapping[PauliString, float]:
        return self._terms

    @classmethod
    def zero(cls, n: int) -> "ObservableSum":
        return cls(n)

    @property
    def support(self) -> tuple[int, ...]:
        sites: set[int] = set()
        for p in self._terms:
            sites.update(p.support)
        return tuple(sorted(sites))

    def coefficient(self, pauli: PauliString | str) -> float:
        if isinstance(pauli, str):
            pauli = PauliString.from_str(pauli)
        return self._terms.get(pauli, 0.0)

    def __add__(self, other: "ObservableSum") -> "ObservableSum":
        if other.n != self.n:
            raise ValueError("qubit counts differ")
        return ObservableSum(self.n, list(self._terms.items()) + list(other._terms.items()))

    def __neg__(self) -> "ObservableSum":
        return ObservableSum(self.n, {p: -c for p, c in self._terms.items()})

    def __sub__(self, other: "ObservableSum") -> "ObservableSum":
        return self + (-other)

    def __mul__(self, scalar: float) -> "ObservableSum":
        return ObservableSum(self.n, {p: scalar * c for p, c in self._terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, ObservableSum) and self.n == other.n and dict(self._terms) == dict(other._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __repr__(self) -> str:
        body = " + ".join(f"{c:.6g}*{p}" for p, c in self._terms.items()) or "0"
        return f"ObservableSum(n={self.n}: {body})"

    def to_dense(self, sites: Sequence[int] | None = None) -> np.ndarray:
        sites = list(range(self.n)) if sites is None else list(sites)
        _caps.check("observable", len(sites), "dense observable")
        out = np.zeros((2 ** len(sites),) * 2, dtype=complex)
        for p, c in self._terms.items():
            out += c * p.to_dense(sites)
        return out

    def expectation(self, psi: "ProductStabState") -> float:
        return sum(c * expectation_stab(psi, p) for p, c in self._terms.items())

    def to_json(self) -> list[dict]:
        return [{"pauli": str(p), "coeff": c} for p, c in self._terms.items()]

    @classmethod
    def from_json(cls, data: list[dict], n: int | None = None) -> "ObservableSum":
        if not data and n is None:
            raise ValueError("an empty observable needs an explicit qubit count")
        if n is None:
            n = len(data[0]["pauli"])
        return cls(n, [(PauliString.from_str(t["pauli"]), float(t["coeff"])) for t in data])


@dataclass(frozen=True)
class ProductStabState:
    """Tensor product of single-qubit Pauli eigenstates, labels index ``STAB_NAMES``."""

    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(x) for x in self.labels)
        if not labels:
            raise ValueError("need at least one qubit")
        if any(not 0 <= x < 6 for x in labels):
            raise ValueError("stabilizer labels must lie in 0..5")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "ProductStabState":
        return cls(tuple(STAB_NAMES.index(name) for name in names))

    @property
    def n(self) -> int:
        return len(self.labels)

    def names(self) -> list[str]:
        return [STAB_NAMES[x] for x in self.labels]

    def vector(self, sites: Sequence[int] | None = None) -> np.ndarray:
        sites = range(self.n) if sites is None else sites
        out = np.ones(1, dtype=complex)
        for q in sites:
            out = np.kron(out, STAB_VECTORS[self.labels[q]])
        return out

    def density(self) -> np.ndarray:
        _caps.check("state", self.n, "density matrix")
        v = self.vector()
        return np.outer(v, v.conj())


def expectation_stab(psi: ProductStabState, pauli: PauliString) -> int:
    """Exact ``<psi|P|psi>`` in {-1, 0, +1} via the product rule."""
    if psi.n != pauli.n:
        raise ValueError(f"state has {psi.n} qubits, Pauli has {pauli.n}")
    value = 1
    for site, char in pauli.ops:
        value *= int(STAB_TABLE[psi.labels[site], PAULI_CHARS.index(char)])
        if value == 0:
            return 0
    return value


def stab_expectations(labels: np.ndarray, pauli: PauliString) -> np.ndarray:
    """Vectorised ``<psi|P|psi>`` for a (S, n) array of stabilizer labels."""
    out = np.ones(labels.shape[0], dtype=np.int8)
    for site, char in pauli.ops:
        out *= STAB_TABLE[labels[:, site], PAULI_CHARS.index(char)]
    return out


def low_weight_count(m: int, k: int) -> int:
    return sum(math.comb(m, j) * 3**j for j in range(min(k, m) + 1))


def enumerate_low_weight(n: int, k: int, region: Iterable[int] | None = None) -> list[PauliString]:
    """All Pauli strings of weight <= k (support inside ``region`` if given), identity included."""
    if k < 0 or k > n:
        raise ValueError(f"weight bound k={k} must satisfy 0 <= k <= n={n}")
    sites = sorted(set(range(n) if region is None else region))
    if any(not 0 <= s < n for s in sites):
        raise ValueError(f"region {sites} not inside range({n})")
    out = []
    for j in range(min(k, len(sites)) + 1):
        for support in itertools.combinations(sites, j):
            for chars in itertools.product("XYZ", repeat=j):
                out.append(PauliString(n, tuple(zip(support, chars))))
    out.sort(key=PauliString.sort_key)
    return out


def sample_stab_product(n: int, rng: np.random.Generator) -> ProductStabState:
    if n < 1:
        raise ValueError("n must be at least 1")
    return ProductStabState(tuple(rng.integers(0, 6, size=n)))


# Beyond this many qubits iid samples are drawn explicitly instead of via a multinomial.
_MULTINOMIAL_MAX_QUBITS = 8
_EXPLICIT_SAMPLE_LIMIT = 50_000_000


def all_stab_labels(n: int) -> np.ndarray:
    """Every product stabilizer state as a (6**n, n) label array in lexicographic order."""
    grids = np.indices((6,) * n).reshape(n, -1).T
    return grids.astype(np.int64)


def sample_stab_counts(n: int, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``count`` iid uniform product stabilizer states, aggregated.

    Returns ``(labels, multiplicity)`` over the distinct states drawn. The result is
    distributed exactly as ``count`` calls of :func:`sample_stab_product`.
    """
    if n <= _MULTINOMIAL_MAX_QUBITS:
        counts = rng.multinomial(count, np.full(6**n, 6.0**-n))
        nonzero = np.flatnonzero(counts)
        labels = np.stack(np.unravel_index(nonzero, (6,) * n), axis=1).astype(np.int64)
        return labels, counts[nonzero].astype(np.int64)
    if count > _EXPLICIT_SAMPLE_LIMIT:
        raise ResourceLimitError(
            f"{count} explicit stabilizer samples on {n} qubits exceed {_EXPLICIT_SAMPLE_LIMIT}"
        )
    draws = rng.integers(0, 6, size=(count, n))
    labels, mult = np.unique(draws, axis=0, return_counts=True)
    return labels.astype(np.int64), mult.astype(np.int64)


def observable_infinity_norm(obs: ObservableSum) -> float:
    """Operator norm, evaluated on the support only."""
    if not obs.terms:
        return 0.0
    sites = obs.support
    _caps.check("observable", len(sites), "operator-norm evaluation")
    eig = np.linalg.eigvalsh(obs.to_dense(sites))
    return float(np.max(np.abs(eig)))


# Dense <-> Pauli-coefficient transforms. _FWD[p, 2a+b] = P_p[b, a] / 2.
_FWD = np.array([[PAULI_MATRICES[p][b, a] / 2 for a in range(2) for b in range(2)] for p in range(4)])
_INV = np.array([[PAULI_MATRICES[p][a, b] for p in range(4)] for a in range(2) for b in range(2)])


def _qubits_of(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim != 1 << n:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def pauli_coefficients(matrix: np.ndarray) -> np.ndarray:
    """Pauli coefficients ``Tr(P A)/2**n`` of (a stack of) square matrices.

    Returns an array of shape ``batch + (4**n,)`` indexed by the flattened Pauli index.
    """
    matrix = np.asarray(matrix)
    n = _qubits_of(matrix.shape[-1])
    batch = matrix.shape[:-2]
    b = int(np.prod(batch)) if batch else 1
    t = matrix.reshape((b,) + (2,) * (2 * n))
    order = [0] + [ax for q in range(n) for ax in (1 + q, 1 + n + q)]
    t = t.transpose(order).reshape((b,) + (4,) * n)
    for q in range(n):
        t = np.moveaxis(np.tensordot(_FWD, t, axes=([1], [q + 1])), 0, q + 1)
    return t.reshape(batch + (4**n,))


def from_pauli_coefficients(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pauli_coefficients`."""
    coeffs = np.asarray(coeffs)
    n = _qubits_of(coeffs.shape[-1]) // 2
    if 4**n != coeffs.shape[-1]:
        raise ValueError("coefficient length must be a power of four")
    batch = coeffs.shape[:-1]
    b = int(np.prod(batch)) if batch else 1
    t = coeffs.reshape((b,) + (4,) * n).astype(complex)
    for q in range(n):
        t = np.moveaxis(np.tensordot(_INV, t, axes=([1], [q + 1])), 0, q + 1)
    t = t.reshape((b,) + (2,) * (2 * n))
    inverse = [0] + [1 + 2 * q for q in range(n)] + [2 + 2 * q for q in range(n)]
    t = t.transpose(inverse)
    dim = 2**n
    return t.reshape(batch + (dim, dim))


def pauli_decompose(matrix: np.ndarray, atol: float = 0.0) -> ObservableSum:
    """Pauli decomposition of a Hermitian matrix; coefficients with ``|c| <= atol`` are dropped."""
    coeffs = pauli_coefficients(matrix)
    n = _qubits_of(np.asarray(matrix).shape[-1])
    if np.max(np.abs(coeffs.imag), initial=0.0) > 1e-9:
        raise ValueError("matrix is not Hermitian")
    terms = [
        (PauliString.from_index(n, int(i)), float(coeffs[i].real))
        for i in np.flatnonzero(np.abs(coeffs.real) > atol)
    ]
    return ObservableSum(n, terms)
