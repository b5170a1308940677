"""Channel taxonomy: unitary, globally depolarized unitary, and dense Pauli-transfer matrices.

Each channel's :meth:`Channel.apply` is linear and accepts arbitrary (stacks of) square
matrices, not only density matrices, so that channels can act on one register of a
larger system through the operator-Schmidt blocks.
"""

from __future__ import annotations

import functools

import numpy as np

from .. import _caps
from ..pauli import from_pauli_coefficients, pauli_coefficients
from ..serialize import decode_array, encode_array
from .circuits import BrickworkCircuit

STATE_TOL = 1e-8
_PTM_CHUNK = 256


class Channel:
    """Base class. Subclasses implement :meth:`apply` on arrays of shape (..., N, N)."""

    n: int

    @property
    def dim(self) -> int:
        return 2**self.n

    def apply(self, ops: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply_channel(rho, self)

    def ptm(self) -> np.ndarray:
        return channel_ptm(self).ptm

    def to_json(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def from_json(data: dict) -> "Channel":
        kind = data["type"]
        if kind == "unitary":
            if "circuit" in data:
                return UnitaryChannel(circuit=BrickworkCircuit.from_json(data["circuit"]))
            return UnitaryChannel(decode_array(data["unitary"]))
        if kind == "depolarized-unitary":
            return DepolarizedUnitary(Channel.from_json(data["unitary_part"]), float(data["gamma"]))
        if kind == "ptm":
            return DenseSuperop(decode_array(data["ptm"]))
        raise ValueError(f"unknown channel type {kind!r}")


class UnitaryChannel(Channel):
    """``rho -> U rho U^dag`` for a dense unitary or a brickwork circuit."""

    def __init__(self, unitary: np.ndarray | None = None, circuit: BrickworkCircuit | None = None):
        if (unitary is None) == (circuit is None):
            raise ValueError("give exactly one of unitary or circuit")
        self.circuit = circuit
        if circuit is not None:
            self.n = circuit.n
            self._matrix = None
        else:
            u = np.asarray(unitary, dtype=complex)
            n = u.shape[0].bit_length() - 1
            if u.shape != (2**n, 2**n):
                raise ValueError(f"unitary must be square with power-of-two size, got {u.shape}")
            err = np.max(np.abs(u.conj().T @ u - np.eye(2**n)))
            if err > 1e-8:
                raise ValueError(f"matrix is not unitary (error {err:.2e})")
            self.n = n
            self._matrix = u

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            return self.circuit.unitary()
        return self._matrix

    def apply(self, ops):
        u = self.matrix
        return u @ ops @ u.conj().T

    def to_json(self) -> dict:
        if self.circuit is not None:
            return {"type": "unitary", "circuit": self.circuit.to_json()}
        return {"type": "unitary", "unitary": encode_array(self._matrix)}

    def __eq__(self, other):
        if not isinstance(other, UnitaryChannel):
            return NotImplemented
        if self.circuit is not None or other.circuit is not None:
            return self.circuit == other.circuit
        return np.array_equal(self._matrix, other._matrix)


class DepolarizedUnitary(Channel):
    """``rho -> (1 - gamma) U rho U^dag + gamma Tr(rho) I / N``."""

    def __init__(self, unitary_part: UnitaryChannel, gamma: float):
        if not isinstance(unitary_part, UnitaryChannel):
            raise TypeError("unitary_part must be a UnitaryChannel")
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
        self.unitary_part = unitary_part
        self.gamma = float(gamma)
        self.n = unitary_part.n

    def apply(self, ops):
        ops = np.asarray(ops)
        out = self.unitary_part.apply(ops) if self.gamma < 1 else np.zeros_like(ops, dtype=complex)
        tr = np.trace(ops, axis1=-2, axis2=-1)
        return (1 - self.gamma) * out + self.gamma * tr[..., None, None] * np.eye(self.dim) / self.dim

    def to_json(self) -> dict:
        return {
            "type": "depolarized-unitary",
            "gamma": self.gamma,
            "unitary_part": self.unitary_part.to_json(),
        }

    def __eq__(self, other):
        if not isinstance(other, DepolarizedUnitary):
            return NotImplemented
        return self.gamma == other.gamma and self.unitary_part == other.unitary_part


class DenseSuperop(Channel):
    """A channel given by its Pauli-transfer matrix ``R[Q, P] = Tr(Q ch(P)) / N``."""

    def __init__(self, ptm: np.ndarray, check_tp: bool = True):
        r = np.asarray(ptm, dtype=float)
        n = (r.shape[0].bit_length() - 1) // 2
        if r.shape != (4**n, 4**n):
            raise ValueError(f"PTM must be 4**n x 4**n, got {r.shape}")
        _caps.check("superop", n, "dense superoperator")
        if check_tp and np.max(np.abs(r[0] - np.eye(4**n)[0])) > 1e-8:
            raise ValueError("PTM is not trace preserving: identity row must be (1, 0, ..., 0)")
        r.setflags(write=False)
        self.n = n
        self.ptm_matrix = r

    def apply(self, ops):
        coeffs = pauli_coefficients(ops)
        return from_pauli_coefficients(coeffs @ self.ptm_matrix.T)

    def ptm(self) -> np.ndarray:
        return self.ptm_matrix

    def compose(self, first: "DenseSuperop") -> "DenseSuperop":
        """The channel ``self o first``."""
        return DenseSuperop(self.ptm_matrix @ first.ptm_matrix)

    def to_json(self) -> dict:
        return {"type": "ptm", "ptm": encode_array(self.ptm_matrix)}

    def __eq__(self, other):
        if not isinstance(other, DenseSuperop):
            return NotImplemented
        return np.array_equal(self.ptm_matrix, other.ptm_matrix)


def identity_channel(n: int) -> UnitaryChannel:
    return UnitaryChannel(np.eye(2**n, dtype=complex))


def depolarizing(n: int, gamma: float, unitary: np.ndarray | UnitaryChannel | None = None) -> DepolarizedUnitary:
    """Global depolarizing noise of strength ``gamma``, optionally after a unitary."""
    if unitary is None:
        part = identity_channel(n)
    elif isinstance(unitary, UnitaryChannel):
        part = unitary
    else:
        part = UnitaryChannel(unitary)
    if part.n != n:
        raise ValueError("unitary size does not match n")
    return DepolarizedUnitary(part, gamma)


def maximally_depolarizing(n: int) -> DepolarizedUnitary:
    return depolarizing(n, 1.0)


def validate_density(rho: np.ndarray, dim: int | None = None, tol: float = STATE_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise ValueError(f"density matrix has dimension {rho.shape[0]}, expected {dim}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho)[0] < -tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def apply_channel(rho: np.ndarray, ch: Channel) -> np.ndarray:
    """Apply ``ch`` to a validated density matrix and check the output is a state."""
    rho = validate_density(rho, ch.dim)
    out = ch.apply(rho)
    out = (out + out.conj().T) / 2
    validate_density(out, ch.dim)
    return out


def apply_on_register(ch: Channel, ops: np.ndarray, register: int, registers: int) -> np.ndarray:
    """Apply ``ch`` to register ``register`` of ``registers`` equal n-qubit registers."""
    dim = ch.dim
    ops = np.asarray(ops, dtype=complex)
    before, after = dim**register, dim ** (registers - register - 1)
    t = ops.reshape(before, dim, after, before, dim, after)
    # Move the acted-on indices last, then apply to the (dim x dim) blocks.
    t = t.transpose(0, 2, 3, 5, 1, 4)
    t = ch.apply(t)
    t = t.transpose(0, 4, 1, 2, 5, 3)
    return t.reshape(ops.shape)


def apply_tensor_power(ch: Channel, rho: np.ndarray, k: int) -> np.ndarray:
    """``ch^{(x)k}(rho)`` for a state on k registers."""
    _caps.check("state", k * ch.n, "multi-copy state")
    out = np.asarray(rho, dtype=complex)
    if out.shape != (ch.dim**k,) * 2:
        raise ValueError(f"state on {k} registers must have shape {(ch.dim**k,) * 2}")
    for reg in range(k):
        out = apply_on_register(ch, out, reg, k)
    return out


def channel_ptm(ch: Channel) -> DenseSuperop:
    """Pauli-transfer matrix of ``ch``, so that output coefficients are ``R @ input``."""
    if isinstance(ch, DenseSuperop):
        return ch
    _caps.check("superop", ch.n, "Pauli-transfer matrix")
    size = 4**ch.n
    r = np.empty((size, size))
    for start in range(0, size, _PTM_CHUNK):
        stop = min(size, start + _PTM_CHUNK)
        basis = from_pauli_coefficients(np.eye(size)[start:stop])
        r[:, start:stop] = pauli_coefficients(ch.apply(basis)).real.T
    return DenseSuperop(r)


@functools.lru_cache(maxsize=8)
def _frozen_entangled(n: int) -> np.ndarray:
    dim = 2**n
    v = np.eye(dim, dtype=complex).reshape(-1) / np.sqrt(dim)
    v.setflags(write=False)
    return v


def maximally_entangled(n: int) -> np.ndarray:
    """``sum_i |i>|i> / sqrt(N)`` on system (first) and reference (second) registers."""
    return _frozen_entangled(n).copy()


def choi(ch: Channel) -> np.ndarray:
    """``(ch (x) id)(|Phi><Phi|)`` with the channel acting on the first register."""
    _caps.check("state", 2 * ch.n, "Choi state")
    v = _frozen_entangled(ch.n)
    return apply_on_register(ch, np.outer(v, v.conj()), 0, 2)


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from the induced measure of a Ginibre matrix."""
    dim = 2**n
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
