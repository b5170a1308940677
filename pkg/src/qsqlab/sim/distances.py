"""Purity, average distance and diamond-distance formulas for the channel families in use.

Diamond quantities come as a labelled pair: ``norm`` is ``||A - B||_diamond`` and
``distance`` is half of it.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .. import _caps
from .channels import (
    Channel,
    DenseSuperop,
    DepolarizedUnitary,
    UnitaryChannel,
    apply_on_register,
    channel_ptm,
    maximally_entangled,
)
from .haar import haar_state


class DiamondValue(NamedTuple):
    norm: float
    distance: float


class MCEstimate(NamedTuple):
    mean: float
    stderr: float
    samples: int


def purity(rho: np.ndarray) -> float:
    """``Tr(rho^2)``."""
    rho = np.asarray(rho)
    return float(np.real(np.vdot(rho.conj().T, rho)))


def trace_norm(a: np.ndarray) -> float:
    """Trace norm of a Hermitian matrix (sum of absolute eigenvalues)."""
    a = np.asarray(a)
    return float(np.sum(np.abs(np.linalg.eigvalsh((a + a.conj().T) / 2))))


def _unitary_of(ch: Channel) -> np.ndarray:
    if not isinstance(ch, UnitaryChannel):
        raise TypeError("the first channel must be unitary")
    return ch.matrix


def process_fidelity(u: np.ndarray, ch: Channel) -> float:
    """``<Phi| (U^dag . U o ch (x) id)(Phi) |Phi>`` for unitary ``u`` and channel ``ch``."""
    dim = u.shape[0]
    if isinstance(ch, UnitaryChannel):
        return float(abs(np.trace(u.conj().T @ ch.matrix)) ** 2 / dim**2)
    if isinstance(ch, DepolarizedUnitary):
        v = ch.unitary_part.matrix
        overlap = abs(np.trace(u.conj().T @ v)) ** 2 / dim**2
        return float((1 - ch.gamma) * overlap + ch.gamma / dim**2)
    r_u = channel_ptm(UnitaryChannel(u)).ptm_matrix
    r = ch.ptm() if isinstance(ch, DenseSuperop) else channel_ptm(ch).ptm_matrix
    return float(np.sum(r_u * r) / dim**2)


def d_avg(ch1: Channel, ch2: Channel) -> float:
    """Exact average distance ``1 - E_psi F(ch1(psi), ch2(psi))`` for unitary ``ch1``.

    Uses the Haar second moment of pure states, which turns the average fidelity into
    ``(N F_pro + 1)/(N + 1)`` with ``F_pro`` the process fidelity.
    """
    u = _unitary_of(ch1)
    if ch1.n != ch2.n:
        raise ValueError("channels act on different qubit counts")
    _caps.check("state", ch1.n, "average distance")
    dim = u.shape[0]
    f_pro = process_fidelity(u, ch2)
    return float(min(1.0, max(0.0, 1 - (dim * f_pro + 1) / (dim + 1))))


def d_avg_mc(
    ch1: Channel, ch2: Channel, rng: np.random.Generator, samples: int = 2000, chunk: int = 512
) -> MCEstimate:
    """Monte-Carlo estimate of :func:`d_avg` over Haar-random pure inputs."""
    u = _unitary_of(ch1)
    dim = u.shape[0]
    values = []
    for start in range(0, samples, chunk):
        m = min(chunk, samples - start)
        psi = haar_state(dim, rng, size=m)
        rho = psi[:, :, None] * psi[:, None, :].conj()
        out = ch2.apply(rho)
        phi = psi @ u.T
        values.append(1 - np.einsum("si,sij,sj->s", phi.conj(), out, phi).real)
    v = np.concatenate(values)
    return MCEstimate(float(v.mean()), float(v.std(ddof=1) / np.sqrt(samples)), samples)


def diamond_unitary_pair(u: np.ndarray, v: np.ndarray) -> DiamondValue:
    """Exact diamond distance between two unitary channels.

    With ``r`` the distance from the origin to the convex hull of the eigenvalues of
    ``U^dag V``, the distance is ``sqrt(1 - r^2)``.
    """
    u, v = np.asarray(u), np.asarray(v)
    if u.shape != v.shape:
        raise ValueError("unitaries have different shapes")
    eig = np.linalg.eigvals(u.conj().T @ v)
    angles = np.sort(np.mod(np.angle(eig), 2 * np.pi))
    gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))
    largest = float(np.max(gaps))
    # The hull misses the origin only if all eigenvalues fit in an open half circle.
    if largest > np.pi + 1e-12:
        r = np.cos((2 * np.pi - largest) / 2)
    else:
        r = 0.0
    distance = float(np.sqrt(max(0.0, 1 - r * r)))
    return DiamondValue(2 * distance, distance)


def diamond_depolarized(gamma: float, n: int) -> DiamondValue:
    """``Lambda(gamma) o U`` against ``U``; unitary invariance removes ``U``.

    The difference of Choi states is ``gamma (I/N^2 - Phi)``, whose trace norm
    ``2 gamma (1 - 1/N^2)`` is attained by the maximally entangled input.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    distance = gamma * (1 - 4.0**-n)
    return DiamondValue(2 * distance, distance)


def gamma_for_diamond_norm(norm: float, n: int) -> float:
    """Inverse of :func:`diamond_depolarized` in the norm convention."""
    gamma = norm / (2 * (1 - 4.0**-n))
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"norm {norm} is not reachable by global depolarizing noise on {n} qubits")
    return gamma


def diamond_lower_bound(ch1: Channel, ch2: Channel, probe: np.ndarray | None = None) -> DiamondValue:
    """``1/2 ||(ch1 (x) id - ch2 (x) id)(probe)||_1``, a certified lower bound on d_diamond.

    ``probe`` is a pure state vector on system (first) and reference (second) registers of
    equal size; the default is the maximally entangled state.
    """
    if ch1.n != ch2.n:
        raise ValueError("channels act on different qubit counts")
    _caps.check("state", 2 * ch1.n, "stabilised probe")
    psi = maximally_entangled(ch1.n) if probe is None else np.asarray(probe, dtype=complex)
    if psi.shape != (ch1.dim**2,):
        raise ValueError(f"probe must be a vector of length {ch1.dim ** 2}")
    psi = psi / np.linalg.norm(psi)
    rho = np.outer(psi, psi.conj())
    diff = apply_on_register(ch1, rho, 0, 2) - apply_on_register(ch2, rho, 0, 2)
    distance = 0.5 * trace_norm(diff)
    return DiamondValue(2 * distance, distance)

