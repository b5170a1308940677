"""Haar-random unitaries and states."""

from __future__ import annotations

import numpy as np

from .. import _caps


def haar_unitary(dim: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Sample from the Haar measure on U(dim).

    QR-decomposes a complex Ginibre matrix and rescales each column by the phase of
    the matching diagonal entry of R, which makes the distribution exactly invariant.
    With ``size`` given, returns a stack of shape (size, dim, dim).
    """
    if dim < 2 or dim & (dim - 1):
        raise ValueError(f"dim must be a power of two >= 2, got {dim}")
    _caps.check("state", dim.bit_length() - 1, "Haar unitary")
    shape = (dim, dim) if size is None else (size, dim, dim)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    phases = diag / np.abs(diag)
    return q * phases[..., None, :]


def haar_state(dim: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random pure state vector(s): a normalised complex Gaussian vector."""
    shape = (dim,) if size is None else (size, dim)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z / np.linalg.norm(z, axis=-1, keepdims=True)
