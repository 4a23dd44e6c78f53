"""Zero-mean Neumann Poisson solves by cosine-transform diagonalisation."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import fft


@lru_cache(maxsize=16)
def neumann_eigenvalues(nx: int, ny: int) -> np.ndarray:
    """Eigenvalues of the 5-point Neumann ``-Laplacian`` on the cell-centred grid.

    The constant mode is set to ``inf`` so that dividing by the table zeroes it.
    """
    lx = (2.0 - 2.0 * np.cos(np.pi * np.arange(nx) / nx)) * nx**2
    ly = (2.0 - 2.0 * np.cos(np.pi * np.arange(ny) / ny)) * ny**2
    lam = lx[:, None] + ly[None, :]
    lam[0, 0] = np.inf
    lam.setflags(write=False)
    return lam


def inverse_neumann_laplacian(rhs) -> np.ndarray:
    """Return the zero-mean ``u`` with ``-Lap u = rhs - mean(rhs)`` under Neumann conditions."""
    rhs = np.asarray(rhs, dtype=float)
    coeffs = fft.dctn(rhs, type=2, norm="ortho")
    coeffs /= neumann_eigenvalues(*rhs.shape)
    u = fft.idctn(coeffs, type=2, norm="ortho")
    return u - u.mean()


def neumann_laplacian(u) -> np.ndarray:
    """Apply the 5-point ``-Laplacian`` with reflecting (Neumann) ghost cells."""
    u = np.asarray(u, dtype=float)
    nx, ny = u.shape
    p = np.pad(u, 1, mode="edge")
    return (
        (2 * u - p[:-2, 1:-1] - p[2:, 1:-1]) * nx**2
        + (2 * u - p[1:-1, :-2] - p[1:-1, 2:]) * ny**2
    )
