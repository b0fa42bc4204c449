"""Local operator matrices shared by the model builders and observables.

Conventions: spins use the (up, down) basis ordering with ``sz = diag(1, -1)``;
truncated bosonic Fock spaces are ordered by occupation (0, 1, ..., d-1), so
the vacuum is the first basis vector.  Spinless fermion modes reuse the d=2
ladder operators, with ``parity = diag(1, -1)`` distinguishing even/odd
occupation.
"""

from __future__ import annotations

import numpy as np

sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
sy = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
sz = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
sp = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # raises down -> up
sm = sp.conj().T


def identity(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex)


def destroy(d: int) -> np.ndarray:
    """Truncated annihilation operator: a|n> = sqrt(n)|n-1>."""
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1).astype(complex)


def create(d: int) -> np.ndarray:
    return destroy(d).conj().T


def number(d: int) -> np.ndarray:
    return np.diag(np.arange(d, dtype=float)).astype(complex)


def displacement(d: int) -> np.ndarray:
    """Position-like quadrature a + a-dagger."""
    a = destroy(d)
    return a + a.conj().T


# Spinless fermion mode on a 2-dimensional site: |0>, |1>.
f_destroy = destroy(2)
f_create = create(2)
f_number = number(2)
f_parity = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def is_hermitian(op: np.ndarray, tol: float = 1e-12) -> bool:
    op = np.asarray(op)
    scale = max(np.abs(op).max(), 1.0)
    return bool(np.abs(op - op.conj().T).max() <= tol * scale)
