"""Newton solver for phi_xx = n - exp(-phi) on [0, L].

Boundary conditions: phi_x(0) = E0 through a ghost node, phi(L) = phi_far.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, NonConvergence
from .stationary import Grid

NEWTON_TOL = 1e-12
MAX_NEWTON = 50


@dataclass(frozen=True, eq=False)
class PotentialState:
    phi: np.ndarray
    phi_x: np.ndarray
    E0: float
    iterations: int = 0
    residual: float = 0.0


def residual(phi: np.ndarray, n: np.ndarray, E0: float, dx: float) -> np.ndarray:
    """-(D2 phi) + n - e^{-phi} at nodes 0..N-2 (node N-1 carries the Dirichlet value)."""
    r = np.empty(phi.size - 1)
    r[0] = -(2.0 * phi[1] - 2.0 * phi[0] - 2.0 * dx * E0) / dx**2
    r[1:] = -(phi[2:] - 2.0 * phi[1:-1] + phi[:-2]) / dx**2
    return r + n[:-1] - np.exp(-phi[:-1])


def field(phi: np.ndarray, E0: float, dx: float) -> np.ndarray:
    """phi_x by central differences; the ghost-node value E0 at x = 0, one-sided at L."""
    out = np.empty_like(phi)
    out[0] = E0
    out[1:-1] = (phi[2:] - phi[:-2]) / (2.0 * dx)
    out[-1] = (3.0 * phi[-1] - 4.0 * phi[-2] + phi[-3]) / (2.0 * dx)
    return out


def solve_potential(n_field, E0: float, grid: Grid, initial_guess=None, phi_far: float = 0.0,
                    tol: float = NEWTON_TOL, max_iter: int = MAX_NEWTON) -> PotentialState:
    n = np.asarray(n_field, dtype=float)
    if n.shape != (grid.N,):
        raise DomainError(f"density has shape {n.shape}, grid has {grid.N} nodes")
    if np.any(n <= 0.0):
        raise DomainError("density must be positive everywhere")
    dx = grid.dx
    phi = np.zeros(grid.N) if initial_guess is None else np.array(initial_guess, dtype=float)
    phi[-1] = phi_far
    m = grid.N - 1

    # tridiagonal Jacobian of the residual in banded storage
    ab = np.empty((3, m))
    ab[0, 1:] = -1.0 / dx**2
    ab[0, 1] = -2.0 / dx**2
    ab[0, 0] = 0.0
    ab[2, :-1] = -1.0 / dx**2
    ab[2, -1] = 0.0

    step_size = np.inf
    for it in range(1, max_iter + 1):
        r = residual(phi, n, E0, dx)
        ab[1] = 2.0 / dx**2 + np.exp(-phi[:-1])
        delta = solve_banded((1, 1), ab, -r, overwrite_ab=False, check_finite=False)
        phi[:-1] += delta
        step_size = float(np.max(np.abs(delta)))
        if not np.isfinite(step_size):
            break
        if step_size < tol:
            res = float(np.max(np.abs(residual(phi, n, E0, dx))))
            return PotentialState(phi, field(phi, E0, dx), float(E0), it, res)
    res = residual(phi, n, E0, dx)
    raise NonConvergence(
        f"Newton did not converge in {max_iter} steps (last update {step_size:.3e})",
        float(np.max(np.abs(res))) if np.all(np.isfinite(res)) else float("inf"))
