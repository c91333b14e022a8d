"""Orthogonal projection onto subsets, harmonic extension, Poisson kernels.

For a node subset V, F(V) is the subspace of vectors vanishing outside V.
``project`` returns the energy-orthogonal projection onto F(V);
``harmonic_extension`` is its complement g - project(g), which matches g
outside V and is energy-orthogonal to F(V).  The Poisson kernel assembles
the harmonic extension as a sub-stochastic matrix acting on boundary data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .forms import DiscreteForm, NonTransientError, as_subset, complement, is_transient

__all__ = [
    "PoissonKernel",
    "harmonic_boundary",
    "harmonic_extension",
    "poisson_kernel",
    "project",
]


def _restricted_cho(form: DiscreteForm, idx: np.ndarray):
    """Cholesky factor of the energy matrix block on idx, or raise."""
    if not is_transient(form, idx):
        raise NonTransientError(
            f"subset of size {idx.size} is not transient: restricted system singular")
    A = form.energy_matrix()[np.ix_(idx, idx)]
    try:
        return cho_factor(A)
    except LinAlgError as exc:  # numerically singular despite graph escape
        raise NonTransientError(f"restricted system numerically singular: {exc}") from exc


def project(form: DiscreteForm, V, u) -> np.ndarray:
    """Energy-orthogonal projection of ``u`` onto F(V).

    Solves for w supported on V with E(u - w, eta) = 0 for every eta in F(V).
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (form.n,):
        raise ValueError("u has wrong length")
    idx = as_subset(form.n, V)
    w = np.zeros(form.n)
    if idx.size == 0:
        return w
    cho = _restricted_cho(form, idx)
    rhs = form.energy_matrix()[idx] @ u
    w[idx] = cho_solve(cho, rhs)
    return w


def harmonic_extension(form: DiscreteForm, V, g) -> np.ndarray:
    """g - project(g): equals g outside V, energy-orthogonal to F(V)."""
    g = np.asarray(g, dtype=float)
    return g - project(form, V, g)


@dataclass(frozen=True)
class PoissonKernel:
    """Sub-stochastic exit kernel for a subset V.

    Rows are indexed by all states; columns are supported on the complement
    of V, and rows at states outside V are unit point masses.  The row defect
    1 - sum_y P[x, y] is the probability of dying inside V.
    """

    V: np.ndarray
    P: np.ndarray

    def apply(self, g) -> np.ndarray:
        return self.P @ np.asarray(g, dtype=float)

    def row_defect(self) -> np.ndarray:
        return 1.0 - self.P.sum(axis=1)


def poisson_kernel(form: DiscreteForm, V) -> PoissonKernel:
    """Assemble the exit kernel column-by-column as harmonic extensions."""
    idx = as_subset(form.n, V)
    comp = complement(form.n, idx)
    P = np.zeros((form.n, form.n))
    P[comp, comp] = 1.0
    if idx.size and comp.size:
        cho = _restricted_cho(form, idx)
        block = form.energy_matrix()[np.ix_(idx, comp)]
        P[np.ix_(idx, comp)] = -cho_solve(cho, block)
    elif idx.size:
        # no exterior states: kernel vanishes, all mass dies inside
        _restricted_cho(form, idx)
    return PoissonKernel(V=idx, P=P)


def harmonic_boundary(form: DiscreteForm, D, weights=None, guard: float = 1e-14) -> np.ndarray:
    """States outside D carrying positive aggregated exit-kernel mass.

    The aggregated measure gives state y the mass sum_{x in D} w[x] P_D[x, y]
    with w defaulting to the reference measure.  Strict positivity up to a
    small rounding guard selects the minimal atomically-supported carrier.
    """
    idx = as_subset(form.n, D)
    comp = complement(form.n, idx)
    if idx.size == 0:
        return np.array([], dtype=int)
    w = form.m[idx] if weights is None else np.asarray(weights, dtype=float)[idx]
    P = poisson_kernel(form, idx).P
    mass = w @ P[idx][:, comp]
    return comp[mass > guard]
