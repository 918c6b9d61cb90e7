"""Inverse iteration for the smallest eigenpair in chaos coordinates.

One sweep maps the current normalized eigenvector expansion U through

    (1)  solve  (stiffness - shift * mass) V = mass U   by preconditioned CG,
    (2)  find the chaos coefficients s of the pointwise norm of V,
    (3)  divide V by s in the Galerkin sense,

all blockwise on (P, N) coefficient arrays.  The reciprocal of s also
carries the eigenvalue: with a shift below the target eigenvalue,
mu(y) = shift + 1/s(y), so one Galerkin division of the constant one by s
yields the eigenvalue expansion of the step.  A separate Rayleigh-quotient
extraction is available as a cross-check on the converged pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .galerkin import (
    DeltaFactor,
    GalerkinSystem,
    newton_normalize,
    pcg_solve,
    tensor_norm,
)
from .validation import expansion_statistics, smallest_eigenpairs

__all__ = [
    "IterationHistory",
    "EigenpairResult",
    "initial_guess",
    "iterate_once",
    "rayleigh_quotient",
    "run_inverse_iteration",
]


@dataclass
class IterationHistory:
    """Per-sweep diagnostics of one inverse-iteration run.

    All arrays have one entry per executed sweep; eigenvalue_changes[0]
    is NaN because there is no previous estimate to compare with.
    """

    increments: np.ndarray
    eigenvalue_means: np.ndarray
    eigenvalue_changes: np.ndarray
    cg_iterations: np.ndarray
    cg_tolerances: np.ndarray
    newton_iterations: np.ndarray

    def __len__(self):
        return len(self.increments)


@dataclass
class EigenpairResult:
    """Converged (or truncated) chaos expansion of the smallest eigenpair."""

    system: GalerkinSystem
    U: np.ndarray
    eigenvalue: np.ndarray
    rayleigh: np.ndarray
    converged: bool
    history: IterationHistory
    iterates: list = field(default=None, repr=False)

    @property
    def eigenvalue_mean(self):
        return float(self.eigenvalue[0])

    @property
    def eigenvalue_variance(self):
        return float(np.sum(self.eigenvalue[1:] ** 2))

    @property
    def mean_field(self):
        return self.U[0]

    @property
    def variance_field(self):
        return expansion_statistics(self.U)[1]


def initial_guess(system: GalerkinSystem):
    """Deterministic start: the mean-problem ground mode in the zero block.

    The smallest eigenvector of the mean stiffness term against the mass
    matrix (mass-normalized, largest entry positive) becomes the zero-index
    coefficient; all fluctuation blocks start at zero.  Unit tensor norm by
    construction.
    """
    _, vecs = smallest_eigenpairs(system.fem_op.stiffness[0], system.mass, 1,
                                  tol=1e-12)
    U = np.zeros((system.P, system.N))
    U[0] = vecs[:, 0]
    return U


def iterate_once(system: GalerkinSystem, U, shift=0.0, cg_tol=1e-12,
                 cg_maxiter=500, warm_start=None, newton_tol=1e-12,
                 cond_limit=1e12):
    """One inverse-iteration sweep.

    Returns (U_next, mu, V, info, newton_steps) where mu holds the chaos
    coefficients of the eigenvalue estimate shift + 1/s(y) and V is the
    unnormalized solve result (useful as the next warm start).
    """
    op = system.operator(shift)
    B = system.mass_apply(U)
    V, info = pcg_solve(op, B, system.mean_preconditioner(), tol=cg_tol,
                        maxiter=cg_maxiter, x0=warm_start)
    if not info.converged:
        raise RuntimeError(
            f"inner CG stalled at relative residual "
            f"{info.relative_residual:.3e} after {info.iterations} "
            f"iterations")
    s, nhist = newton_normalize(system.tt, V, system.mass, tol=newton_tol)
    fac = DeltaFactor(system.tt, s, cond_limit=cond_limit)
    U_next = fac.solve(V)
    one = np.zeros(system.P)
    one[0] = 1.0
    mu = fac.solve(one)
    if shift:
        mu = mu + shift * one
    return U_next, mu, V, info, len(nhist) - 1


def rayleigh_quotient(system: GalerkinSystem, U):
    """Chaos coefficients of the Rayleigh quotient of an expansion.

    Galerkin division of the energy u(y)' K(y) u(y) by the squared mass
    norm of u(y); for a normalized converged iterate the denominator is
    close to one, so the division is well conditioned.
    """
    KU = system.operator().apply(U)
    num = system.tt.contract_gram(U @ KU.T)
    den = system.gram(U, U)
    return DeltaFactor(system.tt, den).solve(num)


def run_inverse_iteration(system: GalerkinSystem, tol=1e-10, kmax=50,
                          shift=0.0, initial=None, store_iterates=False,
                          cg_tol_floor=1e-12, cg_tol_factor=1e-2,
                          cg_maxiter=500, newton_tol=1e-12):
    """Drive inverse iteration to a fixed point of the three-step sweep.

    Stops when the tensor norm of the iterate increment drops below tol
    (both iterates have unit pointwise norm up to truncation, so absolute
    and relative increments agree).  The CG tolerance follows the outer
    progress: a fraction cg_tol_factor of the previous increment, floored
    at cg_tol_floor, and each solve warm-starts from the previous one.
    """
    if kmax < 1:
        raise ValueError("kmax must be positive")
    U = initial_guess(system) if initial is None else \
        np.array(initial, dtype=float) / tensor_norm(initial, system.mass)
    U0 = U.copy()
    iterates = [U.copy()] if store_iterates else None
    increments = []
    mu_means = []
    mu_changes = []
    cg_its = []
    cg_tols = []
    newton_its = []
    warm = None
    prev_inc = 1.0
    mu = None
    converged = False
    for _ in range(kmax):
        cg_tol = max(cg_tol_floor, cg_tol_factor * prev_inc)
        U_next, mu_next, warm, info, nsteps = iterate_once(
            system, U, shift=shift, cg_tol=cg_tol, cg_maxiter=cg_maxiter,
            warm_start=warm, newton_tol=newton_tol)
        inc = tensor_norm(U_next - U, system.mass)
        increments.append(inc)
        mu_means.append(mu_next[0])
        mu_changes.append(np.nan if mu is None else
                          abs(mu_next[0] - mu[0]))
        cg_its.append(info.iterations)
        cg_tols.append(cg_tol)
        newton_its.append(nsteps)
        U, mu = U_next, mu_next
        if store_iterates:
            iterates.append(U.copy())
        prev_inc = inc
        if inc < tol:
            converged = True
            break
    # safety net: pin the overall sign to the starting mode (the sweep maps
    # U to a positive multiple, so this only fires on pathological starts);
    # stored iterates keep their raw signs
    if float(np.sum(U[0] * (system.mass @ U0[0]))) < 0.0:
        U = -U
    history = IterationHistory(
        np.asarray(increments), np.asarray(mu_means),
        np.asarray(mu_changes), np.asarray(cg_its, dtype=int),
        np.asarray(cg_tols), np.asarray(newton_its, dtype=int))
    return EigenpairResult(system, U, mu, rayleigh_quotient(system, U),
                           converged, history, iterates)
