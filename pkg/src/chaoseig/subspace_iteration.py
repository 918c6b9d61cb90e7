"""Block spectral iteration for low-dimensional invariant subspaces.

Extends the inverse-iteration sweep to a basis of Q expansions held as a
(P, N, Q) stack.  Each sweep solves the Galerkin system per basis vector,
optionally pools the solves into the first vector (`sum_trick`, which
stabilizes bases that straddle eigenvalue crossings), then runs a
Gram-Schmidt pass in the Galerkin product sense: the projection of w onto
u removes the chaos expansion of <w(y), u(y)> times u.  Pointwise products
of truncated expansions fall outside the chaos space, so one pass leaves
an orthogonality defect at truncation level; the sweep refines with extra
passes while the defect exceeds a threshold.

Per-vector eigenvalue expansions are deliberately not produced here: when
eigenvalues cross inside the tracked cluster, individual pairs are not
smooth functions of the parameter and only the subspace itself is a
meaningful object.
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
    weighted_gram,
)
from .validation import smallest_eigenpairs

__all__ = [
    "SubspaceBreakdownError",
    "SubspaceHistory",
    "SubspaceResult",
    "initial_basis",
    "orthogonality_defect",
    "subspace_iterate_once",
    "run_subspace_iteration",
]


class SubspaceBreakdownError(RuntimeError):
    """A basis vector lost (numerically) all of its length during the
    Gram-Schmidt pass: the iterated basis has collapsed to fewer than Q
    independent directions."""


@dataclass
class SubspaceHistory:
    """Per-sweep diagnostics: increments are tensor norms per vector."""

    increments: np.ndarray
    max_increments: np.ndarray
    orthogonality_defects: np.ndarray
    extra_orthogonalizations: np.ndarray
    cg_iterations: np.ndarray

    def __len__(self):
        return len(self.max_increments)


@dataclass
class SubspaceResult:
    system: GalerkinSystem
    basis: np.ndarray
    converged: bool
    history: SubspaceHistory
    snapshots: list = field(default=None, repr=False)


def initial_basis(system: GalerkinSystem, q):
    """Mean-problem eigenvectors in the zero block, one per basis column."""
    _, vecs = smallest_eigenpairs(system.fem_op.stiffness[0], system.mass, q,
                                  tol=1e-12)
    B = np.zeros((system.P, system.N, q))
    B[0] = vecs
    return B


def orthogonality_defect(system: GalerkinSystem, B):
    """Largest chaos-coefficient norm of <u_i(y), u_j(y)> over pairs i<j."""
    q = B.shape[2]
    worst = 0.0
    for i in range(q):
        for j in range(i + 1, q):
            f = system.gram(B[:, :, i], B[:, :, j])
            worst = max(worst, float(np.linalg.norm(f)))
    return worst


def _orthonormalize_column(system, W, done, newton_tol, breakdown_tol,
                           cond_limit):
    """Galerkin Gram-Schmidt against `done` columns, then normalize."""
    for U_i in done:
        coeff = weighted_gram(system.tt, W, U_i, system.mass)
        W = W - system.tt.multiply_matrix(coeff) @ U_i
    norm = tensor_norm(W, system.mass)
    if norm <= breakdown_tol:
        raise SubspaceBreakdownError(
            f"basis vector collapsed to tensor norm {norm:.3e} during "
            f"orthogonalization against {len(done)} previous vectors")
    s, _ = newton_normalize(system.tt, W, system.mass, tol=newton_tol)
    return DeltaFactor(system.tt, s, cond_limit=cond_limit).solve(W)


def subspace_iterate_once(system: GalerkinSystem, B, shift=0.0, cg_tol=1e-12,
                          cg_maxiter=500, warm_starts=None, sum_trick=False,
                          reorth_threshold=1e-8, max_reorth=3,
                          newton_tol=1e-12, breakdown_tol=1e-10,
                          cond_limit=1e12):
    """One block sweep: per-vector solves, then orthonormalization.

    Returns (B_next, solves, cg_iteration_counts, extra_passes); `solves`
    holds the raw CG solutions for warm-starting the next sweep.
    """
    q = B.shape[2]
    op = system.operator(shift)
    prec = system.mean_preconditioner()
    solves = []
    cg_counts = []
    for L in range(q):
        x0 = None if warm_starts is None else warm_starts[L]
        V, info = pcg_solve(op, system.mass_apply(B[:, :, L]), prec,
                            tol=cg_tol, maxiter=cg_maxiter, x0=x0)
        if not info.converged:
            raise RuntimeError(
                f"inner CG stalled on basis vector {L} at relative residual "
                f"{info.relative_residual:.3e}")
        solves.append(V)
        cg_counts.append(info.iterations)
    work = [V.copy() for V in solves]
    if sum_trick:
        # pooling the solves makes the leading vector a cluster average,
        # which varies smoothly across eigenvalue crossings
        work[0] = np.sum(solves, axis=0)
    done = []
    for L in range(q):
        done.append(_orthonormalize_column(system, work[L], done,
                                           newton_tol, breakdown_tol,
                                           cond_limit))
    B_next = np.stack(done, axis=2)
    extra = 0
    while extra < max_reorth and \
            orthogonality_defect(system, B_next) > reorth_threshold:
        redone = []
        for L in range(q):
            redone.append(_orthonormalize_column(
                system, B_next[:, :, L], redone, newton_tol, breakdown_tol,
                cond_limit))
        B_next = np.stack(redone, axis=2)
        extra += 1
    return B_next, solves, np.asarray(cg_counts, dtype=int), extra


def run_subspace_iteration(system: GalerkinSystem, q, tol=1e-8, kmax=30,
                           shift=0.0, sum_trick=False, initial=None,
                           store_snapshots=False, cg_tol_floor=1e-12,
                           cg_tol_factor=1e-2, cg_maxiter=500,
                           reorth_threshold=1e-8, max_reorth=3,
                           newton_tol=1e-12, breakdown_tol=1e-10):
    """Iterate a Q-vector basis until the largest vector increment is small.

    The CG tolerance tracks the previous sweep's largest increment exactly
    as in the single-vector driver.  Snapshots (when requested) include the
    initial basis, so entry k is the basis after k sweeps.
    """
    if kmax < 1:
        raise ValueError("kmax must be positive")
    if q < 1:
        raise ValueError("need at least one basis vector")
    B = initial_basis(system, q) if initial is None else \
        np.array(initial, dtype=float)
    if B.shape != (system.P, system.N, q):
        raise ValueError(f"basis shape {B.shape}, expected "
                         f"{(system.P, system.N, q)}")
    snapshots = [B.copy()] if store_snapshots else None
    increments = []
    defects = []
    extras = []
    cg_its = []
    warm = None
    prev_inc = 1.0
    converged = False
    for _ in range(kmax):
        cg_tol = max(cg_tol_floor, cg_tol_factor * prev_inc)
        B_next, warm, counts, extra = subspace_iterate_once(
            system, B, shift=shift, cg_tol=cg_tol, cg_maxiter=cg_maxiter,
            warm_starts=warm, sum_trick=sum_trick,
            reorth_threshold=reorth_threshold, max_reorth=max_reorth,
            newton_tol=newton_tol, breakdown_tol=breakdown_tol)
        inc = np.array([tensor_norm(B_next[:, :, L] - B[:, :, L],
                                    system.mass) for L in range(q)])
        increments.append(inc)
        defects.append(orthogonality_defect(system, B_next))
        extras.append(extra)
        cg_its.append(counts)
        B = B_next
        if store_snapshots:
            snapshots.append(B.copy())
        prev_inc = float(inc.max())
        if prev_inc < tol:
            converged = True
            break
    history = SubspaceHistory(
        np.asarray(increments), np.asarray(increments).max(axis=1),
        np.asarray(defects), np.asarray(extras, dtype=int),
        np.asarray(cg_its, dtype=int))
    return SubspaceResult(system, B, converged, history, snapshots)
