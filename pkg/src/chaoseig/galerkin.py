"""Kronecker-structured solver kernels on the chaos-FEM product space.

A coefficient block for a vector-valued chaos expansion is stored as a dense
(P, N) array: row a holds the spatial coefficient vector of chaos index a.
Scalar expansions are plain (P,) arrays.  Nothing in this module ever forms
the PN x PN system matrix; the stiffness operator

    sum_m  (raise matrix m)  (x)  (stiffness term m)

is applied blockwise.  The tensor norm pairs the stochastic blocks with the
spatial mass matrix:  ||V||^2 = sum_a V[a] . M V[a].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import ParametricOperator, build_mesh, build_parametric_operator
from .legendre import TripleProductTensor, build_moment_matrices, \
    build_triple_tensor
from .multiindex import generate_index_set, generate_index_set_by_size

__all__ = [
    "IndefiniteOperatorError",
    "NearSingularError",
    "KroneckerOperator",
    "MeanPreconditioner",
    "PcgInfo",
    "pcg_solve",
    "tensor_norm",
    "tensor_dot",
    "weighted_gram",
    "DeltaFactor",
    "delta_solve",
    "newton_normalize",
    "GalerkinSystem",
    "build_system",
]


class IndefiniteOperatorError(RuntimeError):
    """Negative curvature met in CG: the (shifted) operator is indefinite."""


class NearSingularError(RuntimeError):
    """Galerkin multiplication operator numerically singular: the scalar
    normalization expansion is losing pointwise positivity."""


def tensor_dot(V, W, M):
    """Mass-weighted inner product of two (P, N) coefficient blocks."""
    return float(np.sum(V * (M @ W.T).T))


def tensor_norm(V, M):
    """Mass-weighted norm of a (P, N) coefficient block."""
    return float(np.sqrt(max(np.sum(V * (M @ V.T).T), 0.0)))


class KroneckerOperator:
    """Blockwise application of the affine Galerkin stiffness operator.

    Parameters
    ----------
    gmats : list of sparse (P, P) raise matrices; entry 0 is the identity.
    kmats : list of sparse (N, N) stiffness terms, same length.
    shift, mass : optional spectral shift; the operator becomes
        (stiffness part) - shift * (identity (x) mass).  Shifted operators
        may be indefinite; pcg_solve reports that instead of silently
        iterating.
    """

    def __init__(self, gmats, kmats, shift=0.0, mass=None):
        if len(gmats) != len(kmats):
            raise ValueError("need one spatial matrix per raise matrix")
        if shift and mass is None:
            raise ValueError("shift mode requires the mass matrix")
        self.gmats = gmats
        self.kmats = kmats
        self.shift = float(shift)
        self.mass = mass
        self.P = gmats[0].shape[0]
        self.N = kmats[0].shape[0]

    def apply(self, V):
        """Matrix-free product with a (P, N) coefficient block."""
        V = np.asarray(V)
        if V.shape != (self.P, self.N):
            raise ValueError(f"block shape {V.shape}, expected "
                             f"{(self.P, self.N)}")
        out = (self.kmats[0] @ V.T).T  # identity raise matrix for term 0
        for G, K in zip(self.gmats[1:], self.kmats[1:]):
            out += G @ (K @ V.T).T
        if self.shift:
            out -= self.shift * (self.mass @ V.T).T
        return out


class MeanPreconditioner:
    """Blockwise inverse of the mean stiffness term (sparse LU, cached)."""

    def __init__(self, k0):
        self.lu = spla.splu(sp.csc_matrix(k0))

    def apply(self, R):
        return self.lu.solve(R.T).T


@dataclass
class PcgInfo:
    converged: bool
    iterations: int
    relative_residual: float
    trace: np.ndarray


def pcg_solve(op: KroneckerOperator, rhs, precond, tol=1e-10, maxiter=500,
              x0=None):
    """Preconditioned conjugate gradients on coefficient blocks.

    Stops when the preconditioner-norm residual sqrt(r.Pr) drops below tol
    times the same norm of the right-hand side (a fixed target, so warm
    starts genuinely help).  Raises IndefiniteOperatorError on negative
    curvature, which signals a bad spectral shift.
    """
    B = np.asarray(rhs, dtype=float)
    target = np.sqrt(max(np.sum(B * precond.apply(B)), 0.0))
    if target == 0.0:
        return np.zeros_like(B), PcgInfo(True, 0, 0.0, np.zeros(1))
    X = np.zeros_like(B) if x0 is None else np.array(x0, dtype=float)
    R = B - op.apply(X) if x0 is not None else B.copy()
    Z = precond.apply(R)
    rz = float(np.sum(R * Z))
    Pdir = Z.copy()
    trace = [np.sqrt(max(rz, 0.0)) / target]
    if trace[0] <= tol:
        return X, PcgInfo(True, 0, trace[0], np.asarray(trace))
    for it in range(1, maxiter + 1):
        Ap = op.apply(Pdir)
        curv = float(np.sum(Pdir * Ap))
        if curv <= 0.0:
            raise IndefiniteOperatorError(
                f"negative curvature at iteration {it}: direction energy "
                f"{curv:.3e}")
        alpha = rz / curv
        X += alpha * Pdir
        R -= alpha * Ap
        Z = precond.apply(R)
        rz_new = float(np.sum(R * Z))
        rel = np.sqrt(max(rz_new, 0.0)) / target
        trace.append(rel)
        if rel <= tol:
            return X, PcgInfo(True, it, rel, np.asarray(trace))
        Pdir = Z + (rz_new / rz) * Pdir
        rz = rz_new
    return X, PcgInfo(False, maxiter, trace[-1], np.asarray(trace))


def weighted_gram(tt: TripleProductTensor, V, W, M):
    """Chaos coefficients of the mass-weighted product of two expansions.

    Component a equals sum_bc E[Lam_a Lam_b Lam_c] * (V[b] . M W[c]): the
    (P, P) spatial Gram matrix is formed once, then contracted against the
    triple tensor row by row.
    """
    H = V @ (M @ W.T)
    return tt.contract_gram(H)


class DeltaFactor:
    """Dense factorization of the Galerkin multiplication operator of s.

    The operator is sum_a s_a G(a) (P x P, symmetric); one LU factorization
    serves every spatial column as well as the eigenvalue extraction solve.
    A reciprocal-condition estimate guards against s(y) losing positivity,
    which manifests as near-singularity here.
    """

    def __init__(self, tt: TripleProductTensor, s, cond_limit=1e12):
        self.matrix = tt.multiply_matrix(np.asarray(s, dtype=float))
        anorm = np.linalg.norm(self.matrix, 1)
        self.lu, self.piv = scipy.linalg.lu_factor(self.matrix)
        gecon = scipy.linalg.get_lapack_funcs(("gecon",), (self.matrix,))[0]
        rcond, _ = gecon(self.lu, anorm, norm="1")
        self.rcond = float(rcond)
        if not np.isfinite(self.rcond) or self.rcond < 1.0 / cond_limit:
            raise NearSingularError(
                f"Galerkin multiplication operator has rcond {self.rcond:.3e}"
                "; the scalar expansion is near losing positivity")

    def solve(self, rhs):
        """Solve against a (P,) vector or (P, N) block."""
        return scipy.linalg.lu_solve((self.lu, self.piv),
                                     np.asarray(rhs, dtype=float))


def delta_solve(tt, s, rhs, cond_limit=1e12):
    """One-shot DeltaFactor solve (factor + apply)."""
    return DeltaFactor(tt, s, cond_limit).solve(rhs)


def newton_normalize(tt: TripleProductTensor, V, M, tol=1e-12, maxiter=50,
                     max_halvings=30):
    """Chaos coefficients s of the pointwise norm of an expansion block.

    Solves F(s) = 0 where F_a = (s G(a) s) - (V . (G(a) x M) V), starting
    from s = ||V|| e_0; the Jacobian is twice the Galerkin multiplication
    operator of s, which at the start is a positive multiple of the
    identity.  Damped Newton: the step is halved until the residual norm
    decreases.

    Returns (s, residual_history); the history starts with the residual at
    the initial guess.
    """
    b = weighted_gram(tt, V, V, M)
    scale = b[0]  # = ||V||^2 since the zero-index slice is the identity
    if scale <= 0.0:
        raise ValueError("cannot normalize a zero block")
    s = np.zeros(tt.size)
    s[0] = np.sqrt(scale)
    F = tt.congruence(s, s) - b
    res = float(np.linalg.norm(F))
    history = [res]
    for _ in range(maxiter):
        if res <= tol * scale:
            return s, np.asarray(history)
        J = 2.0 * tt.multiply_matrix(s)
        try:
            step = scipy.linalg.solve(J, -F, assume_a="sym")
        except scipy.linalg.LinAlgError as exc:
            raise NearSingularError(
                f"singular Newton Jacobian at residual {res:.3e}") from exc
        t = 1.0
        for _ in range(max_halvings):
            s_new = s + t * step
            F_new = tt.congruence(s_new, s_new) - b
            res_new = float(np.linalg.norm(F_new))
            if res_new < res:
                break
            t *= 0.5
        else:
            raise NearSingularError(
                f"Newton stalled: no decrease from residual {res:.3e} "
                f"after {max_halvings} halvings")
        s, F, res = s_new, F_new, res_new
        history.append(res)
    raise NearSingularError(
        f"Newton did not reach tolerance {tol:.1e} in {maxiter} iterations "
        f"(last residual {res:.3e}, scale {scale:.3e})")


@dataclass
class GalerkinSystem:
    """Everything one discretized problem needs: index set, mesh, matrices.

    Bundles the parametric FEM operator with the chaos moment structures
    over one multi-index set, plus a cached mean-based preconditioner.
    """

    aset: object
    fem_op: ParametricOperator
    gmats: list
    tt: TripleProductTensor
    _mean_prec: MeanPreconditioner = field(default=None, repr=False)

    @property
    def mesh(self):
        return self.fem_op.mesh

    @property
    def mass(self):
        return self.fem_op.mass

    @property
    def P(self):
        return len(self.aset)

    @property
    def N(self):
        return self.fem_op.ndof

    def operator(self, shift=0.0):
        return KroneckerOperator(self.gmats, self.fem_op.stiffness,
                                 shift=shift, mass=self.mass)

    def mean_preconditioner(self):
        if self._mean_prec is None:
            self._mean_prec = MeanPreconditioner(self.fem_op.stiffness[0])
        return self._mean_prec

    def mass_apply(self, V):
        return (self.mass @ V.T).T

    def norm(self, V):
        return tensor_norm(V, self.mass)

    def gram(self, V, W):
        return weighted_gram(self.tt, V, W, self.mass)


def build_system(n, order=2, size=None, eps=None, varsigma=3.2, nquad=None,
                 max_terms=None):
    """Assemble a GalerkinSystem for the built-in coefficient family.

    Give either a target index-set cardinality (size) or a weight threshold
    (eps).  The stiffness family is truncated at the set's own maximal
    active dimension: dimensions the chaos basis never sees cannot enter
    the Galerkin operator.  max_terms additionally caps the number of
    coefficient fluctuation terms, turning later parameters inert.
    """
    if (size is None) == (eps is None):
        raise ValueError("give exactly one of size or eps")
    if size is not None:
        aset = generate_index_set_by_size(size, varsigma=varsigma)
    else:
        aset = generate_index_set(eps, varsigma=varsigma)
    nterms = aset.max_dimension
    if max_terms is not None:
        if max_terms < 1:
            raise ValueError("max_terms must be positive")
        nterms = min(nterms, int(max_terms))
    mesh = build_mesh(n, order)
    fem_op = build_parametric_operator(mesh, varsigma=varsigma,
                                       nterms=nterms, nquad=nquad)
    gmats = build_moment_matrices(aset)[:nterms + 1]
    tt = build_triple_tensor(aset)
    return GalerkinSystem(aset, fem_op, gmats, tt)
