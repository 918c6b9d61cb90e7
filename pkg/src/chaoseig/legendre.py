"""Normalized Legendre chaos basis and its moment tensors.

Univariate basis: Legendre polynomials on [-1, 1], normalized so that
E[Lt_p^2] = 1 under the uniform probability measure dx/2 (Lt_p = sqrt(2p+1)
L_p with the standard L_p(1) = 1 convention).  Multivariate basis functions
are finite tensor products indexed by sparse multi-indices.

Two moment contractions drive all Galerkin products:

* raise matrices, one per dimension m >= 1, with entries
  E[y_m Lam_a Lam_b]: nonzero only when a and b agree except in coordinate m
  where they differ by one, with univariate value (p+1)/sqrt((2p+1)(2p+3));
  the m = 0 matrix is the identity by convention.
* the triple product tensor with entries E[Lam_a Lam_b Lam_c], factorizing
  into univariate triples that vanish unless each coordinate's degrees pass
  the parity and triangle conditions.

Univariate triple products are evaluated by exact-degree Gauss quadrature
(cached per degree sum) rather than factorial closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .multiindex import MultiIndexSet, dense_exponents

__all__ = [
    "eval_univariate",
    "eval_univariate_all",
    "gauss_rule",
    "univariate_triple",
    "univariate_raise",
    "build_moment_matrices",
    "build_triple_tensor",
    "TripleProductTensor",
    "basis_matrix",
    "evaluate_expansion",
    "dump_coordinate_text",
]

_gauss_cache = {}
_triple_cache = {}


def gauss_rule(npts):
    """Gauss-Legendre nodes and probability weights (summing to 1) on [-1,1]."""
    if npts not in _gauss_cache:
        x, w = np.polynomial.legendre.leggauss(npts)
        _gauss_cache[npts] = (x, w / 2.0)
    return _gauss_cache[npts]


def eval_univariate_all(pmax, x):
    """Normalized Legendre values for all degrees 0..pmax at points x.

    Returns an array of shape (pmax+1,) + x.shape via the three-term
    recurrence (p+1) L_{p+1} = (2p+1) x L_p - p L_{p-1}, scaled at the end
    by sqrt(2p+1).
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((pmax + 1,) + x.shape)
    out[0] = 1.0
    if pmax >= 1:
        out[1] = x
    for p in range(1, pmax):
        out[p + 1] = ((2 * p + 1) * x * out[p] - p * out[p - 1]) / (p + 1)
    scale = np.sqrt(2 * np.arange(pmax + 1) + 1.0)
    return out * scale.reshape((-1,) + (1,) * x.ndim)


def eval_univariate(p, x):
    """Normalized Legendre value Lt_p(x); E[Lt_p^2] = 1 on uniform [-1,1]."""
    return eval_univariate_all(p, np.asarray(x, dtype=float))[p]


def univariate_triple(a, b, c):
    """E[Lt_a Lt_b Lt_c]: exactly zero unless the degrees have even sum and
    satisfy the triangle inequality; otherwise by exact Gauss quadrature."""
    a, b, c = sorted((int(a), int(b), int(c)))
    if (a + b + c) % 2 == 1 or a + b < c:
        return 0.0
    key = (a, b, c)
    if key not in _triple_cache:
        x, w = gauss_rule((a + b + c) // 2 + 1)
        vals = eval_univariate_all(c, x)
        _triple_cache[key] = float(np.sum(w * vals[a] * vals[b] * vals[c]))
    return _triple_cache[key]


def univariate_raise(p):
    """E[x Lt_p Lt_{p+1}] = (p+1)/sqrt((2p+1)(2p+3))."""
    p = int(p)
    return (p + 1) / np.sqrt((2.0 * p + 1.0) * (2.0 * p + 3.0))


def build_moment_matrices(aset: MultiIndexSet):
    """Sparse raise matrices for m = 0..max_dimension of the index set.

    Entry (a, b) of matrix m >= 1 is E[y_m Lam_a Lam_b]; matrix 0 is the
    identity.  Each matrix is symmetric with at most two structural nonzeros
    per row (the one-step neighbors in coordinate m).
    """
    P = len(aset)
    mats = [sp.identity(P, format="csr")]
    for m in range(1, aset.max_dimension + 1):
        rows, cols, vals = [], [], []
        for i, alpha in enumerate(aset.indices):
            d = dict(alpha)
            p = d.get(m, 0)
            # the +1 neighbor; the -1 pairing is covered by symmetry
            d[m] = p + 1
            up = tuple(sorted(d.items()))
            j = aset.position(up)
            if j is not None:
                v = univariate_raise(p)
                rows += [i, j]
                cols += [j, i]
                vals += [v, v]
        mats.append(sp.csr_matrix((vals, (rows, cols)), shape=(P, P)))
    return mats


@dataclass
class TripleProductTensor:
    """Flat sparse storage of all triples E[Lam_a Lam_b Lam_c] over a set.

    Entries are stored fully expanded over the last two slots (for every
    first-slot index a, every nonzero (b, c) pair appears once), so the
    row-wise contractions used by the solvers are single vectorized passes.
    """

    aset: MultiIndexSet
    ia: np.ndarray
    ib: np.ndarray
    ic: np.ndarray
    values: np.ndarray
    _per_row: dict = field(default_factory=dict, repr=False)

    @property
    def size(self):
        return len(self.aset)

    def matrix(self, a):
        """Sparse P x P slice for first-slot index position a."""
        if a not in self._per_row:
            mask = self.ia == a
            self._per_row[a] = sp.csr_matrix(
                (self.values[mask], (self.ib[mask], self.ic[mask])),
                shape=(self.size, self.size))
        return self._per_row[a]

    def contract_gram(self, H):
        """Row-wise Frobenius products {sum_bc c_abc H_bc}_a for dense H."""
        return np.bincount(self.ia, weights=self.values * H[self.ib, self.ic],
                           minlength=self.size)

    def congruence(self, s, t):
        """Vector {sum_bc c_abc s_b t_c}_a for coefficient vectors s, t."""
        return np.bincount(self.ia, weights=self.values * s[self.ib] * t[self.ic],
                           minlength=self.size)

    def multiply_matrix(self, s):
        """Dense Galerkin multiplication operator sum_a s_a * slice(a)."""
        P = self.size
        D = np.zeros((P, P))
        np.add.at(D, (self.ib, self.ic), self.values * s[self.ia])
        return D


def build_triple_tensor(aset: MultiIndexSet) -> TripleProductTensor:
    """All nonzero triples over the index set, by pair scan.

    For each pair (b, c), candidate first-slot indices are enumerated per
    coordinate from the triangle/parity admissible range, then checked for
    membership; the value is the product of univariate triples over the
    union support.
    """
    P = len(aset)
    dense = [dense_exponents(a) for a in aset.indices]
    ia, ib, ic, vals = [], [], [], []

    def emit(a, b, c, v):
        ia.append(a)
        ib.append(b)
        ic.append(c)
        vals.append(v)
        if b != c:
            ia.append(a)
            ib.append(c)
            ic.append(b)
            vals.append(v)

    for b in range(P):
        eb = dense[b]
        for c in range(b, P):
            ec = dense[c]
            ndim = max(len(eb), len(ec))
            pb = eb + (0,) * (ndim - len(eb))
            pc = ec + (0,) * (ndim - len(ec))
            # per-dim admissible first-slot degrees: |pb-pc| .. pb+pc, step 2
            cands = [()]
            for m in range(ndim):
                lo, hi = abs(pb[m] - pc[m]), pb[m] + pc[m]
                step = [(m + 1, d) for d in range(lo, hi + 1, 2) if d > 0]
                base = [c0 for c0 in cands] if lo == 0 else []
                cands = base + [c0 + (p,) for c0 in cands for p in step]
                if not cands:
                    break
            for cand in cands:
                a = aset.position(cand)
                if a is None:
                    continue
                da = dict(cand)
                v = 1.0
                for m in range(ndim):
                    pa = da.get(m + 1, 0)
                    if pa or pb[m] or pc[m]:
                        v *= univariate_triple(pa, pb[m], pc[m])
                emit(a, b, c, v)

    return TripleProductTensor(
        aset,
        np.asarray(ia, dtype=np.intp), np.asarray(ib, dtype=np.intp),
        np.asarray(ic, dtype=np.intp), np.asarray(vals, dtype=float))


def basis_matrix(aset: MultiIndexSet, Y):
    """Values Lam_a(y) for all members at parameter points.

    Parameters
    ----------
    Y : array_like, shape (npts, d) with d >= max_dimension, or (d,).

    Returns
    -------
    ndarray (npts, P); column 0 is identically 1.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    mdim = aset.max_dimension
    if Y.shape[1] < mdim:
        raise ValueError(f"points have {Y.shape[1]} dims, set needs {mdim}")
    degs = aset.max_degrees
    # per active dimension: univariate values up to that dimension's max degree
    univ = {}
    for m in range(1, mdim + 1):
        if degs[m - 1] > 0:
            univ[m] = eval_univariate_all(degs[m - 1], Y[:, m - 1])
    out = np.ones((Y.shape[0], len(aset)))
    for j, alpha in enumerate(aset.indices):
        for m, p in alpha:
            out[:, j] *= univ[m][p]
    return out


def evaluate_expansion(coeffs, aset: MultiIndexSet, Y):
    """Evaluate a chaos expansion at parameter points.

    coeffs has shape (P,) for scalar expansions or (P, N) for spatial-vector
    expansions; the result has shape (npts,) or (npts, N), squeezed to the
    point when a single y is given.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != len(aset):
        raise ValueError("coefficient block does not match index set size")
    single = np.asarray(Y).ndim == 1
    vals = basis_matrix(aset, Y) @ coeffs
    return vals[0] if single else vals


def dump_coordinate_text(mat, path):
    """Write a sparse matrix as 'row col value' lines (debug interchange)."""
    coo = sp.coo_matrix(mat)
    with open(path, "w") as fh:
        fh.write(f"# shape={coo.shape[0]}x{coo.shape[1]} nnz={coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {float(v)!r}\n")
