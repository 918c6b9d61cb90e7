"""Anisotropic sparse multi-index sets for polynomial chaos expansions.

A multi-index assigns a polynomial degree to each of countably many parameter
dimensions, with only finitely many nonzero entries.  Indices are stored
sparsely as tuples of ``(dimension, exponent)`` pairs with 1-based dimensions
in ascending order and exponents >= 1; the zero index is the empty tuple.

An index set collects every multi-index whose product weight

    weight(alpha) = prod_m eta_m ** alpha_m

exceeds a threshold ``eps``, where ``eta_m`` is a decreasing per-dimension
weight in (0, 1).  Such sets are downward closed: removing one from any
exponent can only increase the weight.  The default weight rule, built to
match a diffusion coefficient whose m-th fluctuation has amplitude
``(m+1)**-varsigma``, is

    eta_m = 1 / (tau_m + sqrt(1 + tau_m**2)),   tau_m = (m+1)**(varsigma-1).

Members are kept in decreasing weight order; exact weight ties are broken by
total degree (ascending), then lexicographically on dense exponent tuples.
"""

from __future__ import annotations

import io
import math

import numpy as np

__all__ = [
    "dimension_weights",
    "MultiIndexSet",
    "generate_index_set",
    "generate_index_set_by_size",
    "total_degree",
    "dense_exponents",
]


def total_degree(alpha):
    """Sum of all exponents of a sparse multi-index."""
    return sum(e for _, e in alpha)


def dense_exponents(alpha, ndim=None):
    """Dense exponent tuple of a sparse multi-index, padded to ``ndim``."""
    if ndim is None:
        ndim = alpha[-1][0] if alpha else 0
    out = [0] * ndim
    for d, e in alpha:
        out[d - 1] = e
    return tuple(out)


def dimension_weights(varsigma, count):
    """Per-dimension weights ``eta_1 .. eta_count`` for the decay rule.

    Parameters
    ----------
    varsigma : float
        Decay exponent of the coefficient amplitudes, > 1.
    count : int
        Number of leading dimensions to evaluate.

    Returns
    -------
    ndarray of shape (count,), strictly decreasing values in (0, 1).
    """
    if varsigma <= 1:
        raise ValueError("varsigma must exceed 1 for summable weights")
    m = np.arange(1, count + 1, dtype=float)
    tau = (m + 1.0) ** (varsigma - 1.0)
    return 1.0 / (tau + np.sqrt(1.0 + tau * tau))


def _weight_cutoff(varsigma, eps):
    # largest m with eta_m > eps; eta is invertible:
    # eta > eps  <=>  tau < (1/eps - eps)/2  <=>  m+1 < ((1/eps-eps)/2)**(1/(vs-1))
    bound = ((1.0 / eps) - eps) / 2.0
    if bound <= 0:
        return 0
    m = int(bound ** (1.0 / (varsigma - 1.0))) + 2
    eta = dimension_weights(varsigma, m + 2)
    active = np.nonzero(eta > eps)[0]
    return 0 if active.size == 0 else int(active[-1]) + 1


def _enumerate(eta, eps):
    """All sparse indices with product weight > eps for finite weights eta.

    Walks the canonical tree in which each index's children append to or
    extend its last active dimension, so every index is visited exactly once.
    """
    ncap = len(eta)
    out = [((), 1.0)]
    # stack entries: (sparse index, weight, 0-based position of last active dim)
    stack = [((), 1.0, 0)]
    while stack:
        alpha, w, jlast = stack.pop()
        for j in range(jlast, ncap):
            wc = w * eta[j]
            if wc <= eps:
                if j > jlast or not alpha:
                    break  # eta decreasing: no later dimension can pass
                continue  # deepening dim jlast failed, a fresh dim may still pass
            if alpha and alpha[-1][0] == j + 1:
                child = alpha[:-1] + ((j + 1, alpha[-1][1] + 1),)
            else:
                child = alpha + ((j + 1, 1),)
            out.append((child, wc))
            stack.append((child, wc, j))
    return out


def _sort_key(entry):
    alpha, w = entry
    return (-w, total_degree(alpha), dense_exponents(alpha))


class MultiIndexSet:
    """Finite downward-closed set of sparse multi-indices with weights.

    Attributes
    ----------
    indices : list of sparse multi-indices in canonical order (zero index
        first; decreasing weight, ties by degree then lexicographic order).
    weights : ndarray of matching product weights, non-increasing.
    eps : float threshold; every member has weight > eps.
    varsigma : float or None, the decay exponent of the built-in weight rule
        (None when the set was built from explicit per-dimension weights).
    eta : ndarray of the per-dimension weights eta_1..eta_{max_dimension}.
    """

    def __init__(self, indices, weights, eps, varsigma=None, eta=None):
        self.indices = list(indices)
        self.weights = np.asarray(weights, dtype=float)
        self.eps = float(eps)
        self.varsigma = varsigma
        if not self.indices or self.indices[0] != ():
            raise ValueError("index set must contain the zero index first")
        if len(self.indices) != len(self.weights):
            raise ValueError("indices and weights length mismatch")
        self._pos = {a: i for i, a in enumerate(self.indices)}
        if len(self._pos) != len(self.indices):
            raise ValueError("duplicate multi-indices")
        mdim = self.max_dimension
        if eta is None and varsigma is not None:
            eta = dimension_weights(varsigma, mdim)
        self.eta = (np.empty(0) if eta is None
                    else np.asarray(eta, dtype=float)[:mdim])

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, alpha):
        return alpha in self._pos

    def __getitem__(self, i):
        return self.indices[i]

    def __repr__(self):
        return (f"MultiIndexSet(size={len(self)}, max_dimension="
                f"{self.max_dimension}, eps={self.eps:.6g})")

    def position(self, alpha):
        """Position in the canonical order, or None if alpha is absent."""
        return self._pos.get(alpha)

    @property
    def max_dimension(self):
        """Largest active dimension over all members (0 for the zero set)."""
        return max((a[-1][0] for a in self.indices if a), default=0)

    @property
    def max_degrees(self):
        """Array of per-dimension maximal exponents, length max_dimension."""
        out = np.zeros(self.max_dimension, dtype=int)
        for a in self.indices:
            for d, e in a:
                if e > out[d - 1]:
                    out[d - 1] = e
        return out

    def is_downward_closed(self):
        """True if every index minus one in any exponent stays a member."""
        for a in self.indices:
            for i, (d, e) in enumerate(a):
                if e > 1:
                    b = a[:i] + ((d, e - 1),) + a[i + 1:]
                else:
                    b = a[:i] + a[i + 1:]
                if b not in self._pos:
                    return False
        return True

    # -- plain-text serialization ------------------------------------------
    # header line "# eps=<val> varsigma=<val> count=<n>", then one line per
    # index: space-separated dim:exp pairs, "-" for the zero index.

    def to_text(self):
        """Serialize to the plain-text exchange format, returning a string."""
        vs = "none" if self.varsigma is None else repr(self.varsigma)
        lines = [f"# eps={self.eps!r} varsigma={vs} count={len(self)}"]
        for a in self.indices:
            lines.append(" ".join(f"{d}:{e}" for d, e in a) if a else "-")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text):
        """Parse the plain-text format; weights are recomputed from the rule."""
        fh = io.StringIO(text)
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError("missing header line")
        fields = dict(tok.split("=", 1) for tok in header[1:].split())
        eps = float(fields["eps"])
        vs = fields["varsigma"]
        if vs == "none":
            raise ValueError("text format only stores rule-based sets")
        varsigma = float(vs)
        indices = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line == "-":
                indices.append(())
                continue
            pairs = []
            for tok in line.split():
                d, e = tok.split(":")
                pairs.append((int(d), int(e)))
            indices.append(tuple(pairs))
        mdim = max((a[-1][0] for a in indices if a), default=0)
        eta = dimension_weights(varsigma, mdim) if mdim else np.empty(0)
        logeta = np.log(eta)
        weights = np.array([
            math.exp(sum(e * logeta[d - 1] for d, e in a)) if a else 1.0
            for a in indices
        ])
        if np.any(np.diff(weights) > 1e-12 * weights[:-1]):
            raise ValueError("stored indices are not in decreasing-weight order")
        return cls(indices, weights, eps, varsigma)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())


def generate_index_set(eps, varsigma=None, weights=None):
    """All multi-indices with product weight > eps, canonically ordered.

    Exactly one of ``varsigma`` (built-in decay rule) or ``weights`` (explicit
    per-dimension weight sequence; dimensions beyond its end never activate)
    must be given.

    Parameters
    ----------
    eps : float in (0, 1)
        Weight threshold (strict).
    varsigma : float, optional
        Decay exponent of the built-in rule.
    weights : array_like, optional
        Explicit decreasing per-dimension weights in (0, 1).

    Returns
    -------
    MultiIndexSet
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie strictly between 0 and 1")
    if (varsigma is None) == (weights is None):
        raise ValueError("give exactly one of varsigma or weights")
    if varsigma is not None:
        ncap = _weight_cutoff(varsigma, eps)
        eta = dimension_weights(varsigma, ncap)
    else:
        eta = np.asarray(weights, dtype=float)
        if eta.size and (np.any(eta <= 0) or np.any(eta >= 1)):
            raise ValueError("weights must lie strictly between 0 and 1")
        if np.any(np.diff(eta) > 0):
            raise ValueError("weights must be non-increasing")
        eta = eta[eta > eps]
    entries = _enumerate(list(eta), eps)
    entries.sort(key=_sort_key)
    idx = [a for a, _ in entries]
    ws = [w for _, w in entries]
    return MultiIndexSet(idx, ws, eps, varsigma, eta=eta)


def generate_index_set_by_size(size, varsigma=3.2, weights=None):
    """Index set of a requested cardinality for a given weight rule.

    Finds a threshold eps such that the weight-rule set has exactly ``size``
    members, placing eps at the log-space midpoint of the two boundary
    weights.  Raises ValueError if an exact weight tie straddles the cut, in
    which case no threshold realizes the requested size.
    """
    if size < 1:
        raise ValueError("size must be at least 1")
    kw = {"weights": weights} if weights is not None else {"varsigma": varsigma}
    eps = 0.5
    aset = generate_index_set(eps, **kw)
    while len(aset) < size + 1:
        new_eps = eps * eps
        if new_eps < 1e-300:
            raise ValueError(f"weight rule cannot reach size {size}")
        eps = new_eps
        aset = generate_index_set(eps, **kw)
    w_in, w_out = aset.weights[size - 1], aset.weights[size]
    if not w_in > w_out:
        sizes = np.nonzero(np.diff(aset.weights) < 0)[0] + 1
        lo = int(sizes[sizes < size][-1]) if np.any(sizes < size) else 1
        hi = int(sizes[sizes > size][0]) if np.any(sizes > size) else len(aset)
        raise ValueError(
            f"size {size} splits a weight tie; nearest achievable: {lo}, {hi}")
    cut = math.exp(0.5 * (math.log(w_in) + math.log(w_out)))
    return generate_index_set(cut, **kw)
