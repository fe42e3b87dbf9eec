"""Sparse Gaussian Markov random field kernel.

Cholesky factorization with a fill-reducing ordering, triangular solves,
log-determinants, and exact handling of linear constraints by conditioning
by kriging.  Two interchangeable backends sit behind one factor type:

* a dense LAPACK Cholesky for small systems (identity ordering), and
* a sparse SuperLU factorization in symmetric mode on a reverse
  Cuthill-McKee ordering, which for an SPD matrix reduces to the Cholesky
  factor L * sqrt(D).

Factors are immutable after construction; solves and sampling allocate
their own workspace, so a factor can be shared across threads.  All
stochastic routines take an explicit seed and draw from NumPy's PCG64
generator (``numpy.random.default_rng``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import splu, spsolve_triangular

from .errors import NotPositiveDefiniteError, NumericalError, ValidationError

# below this dimension "auto" factorization densifies; matches the scale at
# which dense mirrors are required to be available for oracle checks
DENSE_THRESHOLD = 200

# exact marginal-variance path builds the full inverse; refuse above this
MAX_EXACT_INVERSE = 5000


def _as_csc(q) -> sp.csc_matrix:
    if sp.issparse(q):
        return q.tocsc()
    return sp.csc_matrix(np.asarray(q, dtype=float))


def _first_bad_pivot(a: np.ndarray) -> int:
    """Index of the first non-positive pivot, located by bisection."""
    lo, hi = 0, a.shape[0]
    while lo < hi - 1:
        mid = (lo + hi) // 2
        try:
            np.linalg.cholesky(a[:mid, :mid])
            lo = mid
        except np.linalg.LinAlgError:
            hi = mid
    return lo


@dataclass(frozen=True)
class CholeskyFactor:
    """Immutable Cholesky factorization P^T Q P = L L^T.

    ``permutation`` maps factored order to original order (identity for the
    dense backend, reverse Cuthill-McKee for the sparse one); the
    log-determinant is accumulated from the factor diagonal.
    """

    dimension: int
    method: str
    permutation: np.ndarray
    log_determinant: float
    _dense_L: Optional[np.ndarray] = field(default=None, repr=False)
    _splu: Optional[object] = field(default=None, repr=False)
    _sparse_Lt: Optional[sp.csr_matrix] = field(default=None, repr=False)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve Q x = b; accepts a vector or a matrix of columns."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.dimension:
            raise ValidationError(
                f"rhs has {b.shape[0]} rows, factor dimension is {self.dimension}"
            )
        if self.method == "dense":
            return sla.cho_solve((self._dense_L, True), b)
        p = self.permutation
        out = np.empty_like(b, dtype=float)
        out[p] = self._splu.solve(np.ascontiguousarray(b[p]))
        return out

    def sqrt_solve_t(self, z: np.ndarray) -> np.ndarray:
        """Return x with x = P L^{-T} z, so x ~ N(0, Q^{-1}) for z ~ N(0, I)."""
        z = np.asarray(z, dtype=float)
        if self.method == "dense":
            return sla.solve_triangular(self._dense_L.T, z, lower=False)
        y = spsolve_triangular(self._sparse_Lt, z, lower=False)
        out = np.empty_like(y, dtype=float)
        out[self.permutation] = y
        return out

    def factor_dense(self) -> np.ndarray:
        """Dense mirror of the lower factor (oracle checks only)."""
        if self.method == "dense":
            return self._dense_L.copy()
        return self._sparse_Lt.T.toarray()


def factorize(q, method: str = "auto",
              dense_threshold: int = DENSE_THRESHOLD) -> CholeskyFactor:
    """Cholesky-factorize a symmetric positive definite matrix.

    The caller is responsible for positive definiteness (add likelihood
    curvature and constraint regularization first); a non-positive pivot
    raises :class:`NotPositiveDefiniteError` with the pivot index.

    Parameters
    ----------
    q : array or sparse matrix
        Symmetric positive definite matrix.
    method : {"auto", "dense", "sparse"}
        "auto" picks dense below ``dense_threshold``.
    """
    q = _as_csc(q)
    m = q.shape[0]
    if q.shape[0] != q.shape[1]:
        raise ValidationError(f"matrix is not square: {q.shape}")
    if method == "auto":
        method = "dense" if m <= dense_threshold else "sparse"

    if method == "dense":
        a = q.toarray()
        try:
            lower = np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError(_first_bad_pivot(a)) from None
        logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
        return CholeskyFactor(dimension=m, method="dense",
                              permutation=np.arange(m),
                              log_determinant=logdet, _dense_L=lower)

    if method != "sparse":
        raise ValidationError(f"unknown factorization method {method!r}")

    perm = np.asarray(reverse_cuthill_mckee(q.tocsr(), symmetric_mode=True),
                      dtype=np.int64)
    qp = q[perm][:, perm].tocsc()
    try:
        lu = splu(qp, permc_spec="NATURAL", diag_pivot_thresh=0.0,
                  options=dict(SymmetricMode=True))
    except RuntimeError as exc:  # SuperLU signals singularity this way
        raise NotPositiveDefiniteError(-1) from exc
    if not (np.array_equal(lu.perm_r, np.arange(m))
            and np.array_equal(lu.perm_c, np.arange(m))):
        # SuperLU pivoted after all: matrix is not safely SPD for this path
        raise NumericalError("symmetric sparse factorization pivoted; "
                             "matrix may not be positive definite")
    diag = lu.U.diagonal()
    bad = np.nonzero(~(diag > 0.0))[0]
    if bad.size:
        raise NotPositiveDefiniteError(int(perm[bad[0]]))
    lchol = (lu.L @ sp.diags(np.sqrt(diag))).tocsc()
    return CholeskyFactor(dimension=m, method="sparse", permutation=perm,
                          log_determinant=float(np.sum(np.log(diag))),
                          _splu=lu, _sparse_Lt=lchol.T.tocsr())


def solve(factor: CholeskyFactor, b: np.ndarray) -> np.ndarray:
    """Solve Q x = b using an existing factor."""
    return factor.solve(b)


def _kriging_pieces(factor: CholeskyFactor, constraints: np.ndarray):
    """Shared kriging work: V = Q^{-1} C^T and the Cholesky of S = C V."""
    c = np.atleast_2d(np.asarray(constraints, dtype=float))
    if c.shape[1] != factor.dimension:
        raise ValidationError(
            f"constraints have {c.shape[1]} columns, expected {factor.dimension}"
        )
    v = factor.solve(c.T)
    s = c @ v
    try:
        s_chol = sla.cho_factor(s)
    except np.linalg.LinAlgError:
        raise ValidationError("constraint matrix is rank deficient") from None
    return c, v, s_chol


def sample_constrained(factor: CholeskyFactor, mean: np.ndarray,
                       constraints: Optional[np.ndarray], size: int,
                       seed) -> np.ndarray:
    """Draw ``size`` samples of N(mean, Q^{-1}) subject to C x = 0.

    Unconstrained draws x = mean + P L^{-T} z are corrected exactly by
    conditioning by kriging: x <- x - Q^{-1} C^T (C Q^{-1} C^T)^{-1} C x.
    Returns an array of shape (size, m).
    """
    if size < 1:
        raise ValidationError(f"sample count must be >= 1, got {size}")
    mean = np.asarray(mean, dtype=float)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((factor.dimension, size))
    x = mean[:, None] + factor.sqrt_solve_t(z)
    if constraints is not None:
        c, v, s_chol = _kriging_pieces(factor, constraints)
        x -= v @ sla.cho_solve(s_chol, c @ x)
    return np.ascontiguousarray(x.T)


def constrained_mean(factor: CholeskyFactor, mean: np.ndarray,
                     constraints: Optional[np.ndarray]) -> np.ndarray:
    """Kriging-corrected mean: the constrained Gaussian's mean vector."""
    mean = np.asarray(mean, dtype=float)
    if constraints is None:
        return mean.copy()
    c, v, s_chol = _kriging_pieces(factor, constraints)
    return mean - v @ sla.cho_solve(s_chol, c @ mean)


def constrained_covariance(factor: CholeskyFactor,
                           constraints: Optional[np.ndarray]) -> np.ndarray:
    """Full constrained covariance (exact; small systems only)."""
    m = factor.dimension
    if m > MAX_EXACT_INVERSE:
        raise NumericalError(
            f"exact inverse requested for dimension {m} > {MAX_EXACT_INVERSE}"
        )
    sigma = factor.solve(np.eye(m))
    if constraints is None:
        return sigma
    c = np.atleast_2d(np.asarray(constraints, dtype=float))
    v = sigma @ c.T
    s = c @ v
    try:
        s_chol = sla.cho_factor(s)
    except np.linalg.LinAlgError:
        raise ValidationError("constraint matrix is rank deficient") from None
    return sigma - v @ sla.cho_solve(s_chol, v.T)


def constrained_marginal_variances(factor: CholeskyFactor,
                                   constraints: Optional[np.ndarray]) -> np.ndarray:
    """Per-coordinate variances diag(Q^{-1} - Q^{-1}C^T (CQ^{-1}C^T)^{-1} CQ^{-1}).

    Uses the exact full-inverse algorithm, which is the sanctioned path
    below dimension 5000.
    """
    m = factor.dimension
    if m > MAX_EXACT_INVERSE:
        raise NumericalError(
            f"exact marginal variances requested for dimension {m} > "
            f"{MAX_EXACT_INVERSE}"
        )
    sigma = factor.solve(np.eye(m))
    var = np.diag(sigma).copy()
    if constraints is not None:
        c = np.atleast_2d(np.asarray(constraints, dtype=float))
        v = sigma @ c.T
        s = c @ v
        try:
            s_chol = sla.cho_factor(s)
        except np.linalg.LinAlgError:
            raise ValidationError("constraint matrix is rank deficient") from None
        r = sla.cho_solve(s_chol, v.T)
        var -= np.einsum("ik,ki->i", v, r)
    return var
