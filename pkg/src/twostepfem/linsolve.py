"""Sparse direct solves and condition-number estimation.

Matrices are scipy CSR throughout; `finalize` puts them in canonical form
(sorted column indices, duplicates summed, explicit zeros dropped).
Factorizations are immutable after construction, so concurrent solves
against one factorization are safe.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.io import mmread, mmwrite

# sigma_min below this fraction of sigma_max counts as numerically singular.
SINGULARITY_RATIO = 1e-14

SOLVE_TOL = 1e-10


class NumericallySingularError(RuntimeError):
    """Factorization detected a (numerically) singular matrix."""


class SolveAccuracyError(RuntimeError):
    """Solve residual exceeded the contract tolerance."""


def finalize(a):
    """Canonical CSR: sorted indices, summed duplicates, no stored zeros."""
    a = sp.csr_matrix(a)
    a.sum_duplicates()
    a.eliminate_zeros()
    a.sort_indices()
    return a


class Factorization:
    """Sparse LU (partial pivoting) with pivot diagnostics.

    Exact singularity always raises.  Passing `pivot_ratio` additionally
    rejects factorizations whose smallest pivot falls below that fraction
    of the largest one; physically extreme but solvable systems (large
    material contrasts) should leave it off and rely on the residual
    contract instead.
    """

    def __init__(self, a, pivot_ratio=None):
        a = sp.csc_matrix(a)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got {a.shape}")
        self.shape = a.shape
        self.matrix_norm = spla.norm(a)
        try:
            self._lu = spla.splu(a)
        except RuntimeError as exc:
            raise NumericallySingularError(f"sparse LU failed: {exc}") from exc
        diag = np.abs(self._lu.U.diagonal())
        dmax = diag.max() if diag.size else 0.0
        self.pivot_ratio = float(diag.min() / dmax) if dmax > 0.0 else 0.0
        threshold = 0.0 if pivot_ratio is None else pivot_ratio
        if dmax == 0.0 or diag.min() <= threshold * dmax:
            worst = int(np.argmin(diag))
            raise NumericallySingularError(
                f"numerically singular matrix: pivot {worst} has "
                f"|U_ii| = {diag.min():.3e} vs max {dmax:.3e} "
                f"(threshold ratio {threshold:.1e})"
            )

    def solve(self, b, trans="N"):
        return self._lu.solve(np.asarray(b), trans=trans)


def factor(a, pivot_ratio=None):
    return Factorization(a, pivot_ratio=pivot_ratio)


def factor_solve(a, b, check=True):
    """Solve A x = b by sparse LU and enforce the residual contract.

    Residual bound: ||Ax - b|| <= 1e-10 (||A||_F ||x|| + ||b||).
    """
    a = sp.csr_matrix(a)
    b = np.asarray(b)
    fac = Factorization(a)
    x = fac.solve(b)
    if check:
        check_residual(a, x, b, norm_a=fac.matrix_norm)
    return x


def check_residual(a, x, b, tol=SOLVE_TOL, norm_a=None):
    if norm_a is None:
        norm_a = spla.norm(a)
    res = np.linalg.norm(a @ x - b)
    bound = tol * (norm_a * np.linalg.norm(x) + np.linalg.norm(b))
    if res > bound:
        raise SolveAccuracyError(
            f"residual {res:.3e} exceeds bound {bound:.3e}"
        )
    return res


def _power_sigma_max(a, at, n, rng, max_iter=500, tol=1e-5):
    """Largest singular value by power iteration on A^T A."""
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = at(a(v))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v_new = w / nw
        sigma_new = np.sqrt(nw)
        if sigma > 0.0 and abs(sigma_new - sigma) <= tol * sigma:
            return sigma_new
        sigma, v = sigma_new, v_new
    return sigma


def condition_number(a, mode="dense", dense_cap=6000, seed=0):
    """2-norm condition estimate.

    Parameters
    ----------
    a : square sparse or dense matrix.
    mode : "dense" for an exact SVD (size-capped) or "iterative" for power
        iteration on A^T A plus inverse iteration through a sparse LU
        (relative accuracy target ~10%).

    Returns
    -------
    (cond, sigma_min, sigma_max); cond is inf when sigma_min falls below
    SINGULARITY_RATIO * sigma_max.
    """
    if mode == "dense":
        dense = a.toarray() if sp.issparse(a) else np.asarray(a)
        if dense.shape[0] > dense_cap:
            raise ValueError(
                f"dense mode capped at n={dense_cap}, got {dense.shape[0]}"
            )
        svals = np.linalg.svd(dense, compute_uv=False)
        smax = float(svals[0])
        smin = float(svals[-1])
    elif mode == "iterative":
        a = sp.csr_matrix(a)
        n = a.shape[0]
        rng = np.random.default_rng(seed)
        at_mat = sp.csr_matrix(a.T)
        smax = _power_sigma_max(lambda v: a @ v, lambda v: at_mat @ v, n, rng)
        try:
            fac = Factorization(a)
        except NumericallySingularError:
            return float("inf"), 0.0, smax
        inv_norm = _power_sigma_max(
            lambda v: fac.solve(v),
            lambda v: fac.solve(v, trans="T"),
            n,
            rng,
        )
        smin = 1.0 / inv_norm if inv_norm > 0.0 else 0.0
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if smax == 0.0:
        return float("inf"), 0.0, 0.0
    if smin < SINGULARITY_RATIO * smax:
        return float("inf"), smin, smax
    return smax / smin, smin, smax


def save_matrix(a, path):
    """MatrixMarket export for offline inspection."""
    mmwrite(path, sp.coo_matrix(a))


def load_matrix(path):
    return finalize(mmread(path))
