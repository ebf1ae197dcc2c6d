"""Dense and block-iterative solvers for the assembled block systems."""

import warnings
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DiagonalBlockSingular, NotConverged, SingularMatrix, SizeCapExceeded

DEFAULT_CAP = 6000
PIVOT_RTOL = 1e-14


@dataclass
class SolveReport:
    method: str
    iterations: int
    relative_residual: float
    converged: bool

    def to_dict(self):
        return asdict(self)


def relative_residual(sys, x):
    """``||A x - b|| / ||b||`` (absolute residual when ``b`` vanishes)."""
    r = sys.matvec(x.reshape(-1)) - sys.rhs()
    nb = np.linalg.norm(sys.rhs())
    nr = np.linalg.norm(r)
    return float(nr / nb) if nb > 0 else float(nr)


def _moments(sys, flat):
    """Flat solution -> (n, blocks, 3)."""
    return flat.reshape(sys.n_dimers, sys.block_size // 3, 3)


def solve_dense(sys, cap=DEFAULT_CAP):
    """Partial-pivoting LU solve of the whole system."""
    if sys.size > cap:
        raise SizeCapExceeded(f"{sys.size} unknowns exceeds dense cap {cap}")
    a = sys.dense()
    b = sys.rhs()
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrix
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    if np.min(np.abs(np.diag(lu))) <= PIVOT_RTOL * np.linalg.norm(a, 1):
        raise SingularMatrix("LU pivot below 1e-14 * ||A||_1")
    x = sla.lu_solve((lu, piv), b)
    u = _moments(sys, x)
    return u, SolveReport("dense", 1, relative_residual(sys, u), True)


def _block_inverses(sys):
    inv = np.empty_like(sys.diag)
    for m, blk in enumerate(sys.diag):
        sv = np.linalg.svd(blk, compute_uv=False)
        if sv[0] == 0 or sv[-1] <= PIVOT_RTOL * sv[0]:
            raise DiagonalBlockSingular(f"diagonal block {m} is singular")
        inv[m] = np.linalg.inv(blk)
    return inv


def solve_block_iterative(sys, scheme="gauss-seidel", tol=1e-12, max_iter=500):
    """Block Jacobi or Gauss-Seidel sweeps starting from zero.

    Each sweep updates ``x[m] = diag[m]^-1 (source[m] + sum_j offdiag[m, j] x[j])``
    for ``m = 0..n-1``; Gauss-Seidel uses the freshest ``x[j]``.  Raises
    :class:`NotConverged` carrying the lowest-residual iterate if ``tol`` is
    not met within ``max_iter`` sweeps or the iteration blows up.
    """
    if scheme not in ("jacobi", "gauss-seidel"):
        raise ValueError(f"unknown scheme {scheme!r}")
    method = f"block-{scheme}"
    inv = _block_inverses(sys)
    n, b = sys.n_dimers, sys.block_size
    x = np.zeros((n, b), dtype=complex)
    best = (np.inf, x.copy(), 0)
    res = np.inf
    for it in range(1, max_iter + 1):
        if scheme == "jacobi":
            coupled = np.einsum("mjab,jb->ma", sys.offdiag, x)
            x = np.einsum("mab,mb->ma", inv, sys.source + coupled)
        else:
            for m in range(n):
                coupled = np.einsum("jab,jb->a", sys.offdiag[m], x)
                x[m] = inv[m] @ (sys.source[m] + coupled)
        if not np.all(np.isfinite(x)):
            break
        res = relative_residual(sys, x)
        if res < best[0]:
            best = (res, x.copy(), it)
        if res <= tol:
            return _moments(sys, x), SolveReport(method, it, res, True)
    report = SolveReport(method, best[2], best[0], False)
    raise NotConverged(f"{method} stopped at residual {best[0]:.3g} (tol {tol:g})",
                       moments=_moments(sys, best[1]), report=report)


def solve(sys, method="auto", cap=DEFAULT_CAP, tol=1e-12, max_iter=500):
    """Dense up to ``cap`` unknowns, block Gauss-Seidel beyond (``method='auto'``)."""
    if method == "auto":
        method = "dense" if sys.size <= cap else "gauss-seidel"
    if method == "dense":
        return solve_dense(sys, cap=cap)
    return solve_block_iterative(sys, method, tol=tol, max_iter=max_iter)


def perturbation_gap(sys_a, sys_b, cap=DEFAULT_CAP):
    """Euclidean norm of the difference between the two dense solutions."""
    if sys_a.diag.shape != sys_b.diag.shape:
        raise ValueError("systems differ in shape")
    ua, _ = solve_dense(sys_a, cap)
    ub, _ = solve_dense(sys_b, cap)
    return float(np.linalg.norm((ua - ub).ravel()))
