"""Right-preconditioned restarted GMRES and the baseline preconditioners.

Right preconditioning keeps the monitored residual equal to the true residual
of the original system; the recurrence value is confirmed by an explicit
recompute at the end of every restart cycle.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._kernels import ilut_factor, solve_lower_unit_csr, solve_upper_csr
from .sparse import SparseMatrix, spmv

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 4000
DEFAULT_RESTART = 100


class LinearOperator:
    """Dimension plus a deterministic linear apply."""

    def __init__(self, dimension, apply):
        self.dimension = int(dimension)
        self.apply = apply

    @classmethod
    def from_matrix(cls, A):
        if isinstance(A, SparseMatrix):
            return cls(A.n_rows, lambda v: spmv(A, v))
        A = np.asarray(A, dtype=np.float64)
        return cls(A.shape[0], lambda v: A @ v)


class Preconditioner:
    """Deterministic approximate inverse with a provenance label."""

    LABELS = ("diagonal", "ilut", "accelerated-mf", "none")

    def __init__(self, apply_inverse, label, stored_reals=0):
        if label not in self.LABELS:
            raise ValueError(f"unknown preconditioner label '{label}'")
        self.apply_inverse = apply_inverse
        self.label = label
        self.stored_reals = stored_reals


def identity_preconditioner():
    return Preconditioner(lambda v: v, "none")


@dataclass
class ConvergenceHistory:
    """True relative residual per iteration plus the termination outcome."""

    residuals: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0

    def to_csv(self, path):
        with open(path, "w", encoding="ascii") as fh:
            fh.write("iteration,relative_residual\n")
            for k, r in enumerate(self.residuals, start=1):
                fh.write(f"{k},{r!r}\n")


def gmres(A, b, M=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
          restart=DEFAULT_RESTART):
    """Restarted GMRES on ``A M^{-1}`` with the iterate mapped back through M.

    Terminates when the true relative residual reaches ``tol`` or after
    ``max_iter`` Arnoldi steps. A lucky Hessenberg breakdown means the Krylov
    space already contains the solution and counts as convergence; a
    non-finite residual is an error.
    """
    if not (0.0 < tol < 1.0):
        raise ValueError("tol must lie in (0, 1)")
    if max_iter < 1 or restart < 1:
        raise ValueError("max_iter and restart must be positive")
    M = M or identity_preconditioner()
    b = np.asarray(b, dtype=np.float64)
    n = A.dimension
    if b.shape[0] != n:
        raise ValueError("right-hand side does not match the operator dimension")

    history = ConvergenceHistory()
    norm_b = np.linalg.norm(b)
    x = np.zeros(n)
    if norm_b == 0.0:
        history.converged = True
        history.residuals.append(0.0)
        return x, history

    while history.iterations < max_iter and not history.converged:
        r = b - A.apply(x)
        beta = np.linalg.norm(r)
        if not np.isfinite(beta):
            raise ValueError("GMRES residual is not finite")
        if beta / norm_b <= tol:
            history.converged = True
            if not history.residuals:
                history.residuals.append(beta / norm_b)
            break
        m = min(restart, max_iter - history.iterations)
        V = np.zeros((n, m + 1))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[:, 0] = r / beta
        j = 0
        breakdown = False
        while j < m:
            w = A.apply(M.apply_inverse(V[:, j]))
            for i in range(j + 1):
                H[i, j] = V[:, i] @ w
                w -= H[i, j] * V[:, i]
            h_next = np.linalg.norm(w)
            if not np.isfinite(h_next):
                raise ValueError("GMRES residual is not finite")
            H[j + 1, j] = h_next
            # previous Givens rotations
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                raise ValueError("GMRES breakdown: zero Hessenberg column")
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            history.iterations += 1
            rel = abs(g[j + 1]) / norm_b
            history.residuals.append(rel)
            # exhausted Krylov space: the least-squares solve is exact
            lucky = h_next == 0.0
            j += 1
            if rel <= tol or lucky:
                breakdown = lucky
                break
            if j < m:
                V[:, j] = w / h_next
        if j > 0:
            y = np.zeros(j)
            for i in range(j - 1, -1, -1):
                y[i] = (g[i] - H[i, i + 1 : j] @ y[i + 1 : j]) / H[i, i]
            x = x + M.apply_inverse(V[:, :j] @ y)
        true_rel = np.linalg.norm(b - A.apply(x)) / norm_b
        if not np.isfinite(true_rel):
            raise ValueError("GMRES residual is not finite")
        if history.residuals:
            history.residuals[-1] = true_rel
        if true_rel <= tol or breakdown:
            history.converged = True
    return x, history


def diagonal_preconditioner(A):
    """Elementwise division by the matrix diagonal."""
    diag = A.diagonal()
    zero = np.flatnonzero(diag == 0.0)
    if zero.size:
        raise ValueError(f"zero diagonal entry at index {zero[0]}")
    return Preconditioner(lambda v: v / diag, "diagonal", stored_reals=len(diag))


def ilut(A, k=1, drop_tol=1e-4):
    """Dual-threshold incomplete LU preconditioner.

    The per-row fill cap for the strictly-lower and upper parts is
    ``floor(k * nnz / n) + 1`` off-diagonal entries; entries below
    ``drop_tol`` times the row 2-norm are dropped first. The diagonal is
    always kept and never perturbed.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if drop_tol < 0:
        raise ValueError("drop_tol must be nonnegative")
    if A.n_rows != A.n_cols:
        raise ValueError("ILUT requires a square matrix")
    csr = A.to_csr()
    csr.sort_indices()
    n = A.n_rows
    cap = int(k * A.nnz // n) + 1
    lp, li, lv, up, ui, uv = ilut_factor(
        n, csr.indptr.astype(np.int64), csr.indices.astype(np.int64),
        csr.data.astype(np.float64), cap, float(drop_tol),
    )

    def apply_inverse(v):
        y = solve_lower_unit_csr(lp, li, lv, np.asarray(v, dtype=np.float64))
        return solve_upper_csr(up, ui, uv, y)

    stored = len(lv) + len(uv)
    prec = Preconditioner(apply_inverse, "ilut", stored_reals=stored)
    prec.l_parts = (lp, li, lv)
    prec.u_parts = (up, ui, uv)
    return prec


def ilut_factors_as_csr(prec):
    """The ILUT factors as scipy matrices (unit diagonal added to L)."""
    n = len(prec.l_parts[0]) - 1
    lp, li, lv = prec.l_parts
    up, ui, uv = prec.u_parts
    L = sp.csr_matrix((lv, li, lp), shape=(n, n)) + sp.eye(n, format="csr")
    U = sp.csr_matrix((uv, ui, up), shape=(n, n))
    return L, U
