"""Solvers for sparse matrices bordered by a few dense rows and columns.

The Newton matrices have the form ``[[A, B], [C, D]]`` with ``A`` sparse
N x N and ``k`` border columns and rows.  At a traveling wave ``A`` is
singular: the rows sum to zero and the translation mode nearly annihilates
it.  Block elimination is done on ``A + s u v^T`` with ``u = e_i`` and
``v = e_j``, which is invertible when the left null vector has a nonzero
``i``-th entry and the right one a nonzero ``j``-th entry.  The rank-one
term is compensated by an extra border unknown ``w = v^T x``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import SingularError

DENSE_LIMIT = 1000


def solve_bordered(A, B, C, D, f, g, pivot_col: int | None = None, method: str = "auto"):
    """Solve ``[[A, B], [C, D]] [x; y] = [f; g]``.

    ``A`` is a sparse (N, N) matrix, ``B`` (N, k), ``C`` (k, N), ``D`` (k, k).
    ``pivot_col`` picks the column of the rank-one regularisation; a good
    choice is where the translation mode is largest.  ``method`` is
    ``"sparse"``, ``"dense"`` or ``"auto"`` (dense for N <= 1000).
    """
    N = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(N, -1)
    C = np.asarray(C, dtype=float).reshape(-1, N)
    D = np.asarray(D, dtype=float).reshape(C.shape[0], B.shape[1])
    if method == "auto":
        method = "dense" if N <= DENSE_LIMIT else "sparse"
    if method == "dense":
        return _solve_dense(A, B, C, D, f, g)
    if method != "sparse":
        raise ValueError(f"unknown method {method!r}")
    return _solve_sparse(A, B, C, D, f, g, pivot_col)


def _solve_dense(A, B, C, D, f, g):
    N = A.shape[0]
    M = np.block([[A.toarray() if sp.issparse(A) else np.asarray(A), B], [C, D]])
    rhs = np.concatenate((f, g))
    try:
        lu, piv = sla.lu_factor(M, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise SingularError("dense factorisation failed") from exc
    if np.min(np.abs(np.diag(lu))) <= 1e-14 * np.max(np.abs(np.diag(lu))):
        raise SingularError("bordered Jacobian is numerically singular")
    sol = sla.lu_solve((lu, piv), rhs)
    return sol[:N], sol[N:]


def _solve_sparse(A, B, C, D, f, g, pivot_col):
    N = A.shape[0]
    A = sp.csc_matrix(A)
    j = int(np.argmax(np.abs(B[:, 0]))) if pivot_col is None else int(pivot_col)
    i = j
    s = float(abs(A).max()) or 1.0
    At = (A + sp.csc_matrix(([s], ([i], [j])), shape=(N, N))).tocsc()
    try:
        lu = spla.splu(At, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularError("sparse factorisation failed") from exc
    u = np.zeros(N)
    u[i] = -s
    Bx = np.column_stack((B, u))
    Cx = np.vstack((C, np.eye(1, N, j)))
    k = B.shape[1]
    Dx = np.zeros((k + 1, k + 1))
    Dx[:k, :k] = D
    Dx[k, k] = -1.0
    Z = lu.solve(Bx)
    z = lu.solve(np.asarray(f, dtype=float))
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(z))):
        raise SingularError("regularised block is singular")
    S = Dx - Cx @ Z
    rhs = np.concatenate((g, [0.0])) - Cx @ z
    try:
        y = np.linalg.solve(S, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularError("Schur complement is singular") from exc
    if np.linalg.cond(S) > 1e14:
        raise SingularError("Schur complement is ill-conditioned")
    x = z - Z @ y
    return x, y[:k]
