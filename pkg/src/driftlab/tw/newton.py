"""Newton iteration for traveling-wave profiles."""

from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError, DivergenceError
from .grid import WaveProfile
from .linalg import solve_bordered
from .system import dq_matrix, norm_row, parameter_columns, phase_row, residual

NEWTON_TOL = 1e-11
MAX_ITER = 25


def residual_norm(p: WaveProfile) -> float:
    return float(np.max(np.abs(residual(p))))


def newton_step(p: WaveProfile, extra=None, method: str = "auto"):
    """One Newton correction for ``(q, c, mu)``.

    ``extra`` optionally adds a free parameter: a tuple ``(name, row, rhs)``
    where ``name`` is ``"beta"``, ``row`` the coefficients of an additional
    scalar equation in the unknowns ``(q, c, mu, beta)`` and ``rhs`` its
    residual.  Returns the increments ``(dq, dc, dmu, dextra)``.
    """
    N = p.grid.N
    F = residual(p)
    A = dq_matrix(p)
    cols = parameter_columns(p)
    B = [cols["c"], cols["mu"]]
    C = [phase_row(p.grid), norm_row(p)[0]]
    g = [-F[N], -F[N + 1]]
    if extra is not None:
        name, row, rhs = extra
        B.append(cols[name])
        C.append(row[:N])
        g.append(-rhs)
    k = len(B)
    B = np.column_stack(B)
    C = np.vstack(C)
    D = np.zeros((k, k))
    if extra is not None:
        D[k - 1, :] = row[N:]
    x, y = solve_bordered(A, B, C, D, -F[:N], np.array(g), method=method)
    return x, y


def newton_solve(p0: WaveProfile, tol: float = NEWTON_TOL, max_iter: int = MAX_ITER,
                 method: str = "auto") -> WaveProfile:
    """Converge ``p0`` to a traveling wave with residual sup-norm at most ``tol``.

    The Jacobian is assembled analytically and solved by block elimination
    on the bordered sparse system.  Raises :class:`ConvergenceError` after
    ``max_iter`` iterations and :class:`SingularError` if a factorisation
    fails.
    """
    p = p0
    res = residual_norm(p)
    it = 0
    while res > tol:
        if it >= max_iter:
            raise ConvergenceError(f"Newton did not reach {tol:g} in {max_iter} iterations "
                                   f"(residual {res:.3e}, beta={p.beta:.6g})")
        dq, (dc, dmu) = newton_step(p, method=method)
        p = p.with_(q=p.q + dq, c=p.c + dc, mu=p.mu + dmu)
        it += 1
        new = residual_norm(p)
        if not np.isfinite(new) or new > 1e8 * max(res, 1.0):
            raise DivergenceError(f"Newton diverged (residual {new:.3e})")
        res = new
    return p
