"""Discrete traveling-wave equation and its Jacobian.

Inserting ``P_n(t) = Q(n + c t)`` with ``Q = m + q`` into the lattice model
gives, on the periodic grid,

    0 = -c q' + m[2q(xi-1) + 2(beta+1)(q(xi+1) - q) - q(xi-2) - q(xi+2)]
        + 2q(xi-1)q(xi+1) - q(q(xi-2) + q(xi+2)) + beta(q(xi+1)^2 - q^2) + mu q

with ``q'`` from the fourth-order centred stencil.  Every term except the
last telescopes, so summing the rows gives ``mu * sum(q)``: the multiplier
absorbs the redundancy and vanishes at solutions.  Two scalar rows close
the system, a phase condition and the normalisation.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import GridError
from .grid import FAR, Grid, NormKind, WaveProfile

STENCIL = {-2: 1.0 / 12.0, -1: -8.0 / 12.0, 1: 8.0 / 12.0, 2: -1.0 / 12.0}


def _shift(q, k):
    """``out[i] = q[(i + k) mod N]``."""
    return np.roll(q, -k)


def derivative(q: np.ndarray, h: float) -> np.ndarray:
    return sum(w * _shift(q, k) for k, w in STENCIL.items()) / h


def second_difference(q: np.ndarray) -> np.ndarray:
    """Undivided periodic second difference ``q[i+1] - 2q[i] + q[i-1]``."""
    return _shift(q, 1) - 2.0 * q + _shift(q, -1)


def nonlinearity(q: np.ndarray, ell: int, beta: float) -> np.ndarray:
    qp1, qm1, qp2, qm2 = _shift(q, ell), _shift(q, -ell), _shift(q, 2 * ell), _shift(q, -2 * ell)
    return 2.0 * qm1 * qp1 - q * (qm2 + qp2) + beta * (qp1 * qp1 - q * q)


def fde_rows(q, c, mu, beta, m, grid: Grid) -> np.ndarray:
    ell = grid.ell_g
    if ell < 4:
        raise GridError("ell_g must be at least 4")
    qp1, qm1, qp2, qm2 = _shift(q, ell), _shift(q, -ell), _shift(q, 2 * ell), _shift(q, -2 * ell)
    lin = m * (2.0 * qm1 + 2.0 * (beta + 1.0) * (qp1 - q) - qm2 - qp2)
    return -c * derivative(q, grid.h) + lin + nonlinearity(q, ell, beta) + mu * q


def phase_row(grid: Grid) -> np.ndarray:
    return grid.phase_weights() * grid.h


def norm_row(p: WaveProfile) -> tuple[np.ndarray, float]:
    """Coefficient row ``r`` and constant ``b`` of the linear constraint ``r . q = b``."""
    g = p.grid
    kind = p.normalization.kind
    if kind is NormKind.BACKGROUND_MASS:
        r = np.zeros(g.N)
        r[FAR] = 1.0
        return r, 0.0
    r = np.full(g.N, g.h)
    if kind is NormKind.PARTY_MASS:
        r[FAR] -= g.N * g.h
    return r, p.normalization.value


def residual(p: WaveProfile) -> np.ndarray:
    """Residual vector of length ``N + 2`` (field rows, phase, normalisation)."""
    F = fde_rows(p.q, p.c, p.mu, p.beta, p.m, p.grid)
    r, b = norm_row(p)
    return np.concatenate((F, [phase_row(p.grid) @ p.q, r @ p.q - b]))


def dq_matrix(p: WaveProfile) -> sp.csc_matrix:
    """Sparse ``dF/dq`` (N x N); couplings at offsets 0, +-1, +-2, +-ell, +-2 ell mod N."""
    g = p.grid
    N, ell, h = g.N, g.ell_g, g.h
    q, m, b, c = p.q, p.m, p.beta, p.c
    qp1, qm1, qp2, qm2 = _shift(q, ell), _shift(q, -ell), _shift(q, 2 * ell), _shift(q, -2 * ell)
    diag = {
        0: -2.0 * m * (b + 1.0) - (qm2 + qp2) - 2.0 * b * q + p.mu,
        ell: 2.0 * m * (b + 1.0) + 2.0 * qm1 + 2.0 * b * qp1,
        -ell: 2.0 * m + 2.0 * qp1,
        2 * ell: -m - q,
        -2 * ell: -m - q,
    }
    for k, w in STENCIL.items():
        diag[k] = diag.get(k, 0.0) - c * w / h
    rows, cols, vals = [], [], []
    idx = np.arange(N)
    for k, v in diag.items():
        rows.append(idx)
        cols.append((idx + k) % N)
        vals.append(np.broadcast_to(v, (N,)))
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N))
    return A.tocsc()


def parameter_columns(p: WaveProfile) -> dict:
    """Derivatives of the field rows with respect to the scalar unknowns."""
    g = p.grid
    q = p.q
    qp1 = _shift(q, g.ell_g)
    return {
        "c": -derivative(q, g.h),
        "mu": q.copy(),
        "beta": 2.0 * p.m * (qp1 - q) + qp1 * qp1 - q * q,
    }


def full_jacobian_dense(p: WaveProfile) -> np.ndarray:
    """Dense ``(N+2) x (N+2)`` Jacobian in the unknowns ``(q, c, mu)``."""
    N = p.grid.N
    J = np.zeros((N + 2, N + 2))
    J[:N, :N] = dq_matrix(p).toarray()
    cols = parameter_columns(p)
    J[:N, N] = cols["c"]
    J[:N, N + 1] = cols["mu"]
    J[N, :N] = phase_row(p.grid)
    J[N + 1, :N] = norm_row(p)[0]
    return J
