"""Initial guesses for the traveling-wave Newton solver."""

from __future__ import annotations

import numpy as np

from ..asym import theorem1_profile, soliton_deviation
from ..dynamics import IntegratorConfig, integrate, measure_drift_speed
from ..errors import DomainError
from ..model import BiasKind, BiasModel, one_site_party
from .grid import Grid, Normalization, WaveProfile


def soliton_seed(beta: float, m: float = 1.0, grid: Grid | None = None) -> WaveProfile:
    """Leading-order soliton near ``beta = 2`` with the background held at ``m``.

    Without an explicit grid the width is chosen so the tails drop below
    about 1e-9 of the peak.  The profile is smooth on the scale of a site,
    so 21 points per site already put the discretisation error near 1e-9.
    """
    peak, decay, c = theorem1_profile(beta, m)
    if grid is None:
        L = int(2 * np.ceil(11.0 / decay / 2.0))
        grid = Grid(max(L, 20), 21)
    q = soliton_deviation(grid.xi, beta, m)
    return WaveProfile(grid, q, c, 0.0, beta, m, Normalization.background(m))


def simulation_seed(beta: float, grid: Grid, party_mass: float = 1.0, t_end: float | None = None,
                    output_dt: float = 0.02) -> WaveProfile:
    """Profile sampled from a direct simulation of a drifting party.

    A traveling wave satisfies ``P_n(t) = Q(n + c t)``, so every snapshot
    over one site traversal samples ``Q`` at a different offset; merged,
    they resolve ``Q`` on a grid finer than the lattice.  The far field
    ahead of a simulated party is empty, while the wave carries the same
    small background on both sides; Newton removes the mismatch.
    """
    if not 0 < beta < 2:
        raise DomainError("simulation seeds need 0 < beta < 2")
    bias = BiasModel(BiasKind.SELF_INCITEMENT, beta)
    if t_end is None:
        t_end = max(60.0, 12.0 / max(2.0 * beta / np.pi, 1e-3))
    rec = integrate(one_site_party(mass=1.0), bias, IntegratorConfig(t_end=t_end, output_dt=output_dt))
    c = -measure_drift_speed(rec, (0.5 * t_end, t_end))
    period = 1.0 / c
    sel = rec.times >= t_end - period
    xs, ps = [], []
    for t, s in zip(rec.times[sel], np.array(rec.snapshots, dtype=object)[sel]):
        xs.append(s.indices + c * t)
        ps.append(s.values)
    x = np.concatenate(xs)
    P = np.concatenate(ps)
    order = np.argsort(x)
    x, P = x[order], P[order]
    centre = np.sum(x * P) / np.sum(P)
    Q = np.interp(grid.xi, x - centre, P, left=0.0, right=0.0)
    q = Q * party_mass
    return WaveProfile(grid, q, c * party_mass, 0.0, beta, 0.0, Normalization.party(party_mass))
