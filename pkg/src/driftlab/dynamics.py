"""Time integration of the lattice ODE and party diagnostics.

Windows that are not periodic are treated as finite pieces of the infinite
lattice: values outside are zero, and the window is padded whenever mass
reaches its outer margin, so compactly supported data never feel the edge.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DivergenceError, DomainError, EstimatorError, StiffnessError
from .model import TOL_NEG, BiasModel, LatticeState, lattice_rates, validate_populations

EDGE_TOL = 1e-14
BLOWUP = 1e12
PARTY_HALF_WIDTH = 5


class Method(str, enum.Enum):
    RK4 = "rk4"
    RK45 = "rk45"


class Frame(str, enum.Enum):
    FIXED = "fixed"
    ADAPTIVE_PEAK = "adaptive_peak"


def default_dt(beta: float, m: float) -> float:
    """Explicit step well inside the stability region for rates of size m(2+2beta)."""
    return min(0.01, 0.1 / (max(m, 1e-300) * (2.0 + 2.0 * beta)))


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings.

    ``dt`` is the RK4 step (``None`` picks :func:`default_dt` from the
    initial peak height) and, for RK45, only the initial step hint.
    Snapshots are stored every ``output_dt`` time units; ``None`` stores
    every RK4 step, or 200 evenly spaced times for RK45.
    """

    t_end: float
    dt: float | None = None
    method: Method = Method.RK4
    rtol: float = 1e-9
    atol: float = 1e-13
    frame: Frame = Frame.FIXED
    output_dt: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "frame", Frame(self.frame))
        if not (np.isfinite(self.t_end) and self.t_end >= 0):
            raise DomainError("t_end must be finite and >= 0")
        if self.dt is not None and not self.dt > 0:
            raise DomainError("dt must be positive")
        if not (self.rtol > 0 and self.atol > 0):
            raise DomainError("rtol and atol must be positive")
        if self.method is Method.RK45 and self.rtol < 1e-12:
            raise DomainError("RK45 requires rtol >= 1e-12")
        if self.output_dt is not None and not self.output_dt > 0:
            raise DomainError("output_dt must be positive")


@dataclass(frozen=True)
class SpaceTimeRecord:
    times: np.ndarray
    snapshots: tuple
    peak_positions: np.ndarray
    mass_partition: np.ndarray
    bias: BiasModel | None = None
    stats: dict = field(default_factory=dict)

    def mean_opinions(self) -> np.ndarray:
        return np.array([s.mean_opinion() for s in self.snapshots])

    def masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.snapshots])

    def at_time(self, t: float) -> LatticeState:
        return self.snapshots[int(np.argmin(np.abs(self.times - t)))]


def peak_position(state: LatticeState) -> float:
    """Argmax site refined by a three-point parabola, in fixed-frame units."""
    P = state.values
    k = int(np.argmax(P))
    pos = float(state.indices[k])
    n = P.size
    if state.periodic:
        left, right = P[(k - 1) % n], P[(k + 1) % n]
    elif 0 < k < n - 1:
        left, right = P[k - 1], P[k + 1]
    else:
        return pos
    curv = left - 2.0 * P[k] + right
    if curv >= 0:
        return pos
    return pos + 0.5 * (left - right) / curv


def mass_partition(state: LatticeState) -> tuple[float, float, float]:
    """Split the mass into (party, trailing, leading).

    The party is every site within 5 of the argmax.  Parties drift toward
    lower opinions, so the trailing tail lies at larger indices and the
    leading edge at smaller ones.  The leading part is computed as the
    remainder, so the three numbers always add up to the total.
    """
    P = state.values
    if not np.any(P):
        raise DomainError("mass partition of the empty state")
    k = int(np.argmax(P))
    n = P.size
    if state.periodic:
        idx = (k + np.arange(-PARTY_HALF_WIDTH, PARTY_HALF_WIDTH + 1)) % n
        party = float(P[np.unique(idx)].sum())
        half = (n - min(n, 2 * PARTY_HALF_WIDTH + 1)) // 2
        behind = (k + PARTY_HALF_WIDTH + 1 + np.arange(half)) % n
        trailing = float(P[behind].sum())
    else:
        lo, hi = max(k - PARTY_HALF_WIDTH, 0), min(k + PARTY_HALF_WIDTH + 1, n)
        party = float(P[lo:hi].sum())
        trailing = float(P[hi:].sum())
    total = float(P.sum())
    return party, trailing, total - party - trailing


class _Window:
    """Mutable working copy of a state used inside the integration loop."""

    def __init__(self, state: LatticeState, bias: BiasModel):
        self.P = np.array(state.values, dtype=float)
        self.origin = state.origin_index
        self.shift = float(state.frame_shift)
        self.periodic = state.periodic
        self.margin = bias.reach + 2
        self.extensions = 0
        if not self.periodic:
            self.ensure_margin()

    def ensure_margin(self) -> bool:
        P, k = self.P, self.margin
        grow_left = P.size < 2 * k or np.any(np.abs(P[:k]) > EDGE_TOL)
        grow_right = P.size < 2 * k or np.any(np.abs(P[-k:]) > EDGE_TOL)
        if not (grow_left or grow_right):
            return False
        pad = max(16, P.size // 4)
        left = pad if grow_left else 0
        right = pad if grow_right else 0
        self.P = np.concatenate((np.zeros(left), P, np.zeros(right)))
        self.origin -= left
        self.extensions += 1
        return True

    def pad(self, width: int):
        self.P = np.concatenate((np.zeros(width), self.P, np.zeros(width)))
        self.origin -= width
        self.extensions += 1

    def recenter(self):
        """Relabel so the argmax sits in the middle of the window."""
        k = int(np.argmax(self.P))
        offset = k - self.P.size // 2
        if offset == 0:
            return
        if self.periodic:
            self.P = np.roll(self.P, -offset)
            self.shift += offset
        else:
            # pad on the side the peak is heading to; bookkeeping only
            if offset > 0:
                self.P = np.concatenate((self.P, np.zeros(2 * offset)))
            else:
                self.P = np.concatenate((np.zeros(-2 * offset), self.P))
                self.origin += 2 * offset
            self.origin -= offset
            self.shift += offset

    def state(self) -> LatticeState:
        return LatticeState(self.P.copy(), origin_index=self.origin,
                            frame_shift=self.shift, periodic=self.periodic)


def _rk4_step(P, dt, bias, periodic):
    k1 = lattice_rates(P, bias, periodic)
    k2 = lattice_rates(P + 0.5 * dt * k1, bias, periodic)
    k3 = lattice_rates(P + 0.5 * dt * k2, bias, periodic)
    k4 = lattice_rates(P + dt * k3, bias, periodic)
    return P + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check(P, t):
    if not np.all(np.isfinite(P)) or np.max(np.abs(P)) > BLOWUP:
        raise DivergenceError(f"solution blew up at t={t:.6g}")
    if P.size and P.min() < -TOL_NEG:
        # an explicit step outside its stability region, not bad input
        raise DivergenceError(f"population {P.min():.3e} went negative at t={t:.6g}; "
                              "reduce the step")


def integrate(state: LatticeState, bias: BiasModel, cfg: IntegratorConfig) -> SpaceTimeRecord:
    """Integrate ``state`` to ``cfg.t_end`` and record snapshots and diagnostics."""
    validate_populations(state.values)
    win = _Window(state, bias)
    if cfg.frame is Frame.ADAPTIVE_PEAK:
        win.recenter()
    snaps = [win.state()]
    times = [0.0]
    nsteps_total = 0

    if cfg.method is Method.RK4:
        dt_target = cfg.dt
        if dt_target is None:
            dt_target = default_dt(bias.beta, float(np.max(state.values)) or 1.0)
        nsteps = max(1, int(np.ceil(cfg.t_end / dt_target - 1e-9))) if cfg.t_end > 0 else 0
        dt = cfg.t_end / nsteps if nsteps else 0.0
        stride = 1 if cfg.output_dt is None else max(1, int(round(cfg.output_dt / dt))) if nsteps else 1
        for step in range(1, nsteps + 1):
            win.P = _rk4_step(win.P, dt, bias, win.periodic)
            nsteps_total += 1
            if not win.periodic:
                win.ensure_margin()
            if step % stride == 0 or step == nsteps:
                t = step * dt
                _check(win.P, t)
                if cfg.frame is Frame.ADAPTIVE_PEAK:
                    win.recenter()
                snaps.append(win.state())
                times.append(t)
    else:
        n_out = 200 if cfg.output_dt is None else max(1, int(round(cfg.t_end / cfg.output_dt)))
        t_out = np.linspace(0.0, cfg.t_end, n_out + 1)[1:] if cfg.t_end > 0 else []
        t = 0.0
        for t_next in t_out:
            # restart at every output so the window can grow between segments
            while True:
                sol = solve_ivp(lambda _t, y, p=win.periodic: lattice_rates(y, bias, p),
                                (t, t_next), win.P, method="RK45", rtol=cfg.rtol,
                                atol=cfg.atol, first_step=cfg.dt)
                if sol.status != 0:
                    raise StiffnessError(f"adaptive integrator failed at t={t:.6g}: {sol.message}")
                nsteps_total += sol.t.size - 1
                P_new = sol.y[:, -1]
                if win.periodic or not _touches_edge(P_new, win.margin):
                    break
                win.pad(max(16, win.P.size // 2))
            win.P = P_new
            t = float(t_next)
            _check(win.P, t)
            if not win.periodic:
                win.ensure_margin()
            if cfg.frame is Frame.ADAPTIVE_PEAK:
                win.recenter()
            snaps.append(win.state())
            times.append(t)

    peaks = np.array([peak_position(s) for s in snaps])
    parts = np.array([mass_partition(s) if np.any(s.values) else (0.0, 0.0, 0.0) for s in snaps])
    return SpaceTimeRecord(times=np.array(times), snapshots=tuple(snaps), peak_positions=peaks,
                           mass_partition=parts, bias=bias,
                           stats={"steps": nsteps_total, "extensions": win.extensions})


def _touches_edge(P, k):
    return np.any(np.abs(P[:k]) > EDGE_TOL) or np.any(np.abs(P[-k:]) > EDGE_TOL)


def _level_crossings(t, x):
    """Times at which ``x(t)`` crosses integer levels, by linear interpolation."""
    fl = np.floor(x)
    out_t, out_x = [], []
    for i in np.nonzero(fl[1:] != fl[:-1])[0]:
        lo, hi = sorted((fl[i], fl[i + 1]))
        for level in np.arange(lo + 1, hi + 1):
            frac = (level - x[i]) / (x[i + 1] - x[i])
            out_t.append(t[i] + frac * (t[i + 1] - t[i]))
            out_x.append(level)
    return np.array(out_t), np.array(out_x)


def measure_drift_speed(record: SpaceTimeRecord, window: tuple[float, float] | None = None) -> float:
    """Averaged velocity of the mean opinion over ``window``.

    Within one site traversal the mean opinion moves non-uniformly, so a
    least-squares fit through arbitrary samples is biased by the partial
    cycles at the ends.  The fit is instead taken through the points where
    the mean opinion crosses integer levels, which sample every cycle at
    the same phase.  At least two complete traversals are required.  A
    window in which the mean opinion does not move (to 1e-8) yields 0.
    """
    t = record.times
    t0, t1 = (t[0], t[-1]) if window is None else window
    sel = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
    if sel.sum() < 3:
        raise EstimatorError("fewer than three snapshots in the window")
    ts = t[sel]
    x = record.mean_opinions()[sel]
    span = np.ptp(x)
    if span <= 1e-8:
        return float(np.polyfit(ts, x, 1)[0]) if np.ptp(ts) > 0 else 0.0
    tc, xc = _level_crossings(ts, x)
    if tc.size < 3:
        raise EstimatorError(
            f"window covers {span:.3g} sites; need at least two full site traversals")
    return float(np.polyfit(tc, xc, 1)[0])


def _leading_edge(state: LatticeState, t: float):
    # distances are measured from the sub-site party edge; site-quantised
    # origins jitter by up to one site and spoil the collapse
    edge = peak_position(state) - PARTY_HALF_WIDTH
    n = state.indices
    ahead = n < edge
    if not np.any(ahead):
        return None
    dist = edge - n[ahead]
    order = np.argsort(dist)
    return dist[order] / np.sqrt(t), state.values[ahead][order]


def selfsimilar_collapse(record: SpaceTimeRecord, times, n_grid: int = 200) -> float:
    """Spread of leading-edge profiles after rescaling distance by ``t**-0.5``.

    The leading edge is everything more than five sites ahead of the peak.
    Each profile is normalised to unit maximum and plotted against distance
    from the party edge (parabolic peak minus five) divided by ``sqrt(t)``;
    the result is the largest pairwise sup-norm difference on the common
    abscissa range.
    """
    times = list(times)
    if len(times) < 3:
        raise EstimatorError("need at least three snapshot times")
    curves = []
    for tq in times:
        if tq <= 0:
            raise EstimatorError("snapshot times must be positive")
        state = record.at_time(tq)
        _, _, lead = mass_partition(state)
        edge = _leading_edge(state, tq)
        if lead <= 1e-6 or edge is None or not np.any(edge[1] > 0):
            raise EstimatorError(f"leading-edge mass {lead:.3g} at t={tq:g} is too small")
        x, y = edge
        curves.append((x, y / y.max()))
    xmax = min(x[-1] for x, _ in curves)
    grid = np.linspace(0.0, xmax, n_grid)
    vals = [np.interp(grid, x, y) for x, y in curves]
    return float(max(np.max(np.abs(a - b)) for i, a in enumerate(vals) for b in vals[i + 1:]))
