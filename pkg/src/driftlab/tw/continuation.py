"""Pseudo-arclength secant continuation of traveling waves in beta."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import BranchEndError, ConvergenceError, DomainError, SingularError
from .grid import FAR, Grid, NormKind, Normalization, WaveProfile
from .newton import NEWTON_TOL, newton_solve, newton_step, residual_norm
from .system import second_difference

MAX_DBETA = 0.05
MIN_STEP = 1e-7
CURVATURE_LIMIT = 0.03
TAIL_FRACTION = 0.01
TAIL_DISTANCE = 0.2


@dataclass(frozen=True)
class BranchPoint:
    beta: float
    profile: WaveProfile
    c: float
    m_infinity: float


@dataclass
class Branch:
    """Converged profiles in continuation order; ``direction`` is the sign of the beta steps."""

    points: list = field(default_factory=list)
    direction: int = 1
    history: list = field(default_factory=list)

    def append(self, p: WaveProfile):
        self.points.append(BranchPoint(p.beta, p, p.c, p.background))

    @property
    def betas(self) -> np.ndarray:
        return np.array([pt.beta for pt in self.points])

    @property
    def speeds(self) -> np.ndarray:
        return np.array([pt.c for pt in self.points])

    def unit_party_mass(self) -> list:
        """``(beta, c, m_inf)`` rescaled so every profile carries party mass 1."""
        out = []
        for pt in self.points:
            M = pt.profile.party_mass
            out.append((pt.beta, pt.c / M, pt.m_infinity / M))
        return out

    def at(self, beta: float, tol: float = 1e-9) -> WaveProfile:
        for pt in self.points:
            if abs(pt.beta - beta) <= tol:
                return pt.profile
        raise KeyError(f"no branch point at beta={beta}")

    def merged(self, other: "Branch") -> "Branch":
        """Concatenate two branches sharing their first point into one ordered by beta."""
        pts = sorted({round(pt.beta, 12): pt for pt in self.points + other.points}.values(),
                     key=lambda pt: pt.beta)
        return Branch(list(pts), 1, self.history + other.history)


# ---------------------------------------------------------------------------
# regridding


def resample(p: WaveProfile, grid: Grid) -> WaveProfile:
    """Transfer ``p`` to ``grid``; new far-field nodes take the background value."""
    old = p.grid
    q_far = float(p.q[FAR])
    if grid.L == old.L:
        x = np.append(old.xi, 0.5 * old.L)
        y = np.append(p.q, p.q[0])
        q = CubicSpline(x, y, bc_type="periodic")(grid.xi)
    else:
        x = np.append(old.xi, 0.5 * old.L)
        y = np.append(p.q, p.q[0])
        spline = CubicSpline(x, y, bc_type="periodic")
        xi = grid.xi
        inside = (xi >= -0.5 * old.L) & (xi < 0.5 * old.L)
        q = np.full(grid.N, q_far)
        q[inside] = spline(xi[inside])
    return p.with_(grid=grid, q=q)


def curvature_indicator(p: WaveProfile) -> float:
    """Largest undivided second difference of ``q`` per unit party mass."""
    M = abs(p.party_mass)
    if M == 0:
        return 0.0
    return float(np.max(np.abs(second_difference(p.q))) / M)


def tail_indicator(p: WaveProfile) -> float:
    """Deviation from the background at distance ``0.2 L`` from the centroid, relative to the peak."""
    peak = p.peak
    if peak <= 0:
        return 0.0
    g = p.grid
    d = p.q - p.q[FAR]
    xc = p.centroid()
    x = np.append(g.xi, 0.5 * g.L)
    y = np.append(d, d[0])
    vals = []
    for s in (-1.0, 1.0):
        t = xc + s * TAIL_DISTANCE * g.L
        t = (t + 0.5 * g.L) % g.L - 0.5 * g.L
        vals.append(abs(np.interp(t, x, y)))
    return max(vals) / peak


def refine(p: WaveProfile, tol: float = NEWTON_TOL, max_rounds: int = 4):
    """Apply the resolution and width rules until neither triggers.

    Returns the reconverged profile and a list of event records.
    """
    events = []
    for _ in range(max_rounds):
        if curvature_indicator(p) > CURVATURE_LIMIT:
            grid = p.grid.refined()
            events.append({"beta": p.beta, "rule": "resolution", "L": grid.L, "ell_g": grid.ell_g})
        elif tail_indicator(p) > TAIL_FRACTION:
            grid = Grid(2 * p.grid.L, p.grid.ell_g)
            events.append({"beta": p.beta, "rule": "width", "L": grid.L, "ell_g": grid.ell_g})
        else:
            return p, events
        p = newton_solve(resample(p, grid), tol=tol)
    return p, events


# ---------------------------------------------------------------------------
# continuation


def _norm_setup(p: WaveProfile):
    q_scale = max(float(np.max(np.abs(p.q - p.q[FAR]))), 1e-300)
    c_scale = max(abs(p.c), 1e-3 * q_scale, 1e-300)
    return q_scale, c_scale


def _vec(p: WaveProfile, m_ref: float):
    # express q against a common reference level so secants compare Q
    return np.concatenate((p.q + (p.m - m_ref), [p.c, p.mu, p.beta]))


def _weights(N, q_scale, c_scale):
    w = np.empty(N + 3)
    w[:N] = 1.0 / (N * q_scale ** 2)
    w[N] = 1.0 / c_scale ** 2
    w[N + 1] = 0.0
    w[N + 2] = 1.0
    return w


def _corrector(pred: WaveProfile, tangent_w: np.ndarray, x_pred: np.ndarray, tol: float,
               max_iter: int = 12):
    """Newton on the field equations plus ``tangent_w . (x - x_pred) = 0``."""
    p = pred
    for it in range(1, max_iter + 1):
        x = _vec(p, p.m)
        arc = float(tangent_w @ (x - x_pred))
        dq, y = newton_step(p, extra=("beta", tangent_w, arc))
        dc, dmu, db = y
        p = p.with_(q=p.q + dq, c=p.c + dc, mu=p.mu + dmu, beta=p.beta + db)
        res = residual_norm(p)
        x = _vec(p, p.m)
        arc = abs(float(tangent_w @ (x - x_pred)))
        if not np.isfinite(res):
            break
        if res <= tol and arc <= 1e-10:
            return p, it
    raise ConvergenceError(f"corrector failed near beta={p.beta:.6g}")


def _after_step(p: WaveProfile, background_from: float | None) -> WaveProfile:
    if p.normalization.kind is NormKind.PARTY_MASS:
        p = p.rereferenced()
    if (background_from is not None and p.normalization.kind is not NormKind.BACKGROUND_MASS
            and p.beta >= background_from):
        p = p.rereferenced()
        p = p.with_(normalization=Normalization.background(p.m))
    return p


def continue_branch(start: WaveProfile, beta_target: float, dbeta0: float = 0.01,
                    max_dbeta: float = MAX_DBETA, tol: float = NEWTON_TOL,
                    background_from: float | None = None, refine_grid: bool = True,
                    progress=None) -> Branch:
    """Follow the traveling wave from ``start`` to ``beta_target``.

    Secant predictor and pseudo-arclength corrector in ``(q, c, mu, beta)``;
    the arclength uses ``q`` relative to its peak and ``c`` relative to its
    size so that neither dominates.  Steps halve on corrector failure and
    grow by 1.3 after three easy steps, with ``|d beta| <= max_dbeta``.
    Between steps the grid is refined (resolution and width rules).  Under
    party-mass normalisation the reference level ``m`` follows the far
    field.  ``background_from`` switches to a fixed background once beta
    passes that value.  A step underflow raises :class:`BranchEndError`
    carrying the partial branch.
    """
    if not 0.0 < beta_target < 2.0:
        raise DomainError("continuation target must lie in (0, 2)")
    if residual_norm(start) > 10 * tol:
        raise DomainError("start profile is not converged")
    direction = 1 if beta_target > start.beta else -1
    branch = Branch(direction=direction)
    p = _after_step(start, background_from)
    if refine_grid:
        p, ev = refine(p, tol)
        branch.history.extend(ev)
    branch.append(p)
    if beta_target == start.beta:
        return branch

    prev = None
    easy = 0
    step = None
    while direction * (beta_target - p.beta) > 1e-12:
        if prev is None:
            # natural-parameter step from a single point (start, or after a
            # change of normalisation, where the old secant is meaningless)
            db = direction * min(abs(dbeta0), max_dbeta, abs(beta_target - p.beta))
            while True:
                try:
                    new = newton_solve(p.with_(beta=p.beta + db), tol=tol)
                    break
                except (ConvergenceError, SingularError):
                    db *= 0.5
                    if abs(db) < MIN_STEP:
                        raise BranchEndError(f"branch ended at beta={p.beta:.8g}", branch)
            its = 0
            step = None
        else:
            if prev.grid != p.grid:
                prev = resample(prev, p.grid)
            N = p.grid.N
            q_scale, c_scale = _norm_setup(p)
            w = _weights(N, q_scale, c_scale)
            x1 = _vec(p, p.m)
            dx = x1 - _vec(prev, p.m)
            length = float(np.sqrt(np.sum(w * dx * dx)))
            tau = dx / length
            if tau[-1] * direction <= 0:
                raise BranchEndError(f"branch turned back at beta={p.beta:.8g}", branch)
            if step is None:
                step = length
            step = min(step, max_dbeta / abs(tau[-1]))
            remaining = abs(beta_target - p.beta)
            try:
                if step * abs(tau[-1]) >= remaining:
                    guess = x1 + (remaining / abs(tau[-1])) * tau
                    pred = p.with_(q=guess[:N], c=guess[N], mu=guess[N + 1], beta=beta_target)
                    new = newton_solve(pred, tol=tol)
                    its = 1
                else:
                    x_pred = x1 + step * tau
                    pred = p.with_(q=x_pred[:N], c=x_pred[N], mu=x_pred[N + 1], beta=x_pred[N + 2])
                    new, its = _corrector(pred, w * tau, x_pred, tol)
            except (ConvergenceError, SingularError):
                step *= 0.5
                easy = 0
                if step * abs(tau[-1]) < MIN_STEP:
                    raise BranchEndError(f"step underflow at beta={p.beta:.8g}", branch)
                continue
            if direction * (new.beta - p.beta) <= 0:
                step *= 0.5
                continue
        kind = new.normalization.kind
        new = _after_step(new, background_from)
        switched = new.normalization.kind is not kind
        if refine_grid:
            new, ev = refine(new, tol)
            branch.history.extend(ev)
        prev, p = (None if switched else p), new
        if switched:
            branch.history.append({"beta": p.beta, "rule": "normalization", "kind": kind.value,
                                   "to": p.normalization.kind.value, "m": p.m})
        branch.append(p)
        if progress is not None:
            progress(p)
        easy = easy + 1 if its <= 4 else 0
        if easy >= 3 and step is not None:
            step *= 1.3
            easy = 0
    return branch
