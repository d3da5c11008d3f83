"""Asymptotic predictions for drifting parties.

Two regimes are covered.  For weak bias a party hops between neighbouring
two-site states, and the averaged speed follows from the period of the
slow drift.  Close to the stability threshold ``beta = 2`` the party is a
wide, shallow soliton whose speed and shape come from a three-dimensional
reduced flow, a conserved quantity and a Melnikov condition.

Rational coefficients are kept as :class:`fractions.Fraction` so the
polynomial identities can be checked exactly.  Throughout,
``beta_t = 2 - beta`` and ``c_t = c - 4m``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as Fr
from math import comb

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, DomainError, EscapeError, QuadratureError

THREE_HALVES_COEFF = 0.467
SECH2_CUTOFF = 60.0


# ---------------------------------------------------------------------------
# weak bias


def small_beta_speed(beta: float, m: float = 1.0, with_correction: bool = False) -> float:
    """Averaged drift speed magnitude of a party of mass ``m`` for small ``beta``.

    The leading term ``2 beta m / pi`` is one site per period of the
    two-site drift ``alpha' = -beta[alpha^2 + (1-alpha)^2]``.  The optional
    ``beta**1.5`` correction is an empirical fit and reduces the speed.
    """
    if beta < 0 or m <= 0:
        raise DomainError("need beta >= 0 and m > 0")
    v = 2.0 * beta * m / np.pi
    if with_correction:
        v -= THREE_HALVES_COEFF * beta ** 1.5 * m
    return v


def two_site_period(beta: float) -> float:
    """Time for the two-site fraction to run from 1 to 0, by quadrature."""
    if beta <= 0:
        raise DomainError("beta must be positive")
    val, err = integrate.quad(lambda a: 1.0 / (beta * (a * a + (1 - a) ** 2)), 0.0, 1.0,
                              epsabs=1e-14, epsrel=1e-13)
    if err > 1e-10 * val:
        raise QuadratureError("two-site period quadrature did not converge")
    return val


@dataclass(frozen=True)
class CornerState:
    x: float
    mu: float
    beta: float


def corner_rhs(state: CornerState, full: bool = False) -> tuple[float, float]:
    """Planar flow near a one-site party.

    ``x`` and ``mu`` are the sum and difference of the masses leaking to the
    two neighbouring sites.  The leading-order flow is
    ``x' = -(x^2 - mu^2)/2 + beta``, ``mu' = beta``; ``full=True`` keeps the
    ``-2 beta x`` terms, which are of higher order when ``x ~ beta**0.5``.
    """
    x, mu, b = state.x, state.mu, state.beta
    forcing = b * (1.0 - 2.0 * x) if full else b
    return -0.5 * (x * x - mu * mu) + forcing, forcing


def corner_passage(beta: float, delta: float, full: bool = False) -> float:
    """Time to pass the corner from ``{x - mu = 2 delta}`` to ``{x + mu = 2 delta}``.

    Starts at ``(x, mu) = (delta, -delta)``.  The leading-order answer is
    ``2 delta / beta``.
    """
    if not (0 < beta <= 0.1 and 0 < delta <= 0.2):
        raise DomainError("corner passage needs 0 < beta <= 0.1 and 0 < delta <= 0.2")
    t_max = 10.0 * 2.0 * delta / beta

    def f(_t, y):
        return corner_rhs(CornerState(y[0], y[1], beta), full)

    def exit_section(_t, y):
        return y[0] + y[1] - 2.0 * delta

    exit_section.terminal = True
    exit_section.direction = 1.0
    sol = integrate.solve_ivp(f, (0.0, t_max), [delta, -delta], method="DOP853", events=exit_section,
                              rtol=1e-12, atol=1e-14)
    if sol.t_events[0].size == 0:
        raise EscapeError(f"no exit-section crossing within t={t_max:g}")
    return float(sol.t_events[0][0])


def richardson(values, ratio: float, order: float) -> float:
    """Repeated Richardson extrapolation of a sequence refined by ``ratio``.

    ``values[k]`` is taken at step ``h / ratio**k`` and the error is assumed
    to expand in powers ``order, 2 order, ...`` of the step.
    """
    table = [float(v) for v in values]
    p = order
    while len(table) > 1:
        f = ratio ** p
        table = [(f * table[i + 1] - table[i]) / (f - 1.0) for i in range(len(table) - 1)]
        p += order
    return table[0]


# ---------------------------------------------------------------------------
# near the threshold beta = 2


def theorem1_profile(beta: float, m: float = 1.0) -> tuple[float, float, float]:
    """Leading-order party near ``beta = 2``.

    Returns ``(peak, decay, c)`` for
    ``Q(xi) = m + peak * sech(decay * xi)**2`` travelling at speed ``c``:
    ``peak = 7 m beta_t / 10``, ``decay = sqrt(7 beta_t / 20)`` and
    ``c = m (4 - 16 beta_t / 15)``.
    """
    bt = 2.0 - beta
    if bt <= 0:
        raise DomainError("the soliton expansion needs beta < 2")
    if m <= 0:
        raise DomainError("background mass must be positive")
    return 0.7 * m * bt, float(np.sqrt(0.35 * bt)), m * (4.0 - 16.0 * bt / 15.0)


def soliton_deviation(xi, beta: float, m: float = 1.0):
    """Deviation ``Q - m`` of the leading-order profile at positions ``xi``."""
    peak, decay, _ = theorem1_profile(beta, m)
    return peak / np.cosh(decay * np.asarray(xi, dtype=float)) ** 2


@dataclass(frozen=True)
class ReducedState3:
    A0: float
    A1: float
    A2: float
    beta_t: float = 0.0
    c_t: float = 0.0
    m: float = 1.0


# coefficients of dA2/deta = -(3/m) * sum(coef * monomial)
REDUCED3_BRACKET = {
    "A0A1": Fr(1),
    "A1A1": Fr(3, 2),
    "A0A2": Fr(3),
    "A1bt": Fr(-1, 2),   # times m
    "A1ct": Fr(-1, 4),
    "A2bt": Fr(-2),      # times m
    "A2ct": Fr(-3, 4),
    "A1A2": Fr(71, 5),
    "A2A2": Fr(457, 10),
}


def reduced3_rhs(s: ReducedState3) -> tuple[float, float, float]:
    """Quadratic truncation of the reduced flow on the centre manifold."""
    if s.m == 0:
        raise DomainError("m must be nonzero")
    A0, A1, A2, bt, ct, m = s.A0, s.A1, s.A2, s.beta_t, s.c_t, s.m
    k = {key: float(v) for key, v in REDUCED3_BRACKET.items()}
    bracket = (k["A0A1"] * A0 * A1 + k["A1A1"] * A1 * A1 + k["A0A2"] * A0 * A2
               + k["A1bt"] * m * A1 * bt + k["A1ct"] * A1 * ct
               + k["A2bt"] * m * A2 * bt + k["A2ct"] * A2 * ct
               + k["A1A2"] * A1 * A2 + k["A2A2"] * A2 * A2)
    return A1, 2.0 * A2, -3.0 / m * bracket


# truncated conserved quantity: constant + linear + quadratic terms
PHI_TERMS = {
    "A2": Fr(4, 3),      # times m
    "A0A0": Fr(2),
    "A0bt": Fr(-2),      # times m
    "A0ct": Fr(-1),
    "A1bt": Fr(-4),      # times m
    "A1ct": Fr(-3, 2),
    "A0A1": Fr(6),
    "A0A2": Fr(284, 15),
    "A1A1": Fr(142, 15),
    "A2bt": Fr(-187, 15),  # times m
    "A2ct": Fr(-22, 5),
    "A1A2": Fr(457, 5),
    "A2A2": Fr(50201, 175),
}


def phi_truncated(s: ReducedState3) -> float:
    """Conserved functional evaluated on the centre manifold, to quadratic order."""
    A0, A1, A2, bt, ct, m = s.A0, s.A1, s.A2, s.beta_t, s.c_t, s.m
    k = {key: float(v) for key, v in PHI_TERMS.items()}
    const = -2.0 * m * m - m * m * bt - m * ct
    return (const + k["A2"] * m * A2 + k["A0A0"] * A0 * A0
            + (k["A0bt"] * m * bt + k["A0ct"] * ct) * A0
            + (k["A1bt"] * m * bt + k["A1ct"] * ct) * A1
            + k["A0A1"] * A0 * A1 + k["A0A2"] * A0 * A2 + k["A1A1"] * A1 * A1
            + (k["A2bt"] * m * bt + k["A2ct"] * ct) * A2
            + k["A1A2"] * A1 * A2 + k["A2A2"] * A2 * A2)


# exact polynomials: lists of Fractions, index = power of xi


def poly_shift(coeffs, a):
    """Coefficients of ``p(xi + a)`` from those of ``p(xi)``."""
    a = Fr(a)
    out = [Fr(0)] * len(coeffs)
    for n, cn in enumerate(coeffs):
        if cn:
            for k in range(n + 1):
                out[k] += cn * comb(n, k) * a ** (n - k)
    return out


def poly_deriv(coeffs):
    return [Fr(n) * coeffs[n] for n in range(1, len(coeffs))] or [Fr(0)]


def poly_add(*polys):
    size = max(len(p) for p in polys)
    out = [Fr(0)] * size
    for p in polys:
        for i, v in enumerate(p):
            out[i] += v
    return out


def poly_scale(p, s):
    return [Fr(s) * v for v in p]


def poly_mul(p, q):
    out = [Fr(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


def poly_trim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def apply_T00_poly(coeffs, m=1):
    """Apply the linearisation at ``beta = 2``, ``c = 4m`` to a polynomial, exactly.

    ``T q = -4m q' - 6m q + m[-q(xi-2) + 2q(xi-1) + 6q(xi+1) - q(xi+2)]``.
    ``coeffs[k]`` multiplies ``xi**k``; entries may be Fractions or ints and
    ``m`` may be a Fraction or a float.
    """
    if len(coeffs) > 7:
        raise DomainError("polynomial degree must be at most 6")
    c = [Fr(v) for v in coeffs]
    shifted = poly_add(
        poly_scale(poly_shift(c, -2), -1), poly_scale(poly_shift(c, -1), 2),
        poly_scale(poly_shift(c, 1), 6), poly_scale(poly_shift(c, 2), -1),
        poly_scale(c, -6),
        poly_scale(poly_add(poly_deriv(c), [Fr(0)] * len(c)), -4),
    )
    out = [v * m for v in shifted]
    return poly_trim(out)


def nonlinearity_poly(q, beta=2):
    """``2q(xi-1)q(xi+1) - q(q(xi-2)+q(xi+2)) + beta(q(xi+1)^2 - q^2)`` for a polynomial ``q``."""
    qm1, qp1, qm2, qp2 = (poly_shift(q, a) for a in (-1, 1, -2, 2))
    return poly_trim(poly_add(
        poly_scale(poly_mul(qm1, qp1), 2),
        poly_scale(poly_mul(q, poly_add(qm2, qp2)), -1),
        poly_scale(poly_add(poly_mul(qp1, qp1), poly_scale(poly_mul(q, q), -1)), beta),
    ))


# ---------------------------------------------------------------------------
# Melnikov condition and the planar homoclinic


def a_star(z):
    return 1.5 / np.cosh(0.5 * np.asarray(z, dtype=float)) ** 2


def a_star_prime(z):
    z = np.asarray(z, dtype=float)
    return -1.5 * np.tanh(0.5 * z) / np.cosh(0.5 * z) ** 2


def _quad(f):
    val, err = integrate.quad(f, -SECH2_CUTOFF, SECH2_CUTOFF, epsabs=1e-13, epsrel=1e-13, limit=200)
    if err > 1e-12:
        raise QuadratureError(f"quadrature error estimate {err:.2e} above 1e-12")
    return val


def melnikov_integrals() -> tuple[float, float]:
    """``(<a*', a*'>, <a*', a* a*'>)`` by adaptive quadrature."""
    i1 = _quad(lambda z: a_star_prime(z) ** 2)
    i2 = _quad(lambda z: a_star(z) * a_star_prime(z) ** 2)
    return i1, i2


def melnikov(c0: float) -> float:
    """Solvability residual ``3(1 + c0/2)<a*', a* a*'> - (2 + 3c0/4)<a*', a*'>``."""
    i1, i2 = melnikov_integrals()
    return 3.0 * (1.0 + 0.5 * c0) * i2 - (2.0 + 0.75 * c0) * i1


def melnikov_root() -> float:
    """Speed correction ``c0`` solving the Melnikov condition (the residual is affine)."""
    r0, r1 = melnikov(0.0), melnikov(1.0)
    return -r0 / (r1 - r0)


def _planar_rhs(beta_t, c0):
    eps = np.sqrt(3.0 * beta_t)
    s = np.sqrt(1.0 + 0.5 * c0)
    k = (2.0 + 0.75 * c0) / s

    def f(_z, y):
        a, p = y
        return [p, a - a * a + eps * (3.0 * s * a - k) * p]

    return f, eps * k


@dataclass(frozen=True)
class HomoclinicOrbit:
    """Planar homoclinic sampled relative to its maximum."""

    beta_t: float
    c0: float
    z_apex: float
    z_span: tuple
    _sol: object = None

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self._sol is None:
            return a_star(z)
        zz = z + self.z_apex
        inside = (zz >= self.z_span[0]) & (zz <= self.z_span[1])
        out = np.zeros_like(zz)
        if np.any(inside):
            out[inside] = self._sol.sol(zz[inside])[0]
        return out


def _shoot(beta_t, c0, amp=1e-8, z_max=80.0):
    """Classify the orbit leaving the origin: +1 overshoot, -1 undershoot."""
    f, damp = _planar_rhs(beta_t, c0)
    lam = 0.5 * (-damp + np.sqrt(damp * damp + 4.0))

    def below_zero(_z, y):
        return y[0]

    below_zero.terminal = True
    below_zero.direction = -1.0

    def turn_back(_z, y):
        return y[1]

    # the first zero of a' is the apex; a second upward one means undershoot
    turn_back.direction = 1.0
    turn_back.terminal = True

    sol = integrate.solve_ivp(f, (0.0, z_max), [amp, lam * amp], method="DOP853", rtol=1e-12,
                              atol=1e-15, events=[below_zero, turn_back], dense_output=True)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    raise ConvergenceError(f"shooting orbit neither returned nor escaped (c0={c0})")


def reduced2_homoclinic(beta_t: float, bracket=(-1.6, -0.6), tol: float = 1e-12):
    """Homoclinic orbit of the planar reduced equation and its speed correction.

    At ``beta_t = 0`` the orbit is ``a* = (3/2) sech^2(z/2)`` and ``c0`` is the
    Melnikov root.  Otherwise ``c0`` is found by bisection between an
    overshooting and an undershooting orbit launched along the unstable
    manifold of the origin.  Returns ``(sampler, c0)`` with the sampler
    centred on the maximum.
    """
    if not 0.0 <= beta_t <= 0.05:
        raise DomainError("planar reduction is used for 0 <= beta_t <= 0.05")
    if beta_t == 0.0:
        c0 = melnikov_root()
        return HomoclinicOrbit(0.0, c0, 0.0, (-np.inf, np.inf)), c0
    lo, hi = bracket
    s_lo, _ = _shoot(beta_t, lo)
    s_hi, _ = _shoot(beta_t, hi)
    if s_lo == s_hi:
        raise ConvergenceError("c0 bracket does not separate overshoot from undershoot")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s_mid, _ = _shoot(beta_t, mid)
        if s_mid == s_lo:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    c0 = 0.5 * (lo + hi)
    _, sol = _shoot(beta_t, c0)
    # apex: first zero of a'
    zs = np.linspace(sol.t[0], sol.t[-1], 20001)
    ap = sol.sol(zs)[1]
    i = int(np.argmax(ap < 0))
    z_apex = float(zs[i])
    return HomoclinicOrbit(beta_t, c0, z_apex, (float(sol.t[0]), float(sol.t[-1])), sol), c0
