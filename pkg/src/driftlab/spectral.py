"""Linear stability of the uniform state and pulled spreading speeds.

A localized perturbation of ``P = m`` grows in the frame ``n = v t`` like
``exp(i sigma n + (lambda(sigma) + i sigma v) t)``.  The envelope velocity
is fixed by a pinched double root of that exponent: ``lambda'(sigma) + i v = 0``
together with zero real growth, ``Re lambda(sigma) = v Im sigma``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidSaddleError
from .model import dispersion, dispersion_derivatives

MARGINAL_TOL = 1e-12
SADDLE_TOL = 1e-10
DEFAULT_SEED = np.pi / 3 + 0.5j


class Stability(str, enum.Enum):
    UNSTABLE = "unstable"
    MARGINAL = "marginal"
    STABLE = "stable"


@dataclass(frozen=True)
class UniformStability:
    status: Stability
    sigma: float
    max_growth: float


@dataclass(frozen=True)
class SaddlePoint:
    """Pinched saddle of the dispersion relation.

    ``sigma`` is stored in lattice coordinates: ``Im sigma > 0`` for the
    rightward edge and ``Im sigma < 0`` for the leftward edge.  ``v`` is the
    envelope speed in ``direction`` (negative when the edge is carried the
    other way).
    """

    sigma: complex
    v: float
    lam: complex
    residual: float
    beta: float
    m: float
    direction: str = "right"
    iterations: int = 0

    @property
    def stable_background(self) -> bool:
        return self.beta >= 2.0


def _re_growth(s, beta, m):
    return float(np.real(dispersion(s, beta, m)))


def classify_uniform(beta: float, m: float = 1.0) -> UniformStability:
    """Classify ``P = m`` by the largest real growth rate over real wavenumbers.

    ``Re lambda`` is even in sigma, so only ``[0, pi]`` is searched: golden
    section on a bracketing sample, then Newton on ``d Re lambda / d sigma``.
    The sigma = 0 mode always has zero growth (mass shift); a vanishing
    maximum is reported as marginal when the tangency at 0 is degenerate
    (zero curvature) and stable when the curvature there is negative.
    """
    if m <= 0:
        from .errors import DomainError
        raise DomainError("background mass must be positive")
    grid = np.linspace(0.0, np.pi, 65)
    vals = np.real(dispersion(grid, beta, m))
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = _re_growth(c, beta, m), _re_growth(d, beta, m)
    while b - a > 1e-6:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _re_growth(c, beta, m)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _re_growth(d, beta, m)
    s = 0.5 * (a + b)
    for _ in range(20):
        d1, d2 = dispersion_derivatives(s, beta, m)
        if d2.real >= 0:
            break
        step = d1.real / d2.real
        s_new = min(max(s - step, 0.0), np.pi)
        if abs(s_new - s) < 1e-15:
            s = s_new
            break
        s = s_new
    if vals[0] >= _re_growth(s, beta, m):
        s = 0.0
    growth = _re_growth(s, beta, m)

    if growth > MARGINAL_TOL:
        status = Stability.UNSTABLE
    else:
        curvature = float(np.real(dispersion_derivatives(0.0, beta, m)[1]))
        if abs(growth) <= MARGINAL_TOL and curvature >= -MARGINAL_TOL * m:
            status = Stability.MARGINAL
        else:
            status = Stability.STABLE
    return UniformStability(status, float(s), growth)


def _saddle_system(x, beta, sign):
    sr, si, v = x
    s = sign * complex(sr, si)
    lam = dispersion(s, beta, 1.0)
    d1, d2 = dispersion_derivatives(s, beta, 1.0)
    d1 = sign * d1
    F = np.array([d1.real, d1.imag + v, lam.real - v * si])
    J = np.array([
        [d2.real, -d2.imag, 0.0],
        [d2.imag, d2.real, 1.0],
        [d1.real, -d1.imag - v, -si],
    ])
    return F, J, lam


def _newton_saddle(x0, beta, sign, maxiter=50):
    x = np.array(x0, dtype=float)
    for it in range(1, maxiter + 1):
        F, J, lam = _saddle_system(x, beta, sign)
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular saddle Jacobian at beta={beta}") from exc
        x = x + dx
        if np.max(np.abs(dx)) < 1e-14 * (1 + np.max(np.abs(x))):
            break
    else:
        F, _, _ = _saddle_system(x, beta, sign)
        if np.max(np.abs(F)) > SADDLE_TOL:
            raise ConvergenceError(f"saddle Newton did not converge in {maxiter} iterations (beta={beta})")
    F, _, lam = _saddle_system(x, beta, sign)
    return x, float(np.max(np.abs(F))), lam, it


def _x0_from_seed(seed, beta, sign):
    # speed guess from the growth condition at the seed
    lam = dispersion(sign * seed, beta, 1.0)
    return np.array([seed.real, seed.imag, lam.real / seed.imag])


def spreading_speed(beta: float, m: float = 1.0, seed: complex | None = None,
                    direction: str = "right") -> SaddlePoint:
    """Linear spreading speed of perturbations of the uniform state ``P = m``.

    Newton iteration on the three real equations of the pinched double root,
    with the analytic derivative of the dispersion relation.  Without an
    explicit ``seed`` the saddle is continued in beta from the symmetric
    case ``beta = 0`` (seed ``pi/3 + 0.5i``).  The computation is done at
    unit mass and scaled, since the growth rates are linear in ``m``.
    ``direction="left"`` solves the mirrored problem ``sigma -> -sigma``.

    For ``beta >= 2`` the uniform state is linearly stable and both saddles
    have merged with the real axis at ``sigma = 0``; the degenerate saddle
    is returned (zero growth, envelope carried at the group velocity) and
    ``stable_background`` is set.
    """
    if direction not in ("right", "left"):
        raise ValueError("direction must be 'right' or 'left'")
    if m <= 0:
        from .errors import DomainError
        raise DomainError("background mass must be positive")
    sign = 1.0 if direction == "right" else -1.0
    if beta >= 2.0 and seed is None:
        v = -2.0 * beta * m * sign
        return SaddlePoint(sigma=0j, v=float(v), lam=0j, residual=0.0, beta=float(beta),
                           m=float(m), direction=direction, iterations=0)
    if seed is not None:
        seed = complex(seed) * sign
        x, res, lam, it = _newton_saddle(_x0_from_seed(seed, beta, sign), beta, sign)
    else:
        x, res, lam, it = _continue_saddle(beta, sign)
    if x[1] <= 0 and beta < 2.0:
        raise InvalidSaddleError(f"saddle has Im sigma = {x[1]:.3e} <= 0")
    if res > SADDLE_TOL:
        raise ConvergenceError(f"saddle residual {res:.2e} above tolerance")
    sigma = sign * complex(x[0], x[1])
    return SaddlePoint(sigma=sigma, v=float(m * x[2]), lam=m * lam, residual=res,
                       beta=float(beta), m=float(m), direction=direction, iterations=it)


def _continue_saddle(beta, sign, max_step=0.05):
    x_prev = None
    x, res, lam, it = _newton_saddle(_x0_from_seed(DEFAULT_SEED, 0.0, sign), 0.0, sign)
    b = 0.0
    total = it
    step_prev = None
    while b < beta:
        # the rightward saddle approaches the real axis as beta -> 2
        step = min(max_step, max(abs(2.0 - b) / 4.0, 1e-3))
        b_new = min(beta, b + step)
        guess = x if x_prev is None else x + (x - x_prev) * (b_new - b) / step_prev
        x_prev, step_prev = x, b_new - b
        x, res, lam, it = _newton_saddle(guess, b_new, sign)
        total += it
        b = b_new
    return x, res, lam, total


def saddle_residual(point: SaddlePoint) -> float:
    """Recompute the pinching residuals of ``point`` in lattice coordinates."""
    lam = dispersion(point.sigma, point.beta, point.m)
    d1, _ = dispersion_derivatives(point.sigma, point.beta, point.m)
    sign = 1.0 if point.direction == "right" else -1.0
    r1 = abs(d1 + 1j * sign * point.v)
    r2 = abs(lam.real - point.v * abs(point.sigma.imag))
    return float(max(r1, r2))
