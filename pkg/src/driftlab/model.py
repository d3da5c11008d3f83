"""Lattice vector field of the biased bounded-confidence model.

The state is a population ``P_n >= 0`` on integer opinions ``n``.  The
unbiased part of every variant is

    dP_n/dt = 2 P_{n+1} P_{n-1} - P_n (P_{n+2} + P_{n-2})

and the four bias mechanisms add

    self-incitement   beta (P_{n+1}^2 - P_n^2)
    compromise bias   -beta (P_{n+1} P_{n-1} - P_n P_{n+2})
    neighbour bias    beta (P_{n+1} P_n - P_n P_{n-1})
    linear bias       beta (P_{n+l} - P_n) / l

All terms telescope, so total mass is conserved and mass drifts toward
lower opinions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

TOL_NEG = 1e-12


class BiasKind(str, enum.Enum):
    SELF_INCITEMENT = "self_incitement"
    COMPROMISE = "compromise"
    NEIGHBOR = "neighbor"
    LINEAR = "linear"


@dataclass(frozen=True)
class BiasModel:
    kind: BiasKind = BiasKind.SELF_INCITEMENT
    beta: float = 0.0
    range: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", BiasKind(self.kind))
        if not np.isfinite(self.beta) or self.beta < 0:
            raise DomainError(f"beta must be >= 0, got {self.beta}")
        if int(self.range) != self.range or self.range < 1:
            raise DomainError(f"bias range must be an integer >= 1, got {self.range}")
        object.__setattr__(self, "range", int(self.range))
        if self.kind is BiasKind.COMPROMISE and self.beta > 1:
            raise DomainError("compromise bias requires beta <= 1")

    @property
    def reach(self) -> int:
        """Largest lattice offset touched by the stencil."""
        if self.kind is BiasKind.LINEAR:
            return max(2, self.range)
        return 2


@dataclass(frozen=True)
class LatticeState:
    """Populations ``values[i]`` at lattice index ``origin_index + i + frame_shift``.

    ``frame_shift`` is the accumulated displacement of a comoving frame; the
    fixed-frame index of entry ``i`` is always ``origin_index + i + frame_shift``.
    Periodic windows wrap around instead of being padded with zeros.
    """

    values: np.ndarray
    origin_index: int = 0
    frame_shift: float = 0.0
    periodic: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1:
            raise DomainError("lattice values must be one-dimensional")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "origin_index", int(self.origin_index))
        validate_populations(v)

    @property
    def indices(self) -> np.ndarray:
        """Fixed-frame lattice index of every stored entry."""
        return self.origin_index + np.arange(self.values.size) + self.frame_shift

    @property
    def mass(self) -> float:
        return float(self.values.sum())

    def mean_opinion(self) -> float:
        return float(np.dot(self.indices, self.values) / self.values.sum())

    def replace(self, **changes) -> "LatticeState":
        kw = dict(values=self.values, origin_index=self.origin_index,
                  frame_shift=self.frame_shift, periodic=self.periodic)
        kw.update(changes)
        return LatticeState(**kw)


@dataclass(frozen=True)
class TwoSiteParty:
    """``P_site = mass*alpha``, ``P_{site+1} = mass*(1-alpha)``, zero elsewhere."""

    site: int
    alpha: float
    mass: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError("alpha must lie in [0, 1]")
        if self.mass <= 0:
            raise DomainError("party mass must be positive")

    def to_state(self, pad: int = 4) -> LatticeState:
        values = np.zeros(2 + 2 * pad)
        values[pad] = self.mass * self.alpha
        values[pad + 1] = self.mass * (1.0 - self.alpha)
        return LatticeState(values, origin_index=self.site - pad)


def validate_populations(values: np.ndarray, tol_neg: float = TOL_NEG) -> None:
    if not np.all(np.isfinite(values)):
        raise DomainError("non-finite population value")
    if values.size and values.min() < -tol_neg:
        raise DomainError(f"negative population {values.min():.3e} below -{tol_neg:g}")


def lattice_rates(P: np.ndarray, bias: BiasModel, periodic: bool = False) -> np.ndarray:
    """Raw-array form of :func:`rhs`; no validation, used in integrator loops."""
    k = bias.reach
    n = P.size
    if periodic:
        ext = np.concatenate((P[n - k:], P, P[:k])) if n >= k else np.resize(P, n + 2 * k)
    else:
        ext = np.zeros(n + 2 * k)
        ext[k:k + n] = P

    def s(j):
        return ext[k + j:k + j + n]

    P0, Pp1, Pm1, Pp2, Pm2 = s(0), s(1), s(-1), s(2), s(-2)
    b = bias.beta
    kind = bias.kind
    if kind is BiasKind.COMPROMISE:
        return (2.0 - b) * Pp1 * Pm1 - (1.0 - b) * P0 * Pp2 - P0 * Pm2
    out = 2.0 * Pp1 * Pm1 - P0 * (Pp2 + Pm2)
    if b == 0.0:
        return out
    if kind is BiasKind.SELF_INCITEMENT:
        out += b * (Pp1 * Pp1 - P0 * P0)
    elif kind is BiasKind.NEIGHBOR:
        out += b * (Pp1 * P0 - P0 * Pm1)
    else:
        ell = bias.range
        out += b * (s(ell) - P0) / ell
    return out


def rhs(state: LatticeState, bias: BiasModel) -> np.ndarray:
    """Rates ``dP_n/dt`` aligned with ``state.values``.

    Sites outside a non-periodic window count as empty.  Mass is conserved
    exactly only if the outermost ``bias.reach`` sites of the window are
    empty; the integrator keeps such a margin.
    """
    validate_populations(state.values)
    return lattice_rates(state.values, bias, state.periodic)


def moment_rates(state: LatticeState, bias: BiasModel) -> tuple[float, float]:
    """Closed-form ``(d mass/dt, d first moment/dt)`` for a compactly supported state.

    The unbiased compromise term preserves both moments; each bias term
    telescopes to a single sum.
    """
    P = state.values
    b = bias.beta
    if b == 0.0:
        return 0.0, 0.0
    kind = bias.kind
    if kind is BiasKind.SELF_INCITEMENT:
        d1 = -b * float(np.dot(P, P))
    elif kind is BiasKind.COMPROMISE:
        d1 = -b * float(np.dot(P[:-2], P[2:]))
    elif kind is BiasKind.NEIGHBOR:
        d1 = -b * float(np.dot(P[:-1], P[1:]))
    else:
        d1 = -b * float(P.sum())
    return 0.0, d1


def dispersion(sigma, beta: float, m: float):
    """Growth rate of ``exp(i sigma n)`` perturbations of the uniform state ``P = m``.

    Linearising the self-incitement model about ``m`` gives
    ``m(-2 cos 2s + (4+2b) cos s - (2+2b) + 2 i b sin s)``; ``sigma`` may be
    complex.
    """
    s = np.asarray(sigma, dtype=complex)
    lam = m * (-2.0 * np.cos(2 * s) + (4.0 + 2.0 * beta) * np.cos(s)
               - (2.0 + 2.0 * beta) + 2j * beta * np.sin(s))
    return lam if lam.ndim else complex(lam)


def dispersion_derivatives(sigma, beta: float, m: float):
    """First and second sigma-derivatives of :func:`dispersion`."""
    s = np.asarray(sigma, dtype=complex)
    d1 = m * (4.0 * np.sin(2 * s) - (4.0 + 2.0 * beta) * np.sin(s) + 2j * beta * np.cos(s))
    d2 = m * (8.0 * np.cos(2 * s) - (4.0 + 2.0 * beta) * np.cos(s) - 2j * beta * np.sin(s))
    if d1.ndim:
        return d1, d2
    return complex(d1), complex(d2)


def one_site_party(site: int = 0, mass: float = 1.0, pad: int = 4) -> LatticeState:
    values = np.zeros(1 + 2 * pad)
    values[pad] = mass
    return LatticeState(values, origin_index=site - pad)


def uniform_state(m: float, size: int, periodic: bool = True) -> LatticeState:
    return LatticeState(np.full(size, float(m)), periodic=periodic)
