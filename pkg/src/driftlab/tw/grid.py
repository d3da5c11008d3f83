"""Periodic grids and traveling-wave profiles."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from ..errors import DomainError, GridError


@dataclass(frozen=True)
class Grid:
    """Periodic grid of width ``L`` with ``ell_g`` points per lattice site.

    Nodes sit at ``xi_i = -L/2 + i h``, ``h = 1/ell_g``, so shifts by one or
    two sites are the index offsets ``ell_g`` and ``2 ell_g``.

    ``ell_g`` must be odd.  For even ``ell_g`` the alternating mode
    ``(-1)**i`` is invisible to both the site shifts and the centred
    derivative stencil, and the discrete problem has a spurious kernel.
    With odd ``ell_g`` the width ``L`` must be even so that ``N`` is even.
    """

    L: int
    ell_g: int

    def __post_init__(self):
        if int(self.ell_g) != self.ell_g or self.ell_g < 4:
            raise GridError(f"need an integer ell_g >= 4, got {self.ell_g}")
        if self.ell_g % 2 == 0:
            raise GridError(f"ell_g must be odd, got {self.ell_g}")
        if int(self.L) != self.L or self.L < 5:
            raise GridError(f"need an integer width L >= 5, got {self.L}")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "ell_g", int(self.ell_g))
        if self.N % 2:
            raise GridError(f"N = L*ell_g = {self.N} must be even")

    @property
    def N(self) -> int:
        return self.L * self.ell_g

    @property
    def h(self) -> float:
        return 1.0 / self.ell_g

    @property
    def xi(self) -> np.ndarray:
        return -0.5 * self.L + self.h * np.arange(self.N)

    def refined(self) -> "Grid":
        """Roughly halve ``h`` while keeping ``ell_g`` odd."""
        return Grid(self.L, 2 * self.ell_g + 1)

    def widened(self) -> "Grid":
        return Grid(2 * self.L, self.ell_g)

    def phase_weights(self) -> np.ndarray:
        """Centred coordinate with the seam node zeroed, so the weights sum to zero."""
        w = self.xi.copy()
        w[0] = 0.0
        return w


class NormKind(str, enum.Enum):
    TOTAL_MASS = "total_mass"
    PARTY_MASS = "party_mass"
    BACKGROUND_MASS = "background_mass"


@dataclass(frozen=True)
class Normalization:
    """Which scalar pins the amplitude of the profile.

    * ``TOTAL_MASS``: ``sum(q) h = value`` with the reference level ``m``
      held fixed.
    * ``PARTY_MASS``: ``sum(q - q_far) h = value``, the mass above the
      far-field background ``m + q_far``.
    * ``BACKGROUND_MASS``: the far-field deviation vanishes, so the
      background equals ``m``; ``value`` is that background.
    """

    kind: NormKind
    value: float

    def __post_init__(self):
        object.__setattr__(self, "kind", NormKind(self.kind))
        if not np.isfinite(self.value):
            raise DomainError("normalization value must be finite")
        if self.kind is NormKind.BACKGROUND_MASS and self.value <= 0:
            raise DomainError("background mass must be positive")

    @classmethod
    def total(cls, M):
        return cls(NormKind.TOTAL_MASS, M)

    @classmethod
    def party(cls, M):
        return cls(NormKind.PARTY_MASS, M)

    @classmethod
    def background(cls, m):
        return cls(NormKind.BACKGROUND_MASS, m)


FAR = 0  # index of the node farthest from the centre (xi = -L/2)


@dataclass(frozen=True)
class WaveProfile:
    """Traveling-wave unknowns ``Q = m + q`` with speed ``c`` and multiplier ``mu``.

    ``P_n(t) = Q(n + c t)``; positive ``c`` means the party moves toward
    lower opinions.
    """

    grid: Grid
    q: np.ndarray
    c: float
    mu: float
    beta: float
    m: float
    normalization: Normalization

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.shape != (self.grid.N,):
            raise GridError(f"q has shape {q.shape}, grid expects ({self.grid.N},)")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        for name in ("c", "mu", "beta", "m"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def Q(self) -> np.ndarray:
        return self.m + self.q

    @property
    def background(self) -> float:
        """Far-field population ``m_inf``."""
        return self.m + float(self.q[FAR])

    @property
    def party_mass(self) -> float:
        return float(np.sum(self.q - self.q[FAR]) * self.grid.h)

    @property
    def peak(self) -> float:
        """Largest deviation above the far-field background."""
        return float(np.max(self.q - self.q[FAR]))

    def with_(self, **changes) -> "WaveProfile":
        return replace(self, **changes)

    def rereferenced(self) -> "WaveProfile":
        """Same ``Q`` with ``m`` moved to the far-field value."""
        return replace(self, m=self.background, q=self.q - self.q[FAR])

    def scaled(self, k: float) -> "WaveProfile":
        """The traveling-wave family is invariant under ``Q -> kQ, c -> kc``."""
        norm = self.normalization
        return replace(self, q=k * self.q, c=k * self.c, mu=k * self.mu, m=k * self.m,
                       normalization=Normalization(norm.kind, k * norm.value))

    def centroid(self) -> float:
        d = self.q - self.q[FAR]
        tot = d.sum()
        if tot == 0:
            return 0.0
        return float(np.dot(self.grid.xi, d) / tot)
