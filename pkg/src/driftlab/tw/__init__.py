"""Traveling-wave profiles of drifting parties: Newton solver and continuation in beta."""

from .continuation import Branch, BranchPoint, continue_branch, refine, resample
from .diagnostics import aligned_distance, conserved_phi, error_audit, peak_height, phi_variation
from .grid import Grid, NormKind, Normalization, WaveProfile
from .io import load_branch, load_point, save_branch
from .newton import newton_solve, residual_norm
from .seeds import simulation_seed, soliton_seed
from .system import residual

__all__ = [
    "Branch", "BranchPoint", "continue_branch", "refine", "resample",
    "aligned_distance", "conserved_phi", "error_audit", "peak_height", "phi_variation",
    "Grid", "NormKind", "Normalization", "WaveProfile",
    "load_branch", "load_point", "save_branch",
    "newton_solve", "residual_norm", "residual",
    "simulation_seed", "soliton_seed",
]
