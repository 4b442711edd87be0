"""Stationary plasma sheaths and their nonlinear stability for the nonisentropic Euler-Poisson system."""
from .model import PhysicalParams, Regime, RegimeTag, classify, lambda0
from .stationary import Grid, StationaryProfile, existence_check, solve_sheath
from .poisson import PotentialState, solve_potential
from .evolve import FluidState, PerturbationSpec, SimConfig, run
from .diagnostics import DecayFit, DiagnosticRecord, WeightSpec, fit_decay, weighted_norm

__version__ = "0.1.0"

__all__ = [
    "PhysicalParams", "Regime", "RegimeTag", "classify", "lambda0",
    "Grid", "StationaryProfile", "existence_check", "solve_sheath",
    "PotentialState", "solve_potential",
    "FluidState", "PerturbationSpec", "SimConfig", "run",
    "DecayFit", "DiagnosticRecord", "WeightSpec", "fit_decay", "weighted_norm",
]
