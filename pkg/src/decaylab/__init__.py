"""Pseudospectral laboratory for localized decay in dispersive PDEs."""

from decaylab.spectral import Field, Grid, Multiplier, apply_multiplier, dealias, make_multiplier
from decaylab.models import ModelSpec, State, linear_symbol, nonlinear_rhs
from decaylab.stepper import StepPlan, evolve, make_plan, step

__version__ = "0.1.0"

__all__ = [
    "Field",
    "Grid",
    "ModelSpec",
    "Multiplier",
    "State",
    "StepPlan",
    "apply_multiplier",
    "dealias",
    "evolve",
    "linear_symbol",
    "make_multiplier",
    "make_plan",
    "nonlinear_rhs",
    "step",
]
