"""Wolff potentials, quasilinear sublinear equations and their existence conditions."""

from .conditions import (
    ConditionReport,
    energy_ball_ratio,
    pointwise_kappa,
    radial_existence,
    radial_ratio,
    weaker_ball_condition,
)
from .measures import Measure, MeasureError, MollifiedAtom, RadialSegment, lebesgue, point_mass, zero_measure
from .potentials import PotentialParams, PotentialValue, ParameterError, finiteness_check, riesz, weighted_wolff, wolff
from .radial import (
    ExistenceError,
    make_counterexample,
    make_powerlaw_example,
    radial_envelope,
    radial_solve,
    radial_study,
)
from .solver import Envelope, GridSpec, SolutionField, SolverError, build_envelope, certify, solve

__version__ = "0.1.0"

__all__ = [
    "ConditionReport", "Envelope", "ExistenceError", "GridSpec", "Measure", "MeasureError",
    "MollifiedAtom", "ParameterError", "PotentialParams", "PotentialValue", "RadialSegment",
    "SolutionField", "SolverError", "build_envelope", "certify", "energy_ball_ratio",
    "finiteness_check", "lebesgue", "make_counterexample", "make_powerlaw_example", "point_mass",
    "pointwise_kappa", "radial_envelope", "radial_existence", "radial_ratio", "radial_solve",
    "radial_study", "riesz", "solve", "weaker_ball_condition", "weighted_wolff", "wolff",
    "zero_measure",
]
