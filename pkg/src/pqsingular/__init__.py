"""Solver and verification harness for -Delta_p u - Delta_q u = f(x) u^-delta, f = c_f d^-beta."""

from .domain_mesh import Domain, Mesh, build_mesh
from .energy_solver import DiscreteField, SolverFailure, SolverSettings
from .weights import ProblemSpec

__all__ = ["Domain", "Mesh", "build_mesh", "DiscreteField", "SolverFailure", "SolverSettings", "ProblemSpec"]
