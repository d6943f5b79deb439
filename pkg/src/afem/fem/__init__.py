"""Lagrange finite elements on triangulations."""
from .assembly import (AssemblyError, CoefficientField, apply_dirichlet,
                       assemble_load, assemble_mass, assemble_operator,
                       element_matrices, energy_error, l2_norm,
                       quadrature_points, transfer)
from .quadrature import EDGE_RULE, TRIANGLE_RULE, QuadratureRule, edge_rule, triangle_rule
from .space import FeFunction, FeSpace, build_space

__all__ = [
    "AssemblyError", "CoefficientField", "FeFunction", "FeSpace",
    "QuadratureRule", "EDGE_RULE", "TRIANGLE_RULE", "apply_dirichlet",
    "assemble_load", "assemble_mass", "assemble_operator", "build_space",
    "edge_rule", "element_matrices", "energy_error", "l2_norm",
    "quadrature_points", "transfer", "triangle_rule",
]
