"""Order reduction of ODEs by Lie point symmetries, with tracking of inherited,
lost and reappearing symmetries."""
from .expr import Ode, X, Y, jet, total_derivative, unknown_function
from .lie import VectorField, classify_2d, commutator, commutator_table, is_symmetry, prolong
from .parse import format_ode, parse_ode, parse_vector_field
from .reduce import detect_point_symmetries, enumerate_paths, reduce_chain, reduce_once

__version__ = "0.1.0"

__all__ = [
    "Ode", "X", "Y", "jet", "total_derivative", "unknown_function",
    "VectorField", "classify_2d", "commutator", "commutator_table", "is_symmetry", "prolong",
    "format_ode", "parse_ode", "parse_vector_field",
    "detect_point_symmetries", "enumerate_paths", "reduce_chain", "reduce_once",
]
