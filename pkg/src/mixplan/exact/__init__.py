"""Provably optimal allocation: exhaustive search and an LP-format
export of the same model for cross-checking with external solvers."""

from .brute import SearchBounds, brute_force_optimal
from .lp import LpDocument, LpRow, LpSolution, export_lp, solve_lp_document

__all__ = [
    "SearchBounds",
    "brute_force_optimal",
    "LpDocument",
    "LpRow",
    "LpSolution",
    "export_lp",
    "solve_lp_document",
]
