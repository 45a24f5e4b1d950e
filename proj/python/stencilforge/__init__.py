"""Cellular-automaton update rules derived symbolically from discretized PDEs."""

import json

from . import _core
from ._core import (
    DivergenceError,
    Error,
    ParseError,
    Problem,
    ValidationError,
    beam,
    check,
    derive_listing,
    error_report,
    load_problem,
    parse_problem,
    poisson1d,
    poisson3d,
    solve,
)


def derive(problem):
    """Rule table of `problem` as a dict (same layout as rules.json)."""
    return json.loads(_core.derive_json(problem))


__all__ = [
    "DivergenceError",
    "Error",
    "ParseError",
    "Problem",
    "ValidationError",
    "beam",
    "check",
    "derive",
    "derive_listing",
    "error_report",
    "load_problem",
    "parse_problem",
    "poisson1d",
    "poisson3d",
    "solve",
]
