"""Exact parameter synthesis and noninterference checking for parametric timed automata."""

from ptasynth.constraints import (
    Atom,
    ConstraintSet,
    Context,
    ConvexPolyhedron,
    Rel,
    as_fraction,
    parse_atoms,
    parse_valuation,
    set_equal,
)

__all__ = [
    "Atom",
    "ConstraintSet",
    "Context",
    "ConvexPolyhedron",
    "Rel",
    "as_fraction",
    "parse_atoms",
    "parse_valuation",
    "set_equal",
]

__version__ = "0.1.0"
