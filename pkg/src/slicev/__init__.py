"""Verifier toolchain for cake-cutting protocols written in Slice.

Protocols are affinely type-checked for disjointness, compiled path by path
to linear real arithmetic conditions, discharged with an SMT solver, and --
when verification fails -- turned into concrete piecewise-uniform
counterexamples that replay through the interpreter.
"""

from .core import Rational, rat
from .syntax import Program, parse, parse_expr, pretty, pretty_program
from .typecheck import check_wellformed, typecheck
from .interp import check_envy_free, evaluate
from .paths import count_paths, enumerate_paths
from .valuation import (
    PUValuation, Valuation, ValuationSet, construct_agreeing_pu, val_eval,
    val_mark,
)
from .solver import VerifyConfig, verify_program

__all__ = [
    "Program", "PUValuation", "Rational", "Valuation", "ValuationSet",
    "VerifyConfig", "check_envy_free", "check_wellformed",
    "construct_agreeing_pu", "count_paths", "enumerate_paths", "evaluate",
    "parse", "parse_expr", "pretty", "pretty_program", "rat", "typecheck",
    "val_eval", "val_mark", "verify_program",
]

__version__ = "0.1.0"
