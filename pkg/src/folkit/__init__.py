"""folkit: a first-order logic toolkit for NL-to-FOL translation pipelines.

Parses FOL in ASCII and Unicode notation, computes logical labels with a
built-in resolution prover, bootstraps supervised and preference datasets
from LLM candidate translations by label-match filtering, and scores
translation systems.
"""

__version__ = "0.1.0"

from .syntax import (
    And,
    Constant,
    Equality,
    Exists,
    ForAll,
    Formula,
    FunctionApp,
    Iff,
    Implies,
    Not,
    Or,
    ParseDiagnostic,
    ParseError,
    PredicateApp,
    Term,
    Variable,
    Xor,
    alpha_equal,
    parse_formula,
    render,
)

__all__ = [
    "__version__",
    "And",
    "Constant",
    "Equality",
    "Exists",
    "ForAll",
    "Formula",
    "FunctionApp",
    "Iff",
    "Implies",
    "Not",
    "Or",
    "ParseDiagnostic",
    "ParseError",
    "PredicateApp",
    "Term",
    "Variable",
    "Xor",
    "alpha_equal",
    "parse_formula",
    "render",
]
