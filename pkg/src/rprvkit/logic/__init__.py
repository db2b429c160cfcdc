"""Formula representation: predicate expressions, AST, parser and transforms."""
from .ast import (
    Always,
    And,
    DistInterval,
    Escape,
    Eventually,
    Everywhere,
    FalseF,
    Formula,
    FormulaError,
    Not,
    Or,
    Predicate,
    Reach,
    Somewhere,
    Surround,
    TimeInterval,
    TrueF,
    Until,
    number_predicates,
)
from .expr import Comparison
from .parser import FormulaSyntaxError, parse
from .transform import (
    NegationNotEliminable,
    desugar,
    formula_length,
    is_negation_free,
    to_pnf,
    to_text,
)

__all__ = [
    "Always", "And", "Comparison", "DistInterval", "Escape", "Eventually",
    "Everywhere", "FalseF", "Formula", "FormulaError", "FormulaSyntaxError",
    "NegationNotEliminable", "Not", "Or", "Predicate", "Reach", "Somewhere",
    "Surround", "TimeInterval", "TrueF", "Until", "desugar", "formula_length",
    "is_negation_free", "number_predicates", "parse", "to_pnf", "to_text",
]
