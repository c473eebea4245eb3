"""Controllable past-time STL cause mining for discrete control systems."""

from .errors import BudgetError, ParseError, PtstlError, ValidationError
from .formula import SystemSignature, canonical_key, classify, op_count
from .monitor import Dataset, Trace, confusion, eval_at, eval_signal, f_beta
from .parser import parse, to_text

__all__ = [
    "BudgetError",
    "Dataset",
    "ParseError",
    "PtstlError",
    "SystemSignature",
    "Trace",
    "ValidationError",
    "canonical_key",
    "classify",
    "confusion",
    "eval_at",
    "eval_signal",
    "f_beta",
    "op_count",
    "parse",
    "to_text",
]
