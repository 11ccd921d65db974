from .constraints import (
    Abs,
    Problem,
    Sat,
    Unknown,
    Unsat,
    conjuncts,
    expr_key,
    nnf,
    problem_key,
)
from .icp import BackendConfig, Session, check_sat
from .smtlib import emit_smtlib

__all__ = [
    "Abs",
    "BackendConfig",
    "Problem",
    "Sat",
    "Session",
    "Unknown",
    "Unsat",
    "check_sat",
    "conjuncts",
    "emit_smtlib",
    "expr_key",
    "nnf",
    "problem_key",
]
