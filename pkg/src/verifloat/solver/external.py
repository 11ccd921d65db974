"""Driving an external SMT solver process over SMT-LIB 2 files.

The external solver's sat models are re-verified with exact rational
arithmetic before being trusted; a model that does not check out degrades
the answer to Unknown rather than risking a wrong Sat.
"""

from __future__ import annotations

import os
import re
import subprocess
import tempfile

from ..rationals import from_decimal, rat
from .constraints import Problem, Sat, Unknown, Unsat
from .smtlib import emit_smtlib


class BackendUnavailable(Exception):
    """The configured external solver cannot be run."""


_DEFINE_RE = re.compile(r"\(\s*define-fun\s+([A-Za-z_][\w.!$@-]*)\s*\(\s*\)\s*Real\b")


def _parse_value(text: str, pos: int):
    """Parse one SMT numeric value starting at pos; return (Rat, end) or None."""
    n = len(text)
    while pos < n and text[pos].isspace():
        pos += 1
    if pos >= n:
        return None
    if text[pos] == "(":
        pos += 1
        while pos < n and text[pos].isspace():
            pos += 1
        if text[pos] == "-":
            inner = _parse_value(text, pos + 1)
            if inner is None:
                return None
            val, pos = inner
            val = -val
        elif text[pos] == "/":
            a = _parse_value(text, pos + 1)
            if a is None:
                return None
            p, pos = a
            b = _parse_value(text, pos)
            if b is None:
                return None
            q, pos = b
            if q == 0:
                return None
            val = p / q
        else:
            return None
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n or text[pos] != ")":
            return None
        return val, pos + 1
    m = re.match(r"[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?", text[pos:])
    if not m:
        return None
    try:
        return from_decimal(m.group(0)), pos + m.end()
    except (ValueError, ZeroDivisionError):
        return None


def parse_model(output: str) -> dict:
    """Extract variable assignments from solver output (define-fun style)."""
    model = {}
    for m in _DEFINE_RE.finditer(output):
        parsed = _parse_value(output, m.end())
        if parsed is not None:
            model[m.group(1)] = parsed[0]
    return model


def check_external(problem: Problem, cfg):
    cmd = tuple(cfg.external_cmd or ())
    if not cmd:
        raise BackendUnavailable("no external solver configured")
    script = emit_smtlib(problem)
    fd, path = tempfile.mkstemp(suffix=".smt2", prefix="verifloat_")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(script)
        try:
            proc = subprocess.run(
                cmd + (path,), capture_output=True, text=True,
                timeout=max(2.0, cfg.timeout * 4))
        except (FileNotFoundError, PermissionError, NotADirectoryError) as exc:
            raise BackendUnavailable(str(exc))
        except subprocess.TimeoutExpired:
            return Unknown("timeout")
    finally:
        try:
            os.unlink(path)
        except OSError:
            pass

    out = (proc.stdout or "").strip()
    verdict = out.split("\n", 1)[0].strip() if out else ""
    if verdict == "unsat":
        return Unsat()
    if verdict == "sat":
        model = parse_model(out)
        declared = [v for v, _ in problem.bounds]
        point = {v: model[v] for v in declared if v in model}
        if len(point) == len(declared):
            from .icp import verify_model

            if verify_model(problem.assertions, problem.bound_map(), point):
                return Sat(tuple(sorted((v, rat(point[v])) for v in point)))
        return Unknown("external model did not verify")
    return Unknown("external solver answered %r" % (verdict or "nothing"))
