"""CPLEX LP file export and a reader for the same subset of the format.

Numbers are written with ``repr`` so that reading a file back gives the
exact same floats.
"""

from __future__ import annotations

import io
import math
import os
import re

import numpy as np

from .errors import IoFailure, LPFormatError
from .model import EQ, LE, Model
from .solver import StandardForm, to_standard_form

MAX_NAME = 255
TERMS_PER_LINE = 8

_BAD_CHARS = re.compile(r"[^A-Za-z0-9_.!\"#$%&()/,;?@`'{}|~]")


def _num(x: float) -> str:
    x = float(x) + 0.0
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _sanitize(name: str) -> str:
    name = name.replace("->", ".")
    name = _BAD_CHARS.sub("_", name)
    if not name or not (name[0].isalpha() or name[0] == "_"):
        name = "r_" + name
    return name


def _unique_names(raw):
    seen = set()
    out = []
    for name in raw:
        base = _sanitize(name)[: MAX_NAME - 8]
        candidate, k = base, 1
        while candidate in seen:
            candidate = f"{base}_{k}"
            k += 1
        seen.add(candidate)
        out.append(candidate)
    return out


def lp_names(model: Model):
    """LP-safe, unique names for the model's columns and rows."""
    return (_unique_names(v.name for v in model.variables),
            _unique_names(r.name for r in model.constraints))


def _expr(pairs, first_var):
    if not pairs:
        return [f"0 {first_var}"]
    parts = []
    for coef, name in pairs:
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {_num(abs(coef))} {name}")
    return parts


def _wrap(head, parts, tail=""):
    lines = []
    for i in range(0, len(parts), TERMS_PER_LINE):
        chunk = " ".join(parts[i:i + TERMS_PER_LINE])
        lines.append((head if i == 0 else "   ") + chunk)
    if tail:
        lines[-1] += " " + tail
    return lines


def format_lp(model: Model) -> str:
    cols, rows = lp_names(model)
    if not cols:
        raise LPFormatError("cannot write a model without variables")
    col_of = {v: cols[i] for i, v in enumerate(model.variables)}
    out = ["\\ energy system model", "Minimize"]
    obj = [(c, col_of[v]) for c, v in model.objective]
    out += _wrap(" obj: ", _expr(obj, cols[0]))
    out.append("Subject To")
    for name, row in zip(rows, model.constraints):
        pairs = [(a, col_of[v]) for a, v in row.terms]
        sense = "=" if row.sense == EQ else "<="
        out += _wrap(f" {name}: ", _expr(pairs, cols[0]), f"{sense} {_num(0.0 - row.constant)}")
    out.append("Bounds")
    for v, name in zip(model.variables, cols):
        out.append(f" {_num(v.lower)} <= {name} <= {_num(v.upper)}")
    binaries = [cols[i] for i, v in enumerate(model.variables) if v.domain.value == "binary"]
    generals = [cols[i] for i, v in enumerate(model.variables) if v.domain.value == "integer"]
    if binaries:
        out.append("Binary")
        out += [f" {n}" for n in binaries]
    if generals:
        out.append("General")
        out += [f" {n}" for n in generals]
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(model: Model, destination=None) -> str:
    """Write the model as CPLEX LP text to ``destination`` (path or text
    stream) and return the text."""
    text = format_lp(model)
    if destination is None:
        return text
    try:
        if hasattr(destination, "write"):
            destination.write(text)
        else:
            with open(os.fspath(destination), "w", encoding="ascii", newline="\n") as fh:
                fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write LP file: {exc}") from exc
    return text


# --------------------------------------------------------------------------
# reader
# --------------------------------------------------------------------------

_SECTIONS = {
    "minimize": "min", "minimum": "min", "min": "min",
    "maximize": "max", "maximum": "max", "max": "max",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binary": "bin", "binaries": "bin", "bin": "bin",
    "general": "gen", "generals": "gen", "gen": "gen",
    "end": "end",
}
_TOKEN = re.compile(
    r"\s*(<=|>=|=<|=>|=|<|>|[+-]|\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|[^\s+\-<>=]+)"
)
_NUMBER = re.compile(r"^(\d+\.?\d*([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?|inf(inity)?)$", re.I)


def _tokens(text):
    return [t for t in _TOKEN.findall(text) if t]


def _is_number(tok):
    return bool(_NUMBER.match(tok))


def _parse_linear(tokens):
    """Terms of ``[+-] [coef] name ...``; returns list of (coef, name)."""
    terms = []
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in ("+", "-"):
            sign = sign * (-1.0 if tok == "-" else 1.0)
        elif _is_number(tok):
            coef = float(tok)
        else:
            terms.append((sign * (1.0 if coef is None else coef), tok))
            sign, coef = 1.0, None
    if coef is not None:
        raise LPFormatError(f"dangling constant in expression: {' '.join(tokens)}")
    return terms


def _statements(lines):
    """Join continuation lines of the objective and constraints."""
    buf = []
    for line in lines:
        buf.append(line)
        if any(s in line for s in ("<=", ">=", "=<", "=>", "=", "<", ">")):
            yield " ".join(buf)
            buf = []
    if buf:
        yield " ".join(buf)


def parse_lp(text: str) -> StandardForm:
    """Read LP text into a :class:`StandardForm`.

    Columns are ordered by their first appearance in the Bounds section,
    then by first appearance anywhere else.
    """
    section = None
    seen = set()
    blocks = {"min": [], "st": [], "bounds": [], "bin": [], "gen": []}
    for raw in io.StringIO(text):
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            seen.add(section)
            if section == "max":
                raise LPFormatError("only Minimize problems are supported")
            if section == "end":
                break
            continue
        if section is None:
            raise LPFormatError(f"text before first section: {line!r}")
        blocks[section].append(line)

    if "min" not in seen:
        raise LPFormatError("missing Minimize section")

    order: dict[str, int] = {}
    seen_elsewhere: dict[str, None] = {}

    def note(name, bounds=False):
        if bounds:
            if name not in order:
                order[name] = len(order)
        else:
            seen_elsewhere.setdefault(name)

    # objective
    obj_text = " ".join(blocks["min"])
    if ":" in obj_text:
        obj_text = obj_text.split(":", 1)[1]
    objective = _parse_linear(_tokens(obj_text))
    for _, name in objective:
        note(name)

    rows = []
    for stmt in _statements(blocks["st"]):
        name = None
        if ":" in stmt:
            name, stmt = stmt.split(":", 1)
            name = name.strip()
        toks = _tokens(stmt)
        for i, tok in enumerate(toks):
            if tok in ("<=", "=<", "<", ">=", "=>", ">", "="):
                break
        else:
            raise LPFormatError(f"constraint without sense: {stmt!r}")
        lhs = _parse_linear(toks[:i])
        rhs_toks = toks[i + 1:]
        rhs_sign = -1.0 if rhs_toks[:1] == ["-"] else 1.0
        rhs_toks = [t for t in rhs_toks if t not in ("+", "-")]
        if len(rhs_toks) != 1 or not _is_number(rhs_toks[0]):
            raise LPFormatError(f"bad right-hand side in {stmt!r}")
        rhs = rhs_sign * float(rhs_toks[0])
        sense = {"<=": LE, "=<": LE, "<": LE, "=": EQ}.get(tok)
        if sense is None:
            lhs = [(-a, v) for a, v in lhs]
            rhs = -rhs
            sense = LE
        for _, v in lhs:
            note(v)
        rows.append((name or f"r{len(rows)}", lhs, sense, rhs))

    bounds = {}
    for line in blocks["bounds"]:
        toks = [t for t in _tokens(line)]
        merged = []
        for t in toks:
            if merged and merged[-1] in ("+", "-") and _is_number(t):
                merged[-1] = merged[-1] + t
            else:
                merged.append(t)
        toks = merged
        if len(toks) == 2 and toks[1].lower() == "free":
            note(toks[0], True)
            bounds[toks[0]] = (-math.inf, math.inf)
            continue
        names = [t for t in toks if not _is_number(t.lstrip("+-")) and t not in ("<=", ">=", "=<", "=>", "<", ">", "=")]
        if len(names) != 1:
            raise LPFormatError(f"bad bound line: {line!r}")
        var = names[0]
        note(var, True)
        lo, hi = bounds.get(var, (0.0, math.inf))
        k = toks.index(var)
        left, right = toks[:k], toks[k + 1:]
        if len(left) == 2:
            op, val = left[1], float(left[0])
            if op in ("<=", "=<", "<"):
                lo = val
            elif op in (">=", "=>", ">"):
                hi = val
            else:
                lo = hi = val
        if len(right) == 2:
            op, val = right[0], float(right[1])
            if op in ("<=", "=<", "<"):
                hi = val
            elif op in (">=", "=>", ">"):
                lo = val
            else:
                lo = hi = val
        bounds[var] = (lo, hi)

    binaries = [t for line in blocks["bin"] for t in line.split()]
    generals = [t for line in blocks["gen"] for t in line.split()]
    for name in binaries + generals:
        note(name)
    for name in seen_elsewhere:
        note(name, True)

    columns = sorted(order, key=order.get)
    n, m = len(columns), len(rows)
    A = np.zeros((m, n))
    b = np.zeros(m)
    senses = []
    for i, (_, lhs, sense, rhs) in enumerate(rows):
        for a, v in lhs:
            A[i, order[v]] += a
        b[i] = rhs
        senses.append(sense)
    c = np.zeros(n)
    for a, v in objective:
        c[order[v]] += a
    lb = np.zeros(n)
    ub = np.full(n, math.inf)
    integer = np.zeros(n, dtype=bool)
    binary = np.zeros(n, dtype=bool)
    for v, (lo, hi) in bounds.items():
        lb[order[v]], ub[order[v]] = lo, hi
    for v in binaries:
        j = order[v]
        integer[j] = binary[j] = True
        if v not in bounds:
            ub[j] = 1.0
    for v in generals:
        integer[order[v]] = True
    return StandardForm(A, c, senses, b, lb, ub, integer, columns, [r[0] for r in rows], binary)


def read_lp(path) -> StandardForm:
    try:
        with open(os.fspath(path), encoding="ascii") as fh:
            return parse_lp(fh.read())
    except OSError as exc:
        raise IoFailure(f"cannot read LP file: {exc}") from exc


def roundtrip_equal(model: Model) -> bool:
    """True if exporting and re-reading reproduces the model's StandardForm."""
    return to_standard_form(model).equals(parse_lp(format_lp(model)))
