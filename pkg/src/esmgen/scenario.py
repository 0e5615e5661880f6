"""Scenario files.

A scenario is a small sectioned text file::

    # hourly toy system
    [horizon]
    steps = 3
    tau = 1

    [nodes]
    el: bus
    wind: source
    demand: sink
    gas_plant: transformer factor.el=0.4

    [flows]
    wind -> el: nominal_value=5 max=profiles.csv#wind
    el -> demand: nominal_value=1 fix=profiles.csv#demand

Values are numbers, ``true``/``false``, comma separated lists (``1,2,3``)
or ``file.csv#column`` references, resolved relative to the scenario file.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import GraphError, ParseError, ValidationFailed
from .graph import (
    Bus,
    EnergySystem,
    Flow,
    Horizon,
    InvestmentSpec,
    NonconvexSpec,
    Sink,
    Source,
    Storage,
    StorageSpec,
    Transformer,
    TransformerSpec,
)

_LABEL = re.compile(r"^[A-Za-z0-9_.\-]+$")
_SECTION = re.compile(r"^\[(\w+)\]$")
NODE_KINDS = ("bus", "source", "sink", "transformer", "storage")

_FLOW_KEYS = {
    "nominal_value": "nominal_value",
    "min": "min_profile",
    "min_profile": "min_profile",
    "max": "max_profile",
    "max_profile": "max_profile",
    "fix": "fix_profile",
    "fix_profile": "fix_profile",
    "variable_cost": "variable_cost_profile",
    "variable_cost_profile": "variable_cost_profile",
    "summed_max": "summed_max",
    "summed_min": "summed_min",
}
_STORAGE_KEYS = {
    "capacity": "capacity",
    "loss_rate": "loss_rate",
    "inflow_efficiency": "inflow_efficiency",
    "outflow_efficiency": "outflow_efficiency",
    "initial_level": "initial_level_fraction",
    "initial_level_fraction": "initial_level_fraction",
    "balanced": "balanced",
    "storage_cost": "storage_cost",
}


@dataclass
class Declaration:
    line: int
    head: tuple
    params: dict


@dataclass
class Scenario:
    path: Path
    horizon: Horizon
    nodes: list = field(default_factory=list)
    flows: list = field(default_factory=list)

    def location(self, line) -> str:
        return f"{self.path}:{line}"

    def to_system(self, freeze: bool = True) -> EnergySystem:
        es = EnergySystem(self.horizon)
        locations = {"<system>": str(self.path)}
        for decl in self.nodes:
            label, kind = decl.head
            try:
                es.add_node(_make_node(label, kind, decl.params))
            except (GraphError, ValueError) as exc:
                raise ParseError(f"{type(exc).__name__}: {exc}", self.path, decl.line) from exc
            locations[label] = self.location(decl.line)
        for decl in self.flows:
            source, target = decl.head
            try:
                flow = _make_flow(source, target, decl.params)
                es.connect(flow)
            except (GraphError, ValueError) as exc:
                raise ParseError(f"{type(exc).__name__}: {exc}", self.path, decl.line) from exc
            locations[f"{source}->{target}"] = self.location(decl.line)
        if freeze:
            violations = es.validate()
            if violations:
                raise ValidationFailed(violations, locations)
            es.freeze()
        return es


def _split_invest(params):
    invest = {k.split(".", 1)[1]: v for k, v in params.items() if k.startswith("invest.")}
    rest = {k: v for k, v in params.items() if not k.startswith("invest.")}
    flag = rest.pop("invest", None)
    if invest or flag is True:
        return InvestmentSpec(**invest), rest
    return None, rest


def _make_node(label, kind, params):
    params = dict(params)
    if kind == "bus":
        node = Bus(label)
    elif kind == "source":
        node = Source(label)
    elif kind == "sink":
        node = Sink(label)
    elif kind == "transformer":
        outputs = {k.split(".", 1)[1]: v for k, v in params.items() if k.startswith("factor.")}
        inputs = {k.split(".", 1)[1]: v for k, v in params.items() if k.startswith("input.")}
        used = {k for k in params if k.startswith(("factor.", "input."))}
        params = {k: v for k, v in params.items() if k not in used}
        node = Transformer(label, TransformerSpec(outputs, inputs))
    else:
        investment, params = _split_invest(params)
        kwargs = {_STORAGE_KEYS[k]: params.pop(k) for k in list(params) if k in _STORAGE_KEYS}
        node = Storage(label, StorageSpec(investment=investment, **kwargs))
    if params:
        raise ValueError(f"unknown parameter(s) for {kind}: {', '.join(sorted(params))}")
    return node


def _make_flow(source, target, params):
    params = dict(params)
    investment, params = _split_invest(params)
    nonconvex = None
    nc = {k.split(".", 1)[1]: params.pop(k) for k in list(params) if k.startswith("nonconvex.")}
    flag = params.pop("nonconvex", None)
    if nc or flag is True:
        if "minimum_uptime" in nc:
            nc["minimum_uptime"] = int(nc["minimum_uptime"])
        nonconvex = NonconvexSpec(**nc)
    kwargs = {_FLOW_KEYS[k]: params.pop(k) for k in list(params) if k in _FLOW_KEYS}
    if params:
        raise ValueError(f"unknown flow parameter(s): {', '.join(sorted(params))}")
    return Flow(source, target, investment=investment, nonconvex=nonconvex, **kwargs)


class _Reader:
    def __init__(self, path: Path):
        self.path = path
        self.base = path.parent
        self._csv_cache: dict = {}

    def error(self, message, line):
        return ParseError(message, self.path, line)

    def column(self, ref, line):
        fname, _, col = ref.partition("#")
        if not col:
            raise self.error(f"sequence reference {ref!r} needs '#column'", line)
        target = (self.base / fname).resolve()
        table = self._csv_cache.get(target)
        if table is None:
            try:
                with open(target, newline="", encoding="utf-8") as fh:
                    rows = list(csv.reader(fh))
            except OSError:
                raise self.error(f"cannot read sequence file {fname!r}", line) from None
            if not rows:
                raise self.error(f"sequence file {fname!r} is empty", line)
            header = [h.strip() for h in rows[0]]
            table = {h: [] for h in header}
            for row in rows[1:]:
                if not any(cell.strip() for cell in row):
                    continue
                for h, cell in zip(header, row):
                    table[h].append(cell.strip())
            self._csv_cache[target] = table
        if col not in table:
            raise self.error(f"column {col!r} not found in {fname!r}", line)
        try:
            return [float(v) for v in table[col] if v != ""]
        except ValueError:
            raise self.error(f"non-numeric value in {fname}#{col}", line) from None

    def value(self, key, text, line):
        low = text.lower()
        if low in ("true", "yes"):
            return True
        if low in ("false", "no"):
            return False
        if "#" in text:
            return self.column(text, line)
        try:
            if "," in text:
                return [float(v) for v in text.split(",") if v.strip()]
            value = float(text)
        except ValueError:
            raise self.error(f"bad value {text!r} for {key!r}", line) from None
        if key == "minimum_uptime" or key.endswith(".minimum_uptime") or key == "steps":
            if value != int(value):
                raise self.error(f"{key!r} must be an integer", line)
            return int(value)
        return value

    def params(self, tokens, line):
        out = {}
        for tok in tokens:
            key, sep, val = tok.partition("=")
            if not sep or not key or not val:
                raise self.error(f"expected key=value, got {tok!r}", line)
            if key in out:
                raise self.error(f"duplicate key {key!r}", line)
            out[key] = self.value(key, val, line)
        return out


def read_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read scenario: {exc.strerror or exc}", path) from None
    reader = _Reader(path)
    section = None
    horizon = {}
    nodes, flows = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1).lower()
            if section not in ("horizon", "nodes", "flows"):
                raise reader.error(f"unknown section [{m.group(1)}]", lineno)
            continue
        if section is None:
            raise reader.error("content before the first section", lineno)
        if section == "horizon":
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or key not in ("steps", "tau"):
                raise reader.error(f"expected 'steps = N' or 'tau = X', got {line!r}", lineno)
            if key in horizon:
                raise reader.error(f"duplicate horizon key {key!r}", lineno)
            horizon[key] = reader.value(key, val, lineno)
            continue
        head, sep, rest = line.partition(":")
        if not sep:
            raise reader.error(f"expected '<declaration>: <parameters>', got {line!r}", lineno)
        tokens = rest.split()
        if section == "nodes":
            label = head.strip()
            if not _LABEL.match(label) or "->" in label:
                raise reader.error(f"bad node label {label!r}", lineno)
            if not tokens:
                raise reader.error(f"node {label!r} needs a kind", lineno)
            kind = tokens[0].lower()
            if kind not in NODE_KINDS:
                raise reader.error(f"unknown node kind {tokens[0]!r}", lineno)
            nodes.append(Declaration(lineno, (label, kind), reader.params(tokens[1:], lineno)))
        else:
            ends = [p.strip() for p in head.split("->")]
            if len(ends) != 2 or not all(_LABEL.match(e) for e in ends):
                raise reader.error(f"expected 'source -> target', got {head.strip()!r}", lineno)
            flows.append(Declaration(lineno, tuple(ends), reader.params(tokens, lineno)))
    if "steps" not in horizon:
        raise reader.error("missing [horizon] steps", None)
    try:
        h = Horizon(int(horizon["steps"]), horizon.get("tau", 1.0))
    except (ValueError, TypeError) as exc:
        raise reader.error(str(exc), None) from None
    return Scenario(path, h, nodes, flows)


def parse_scenario(path) -> EnergySystem:
    """Read a scenario file and return the frozen energy system."""
    return read_scenario(path).to_system()
