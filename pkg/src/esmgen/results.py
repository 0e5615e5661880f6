"""Solver output re-keyed to graph entities, plus table and CSV views."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import IoFailure, NotOptimal, UnknownNode
from .graph import EnergySystem, Horizon, NodeKind, flow_label
from .model import Model, VariableKind, VariableRef
from .solver import Solution, Status


@dataclass
class ResultSet:
    """Optimal values grouped by flow and node.

    ``sequences`` maps ``(entity, kind)`` to an array over the horizon, e.g.
    ``(("wind", "el"), "flow")`` or ``("battery", "level")``.  ``scalars``
    holds time-independent values such as ``(("pv", "el"), "invest")``.
    """

    system: EnergySystem
    horizon: Horizon
    status: Status
    objective_value: float
    sequences: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)

    @property
    def meta(self) -> dict:
        return {
            "status": self.status.value,
            "objective": self.objective_value,
            "step_count": self.horizon.step_count,
            "tau": float(self.horizon.tau),
        }

    @property
    def flows(self) -> dict:
        return {e: s for (e, k), s in self.sequences.items() if k == VariableKind.FLOW.value}

    def flow(self, ref) -> np.ndarray:
        return self.sequences[(tuple(ref), VariableKind.FLOW.value)]

    def level(self, label) -> np.ndarray:
        return self.sequences[(label, VariableKind.LEVEL.value)]

    def invest(self, entity) -> float:
        if isinstance(entity, (tuple, list)):
            return self.scalars[(tuple(entity), VariableKind.EDGE_CAPACITY.value)]
        return self.scalars[(entity, VariableKind.NODE_CAPACITY.value)]

    def value(self, ref: VariableRef) -> float:
        if ref.step is None:
            return self.scalars[(ref.entity, ref.kind.value)]
        return float(self.sequences[(ref.entity, ref.kind.value)][ref.step])

    def __len__(self):
        return sum(len(s) for s in self.sequences.values()) + len(self.scalars)


def extract_results(model: Model, solution: Solution) -> ResultSet:
    if solution.status is not Status.OPTIMAL:
        raise NotOptimal(f"solution status is {solution.status.value}")
    T = model.horizon.step_count
    out = ResultSet(model.system, model.horizon, solution.status, solution.objective_value)
    for ref in model.variables:
        value = solution.assignment[ref]
        key = (ref.entity, ref.kind.value)
        if ref.step is None:
            if key in out.scalars:
                raise ValueError(f"{ref.name} appears twice")
            out.scalars[key] = value
        else:
            seq = out.sequences.get(key)
            if seq is None:
                seq = out.sequences[key] = np.full(T, np.nan)
            seq[ref.step] = value
    return out


def node_view(results: ResultSet, label: str) -> pd.DataFrame:
    """Per-step table of every flow touching ``label``, plus its level for storages."""
    system = results.system
    if label not in system:
        raise UnknownNode(f"unknown node {label!r}")
    refs = [(p, label) for p in system.predecessors(label)]
    refs += [(label, s) for s in system.successors(label)]
    refs.sort(key=flow_label)
    data = {flow_label(r): results.flow(r) for r in refs}
    if system.node(label).kind is NodeKind.STORAGE:
        data["level"] = results.level(label)
    frame = pd.DataFrame(data, index=pd.RangeIndex(results.horizon.step_count, name="timestep"))
    return frame


def bus_balance(results: ResultSet, label: str) -> np.ndarray:
    """Inflow minus outflow per step for a bus."""
    system = results.system
    total = np.zeros(results.horizon.step_count)
    for p in system.predecessors(label):
        total += results.flow((p, label))
    for s in system.successors(label):
        total -= results.flow((label, s))
    return total


def results_table(results: ResultSet) -> pd.DataFrame:
    """All flows (label-sorted) followed by storage levels."""
    data = {}
    for ref in sorted(results.flows, key=flow_label):
        data[flow_label(ref)] = results.flow(ref)
    for node in results.system.nodes:
        if node.kind is NodeKind.STORAGE:
            data[f"{node.label}:level"] = results.level(node.label)
    return pd.DataFrame(data, index=pd.RangeIndex(results.horizon.step_count, name="timestep"))


def _fmt(x: float) -> str:
    text = f"{x:.6f}"
    return "0.000000" if text == "-0.000000" else text


def to_csv(obj, destination=None) -> str:
    """RFC 4180 CSV with a ``timestep`` column and 6-decimal values."""
    frame = results_table(obj) if isinstance(obj, ResultSet) else obj
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["timestep", *[str(c) for c in frame.columns]])
    values = frame.to_numpy(dtype=float)
    for t, row in zip(frame.index, values):
        writer.writerow([str(t), *[_fmt(v) for v in row]])
    text = buf.getvalue()
    if destination is not None:
        try:
            if hasattr(destination, "write"):
                destination.write(text)
            else:
                with open(os.fspath(destination), "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
        except OSError as exc:
            raise IoFailure(f"cannot write CSV: {exc}") from exc
    return text
