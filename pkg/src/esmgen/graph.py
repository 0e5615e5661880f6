"""Bipartite energy-system graph.

Nodes are either buses or components (sources, sinks, transformers,
storages).  Every edge joins a bus with a component, so the graph is
bipartite by construction.  An :class:`EnergySystem` is populated with
:meth:`~EnergySystem.add_node` and :meth:`~EnergySystem.connect`, checked
with :meth:`~EnergySystem.validate` and made immutable with
:meth:`~EnergySystem.freeze` before a model can be built from it.

>>> es = EnergySystem(Horizon(step_count=2))
>>> es.add_node(Bus("el"))
'el'
>>> es.add_node(Source("wind"))
'wind'
>>> es.connect(Flow("wind", "el", nominal_value=5))
('wind', 'el')
>>> es.successors("wind")
['el']
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from numbers import Real
from typing import ClassVar, Iterable, Mapping, Optional, Sequence, Union

from .errors import (
    BipartitenessViolation,
    DuplicateEdge,
    DuplicateLabel,
    EmptySystem,
    InvalidFlow,
    SinkHasOutflow,
    SourceHasInflow,
    SystemFrozen,
    UnknownNode,
    ValidationFailed,
)

NodeId = str
FlowRef = tuple  # (source label, target label)
Profile = Union[float, Sequence[float]]


@dataclass(frozen=True)
class Horizon:
    """Number of time steps and the duration of one step in hours."""

    step_count: int
    tau: Real = 1.0

    def __post_init__(self):
        if isinstance(self.step_count, bool) or not isinstance(self.step_count, int):
            raise ValueError(f"step_count must be an integer, got {self.step_count!r}")
        if self.step_count < 1:
            raise ValueError(f"step_count must be >= 1, got {self.step_count}")
        if not isinstance(self.tau, (Real, Fraction)) or not self.tau > 0 or not math.isfinite(self.tau):
            raise ValueError(f"tau must be a positive finite number, got {self.tau!r}")

    @property
    def steps(self) -> range:
        return range(self.step_count)


class NodeKind(enum.Enum):
    BUS = "bus"
    SOURCE = "source"
    SINK = "sink"
    TRANSFORMER = "transformer"
    STORAGE = "storage"


# --------------------------------------------------------------------------
# component parameters
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InvestmentSpec:
    """Makes a capacity a decision variable with a cost per unit of capacity."""

    ep_cost: float = 0.0
    minimum: float = 0.0
    maximum: float = math.inf
    existing: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.ep_cost) or self.ep_cost < 0:
            raise ValueError(f"ep_cost must be finite and >= 0, got {self.ep_cost}")
        if not (0 <= self.minimum <= self.maximum):
            raise ValueError(
                f"need 0 <= minimum <= maximum, got minimum={self.minimum}, maximum={self.maximum}"
            )
        if not math.isfinite(self.minimum):
            raise ValueError("minimum must be finite")
        if not math.isfinite(self.existing) or self.existing < 0:
            raise ValueError(f"existing must be finite and >= 0, got {self.existing}")


@dataclass(frozen=True)
class NonconvexSpec:
    """On/off behaviour of a flow: binary status, start-up cost, minimum uptime."""

    startup_cost: Optional[float] = None
    minimum_uptime: Optional[int] = None

    def __post_init__(self):
        if self.startup_cost is not None and (
            not math.isfinite(self.startup_cost) or self.startup_cost < 0
        ):
            raise ValueError(f"startup_cost must be finite and >= 0, got {self.startup_cost}")
        if self.minimum_uptime is not None and (
            isinstance(self.minimum_uptime, bool)
            or not isinstance(self.minimum_uptime, int)
            or self.minimum_uptime < 1
        ):
            raise ValueError(f"minimum_uptime must be an integer >= 1, got {self.minimum_uptime!r}")

    @property
    def has_startup(self) -> bool:
        return self.startup_cost is not None or self.minimum_uptime is not None


@dataclass(frozen=True)
class TransformerSpec:
    """Conversion factors keyed by bus label.

    ``conversion_factors`` holds one factor per output bus.  ``input_factors``
    is optional and defaults to 1 for every input bus.  For one input and one
    output the efficiency is ``output_factor / input_factor``.
    """

    conversion_factors: Mapping[str, float]
    input_factors: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, factors in (("conversion", self.conversion_factors), ("input", self.input_factors)):
            for bus, value in factors.items():
                if not math.isfinite(value) or value <= 0:
                    raise ValueError(f"{name} factor for {bus!r} must be > 0, got {value}")
        object.__setattr__(self, "conversion_factors", dict(self.conversion_factors))
        object.__setattr__(self, "input_factors", dict(self.input_factors))

    def output_factor(self, bus: str) -> Optional[float]:
        return self.conversion_factors.get(bus)

    def input_factor(self, bus: str) -> float:
        return self.input_factors.get(bus, 1.0)


@dataclass(frozen=True)
class StorageSpec:
    """Storage parameters.

    Exactly one of ``capacity`` (fixed energy content) and ``investment``
    (capacity as decision variable) should be given.  ``loss_rate`` is the
    fraction of the content lost per step.  ``storage_cost`` is an optional
    cost per unit of stored energy and hour.
    """

    capacity: Optional[float] = None
    loss_rate: float = 0.0
    inflow_efficiency: float = 1.0
    outflow_efficiency: float = 1.0
    initial_level_fraction: float = 0.0
    balanced: bool = False
    investment: Optional[InvestmentSpec] = None
    storage_cost: float = 0.0

    def __post_init__(self):
        if self.capacity is not None and (not math.isfinite(self.capacity) or self.capacity < 0):
            raise ValueError(f"capacity must be finite and >= 0, got {self.capacity}")
        if self.capacity is not None and self.investment is not None:
            raise ValueError("capacity and investment are mutually exclusive")
        if not 0 <= self.loss_rate < 1:
            raise ValueError(f"loss_rate must be in [0, 1), got {self.loss_rate}")
        for name in ("inflow_efficiency", "outflow_efficiency"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {value}")
        if not 0 <= self.initial_level_fraction <= 1:
            raise ValueError(
                f"initial_level_fraction must be in [0, 1], got {self.initial_level_fraction}"
            )
        if not math.isfinite(self.storage_cost):
            raise ValueError("storage_cost must be finite")


# --------------------------------------------------------------------------
# nodes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Node:
    label: NodeId
    kind: ClassVar[NodeKind]

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise ValueError(f"node label must be a nonempty string, got {self.label!r}")

    @property
    def is_bus(self) -> bool:
        return self.kind is NodeKind.BUS


@dataclass(frozen=True)
class Bus(Node):
    kind: ClassVar[NodeKind] = NodeKind.BUS


@dataclass(frozen=True)
class Source(Node):
    kind: ClassVar[NodeKind] = NodeKind.SOURCE


@dataclass(frozen=True)
class Sink(Node):
    kind: ClassVar[NodeKind] = NodeKind.SINK


@dataclass(frozen=True)
class Transformer(Node):
    spec: TransformerSpec = None

    kind: ClassVar[NodeKind] = NodeKind.TRANSFORMER

    def __post_init__(self):
        super().__post_init__()
        if not isinstance(self.spec, TransformerSpec):
            raise ValueError(f"transformer {self.label!r} needs a TransformerSpec")


@dataclass(frozen=True)
class Storage(Node):
    spec: StorageSpec = None

    kind: ClassVar[NodeKind] = NodeKind.STORAGE

    def __post_init__(self):
        super().__post_init__()
        if not isinstance(self.spec, StorageSpec):
            raise ValueError(f"storage {self.label!r} needs a StorageSpec")


# --------------------------------------------------------------------------
# flows
# --------------------------------------------------------------------------


def _as_profile(value, name):
    if value is None:
        return None
    if isinstance(value, Real):
        out = float(value)
        values = (out,)
    else:
        out = tuple(float(v) for v in value)
        values = out
    for v in values:
        if not math.isfinite(v):
            raise InvalidFlow(f"{name} contains a non-finite value")
    return out


def _broadcast(profile, n):
    if profile is None or isinstance(profile, tuple):
        return profile
    return (profile,) * n


@dataclass(frozen=True)
class Flow:
    """A directed edge between a bus and a component.

    Profiles may be given as scalars or per-step sequences; scalars are
    broadcast to the horizon when the flow is connected.  ``min_profile``,
    ``max_profile`` and ``fix_profile`` are fractions of ``nominal_value``.
    ``variable_cost_profile`` is a cost per unit of energy.
    """

    source: NodeId
    target: NodeId
    nominal_value: Optional[float] = None
    min_profile: Profile = 0.0
    max_profile: Profile = 1.0
    fix_profile: Optional[Profile] = None
    variable_cost_profile: Profile = 0.0
    summed_max: Optional[float] = None
    summed_min: Optional[float] = None
    investment: Optional[InvestmentSpec] = None
    nonconvex: Optional[NonconvexSpec] = None

    def __post_init__(self):
        for name in ("min_profile", "max_profile", "fix_profile", "variable_cost_profile"):
            object.__setattr__(self, name, _as_profile(getattr(self, name), name))
        if self.nominal_value is not None:
            if not math.isfinite(self.nominal_value) or self.nominal_value < 0:
                raise InvalidFlow(f"nominal_value must be finite and >= 0, got {self.nominal_value}")
        for name in ("min_profile", "max_profile", "fix_profile"):
            profile = getattr(self, name)
            if profile is None:
                continue
            values = profile if isinstance(profile, tuple) else (profile,)
            # fix is a plain multiple of nominal_value, min/max are fractions
            upper = math.inf if name == "fix_profile" else 1.0
            if any(v < 0 or v > upper for v in values):
                raise InvalidFlow(f"{name} of {self.ref} must lie in [0, {upper}]")
        if self.fix_profile is not None and self.nominal_value is None:
            raise InvalidFlow(f"fix_profile of {self.ref} requires nominal_value")
        lo, hi = self.min_profile, self.max_profile
        if isinstance(lo, float) or isinstance(hi, float) or len(lo) == len(hi):
            n = max(len(p) if isinstance(p, tuple) else 1 for p in (lo, hi))
            if any(a > b for a, b in zip(_broadcast(lo, n), _broadcast(hi, n))):
                raise InvalidFlow(f"min_profile exceeds max_profile on {self.ref}")
        if self.investment is not None and self.nominal_value is not None:
            raise InvalidFlow(f"investment and nominal_value are mutually exclusive on {self.ref}")
        if self.nonconvex is not None and self.nominal_value is None and self.investment is None:
            raise InvalidFlow(f"nonconvex on {self.ref} requires nominal_value or investment")
        for name in ("summed_max", "summed_min"):
            value = getattr(self, name)
            if value is not None and (not math.isfinite(value) or value < 0):
                raise InvalidFlow(f"{name} must be finite and >= 0, got {value}")
        if (
            self.summed_max is not None
            and self.summed_min is not None
            and self.summed_min > self.summed_max
        ):
            raise InvalidFlow(f"summed_min exceeds summed_max on {self.ref}")

    @property
    def ref(self) -> FlowRef:
        return (self.source, self.target)

    @property
    def label(self) -> str:
        return flow_label(self.ref)

    def broadcast(self, step_count: int) -> "Flow":
        return replace(
            self,
            min_profile=_broadcast(self.min_profile, step_count),
            max_profile=_broadcast(self.max_profile, step_count),
            fix_profile=_broadcast(self.fix_profile, step_count),
            variable_cost_profile=_broadcast(self.variable_cost_profile, step_count),
        )


def flow_label(ref: FlowRef) -> str:
    return f"{ref[0]}->{ref[1]}"


# --------------------------------------------------------------------------
# validation results
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str
    message: str = ""

    def __str__(self):
        return f"{self.rule} [{self.entity}]" + (f": {self.message}" if self.message else "")


# --------------------------------------------------------------------------
# the container
# --------------------------------------------------------------------------


class EnergySystem:
    """Container for nodes, flows and the time horizon."""

    def __init__(self, horizon: Horizon):
        if not isinstance(horizon, Horizon):
            raise TypeError("horizon must be a Horizon")
        self.horizon = horizon
        self._nodes: dict[NodeId, Node] = {}
        self._flows: dict[FlowRef, Flow] = {}
        self._inputs: dict[NodeId, set] = {}
        self._outputs: dict[NodeId, set] = {}
        self._frozen = False

    def __repr__(self):
        state = "frozen" if self._frozen else "open"
        return (
            f"<EnergySystem {state}: {len(self._nodes)} nodes, {len(self._flows)} flows, "
            f"{self.horizon.step_count} steps>"
        )

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def nodes(self) -> list[Node]:
        return [self._nodes[k] for k in sorted(self._nodes)]

    @property
    def flows(self) -> list[Flow]:
        return [self._flows[k] for k in sorted(self._flows)]

    def node(self, label: NodeId) -> Node:
        try:
            return self._nodes[label]
        except KeyError:
            raise UnknownNode(f"unknown node {label!r}") from None

    def flow(self, ref: FlowRef) -> Flow:
        try:
            return self._flows[tuple(ref)]
        except KeyError:
            raise UnknownNode(f"unknown flow {flow_label(ref)!r}") from None

    def __contains__(self, label):
        return label in self._nodes

    def _check_open(self):
        if self._frozen:
            raise SystemFrozen("energy system is frozen")

    def add_node(self, node: Node) -> NodeId:
        self._check_open()
        if not isinstance(node, Node) or type(node) is Node:
            raise TypeError(f"expected a Bus, Source, Sink, Transformer or Storage, got {node!r}")
        if node.label in self._nodes:
            raise DuplicateLabel(f"label {node.label!r} already used")
        self._nodes[node.label] = node
        self._inputs[node.label] = set()
        self._outputs[node.label] = set()
        return node.label

    def add_nodes(self, *nodes: Node) -> list[NodeId]:
        return [self.add_node(n) for n in nodes]

    def connect(self, flow: Flow) -> FlowRef:
        self._check_open()
        src, dst = self.node(flow.source), self.node(flow.target)
        if src.is_bus == dst.is_bus:
            what = "bus" if src.is_bus else "component"
            raise BipartitenessViolation(
                f"{flow.label}: {what} to {what} edge; buses connect only to components"
            )
        if src.kind is NodeKind.SINK:
            raise SinkHasOutflow(f"sink {src.label!r} cannot have outgoing flows")
        if dst.kind is NodeKind.SOURCE:
            raise SourceHasInflow(f"source {dst.label!r} cannot have incoming flows")
        if flow.ref in self._flows:
            raise DuplicateEdge(f"flow {flow.label} already exists")
        self._flows[flow.ref] = flow.broadcast(self.horizon.step_count)
        self._outputs[flow.source].add(flow.target)
        self._inputs[flow.target].add(flow.source)
        return flow.ref

    def predecessors(self, label: NodeId) -> list[NodeId]:
        self.node(label)
        return sorted(self._inputs[label])

    def successors(self, label: NodeId) -> list[NodeId]:
        self.node(label)
        return sorted(self._outputs[label])

    def inflows(self, label: NodeId) -> list[Flow]:
        return [self._flows[(p, label)] for p in self.predecessors(label)]

    def outflows(self, label: NodeId) -> list[Flow]:
        return [self._flows[(label, s)] for s in self.successors(label)]

    def is_connected(self) -> bool:
        if not self._nodes:
            raise EmptySystem("is_connected needs at least one node")
        parent = {label: label for label in self._nodes}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self._flows:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        return len({find(x) for x in self._nodes}) == 1

    def validate(self) -> list[Violation]:
        """Return every rule the system breaks; an empty list means well-formed."""
        out: list[Violation] = []
        n = self.horizon.step_count
        if not self._nodes:
            out.append(Violation("<system>", "NoNodes", "an empty system cannot be optimized"))
        for node in self.nodes:
            label = node.label
            ins, outs = self._inputs[label], self._outputs[label]
            if not ins and not outs:
                out.append(Violation(label, "IsolatedNode", "node has no flows"))
            if node.kind is NodeKind.TRANSFORMER:
                if not outs:
                    out.append(Violation(label, "DanglingTransformer", "no output flow"))
                if not ins:
                    out.append(Violation(label, "DanglingTransformer", "no input flow"))
                for bus in sorted(outs):
                    if node.spec.output_factor(bus) is None:
                        out.append(
                            Violation(label, "MissingConversionFactor", f"no factor for output {bus!r}")
                        )
                for bus in sorted(set(node.spec.conversion_factors) - outs):
                    out.append(
                        Violation(label, "UnconnectedConversionFactor", f"{bus!r} is not an output")
                    )
                for bus in sorted(set(node.spec.input_factors) - ins):
                    out.append(
                        Violation(label, "UnconnectedConversionFactor", f"{bus!r} is not an input")
                    )
            if node.kind is NodeKind.STORAGE:
                if len(ins) != 1 or len(outs) != 1:
                    out.append(
                        Violation(
                            label,
                            "StorageDegree",
                            f"needs exactly one inflow and one outflow, has {len(ins)} and {len(outs)}",
                        )
                    )
                if node.spec.capacity is None and node.spec.investment is None:
                    out.append(Violation(label, "StorageCapacityMissing", "give capacity or investment"))
        for flow in self.flows:
            label = flow.label
            src, dst = self._nodes.get(flow.source), self._nodes.get(flow.target)
            if src is None or dst is None:
                out.append(Violation(label, "UnknownNode", "endpoint missing"))
                continue
            if src.is_bus == dst.is_bus:
                out.append(Violation(label, "BipartitenessViolation"))
            for name in ("min_profile", "max_profile", "fix_profile", "variable_cost_profile"):
                profile = getattr(flow, name)
                if profile is not None and len(profile) != n:
                    out.append(
                        Violation(
                            label,
                            "ProfileLengthMismatch",
                            f"{name} has {len(profile)} values, horizon has {n} steps",
                        )
                    )
            lo, hi = flow.min_profile, flow.max_profile
            if len(lo) == len(hi) and any(a > b for a, b in zip(lo, hi)):
                out.append(Violation(label, "MinExceedsMax"))
            if flow.nonconvex is not None and flow.investment is not None:
                out.append(
                    Violation(label, "NonconvexInvestment", "nonconvex flows need a fixed nominal_value")
                )
            if (flow.summed_max is not None or flow.summed_min is not None) and flow.nominal_value is None:
                out.append(
                    Violation(label, "SummedLimitWithoutNominal", "summed limits scale nominal_value")
                )
        return out

    def freeze(self) -> "EnergySystem":
        if self._frozen:
            return self
        violations = self.validate()
        if violations:
            raise ValidationFailed(violations)
        self._frozen = True
        return self


def new_energy_system(horizon: Horizon) -> EnergySystem:
    return EnergySystem(horizon)


def build_system(horizon: Horizon, nodes: Iterable[Node], flows: Iterable[Flow], freeze=True):
    """Convenience constructor used by scripts and tests."""
    es = EnergySystem(horizon)
    for node in nodes:
        es.add_node(node)
    for flow in flows:
        es.connect(flow)
    return es.freeze() if freeze else es
