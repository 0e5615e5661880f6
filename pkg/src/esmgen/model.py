"""Compile a frozen :class:`~esmgen.graph.EnergySystem` into a MILP.

Every constraint is stored as a :class:`ConstraintRow`, an affine
expression ``sum(a * x) + constant`` compared against zero with ``<=`` or
``=``.  Rows generated from the graph only ever touch the variables of a
single node and the edges incident to it; :func:`check_locality` audits
that.

The model type follows from the parameters alone: investment specs add
capacity variables, nonconvex specs add binaries, storages add levels.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import MissingNominal, NotABus, StorageDegree, SystemFrozen, UnknownVariable
from .graph import EnergySystem, Flow, FlowRef, NodeId, NodeKind, flow_label


class Domain(enum.Enum):
    NONNEG_REAL = "continuous"
    NONNEG_INTEGER = "integer"
    BINARY = "binary"

    @property
    def integral(self) -> bool:
        return self is not Domain.NONNEG_REAL


class VariableKind(enum.Enum):
    """What a variable stands for.

    ``category`` is the objective expression group the variable's cost
    belongs to: 1 per-step edge weights, 2 edge weights, 3 per-step node
    weights, 4 node weights.  Status and startup charges are per event and
    not scaled by tau, so they sit in a separate group 0.
    """

    FLOW = "flow"
    EDGE_CAPACITY = "invest"
    LEVEL = "level"
    NODE_CAPACITY = "capacity"
    STATUS = "status"
    STARTUP = "startup"

    @property
    def per_step(self) -> bool:
        return self not in (VariableKind.EDGE_CAPACITY, VariableKind.NODE_CAPACITY)

    @property
    def on_edge(self) -> bool:
        return self not in (VariableKind.LEVEL, VariableKind.NODE_CAPACITY)

    @property
    def category(self) -> int:
        return _CATEGORY[self]

    @property
    def order(self) -> int:
        return _ORDER[self]


_ORDER = {k: i for i, k in enumerate(VariableKind)}
_CATEGORY = {
    VariableKind.FLOW: 1,
    VariableKind.STATUS: 0,
    VariableKind.STARTUP: 0,
    VariableKind.EDGE_CAPACITY: 2,
    VariableKind.LEVEL: 3,
    VariableKind.NODE_CAPACITY: 4,
}

# aliases matching the names used in the docs
EdgeFlowPerStep = VariableKind.FLOW
EdgeCapacity = VariableKind.EDGE_CAPACITY
NodeLevelPerStep = VariableKind.LEVEL
NodeCapacity = VariableKind.NODE_CAPACITY
EdgeStatusPerStep = VariableKind.STATUS
EdgeStartupPerStep = VariableKind.STARTUP


def entity_label(entity) -> str:
    return flow_label(entity) if isinstance(entity, tuple) else entity


@dataclass(frozen=True)
class VariableRef:
    """A decision variable.  Identity is (kind, entity, step); bounds and
    domain ride along but do not take part in equality."""

    kind: VariableKind
    entity: Union[NodeId, FlowRef]
    step: Optional[int] = None
    domain: Domain = field(default=Domain.NONNEG_REAL, compare=False)
    lower: float = field(default=0.0, compare=False)
    upper: float = field(default=math.inf, compare=False)

    def __post_init__(self):
        if isinstance(self.entity, list):
            object.__setattr__(self, "entity", tuple(self.entity))
        if self.kind.on_edge != isinstance(self.entity, tuple):
            raise ValueError(f"{self.kind.name} variables belong to an {'edge' if self.kind.on_edge else 'node'}")
        if self.kind.per_step != (self.step is not None):
            raise ValueError(f"{self.kind.name} variables {'need' if self.kind.per_step else 'take no'} a step")
        if self.step is not None and self.step < 0:
            raise ValueError("step must be >= 0")
        if not (self.lower <= self.upper) or self.lower < 0 or math.isnan(self.upper):
            raise ValueError(f"bad bounds [{self.lower}, {self.upper}] on {self.name}")
        if self.domain is Domain.BINARY and self.upper > 1:
            raise ValueError(f"binary variable {self.name} with upper bound {self.upper}")

    @property
    def name(self) -> str:
        head = f"{self.kind.value}_{entity_label(self.entity)}"
        return head if self.step is None else f"{head}_{self.step}"

    @property
    def sort_key(self):
        return (entity_label(self.entity), self.kind.order, -1 if self.step is None else self.step)

    def __repr__(self):
        return f"VariableRef({self.name})"


LE = "<="
EQ = "="


@dataclass(frozen=True)
class ConstraintRow:
    """``sum(coef * var) + constant`` (sense) ``0``."""

    terms: tuple
    constant: float = 0.0
    sense: str = LE
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(a), v) for a, v in self.terms))
        if self.sense not in (LE, EQ):
            raise ValueError(f"sense must be '<=' or '=', got {self.sense!r}")
        if not math.isfinite(self.constant) or any(not math.isfinite(a) for a, _ in self.terms):
            raise ValueError(f"row {self.name!r} has non-finite coefficients")

    @property
    def variables(self) -> list[VariableRef]:
        return [v for _, v in self.terms]

    def lhs(self, values: Mapping[VariableRef, float]) -> float:
        return sum(a * values[v] for a, v in self.terms) + self.constant

    def violation(self, values: Mapping[VariableRef, float]) -> float:
        lhs = self.lhs(values)
        return abs(lhs) if self.sense == EQ else max(lhs, 0.0)


def _row(name, terms, constant=0.0, sense=LE):
    return ConstraintRow(tuple((a, v) for a, v in terms if a != 0), constant, sense, name)


class Model:
    """Variables, constraint rows and objective of one energy system."""

    def __init__(self, system: EnergySystem):
        self.system = system
        self.horizon = system.horizon
        self.variables: list[VariableRef] = []
        self._index: dict[VariableRef, int] = {}
        self.constraints: list[ConstraintRow] = []
        self.objective: list[tuple[float, VariableRef]] = []
        self.provenance: dict[str, str] = {}

    def __repr__(self):
        return (
            f"<Model: {len(self.variables)} variables, {len(self.constraints)} rows, "
            f"{len(self.objective)} objective terms>"
        )

    # -- registry ---------------------------------------------------------

    def _register(self, refs: Iterable[VariableRef]):
        for ref in refs:
            if ref.step is not None and ref.step >= self.horizon.step_count:
                raise ValueError(f"{ref.name}: step beyond horizon")
            if ref in self._index:
                raise ValueError(f"variable {ref.name} registered twice")
            self._index[ref] = -1
            self.variables.append(ref)
        self.variables.sort(key=lambda v: v.sort_key)
        self._index = {v: i for i, v in enumerate(self.variables)}

    def add_variable(self, ref: VariableRef) -> VariableRef:
        """Register an extra variable, e.g. an integer for a custom row."""
        entity = ref.entity
        if isinstance(entity, tuple):
            self.system.flow(entity)
        else:
            self.system.node(entity)
        self._register([ref])
        return ref

    def var(self, kind: VariableKind, entity, step: Optional[int] = None) -> VariableRef:
        key = VariableRef(kind, tuple(entity) if isinstance(entity, (tuple, list)) else entity, step,
                          domain=Domain.NONNEG_REAL, lower=0.0, upper=math.inf)
        try:
            return self.variables[self._index[key]]
        except KeyError:
            raise UnknownVariable(f"no variable {key.name}") from None

    def flow(self, ref: FlowRef, step: int) -> VariableRef:
        return self.var(VariableKind.FLOW, ref, step)

    def index(self, ref: VariableRef) -> int:
        try:
            return self._index[ref]
        except KeyError:
            raise UnknownVariable(f"no variable {ref.name}") from None

    def __contains__(self, ref):
        return ref in self._index

    # -- rows ---------------------------------------------------------------

    def _add_rows(self, rows: Iterable[ConstraintRow], rule: str):
        for row in rows:
            if row.name in self.provenance:
                raise ValueError(f"duplicate row name {row.name!r}")
            self.constraints.append(row)
            self.provenance[row.name] = rule

    def add_custom_row(self, row: ConstraintRow) -> "Model":
        for v in row.variables:
            if v not in self._index:
                raise UnknownVariable(f"row {row.name!r} references unregistered variable {v.name}")
        if not row.name:
            n = sum(1 for r in self.provenance.values() if r == "custom")
            while f"custom_{n}" in self.provenance:
                n += 1
            row = ConstraintRow(row.terms, row.constant, row.sense, f"custom_{n}")
        # re-key terms to the registered refs so bounds/domains are the real ones
        terms = tuple((a, self.variables[self._index[v]]) for a, v in row.terms)
        self._add_rows([ConstraintRow(terms, row.constant, row.sense, row.name)], "custom")
        return self

    # -- objective ----------------------------------------------------------

    def objective_terms(self) -> list[tuple[float, VariableRef]]:
        return list(self.objective)

    def objective_by_category(self) -> dict[int, list[tuple[float, VariableRef]]]:
        out = {0: [], 1: [], 2: [], 3: [], 4: []}
        for coef, ref in self.objective:
            out[ref.kind.category].append((coef, ref))
        return out

    def objective_value(self, values: Mapping[VariableRef, float]) -> float:
        return sum(c * values[v] for c, v in self.objective)

    def row_violations(self, values: Mapping[VariableRef, float], tol: float = 1e-6) -> list[str]:
        return [r.name for r in self.constraints if r.violation(values) > tol]

    @property
    def integral_variables(self) -> list[VariableRef]:
        return [v for v in self.variables if v.domain.integral]


# --------------------------------------------------------------------------
# variable generation
# --------------------------------------------------------------------------


def _flow_bounds(flow: Flow, t: int) -> tuple[float, float]:
    nominal = flow.nominal_value
    if nominal is not None:
        if flow.fix_profile is not None:
            value = nominal * flow.fix_profile[t]
            return value, value
        upper = nominal * flow.max_profile[t]
        if flow.nonconvex is not None:
            return 0.0, upper
        return nominal * flow.min_profile[t], upper
    if flow.investment is not None:
        inv = flow.investment
        return 0.0, flow.max_profile[t] * (inv.maximum + inv.existing)
    return 0.0, math.inf


def _storage_level_upper(spec) -> float:
    if spec.investment is not None:
        return spec.investment.maximum + spec.investment.existing
    return spec.capacity


def _variables(system: EnergySystem) -> list[VariableRef]:
    refs = []
    steps = system.horizon.steps
    for flow in system.flows:
        ref = flow.ref
        for t in steps:
            lo, hi = _flow_bounds(flow, t)
            refs.append(VariableRef(VariableKind.FLOW, ref, t, Domain.NONNEG_REAL, lo, hi))
        if flow.investment is not None:
            inv = flow.investment
            refs.append(VariableRef(VariableKind.EDGE_CAPACITY, ref, None, Domain.NONNEG_REAL,
                                    inv.minimum, inv.maximum))
        if flow.nonconvex is not None:
            for t in steps:
                refs.append(VariableRef(VariableKind.STATUS, ref, t, Domain.BINARY, 0.0, 1.0))
            if flow.nonconvex.has_startup:
                for t in steps:
                    refs.append(VariableRef(VariableKind.STARTUP, ref, t, Domain.BINARY, 0.0, 1.0))
    for node in system.nodes:
        if node.kind is not NodeKind.STORAGE:
            continue
        spec = node.spec
        upper = _storage_level_upper(spec)
        for t in steps:
            refs.append(VariableRef(VariableKind.LEVEL, node.label, t, Domain.NONNEG_REAL, 0.0, upper))
        if spec.investment is not None:
            inv = spec.investment
            refs.append(VariableRef(VariableKind.NODE_CAPACITY, node.label, None, Domain.NONNEG_REAL,
                                    inv.minimum, inv.maximum))
    return refs


# --------------------------------------------------------------------------
# row generators
# --------------------------------------------------------------------------


def _lookup(model, system):
    if model is None:
        model = Model(system)
        model._register(_variables(system))
    return model


def bus_balance_rows(system: EnergySystem, bus: NodeId, model: Optional[Model] = None) -> list[ConstraintRow]:
    """One equality per step: inflows minus outflows equals zero."""
    node = system.node(bus)
    if node.kind is not NodeKind.BUS:
        raise NotABus(f"{bus!r} is a {node.kind.value}, not a bus")
    m = _lookup(model, system)
    rows = []
    for t in system.horizon.steps:
        terms = [(1.0, m.flow((p, bus), t)) for p in system.predecessors(bus)]
        terms += [(-1.0, m.flow((bus, s), t)) for s in system.successors(bus)]
        rows.append(_row(f"balance_{bus}_{t}", terms, 0.0, EQ))
    return rows


def transformer_rows(system: EnergySystem, label: NodeId, model: Optional[Model] = None) -> list[ConstraintRow]:
    node = system.node(label)
    if node.kind is not NodeKind.TRANSFORMER:
        raise ValueError(f"{label!r} is not a transformer")
    m = _lookup(model, system)
    spec = node.spec
    rows = []
    for t in system.horizon.steps:
        for out_bus in system.successors(label):
            cf_out = spec.output_factor(out_bus)
            for in_bus in system.predecessors(label):
                ratio = cf_out / spec.input_factor(in_bus)
                terms = [(1.0, m.flow((label, out_bus), t)), (-ratio, m.flow((in_bus, label), t))]
                rows.append(_row(f"conversion_{label}_{in_bus}_{out_bus}_{t}", terms, 0.0, EQ))
    return rows


def storage_rows(system: EnergySystem, label: NodeId, model: Optional[Model] = None) -> list[ConstraintRow]:
    """Level recursion of a storage, level(t) being the content at the end of step t.

    ``level(t) - (1-loss)*level(t-1) - eta_in*tau*w_in(t) + tau/eta_out*w_out(t) = 0``
    with the initial content standing in for ``level(-1)``.
    """
    node = system.node(label)
    if node.kind is not NodeKind.STORAGE:
        raise ValueError(f"{label!r} is not a storage")
    ins, outs = system.predecessors(label), system.successors(label)
    if len(ins) != 1 or len(outs) != 1:
        raise StorageDegree(f"storage {label!r} has {len(ins)} inflows and {len(outs)} outflows")
    m = _lookup(model, system)
    spec = node.spec
    tau = float(system.horizon.tau)
    keep = 1.0 - spec.loss_rate
    frac = spec.initial_level_fraction
    w_in = (ins[0], label)
    w_out = (label, outs[0])

    # initial content as (terms, constant)
    if spec.investment is not None:
        cap = m.var(VariableKind.NODE_CAPACITY, label)
        init_terms, init_const = [(frac, cap)], frac * spec.investment.existing
    else:
        init_terms, init_const = [], frac * spec.capacity

    rows = []
    for t in system.horizon.steps:
        level = m.var(VariableKind.LEVEL, label, t)
        terms = [(1.0, level)]
        constant = 0.0
        if t == 0:
            terms += [(-keep * a, v) for a, v in init_terms]
            constant = -keep * init_const
        else:
            terms.append((-keep, m.var(VariableKind.LEVEL, label, t - 1)))
        terms.append((-spec.inflow_efficiency * tau, m.flow(w_in, t)))
        terms.append((tau / spec.outflow_efficiency, m.flow(w_out, t)))
        rows.append(_row(f"storage_{label}_{t}", terms, constant, EQ))
    if spec.balanced:
        last = m.var(VariableKind.LEVEL, label, system.horizon.step_count - 1)
        terms = [(1.0, last)] + [(-a, v) for a, v in init_terms]
        rows.append(_row(f"storage_balanced_{label}", terms, -init_const, EQ))
    if spec.investment is not None:
        existing = spec.investment.existing
        for t in system.horizon.steps:
            terms = [(1.0, m.var(VariableKind.LEVEL, label, t)), (-1.0, cap)]
            rows.append(_row(f"storage_capacity_{label}_{t}", terms, -existing))
    return rows


def nonconvex_rows(system: EnergySystem, ref: FlowRef, model: Optional[Model] = None) -> list[ConstraintRow]:
    flow = system.flow(ref)
    if flow.nonconvex is None:
        raise ValueError(f"{flow.label} has no NonconvexSpec")
    if flow.nominal_value is None:
        raise MissingNominal(f"nonconvex flow {flow.label} needs nominal_value")
    m = _lookup(model, system)
    spec = flow.nonconvex
    nominal = flow.nominal_value
    steps = system.horizon.steps
    name = flow.label
    rows = []
    for t in steps:
        w, status = m.flow(ref, t), m.var(VariableKind.STATUS, ref, t)
        rows.append(_row(f"nonconvex_max_{name}_{t}", [(1.0, w), (-nominal * flow.max_profile[t], status)]))
        rows.append(_row(f"nonconvex_min_{name}_{t}", [(nominal * flow.min_profile[t], status), (-1.0, w)]))
    if spec.has_startup:
        for t in steps:
            terms = [(1.0, m.var(VariableKind.STATUS, ref, t)), (-1.0, m.var(VariableKind.STARTUP, ref, t))]
            if t > 0:
                terms.append((-1.0, m.var(VariableKind.STATUS, ref, t - 1)))
            rows.append(_row(f"startup_{name}_{t}", terms))
    if spec.minimum_uptime is not None:
        u = spec.minimum_uptime
        for t in steps:
            status = m.var(VariableKind.STATUS, ref, t)
            for k in range(max(0, t - u + 1), t + 1):
                startup = m.var(VariableKind.STARTUP, ref, k)
                rows.append(_row(f"min_uptime_{name}_{k}_{t}", [(1.0, startup), (-1.0, status)]))
    return rows


def investment_rows(system: EnergySystem, ref: FlowRef, model: Optional[Model] = None) -> list[ConstraintRow]:
    """Couple per-step flow values to the invested capacity."""
    flow = system.flow(ref)
    if flow.investment is None:
        raise ValueError(f"{flow.label} has no InvestmentSpec")
    m = _lookup(model, system)
    inv = flow.investment
    cap = m.var(VariableKind.EDGE_CAPACITY, ref)
    rows = []
    for t in system.horizon.steps:
        w = m.flow(ref, t)
        hi = flow.max_profile[t]
        rows.append(_row(f"invest_max_{flow.label}_{t}", [(1.0, w), (-hi, cap)], -hi * inv.existing))
    for t in system.horizon.steps:
        lo = flow.min_profile[t]
        if lo > 0:
            w = m.flow(ref, t)
            rows.append(_row(f"invest_min_{flow.label}_{t}", [(lo, cap), (-1.0, w)], lo * inv.existing))
    return rows


def summed_limit_rows(system: EnergySystem, ref: FlowRef, model: Optional[Model] = None) -> list[ConstraintRow]:
    """Bounds on the energy carried by one edge over the whole horizon."""
    flow = system.flow(ref)
    if flow.summed_max is None and flow.summed_min is None:
        return []
    if flow.nominal_value is None:
        raise MissingNominal(f"summed limits on {flow.label} need nominal_value")
    m = _lookup(model, system)
    tau = float(system.horizon.tau)
    ws = [m.flow(ref, t) for t in system.horizon.steps]
    rows = []
    if flow.summed_max is not None:
        rows.append(_row(f"summed_max_{flow.label}", [(tau, w) for w in ws],
                         -flow.summed_max * flow.nominal_value))
    if flow.summed_min is not None:
        rows.append(_row(f"summed_min_{flow.label}", [(-tau, w) for w in ws],
                         flow.summed_min * flow.nominal_value))
    return rows


def _objective(system: EnergySystem, m: Model) -> list[tuple[float, VariableRef]]:
    tau = float(system.horizon.tau)
    coefs: dict[VariableRef, float] = {}
    for flow in system.flows:
        for t in system.horizon.steps:
            c = flow.variable_cost_profile[t]
            if c:
                coefs[m.flow(flow.ref, t)] = c * tau
        if flow.investment is not None and flow.investment.ep_cost:
            coefs[m.var(VariableKind.EDGE_CAPACITY, flow.ref)] = flow.investment.ep_cost
        if flow.nonconvex is not None and flow.nonconvex.startup_cost:
            for t in system.horizon.steps:
                coefs[m.var(VariableKind.STARTUP, flow.ref, t)] = flow.nonconvex.startup_cost
    for node in system.nodes:
        if node.kind is not NodeKind.STORAGE:
            continue
        spec = node.spec
        if spec.storage_cost:
            for t in system.horizon.steps:
                coefs[m.var(VariableKind.LEVEL, node.label, t)] = spec.storage_cost * tau
        if spec.investment is not None and spec.investment.ep_cost:
            coefs[m.var(VariableKind.NODE_CAPACITY, node.label)] = spec.investment.ep_cost
    return [(coefs[v], v) for v in m.variables if v in coefs]


def build_model(system: EnergySystem) -> Model:
    """Generate variables, rows and objective for a frozen system."""
    if not system.frozen:
        raise SystemFrozen("build_model needs a frozen energy system; call freeze() first")
    m = Model(system)
    m._register(_variables(system))
    nodes = system.nodes
    for node in nodes:
        if node.kind is NodeKind.BUS:
            m._add_rows(bus_balance_rows(system, node.label, m), "bus_balance")
    for node in nodes:
        if node.kind is NodeKind.TRANSFORMER:
            m._add_rows(transformer_rows(system, node.label, m), "transformer")
    for node in nodes:
        if node.kind is NodeKind.STORAGE:
            m._add_rows(storage_rows(system, node.label, m), "storage")
    flows = system.flows
    for flow in flows:
        if flow.nonconvex is not None:
            m._add_rows(nonconvex_rows(system, flow.ref, m), "nonconvex")
    for flow in flows:
        if flow.investment is not None:
            m._add_rows(investment_rows(system, flow.ref, m), "investment")
    for flow in flows:
        m._add_rows(summed_limit_rows(system, flow.ref, m), "summed_limit")
    m.objective = _objective(system, m)
    return m


def add_custom_row(model: Model, row: ConstraintRow) -> Model:
    return model.add_custom_row(row)


def objective_terms(model: Model) -> list[tuple[float, VariableRef]]:
    return model.objective_terms()


def check_locality(model: Model, include_custom: bool = False) -> list[str]:
    """Names of rows whose variables do not all hang off one common node.

    A node variable pins the row to that node; an edge variable allows
    either of its endpoints.  A row is local if some node is allowed by
    every variable in it.
    """
    bad = []
    for row in model.constraints:
        if model.provenance[row.name] == "custom" and not include_custom:
            continue
        allowed = None
        for ref in row.variables:
            nodes = set(ref.entity) if isinstance(ref.entity, tuple) else {ref.entity}
            allowed = nodes if allowed is None else allowed & nodes
            if not allowed:
                bad.append(row.name)
                break
    return bad


def expand_to_le(row: ConstraintRow) -> list[ConstraintRow]:
    """Express a row as one or two ``<= 0`` rows."""
    if row.sense == LE:
        return [row]
    neg = ConstraintRow(tuple((-a, v) for a, v in row.terms), -row.constant, LE, row.name + "_neg")
    return [ConstraintRow(row.terms, row.constant, LE, row.name + "_pos"), neg]

