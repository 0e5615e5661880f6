"""Energy system model generator.

Describe an energy system as a bipartite graph of buses and components,
compile it into a (mixed-integer) linear program, solve it with the
embedded solver or export it as a CPLEX LP file, and read the results back
per flow and node.
"""

from .errors import (
    BipartitenessViolation,
    DuplicateEdge,
    DuplicateLabel,
    EmptySystem,
    EsmgenError,
    IoFailure,
    MissingNominal,
    NotABus,
    NotOptimal,
    ParseError,
    SinkHasOutflow,
    SourceHasInflow,
    StorageDegree,
    SystemFrozen,
    UnknownNode,
    UnknownVariable,
    ValidationFailed,
)
from .graph import (
    Bus,
    EnergySystem,
    Flow,
    Horizon,
    InvestmentSpec,
    NodeKind,
    NonconvexSpec,
    Sink,
    Source,
    Storage,
    StorageSpec,
    Transformer,
    TransformerSpec,
    Violation,
    build_system,
    new_energy_system,
)
from .lpfile import export_lp, parse_lp, read_lp
from .model import (
    EQ,
    LE,
    ConstraintRow,
    Domain,
    Model,
    VariableKind,
    VariableRef,
    add_custom_row,
    build_model,
    check_locality,
    objective_terms,
)
from .results import ResultSet, extract_results, node_view, to_csv
from .scenario import parse_scenario, read_scenario
from .solver import Solution, StandardForm, Status, solve, solve_lp, solve_milp, to_standard_form

__version__ = "0.1.0"
