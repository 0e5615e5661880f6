"""
Economic dispatch on a single bus
=================================

Two power plants with different marginal costs serve a fixed demand.  The
cheap one runs flat out, the dear one fills the gap.
"""

from esmgen import Bus, Flow, Horizon, Sink, Source, build_model, build_system, extract_results, node_view
from esmgen.solver import solve

###############################################################################
# Build the graph.  Buses only ever touch components, so every flow runs
# either into or out of ``el``.

demand = [6, 8, 9, 4]
system = build_system(
    Horizon(step_count=len(demand), tau=1.0),
    [Bus("el"), Source("coal"), Source("gas"), Sink("demand")],
    [
        Flow("coal", "el", nominal_value=5, variable_cost_profile=20),
        Flow("gas", "el", nominal_value=10, variable_cost_profile=45),
        Flow("el", "demand", nominal_value=1, fix_profile=demand),
    ],
)

###############################################################################
# Compile and solve.

model = build_model(system)
print(model)
solution = solve(model)
print("status:", solution.status.value, " cost:", solution.objective_value)

###############################################################################
# Look at the bus: one column per incident flow, one row per step.

results = extract_results(model, solution)
print(node_view(results, "el"))
