"""
Unit commitment
===============

A large unit with a minimum load and a startup cost competes with a small
flexible peaker.  The on/off status is binary, so the embedded
branch-and-bound solver takes over.
"""

from esmgen import Bus, Flow, Horizon, NonconvexSpec, Sink, Source, build_model, build_system
from esmgen.model import VariableKind
from esmgen.solver import solve

demand = [2, 9, 12, 11, 3, 10]
system = build_system(
    Horizon(len(demand)),
    [Bus("el"), Source("baseload"), Source("peaker"), Sink("demand")],
    [
        Flow("baseload", "el", nominal_value=12, min_profile=0.5, variable_cost_profile=2,
             nonconvex=NonconvexSpec(startup_cost=20, minimum_uptime=3)),
        Flow("peaker", "el", nominal_value=6, variable_cost_profile=9),
        Flow("el", "demand", nominal_value=1, fix_profile=demand),
    ],
)

model = build_model(system)
solution = solve(model)
print(solution.status.value, solution.objective_value, solution.solve_stats)

ref = ("baseload", "el")
status = [round(solution[model.var(VariableKind.STATUS, ref, t)]) for t in range(len(demand))]
output = [solution[model.flow(ref, t)] for t in range(len(demand))]
for t, (s, w) in enumerate(zip(status, output)):
    print(f"t={t}  on={s}  baseload={w:5.2f}")
