"""
Adding your own constraint
==========================

The generated model is plain data: variables, rows and an objective.  Here a
CO2 cap spanning two sources is added by hand.
"""

from esmgen import (LE, Bus, ConstraintRow, Flow, Horizon, Sink, Source, add_custom_row, build_model,
                    build_system, check_locality)
from esmgen.solver import solve

system = build_system(
    Horizon(3),
    [Bus("el"), Source("coal"), Source("gas"), Sink("demand")],
    [
        Flow("coal", "el", nominal_value=10, variable_cost_profile=2),
        Flow("gas", "el", nominal_value=10, variable_cost_profile=5),
        Flow("el", "demand", nominal_value=1, fix_profile=[8, 8, 8]),
    ],
)
model = build_model(system)
print("without cap:", solve(model).objective_value)

# 0.9 t/MWh for coal, 0.4 t/MWh for gas, at most 15 t over the horizon
terms = [(0.9, model.flow(("coal", "el"), t)) for t in range(3)]
terms += [(0.4, model.flow(("gas", "el"), t)) for t in range(3)]
add_custom_row(model, ConstraintRow(terms, -15.0, LE, "co2_cap"))

print("with cap:   ", solve(model).objective_value)

# both capped flows end at bus "el", so the row is still local to one node
print("non-local rows:", check_locality(model, include_custom=True))
