"""
Investment planning
===================

Wind capacity is a decision variable with an annualised cost.  A gas
import covers whatever the wind cannot.
"""

import numpy as np

from esmgen import (Bus, Flow, Horizon, InvestmentSpec, Sink, Source, build_model, build_system,
                    extract_results)
from esmgen.solver import solve

rng = np.random.default_rng(7)
hours = 24
wind_profile = np.clip(rng.normal(0.45, 0.25, hours), 0, 1).round(3)
demand = (8 + 3 * np.sin(np.linspace(0, 2 * np.pi, hours))).round(2)

system = build_system(
    Horizon(hours),
    [Bus("el"), Source("wind"), Source("gas"), Sink("demand"), Sink("curtailment")],
    [
        Flow("wind", "el", max_profile=wind_profile,
             investment=InvestmentSpec(ep_cost=30, maximum=40)),
        Flow("gas", "el", variable_cost_profile=6),
        Flow("el", "demand", nominal_value=1, fix_profile=demand),
        Flow("el", "curtailment"),
    ],
)

model = build_model(system)
solution = solve(model)
results = extract_results(model, solution)

# the optimal capacity trades the fixed cost against saved gas
print(f"wind capacity: {results.invest(('wind', 'el')):.2f}")
print(f"gas used:      {results.flow(('gas', 'el')).sum():.2f}")
print(f"total cost:    {solution.objective_value:.2f}")
