"""
Storage arbitrage
=================

A battery buys when the price is low and sells back when it is high.  The
round-trip efficiency is 0.9 * 0.9, so small spreads are not worth it.
"""

from esmgen import Bus, Flow, Horizon, Sink, Source, Storage, StorageSpec, build_model, build_system
from esmgen import extract_results, node_view
from esmgen.solver import solve

prices = [20, 18, 55, 60, 22, 21, 70, 24]
system = build_system(
    Horizon(len(prices), tau=0.5),
    [
        Bus("el"), Source("grid"), Sink("demand"),
        Storage("battery", StorageSpec(capacity=8, loss_rate=0.01, inflow_efficiency=0.9,
                                       outflow_efficiency=0.9, initial_level_fraction=0.5,
                                       balanced=True)),
    ],
    [
        Flow("grid", "el", nominal_value=20, variable_cost_profile=prices),
        Flow("el", "demand", nominal_value=1, fix_profile=3),
        Flow("el", "battery", nominal_value=4),
        Flow("battery", "el", nominal_value=4),
    ],
)

model = build_model(system)
results = extract_results(model, solve(model))
print(node_view(results, "battery").round(3))
