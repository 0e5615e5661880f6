import textwrap

import pytest

PROFILES = "step,wind,demand,price\n0,0.2,3,10\n1,0.9,5,40\n2,0.5,4,25\n"

SCENARIO = """\
# wind, gas and a battery feeding one demand
[horizon]
steps = 3
tau = 1

[nodes]
el: bus
gas: bus
wind: source
gas_import: source
gt: transformer factor.el=0.4
battery: storage capacity=6 inflow_efficiency=0.95 outflow_efficiency=0.95
demand: sink

[flows]
wind -> el: nominal_value=5 max=profiles.csv#wind
gas_import -> gas: variable_cost=profiles.csv#price
gas -> gt:
gt -> el: nominal_value=10
el -> battery: nominal_value=3
battery -> el: nominal_value=3
el -> demand: nominal_value=1 fix=profiles.csv#demand
"""


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario (and the shared profiles file) into tmp_path."""

    def write(text=SCENARIO, name="scenario.txt", profiles=PROFILES):
        (tmp_path / "profiles.csv").write_text(profiles)
        path = tmp_path / name
        path.write_text(textwrap.dedent(text))
        return path

    return write
