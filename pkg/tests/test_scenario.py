import pytest

from esmgen import ParseError, Storage, Transformer, ValidationFailed, build_model
from esmgen.scenario import parse_scenario, read_scenario
from esmgen.solver import solve

from conftest import SCENARIO

MINIMAL = """\
[horizon]
steps = 2
[nodes]
el: bus
src: source
demand: sink
[flows]
src -> el: nominal_value=5 variable_cost=10
el -> demand: nominal_value=1 fix=3,4
"""


def test_minimal(write_scenario):
    es = parse_scenario(write_scenario(MINIMAL))
    assert es.frozen and len(es.nodes) == 3
    assert es.flow(("el", "demand")).fix_profile == (3.0, 4.0)
    assert solve(build_model(es)).objective_value == pytest.approx(70.0)


def test_profiles_and_components(write_scenario):
    es = parse_scenario(write_scenario())
    assert es.flow(("wind", "el")).max_profile == (0.2, 0.9, 0.5)
    assert es.flow(("gas_import", "gas")).variable_cost_profile == (10.0, 40.0, 25.0)
    assert isinstance(es.node("gt"), Transformer) and es.node("gt").spec.conversion_factors == {"el": 0.4}
    assert isinstance(es.node("battery"), Storage) and es.node("battery").spec.capacity == 6.0
    assert solve(build_model(es)).optimal


def test_every_parameter_family(write_scenario):
    text = """\
    [horizon]
    steps = 2
    tau = 0.5
    [nodes]
    el: bus
    pv: source
    unit: source
    store: storage loss_rate=0.01 balanced=true initial_level=0.5 invest.ep_cost=2 invest.maximum=10
    demand: sink
    [flows]
    pv -> el: invest.ep_cost=3 invest.maximum=20 max=0.5,1
    unit -> el: nominal_value=8 min=0.25 variable_cost=4 nonconvex=true nonconvex.startup_cost=2 nonconvex.minimum_uptime=2 summed_max=2
    el -> store:
    store -> el:
    el -> demand: nominal_value=1 fix=profiles.csv#demand
    """
    es = parse_scenario(write_scenario(text, profiles="demand\n4\n6\n"))
    unit = es.flow(("unit", "el"))
    assert unit.nonconvex.startup_cost == 2 and unit.nonconvex.minimum_uptime == 2
    assert unit.summed_max == 2
    assert es.flow(("pv", "el")).investment.maximum == 20
    assert es.node("store").spec.investment.ep_cost == 2 and es.node("store").spec.balanced
    assert es.horizon.tau == 0.5
    assert solve(build_model(es)).optimal


def test_profile_length_mismatch(write_scenario):
    text = SCENARIO.replace("steps = 3", "steps = 4")
    path = write_scenario(text)
    with pytest.raises(ValidationFailed) as info:
        parse_scenario(path)
    rules = {v.rule for v in info.value.violations}
    assert "ProfileLengthMismatch" in rules
    assert f"{path}:17" in str(info.value)


@pytest.mark.parametrize(
    "text, fragment, line",
    [
        (MINIMAL.replace("src: source", "src: windmill"), "windmill", 5),
        (MINIMAL.replace("[nodes]", "[knots]"), "knots", 3),
        (MINIMAL.replace("variable_cost=10", "variable_cost=ten"), "ten", 8),
        (MINIMAL.replace("variable_cost=10", "variable_cost"), "key=value", 8),
        (MINIMAL.replace("src -> el", "src => el"), "source -> target", 8),
        (MINIMAL.replace("fix=3,4", "fix=profiles.csv#nope"), "nope", 9),
        (MINIMAL.replace("fix=3,4", "fix=missing.csv#d"), "missing.csv", 9),
        (MINIMAL.replace("nominal_value=5", "nominal=5"), "nominal", 8),
        (MINIMAL.replace("src -> el", "el -> src"), "SourceHasInflow", 8),
        (MINIMAL.replace("demand: sink", "el: sink"), "DuplicateLabel", 6),
        ("el: bus\n", "before the first section", 1),
    ],
)
def test_parse_errors(write_scenario, text, fragment, line):
    path = write_scenario(text)
    with pytest.raises(ParseError) as info:
        parse_scenario(path)
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"{path}:{line}: ")


def test_missing_steps(write_scenario):
    with pytest.raises(ParseError, match="steps"):
        parse_scenario(write_scenario(MINIMAL.replace("steps = 2", "tau = 1")))


def test_missing_file(tmp_path):
    with pytest.raises(ParseError):
        parse_scenario(tmp_path / "absent.txt")


def test_unfrozen_system(write_scenario):
    text = MINIMAL.replace("demand: sink", "demand: sink\nlonely: bus")
    sc = read_scenario(write_scenario(text))
    es = sc.to_system(freeze=False)
    assert not es.frozen and [v.rule for v in es.validate()] == ["IsolatedNode"]
