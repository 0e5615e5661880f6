"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line, also when it
fails, so ``pytest -v tests/test_acceptance.py -s`` or the tee'd full run
shows the scoreboard at a glance.
"""

import contextlib
import random
import time

import numpy as np
import pytest

from esmgen import (
    BipartitenessViolation,
    Bus,
    DuplicateEdge,
    EnergySystem,
    Flow,
    Horizon,
    InvestmentSpec,
    Sink,
    SinkHasOutflow,
    Source,
    SourceHasInflow,
    Storage,
    StorageSpec,
    Transformer,
    TransformerSpec,
    VariableKind,
    build_model,
    check_locality,
    export_lp,
    extract_results,
    node_view,
    objective_terms,
    to_csv,
)
from esmgen.cli import main
from esmgen.lpfile import roundtrip_equal
from esmgen.results import bus_balance
from esmgen.scenario import parse_scenario
from esmgen.solver import Status, solve

import zoo
from conftest import SCENARIO
from oracles import edge_is_valid, merit_order, storage_levels, uc_enumerate


@pytest.fixture
def criterion(capsys):
    @contextlib.contextmanager
    def run(number, title):
        notes = []
        try:
            yield notes
        except BaseException as exc:
            with capsys.disabled():
                reason = (str(exc).splitlines() or [type(exc).__name__])[0]
                print(f"\nACCEPTANCE {number:2d} FAIL  {title}: {reason}")
            raise
        with capsys.disabled():
            detail = f" ({'; '.join(notes)})" if notes else ""
            print(f"\nACCEPTANCE {number:2d} PASS  {title}{detail}")

    return run


# -- model corpus shared by several criteria -------------------------------------


def random_merit(rng):
    n = rng.randint(1, 5)
    costs = rng.sample(range(1, 100), n)
    caps = [round(rng.uniform(0.5, 10), 3) for _ in range(n)]
    demand = round(rng.uniform(0, sum(caps)), 3)
    return costs, caps, demand


def random_uc(rng):
    n = rng.randint(1, 2)
    with_startup = rng.random() < 0.6
    per_step = n * (2 if with_startup else 1)
    T = rng.randint(max(1, min(6, 12 // per_step) - 2), min(6, 12 // per_step))
    units = []
    for _ in range(n):
        pmax = float(rng.randint(4, 12))
        units.append(dict(
            cost=float(rng.randint(1, 9)),
            pmin=round(rng.uniform(0, 0.6) * pmax, 2),
            pmax=pmax,
            startup=float(rng.randint(0, 20)) if with_startup else None,
            uptime=rng.choice([None, 1, 2, 3]) if with_startup else None,
        ))
    total = sum(u["pmax"] for u in units)
    low = min(u["pmin"] for u in units)
    demand = [round(rng.uniform(low, total), 2) for _ in range(T)]
    return units, demand


def storage_cases():
    rng = random.Random(5)
    cases = [
        dict(),
        dict(loss=0.1),
        dict(eta_in=0.9, eta_out=0.8),
        dict(loss=0.05, eta_in=0.92, eta_out=0.9, initial=0.5, balanced=True),
        dict(initial=1.0, balanced=True, tau=0.5),
        dict(loss=0.2, initial=0.3, tau=2.0, capacity=4.0),
        dict(investment=InvestmentSpec(ep_cost=0.5, maximum=20), eta_in=0.9, initial=0.25, balanced=True),
    ]
    for _ in range(13):
        cases.append(dict(
            prices=[rng.randint(1, 10) for _ in range(6)],
            demand=[rng.randint(0, 4) for _ in range(6)],
            loss=round(rng.uniform(0, 0.05), 3),
            eta_in=round(rng.uniform(0.7, 1), 3),
            eta_out=round(rng.uniform(0.7, 1), 3),
            initial=round(rng.uniform(0, 1), 2),
            balanced=rng.random() < 0.5,
            tau=rng.choice([0.25, 0.5, 1.0]),
        ))
    return cases


def suite_systems():
    """Every system the acceptance sweep touches: the zoo plus random draws."""
    out = [(name, build) for name, build in sorted(zoo.ZOO.items())]
    rng = random.Random(11)
    for i in range(20):
        costs, caps, demand = random_merit(rng)
        out.append((f"merit_{i}", lambda a=(costs, caps, demand): zoo.merit(*a)))
    for i in range(10):
        units, demand = random_uc(rng)
        out.append((f"uc_{i}", lambda a=(units, demand): zoo.uc_random(*a)))
    for i, case in enumerate(storage_cases()):
        out.append((f"storage_{i}", lambda c=case: zoo.storage_system(**c)))
    return out


def bus_residual(model, solution):
    worst = 0.0
    res = extract_results(model, solution)
    for node in model.system.nodes:
        if node.is_bus:
            worst = max(worst, float(np.abs(bus_balance(res, node.label)).max()))
    return worst


# -- 1 ------------------------------------------------------------------------------

KINDS = ["bus", "source", "sink", "transformer", "storage"]


def _make(kind, label):
    return {
        "bus": lambda: Bus(label),
        "source": lambda: Source(label),
        "sink": lambda: Sink(label),
        "transformer": lambda: Transformer(label, TransformerSpec({})),
        "storage": lambda: Storage(label, StorageSpec(capacity=1)),
    }[kind]()


def _category(kinds, src, dst, edges):
    if (src, dst) in edges:
        return "duplicate"
    if kinds[src] == "bus" and kinds[dst] == "bus":
        return "bus->bus"
    if kinds[src] != "bus" and kinds[dst] != "bus":
        return "comp->comp"
    if kinds[src] == "sink":
        return "sink-out"
    if kinds[dst] == "source":
        return "source-in"
    return "valid"


def test_criterion_01_bipartiteness(criterion):
    with criterion(1, "bipartiteness enforcement") as notes:
        rng = random.Random(1)
        graphs = 1500
        rejected = {"bus->bus": [0, 0], "comp->comp": [0, 0], "sink-out": [0, 0],
                    "source-in": [0, 0], "duplicate": [0, 0]}
        accepted = [0, 0]
        errors = (BipartitenessViolation, SinkHasOutflow, SourceHasInflow, DuplicateEdge)
        start = time.perf_counter()
        for _ in range(graphs):
            n = rng.randint(2, 10)
            kinds = {f"n{i}": rng.choice(KINDS) for i in range(n)}
            es = EnergySystem(Horizon(1))
            for label, kind in kinds.items():
                es.add_node(_make(kind, label))
            edges = set()
            for _ in range(rng.randint(1, 3 * n)):
                src, dst = rng.choice(list(kinds)), rng.choice(list(kinds))
                valid = edge_is_valid(kinds, edges, src, dst)
                cat = _category(kinds, src, dst, edges)
                assert valid == (cat == "valid")
                try:
                    es.connect(Flow(src, dst))
                    ok = True
                except errors:
                    ok = False
                if valid:
                    accepted[0] += ok
                    accepted[1] += 1
                    edges.add((src, dst))
                else:
                    rejected[cat][0] += not ok
                    rejected[cat][1] += 1
        elapsed = time.perf_counter() - start
        for cat, (hit, total) in rejected.items():
            assert total > 0 and hit == total, f"{cat}: rejected {hit}/{total}"
        assert accepted[0] == accepted[1], f"false rejections: {accepted[1] - accepted[0]}"
        assert elapsed < 5.0, f"took {elapsed:.2f}s"
        invalid = sum(t for _, t in rejected.values())
        notes.append(f"{graphs} graphs, {invalid} invalid edges all rejected, "
                     f"{accepted[1]} valid edges all accepted, {elapsed:.2f}s")


# -- 2 ------------------------------------------------------------------------------


def test_criterion_02_conservation(criterion, write_scenario):
    with criterion(2, "bus conservation on every optimal solve") as notes:
        solves, worst = 0, 0.0
        systems = suite_systems() + [("scenario", lambda: parse_scenario(write_scenario(SCENARIO)))]
        for name, build in systems:
            m = build_model(build())
            sol = solve(m)
            if not sol.optimal:
                continue
            solves += 1
            r = bus_residual(m, sol)
            assert r <= 1e-6, f"{name}: residual {r:.3g}"
            worst = max(worst, r)
        assert solves >= 40
        notes.append(f"{solves} optimal solves, worst residual {worst:.1e}")


# -- 3 ------------------------------------------------------------------------------


def test_criterion_03_merit_order(criterion):
    with criterion(3, "merit-order dispatch matches greedy oracle") as notes:
        rng = random.Random(3)
        instances = 250
        worst = 0.0
        for i in range(instances):
            costs, caps, demand = random_merit(rng)
            expected, expected_cost = merit_order(costs, caps, demand)
            m = build_model(zoo.merit(costs, caps, demand))
            sol = solve(m)
            assert sol.optimal, f"instance {i}: {sol.status.value}"
            got = [sol[m.flow((f"s{k}", "el"), 0)] for k in range(len(costs))]
            err = max(abs(a - b) for a, b in zip(got, expected))
            err = max(err, abs(sol.objective_value - expected_cost))
            assert err <= 1e-6, f"instance {i}: {got} vs {expected}"
            worst = max(worst, err)
        notes.append(f"{instances} instances, max deviation {worst:.1e}")


# -- 4 ------------------------------------------------------------------------------


def test_criterion_04_milp_vs_enumeration(criterion):
    with criterion(4, "branch-and-bound equals exhaustive UC enumeration") as notes:
        rng = random.Random(4)
        instances, infeasible, max_bin = 60, 0, 0
        start = time.perf_counter()
        for i in range(instances):
            units, demand = random_uc(rng)
            m = build_model(zoo.uc_random(units, demand))
            nbin = len(m.integral_variables)
            assert nbin <= 12, f"instance {i} has {nbin} binaries"
            max_bin = max(max_bin, nbin)
            oracle_units = [dict(u, startup=u["startup"] or 0.0) for u in units]
            best, _ = uc_enumerate(oracle_units, demand)
            sol = solve(m)
            if best is None:
                assert sol.status is Status.INFEASIBLE, f"instance {i}: {sol.status.value}"
                infeasible += 1
                continue
            assert sol.optimal, f"instance {i}: {sol.status.value}"
            assert abs(sol.objective_value - best) <= 1e-6, f"instance {i}: {sol.objective_value} vs {best}"
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0, f"took {elapsed:.1f}s"
        notes.append(f"{instances} instances ({infeasible} infeasible), up to {max_bin} binaries, "
                     f"{elapsed:.1f}s")


# -- 5 ------------------------------------------------------------------------------


def test_criterion_05_storage_recursion(criterion):
    with criterion(5, "storage levels match hand recursion") as notes:
        worst, count = 0.0, 0
        for case in storage_cases():
            m = build_model(zoo.storage_system(**case))
            sol = solve(m)
            assert sol.optimal
            T = m.horizon.step_count
            w_in = [sol[m.flow(("el", "battery"), t)] for t in range(T)]
            w_out = [sol[m.flow(("battery", "el"), t)] for t in range(T)]
            levels = [sol[m.var(VariableKind.LEVEL, "battery", t)] for t in range(T)]
            if case.get("investment") is not None:
                capacity = sol[m.var(VariableKind.NODE_CAPACITY, "battery")]
            else:
                capacity = case.get("capacity", 10.0)
            initial = case.get("initial", 0.0) * capacity
            expected = storage_levels(initial, w_in, w_out, case.get("loss", 0.0), case.get("eta_in", 1.0),
                                      case.get("eta_out", 1.0), case.get("tau", 1.0))
            err = max(abs(a - b) for a, b in zip(levels, expected))
            if case.get("balanced"):
                err = max(err, abs(levels[-1] - initial))
            assert err <= 1e-6, f"case {case}: {levels} vs {expected}"
            worst = max(worst, err)
            count += 1
        m = build_model(zoo.recoverable_energy())
        sol = solve(m)
        sold = sum(sol[m.flow(("out", "sale"), t)] for t in range(3))
        assert abs(sold - 10 * 0.9 * 0.8) <= 1e-6
        notes.append(f"{count} storage cases incl. loss/efficiency/balanced, max deviation {worst:.1e}")


# -- 6 ------------------------------------------------------------------------------

TAU_BUILDERS = {
    "dispatch": lambda tau: zoo.dispatch(tau=tau),
    "gas_turbine": lambda tau: zoo.gas_turbine(tau=tau),
    "merit": lambda tau: zoo.merit([1, 2], [5, 5], 8, tau=tau),
    "storage": lambda tau: zoo.storage_system(tau=tau, storage_cost=0.3, loss=0.1),
    "storage_invest": lambda tau: zoo.storage_system(tau=tau, storage_cost=0.2,
                                                     investment=InvestmentSpec(ep_cost=1, maximum=9)),
}


def test_criterion_06_objective_audit(criterion, write_scenario):
    with criterion(6, "objective recomputed from results; tau scaling") as notes:
        systems = suite_systems() + [("scenario", lambda: parse_scenario(write_scenario(SCENARIO)))]
        audited = 0
        for name, build in systems:
            m = build_model(build())
            sol = solve(m)
            if not sol.optimal:
                continue
            res = extract_results(m, sol)
            total = sum(c * res.value(v) for c, v in objective_terms(m))
            assert abs(total - sol.objective_value) <= 1e-6, f"{name}: {total} vs {sol.objective_value}"
            audited += 1
        for name, build in TAU_BUILDERS.items():
            full, half = build_model(build(1.0)), build_model(build(0.5))
            assignment = {v.name: 1.0 + (i % 7) * 0.5 for i, v in enumerate(full.variables)}
            for cat in (1, 3):
                a = sum(c * assignment[v.name] for c, v in full.objective_by_category()[cat])
                b = sum(c * assignment[v.name] for c, v in half.objective_by_category()[cat])
                assert abs(b - 0.5 * a) <= 1e-9, f"{name} category {cat}: {b} vs {a}/2"
            for cat in (2, 4):
                a = sum(c * assignment[v.name] for c, v in full.objective_by_category()[cat])
                b = sum(c * assignment[v.name] for c, v in half.objective_by_category()[cat])
                assert a == b, f"{name} category {cat} changed with tau"
        notes.append(f"{audited} models audited, tau=0.5 halves I1/I3 on {len(TAU_BUILDERS)} models")


# -- 7 ------------------------------------------------------------------------------


def test_criterion_07_parametrization_switch(criterion):
    with criterion(7, "fixed -> invested storage: +1 variable, +1 I2 term") as notes:
        pairs = [
            (dict(), dict(investment=InvestmentSpec(ep_cost=0.5, maximum=20))),
            (dict(loss=0.1, initial=0.5, balanced=True),
             dict(loss=0.1, initial=0.5, balanced=True, investment=InvestmentSpec(ep_cost=2, maximum=30))),
        ]
        for fixed_kw, invest_kw in pairs:
            fixed = build_model(zoo.storage_system(**fixed_kw))
            invested = build_model(zoo.storage_system(**invest_kw))
            dvars = len(invested.variables) - len(fixed.variables)
            before, after = fixed.objective_by_category(), invested.objective_by_category()
            added = {k: len(after[k]) - len(before[k]) for k in after}
            notes.append(f"variables {dvars:+d}, objective terms added per category {added}")
            assert dvars == 1, f"variable count changed by {dvars:+d}"
            assert sum(added.values()) == 1, f"objective terms added: {added}"
            assert added[2] == 1, f"expected one new I2 term, got per-category additions {added}"


# -- 8 ------------------------------------------------------------------------------


def test_criterion_08_determinism(criterion, write_scenario, tmp_path, capsys):
    with criterion(8, "byte-identical LP files and result CSVs") as notes:
        checked = 0
        for name, build in suite_systems():
            m1, m2 = build_model(build()), build_model(build())
            assert export_lp(m1) == export_lp(m2), f"{name}: LP differs"
            s1, s2 = solve(m1), solve(m2)
            if s1.optimal:
                r1, r2 = extract_results(m1, s1), extract_results(m2, s2)
                assert to_csv(r1) == to_csv(r2), f"{name}: CSV differs"
                for node in m1.system.nodes:
                    assert to_csv(node_view(r1, node.label)) == to_csv(node_view(r2, node.label))
            checked += 1
        path = write_scenario(SCENARIO)
        for out in ("a", "b"):
            assert main(["solve", str(path), "--out", str(tmp_path / out)]) == 0
            assert main(["build", str(path), "--lp", str(tmp_path / out / "model.lp")]) == 0
        files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*")
                               if p.is_file())
        for rel in files:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), str(rel)
        notes.append(f"{checked} models built twice, CLI run twice over {len(files)} files")


# -- 9 ------------------------------------------------------------------------------


def test_criterion_09_locality(criterion):
    with criterion(9, "every generated row is local to one node") as notes:
        rows = 0
        for name, build in suite_systems():
            m = build_model(build())
            bad = check_locality(m)
            assert bad == [], f"{name}: non-local rows {bad[:5]}"
            rows += sum(1 for r in m.constraints if m.provenance[r.name] != "custom")
        notes.append(f"{rows} rows audited, 100% local")


# -- 10 -----------------------------------------------------------------------------


def test_criterion_10_lp_roundtrip(criterion):
    with criterion(10, "LP export parses back to the same StandardForm") as notes:
        count = 0
        for name, build in suite_systems():
            assert roundtrip_equal(build_model(build())), f"{name}: round trip differs"
            count += 1
        notes.append(f"{count} models, exact coefficient match")
