"""Switching model construction, branch-and-bound, oracle and verification."""

import dataclasses
import json

import numpy as np
import pytest

from gicgrid.data import (FieldSample, FieldScenario, make_ramp_scenario,
                          parse_case)
from gicgrid.mitigation import (MitigationInfeasible, OtsOptions, build_model,
                                enumerate_solve, solve, verify_plan)

from conftest import random_ots_case


def _nonswitchable(case):
    return dataclasses.replace(
        case, ac_branches=tuple(dataclasses.replace(br, switchable=False)
                                for br in case.ac_branches))


def test_b4gic_single_period_reduces_to_dc_opf(b4gic_case):
    case = _nonswitchable(b4gic_case)
    scenario = FieldScenario(samples=(FieldSample(0.0, 1.0, 90.0),
                                      FieldSample(5.0, 1.0, 90.0)), dt=5.0)
    model = build_model(case, scenario)
    assert model.switchable == []
    plan = solve(model)
    assert plan.z == {}
    assert plan.nodes == 1 and plan.gap == 0.0
    # loads are fixed: total dispatch is the 10 p.u. demand each period
    total = sum(series[0] for series in plan.gen_p.values())
    assert total == pytest.approx(10.0, abs=1e-7)
    # cheap unit carries everything it can
    assert plan.gen_p[1][0] > plan.gen_p[2][0]
    # fixed GIC equalities: model effective currents equal the dc solve
    assert plan.i_eff[0][0] == pytest.approx(170.788 / 1.601, rel=1e-6)


def test_variable_count_formula():
    """Primary-variable count matches T*(G+N+E+Nd+Ed+2X)+S exactly."""
    rng = np.random.default_rng(7)
    case, scenario = random_ots_case(rng)
    model = build_model(case, scenario)
    T = model.n_periods
    G, N, E = len(model.gens), len(model.buses), len(model.branches)
    Nd, Ed, X = len(model.dc_nodes), len(model.dc_edges), len(model.xfmrs)
    S = len(model.switchable)
    assert model.primary_var_count == T * (G + N + E + Nd + Ed + 2 * X) + S
    # every constraint references declared variables only
    assert model.lp.A_eq.shape[1] == model.lp.n
    assert model.lp.A_ub.shape[1] == model.lp.n
    assert int(model.lp.A_ub[:, :0].nnz) == 0


def test_no_binaries_solve_equals_enumerate(b4gic_case):
    case = _nonswitchable(b4gic_case)
    scenario = make_ramp_scenario(1.0, 30.0, 30.0, dt=15.0)
    model = build_model(case, scenario)
    a = solve(model)
    b = enumerate_solve(model)
    assert a.model_objective == pytest.approx(b.model_objective, rel=1e-9)
    assert a.z == b.z == {}


def _east_west_toy():
    """3-bus toy: one long east-west line drives GIC through a capped GSU.

    Power can be served with the east-west line open (parallel northern
    path), so the optimizer should open it and nothing else.
    """
    doc = {
        "base_mva": 100.0,
        "bus": [
            {"index": 1, "base_kv": 345.0, "bus_type": "slack"},
            {"index": 2, "base_kv": 345.0, "pd": 1.0},
            {"index": 3, "base_kv": 345.0, "pd": 1.0},
        ],
        "gen": [{"index": 1, "bus": 1, "pmin": 0, "pmax": 5.0, "cost_1": 10.0}],
        "branch": [
            {"index": 1, "f_bus": 1, "t_bus": 2, "b": 40.0, "rating": 5.0,
             "switchable": True},                       # east-west, long
            {"index": 2, "f_bus": 1, "t_bus": 3, "b": 40.0, "rating": 5.0,
             "switchable": True},                       # northern detour
            {"index": 3, "f_bus": 3, "t_bus": 2, "b": 40.0, "rating": 5.0,
             "switchable": True},
            {"index": 4, "f_bus": 1, "t_bus": 3, "b": 60.0, "rating": 5.0},  # GSU stub
        ],
        "gmd_bus": [
            {"index": 1, "parent": 1, "status": 1, "g_gnd": 0.0, "name": "n1"},
            {"index": 2, "parent": 2, "status": 1, "g_gnd": 0.0, "name": "n2"},
            {"index": 3, "parent": 3, "status": 1, "g_gnd": 0.0, "name": "n3"},
            {"index": 4, "parent": 1, "status": 1, "g_gnd": 5.0, "name": "sub1"},
            {"index": 5, "parent": 2, "status": 1, "g_gnd": 5.0, "name": "sub2"},
        ],
        "gmd_branch": [
            {"index": 1, "f_bus": 1, "t_bus": 2, "parent": 1, "status": 1,
             "br_r": 1.0},
            {"index": 2, "f_bus": 1, "t_bus": 3, "parent": 2, "status": 1,
             "br_r": 1.0},
            {"index": 3, "f_bus": 3, "t_bus": 2, "parent": 3, "status": 1,
             "br_r": 1.0},
            {"index": 4, "f_bus": 1, "t_bus": 4, "parent": 4, "status": 1,
             "br_r": 0.1},
            {"index": 5, "f_bus": 2, "t_bus": 5, "parent": -1, "status": 1,
             "br_r": 0.1},
        ],
        "branch_gmd": [
            {"branch": 1, "hi_bus": 1, "lo_bus": 2, "gmd_k": -1, "type": "line",
             "config": "none"},
            {"branch": 2, "hi_bus": 1, "lo_bus": 3, "gmd_k": -1, "type": "line",
             "config": "none"},
            {"branch": 3, "hi_bus": 3, "lo_bus": 2, "gmd_k": -1, "type": "line",
             "config": "none"},
            {"branch": 4, "hi_bus": 1, "lo_bus": 3, "gmd_br_hi": 4,
             "gmd_k": 1.793, "type": "xfmr", "config": "gwye-delta",
             "gic_bound": 40.0},
            {"branch": -1, "hi_bus": 2, "lo_bus": -1, "gmd_br_hi": 5,
             "gmd_k": -1, "type": "xfmr", "config": "gwye-delta"},
        ],
        "branch_thermal": [
            {"branch": 4, "xfmr": 1, "temp_amb": 25.0, "hs_inst_lim": 280.0,
             "hs_avg_lim": 240.0, "hs_rated": 150.0, "to_time_c": 71.0,
             "to_rated": 75.0, "to_init": 0.0, "to_inited": 0,
             "hs_coeff": 0.63}],
        "bus_gmd": [
            {"bus": 1, "lat": 34.0, "lon": -88.0},
            {"bus": 2, "lat": 34.0, "lon": -86.0},   # due east of bus 1
            {"bus": 3, "lat": 35.5, "lon": -87.0},
        ],
    }
    return parse_case(json.dumps(doc))


def test_optimizer_opens_offending_east_west_line():
    case = _east_west_toy()
    scenario = make_ramp_scenario(8.0, 30.0, 30.0, dt=10.0)
    model = build_model(case, scenario)
    plan = solve(model)
    ref = enumerate_solve(model)
    assert plan.model_objective == pytest.approx(ref.model_objective, rel=1e-4)
    assert plan.z[1] == 0              # the east-west line opens
    assert verify_plan(case, scenario, plan).ok(1e-6)
    # every feasible integer assignment has the east-west line open
    import itertools
    from gicgrid.lp import lp_solve
    for bits in itertools.product((0.0, 1.0), repeat=3):
        lb = model.lp.lb.copy()
        ub = model.lp.ub.copy()
        for bid, val in zip(model.switchable, bits):
            lb[model.z_col[bid]] = ub[model.z_col[bid]] = val
        res = lp_solve(model.lp, lb=lb, ub=ub)
        if res.status == "optimal":
            assert bits[model.switchable.index(1)] == 0.0


def test_all_closed_optimal_when_field_vanishes():
    """With no field the nominal (all-closed) topology is dispatch-optimal."""
    doc = {
        "base_mva": 100.0,
        "bus": [{"index": 1, "base_kv": 138.0, "bus_type": "slack"},
                {"index": 2, "base_kv": 138.0, "pd": 2.0}],
        "gen": [{"index": 1, "bus": 1, "pmin": 0, "pmax": 4.0, "cost_1": 5.0},
                {"index": 2, "bus": 2, "pmin": 0, "pmax": 4.0, "cost_1": 50.0}],
        "branch": [
            {"index": 1, "f_bus": 1, "t_bus": 2, "b": 30.0, "rating": 1.0,
             "switchable": True},
            {"index": 2, "f_bus": 1, "t_bus": 2, "b": 30.0, "rating": 1.0,
             "switchable": True}],
        "gmd_bus": [], "gmd_branch": [], "branch_gmd": [],
        "branch_thermal": [], "bus_gmd": [],
    }
    case = parse_case(json.dumps(doc))
    scenario = make_ramp_scenario(0.0, 20.0, 20.0, dt=10.0)
    plan = solve(build_model(case, scenario))
    # both 1 p.u. circuits needed to serve the 2 p.u. load from the cheap unit
    assert plan.z == {1: 1, 2: 1}
    assert plan.gen_p[1][0] == pytest.approx(2.0, abs=1e-7)


def test_switch_off_semantics():
    case = _east_west_toy()
    scenario = make_ramp_scenario(8.0, 30.0, 30.0, dt=10.0)
    plan = solve(build_model(case, scenario))
    assert plan.z[1] == 0
    assert all(abs(p) <= 1e-9 for p in plan.flows[1])


def test_eq16_relaxation_soundness():
    case = _east_west_toy()
    scenario = make_ramp_scenario(8.0, 30.0, 30.0, dt=10.0)
    plan = solve(build_model(case, scenario))
    report = verify_plan(case, scenario, plan)
    assert report.violations["eff_soundness"] <= 1e-7


def test_objective_recompute_matches():
    case = _east_west_toy()
    scenario = make_ramp_scenario(8.0, 30.0, 30.0, dt=10.0)
    plan = solve(build_model(case, scenario))
    report = verify_plan(case, scenario, plan)
    assert report.violations["objective"] <= 1e-6


def test_solver_is_deterministic():
    case = _east_west_toy()
    scenario = make_ramp_scenario(8.0, 30.0, 30.0, dt=10.0)
    p1 = solve(build_model(case, scenario))
    p2 = solve(build_model(case, scenario))
    assert p1.z == p2.z
    assert p1.nodes == p2.nodes
    assert p1.model_objective == p2.model_objective
    assert p1.gen_p == p2.gen_p


def test_enumerate_cap():
    rng = np.random.default_rng(3)
    case, scenario = random_ots_case(rng)
    model = build_model(case, scenario)
    with pytest.raises(ValueError, match="cap"):
        enumerate_solve(model, cap=0)


def test_infeasible_reports_probe_context():
    """Load above total generation: every assignment fails power balance."""
    doc = {
        "base_mva": 100.0,
        "bus": [{"index": 1, "base_kv": 138.0, "bus_type": "slack"},
                {"index": 2, "base_kv": 138.0, "pd": 9.0}],
        "gen": [{"index": 1, "bus": 1, "pmin": 0, "pmax": 1.0}],
        "branch": [{"index": 1, "f_bus": 1, "t_bus": 2, "b": 30.0,
                    "rating": 10.0, "switchable": True}],
        "gmd_bus": [], "gmd_branch": [], "branch_gmd": [],
        "branch_thermal": [], "bus_gmd": [],
    }
    case = parse_case(json.dumps(doc))
    scenario = make_ramp_scenario(0.0, 20.0, 20.0, dt=10.0)
    model = build_model(case, scenario)
    for solver in (solve, enumerate_solve):
        with pytest.raises(MitigationInfeasible) as err:
            solver(model)
        assert err.value.context["all_closed"] == "power_flow"
        assert err.value.context["all_open"] == "power_flow"


def test_gic_cap_named_in_probe():
    """Unreachable GIC bound on a non-switchable loop: probes blame the cap."""
    case = _east_west_toy()
    rows = tuple(dataclasses.replace(r, gic_bound=1e-3)
                 if r.branch == 4 else r for r in case.branch_gmd)
    # the east-west line cannot be opened: the GIC loop always exists
    branches = tuple(dataclasses.replace(br, switchable=False)
                     if br.index == 1 else br for br in case.ac_branches)
    case = dataclasses.replace(case, branch_gmd=rows, ac_branches=branches)
    samples = (FieldSample(0.0, 8.0, 90.0), FieldSample(10.0, 8.0, 90.0))
    scenario = FieldScenario(samples=samples, dt=10.0)
    model = build_model(case, scenario)
    with pytest.raises(MitigationInfeasible) as err:
        solve(model)
    assert err.value.context["all_closed"] == "gic_cap"


def test_verify_flags_constructed_violations():
    case = _east_west_toy()
    scenario = make_ramp_scenario(8.0, 30.0, 30.0, dt=10.0)
    plan = solve(build_model(case, scenario))

    # all-closed plan on a GIC-violating scenario: cap violation reported
    closed = dataclasses.replace(plan, z={k: 1 for k in plan.z})
    rep = verify_plan(case, scenario, closed)
    assert rep.violations["gic_cap"] > 1.0
    assert any("row 3" in d for d in rep.details if "gic_cap" in d)

    # opening the radial GSU feeder's only supply: load balance breaks
    stranded = dataclasses.replace(
        plan, z={**plan.z, 2: 0, 3: 0},
        flows={k: [0.0] * len(v) for k, v in plan.flows.items()})
    rep2 = verify_plan(case, scenario, stranded)
    assert rep2.violations["power_balance"] >= 1.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_toys_bb_equals_enumeration(seed):
    rng = np.random.default_rng(seed + 50)
    case, scenario = random_ots_case(rng)
    model = build_model(case, scenario)
    try:
        ref = enumerate_solve(model)
    except MitigationInfeasible:
        with pytest.raises(MitigationInfeasible):
            solve(model)
        return
    plan = solve(model)
    assert plan.model_objective == pytest.approx(ref.model_objective,
                                                 rel=1e-4, abs=1e-7)
    assert verify_plan(case, scenario, plan).ok(1e-5)


def test_timeout_returns_incumbent():
    rng = np.random.default_rng(11)
    case, scenario = random_ots_case(rng)
    model = build_model(case, scenario, OtsOptions(time_limit=0.0))
    try:
        plan = solve(model, OtsOptions(time_limit=1e-9))
    except MitigationInfeasible:
        return  # nothing explored before the deadline: acceptable outcome
    assert plan.status == "timeout"


def test_epri21_binaries_are_inservice_switchable_lines(epri21_case):
    scenario = make_ramp_scenario(3.2, 180.0, 180.0, dt=60.0)
    model = build_model(epri21_case, scenario)
    assert model.switchable == [2, 7, 8, 9, 10, 16, 17]
    nominal_out = {br.index for br in epri21_case.ac_branches if not br.status}
    assert not (set(model.switchable) & nominal_out)


def test_build_rejects_islanded_load(epri21_case):
    import dataclasses
    from gicgrid.coupling import IslandError
    branches = tuple(dataclasses.replace(br, status=0) if br.index == 10 else br
                     for br in epri21_case.ac_branches)
    # opening 5-6 nominally leaves bus 5's load with a single corridor; also
    # cut both 4-5 circuits to strand it completely
    branches = tuple(dataclasses.replace(br, status=0) if br.index in (7, 8) else br
                     for br in branches)
    case = dataclasses.replace(epri21_case, ac_branches=branches)
    scenario = make_ramp_scenario(1.0, 60.0, 60.0, dt=60.0)
    with pytest.raises(IslandError, match="bus 5"):
        build_model(case, scenario)


def test_voltage_overrides_drive_the_model():
    """Per-branch overrides take precedence over the uniform projection."""
    case = _east_west_toy()
    # no field at all; 120 V forced onto the east-west line only
    samples = (FieldSample(0.0, 0.0, 90.0), FieldSample(10.0, 0.0, 90.0))
    scenario = FieldScenario(samples=samples, dt=10.0,
                             voltage_overrides={1: ((0.0, 120.0), (10.0, 120.0))})
    model = build_model(case, scenario)
    plan = solve(model)

    from gicgrid.dcnet import FieldVector, assemble, effective_gic, solve_dc
    topo = dict(plan.z)
    sol = solve_dc(assemble(case, FieldVector(0.0, 0.0),
                            overrides={1: 120.0}, topology=topo))
    eff = effective_gic(case, sol)
    for pos, series in plan.i_eff.items():
        assert series[0] == pytest.approx(eff.get(pos, 0.0), abs=1e-6)
    assert verify_plan(case, scenario, plan).ok(1e-6)
