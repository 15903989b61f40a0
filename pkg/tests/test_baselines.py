import itertools
import math

import numpy as np
import pytest

from satedge.bandwidth import InfeasibleError, solve_given_assignment
from satedge.baselines import (
    enumerate_assignments,
    equal_bandwidth,
    equal_bandwidth_plan,
    exhaustive_search,
)
from satedge.cost import Assignment, residuals, sat_compute_energy, total_energy
from satedge.scenario import generate_scenario


def _scenario(**overrides):
    return generate_scenario(seed=0, overrides=overrides or None)


def test_enumeration_is_complete_and_lexicographic():
    tuples = list(enumerate_assignments(2, 3))
    assert len(tuples) == 9
    assert tuples == sorted(tuples)
    assert tuples[0] == (0, 0) and tuples[-1] == (2, 2)


def test_exhaustive_counts_every_candidate():
    s = _scenario()
    stats = {}
    a, plan, energy = exhaustive_search(s, stats=stats)
    assert stats["evaluated"] == 256
    assert stats["feasible"] >= 1
    assert stats["evaluated"] == stats["feasible"] + stats["infeasible"]
    assert residuals(a.matrix, plan, s).max_relative_violation(s) <= 1e-9
    assert math.isfinite(energy) and energy > 0


def test_exhaustive_matches_restated_enumeration():
    s = _scenario()
    best_v, best_x = math.inf, None
    for servers in itertools.product(range(4), repeat=4):
        a = Assignment.from_servers(servers, 4)
        if any(sat_compute_energy(j, a.matrix, s) > s.compute.e_th[j]
               for j in range(3)):
            continue
        try:
            _, e, _ = solve_given_assignment(a.matrix, s)
        except InfeasibleError:
            continue
        if e < best_v:
            best_v, best_x = e, servers

    a, _, energy = exhaustive_search(s)
    assert a.servers == best_x
    assert abs(energy - best_v) <= 1e-9 * best_v


def test_single_ue_tie_breaks_to_first_satellite():
    # Satellite hop counts differ but forwarding energy does not, so a
    # lone UE costs the same on every satellite; the search must settle
    # on the lowest index.
    s = _scenario(topology={"n_ues": 1})
    stats = {}
    a, plan, energy = exhaustive_search(s, stats=stats)
    assert stats["evaluated"] == 4
    values = []
    for j in range(3):
        _, e, _ = solve_given_assignment(
            Assignment.from_servers((j,), 4).matrix, s)
        values.append(e)
    assert max(values) - min(values) <= 1e-12 * min(values)
    assert a.servers == (0,)
    assert energy <= min(values) * (1 + 1e-12)


def test_exhaustive_cap_refusal_names_count():
    s = _scenario()
    with pytest.raises(ValueError) as err:
        exhaustive_search(s, cap=100)
    assert "256" in str(err.value)


def test_exhaustive_no_feasible_assignment_is_typed():
    # 52 ms cannot cover satellite propagation plus compute anywhere,
    # and any shared server doubles the compute term past the budget.
    s = _scenario(compute={"t_th": 0.052})
    with pytest.raises(InfeasibleError):
        exhaustive_search(s)


def test_exhaustive_parallel_matches_sequential():
    s = _scenario()
    a1, p1, e1 = exhaustive_search(s)
    a2, p2, e2 = exhaustive_search(s, threads=2)
    assert a1.servers == a2.servers
    assert e1 == e2
    assert np.array_equal(p1.b_access, p2.b_access)
    assert np.array_equal(p1.b_s, p2.b_s)


def test_equal_bandwidth_plan_layout():
    s = _scenario()
    a = Assignment.from_servers((3, 3, 0, 1), 4)
    plan = equal_bandwidth_plan(a, s)
    active_access = [plan.b_access[n, a.servers[n]] for n in range(4)]
    assert np.allclose(active_access, s.radio.b_access_total / 4)
    assert plan.b_access.sum() == pytest.approx(s.radio.b_access_total)
    assert plan.b_s[2, 0] == pytest.approx(s.radio.b_s_total / 2)
    assert plan.b_s[3, 1] == pytest.approx(s.radio.b_s_total / 2)
    assert plan.b_s.sum() == pytest.approx(s.radio.b_s_total)
    r = residuals(a.matrix, plan, s)
    assert abs(r.c4) <= 1e-6 and abs(r.c5) <= 1e-6
    assert np.all(np.abs(r.consensus) == 0.0)


def test_equal_bandwidth_optimizes_assignment():
    s = _scenario()
    a, energy = equal_bandwidth(s)

    best_v, best_x = math.inf, None
    for servers in itertools.product(range(4), repeat=4):
        cand = Assignment.from_servers(servers, 4)
        plan = equal_bandwidth_plan(cand, s)
        r = residuals(cand.matrix, plan, s)
        if r.max_relative_violation(s) > 1e-9:
            continue
        e = total_energy(cand.matrix, plan, s)
        if e < best_v:
            best_v, best_x = e, servers
    assert a.servers == best_x
    assert abs(energy - best_v) <= 1e-12 * best_v


def test_equal_bandwidth_never_beats_joint_design():
    for overrides in (None, {"topology": {"task_bits": 4e5}},
                      {"topology": {"task_bits": 6e5}}):
        s = generate_scenario(seed=0, overrides=overrides)
        _, _, joint = exhaustive_search(s)
        _, eq = equal_bandwidth(s)
        assert eq >= joint - 1e-9 * abs(joint)


def test_equal_bandwidth_single_ue_equals_joint():
    s = _scenario(topology={"n_ues": 1})
    a_eq, eq = equal_bandwidth(s)
    a_j, _, joint = exhaustive_search(s)
    assert a_eq.servers == a_j.servers
    assert abs(eq - joint) <= 1e-6 * joint


def test_equal_bandwidth_infeasible_while_joint_survives():
    s = _scenario(compute={"t_th": 0.0575})
    a, plan, energy = exhaustive_search(s)
    assert residuals(a.matrix, plan, s).max_relative_violation(s) <= 1e-9
    with pytest.raises(InfeasibleError):
        equal_bandwidth(s)
