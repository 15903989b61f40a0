"""Energy terms, latency aggregates, residual bookkeeping, Lagrangian."""

import math

import numpy as np
import pytest

from satedge.channel import access_latency, access_rate, backhaul_rate
from satedge.cost import (
    Assignment,
    BandwidthPlan,
    augmented_lagrangian,
    compute_latency,
    flatten_bandwidths,
    latency_totals,
    residuals,
    sat_compute_energy,
    sat_energy,
    terr_energy,
    total_energy,
    unflatten_bandwidths,
)
from satedge.scenario import generate_scenario


def _scenario(**topo):
    over = {"topology": dict({"d_ue_bs": 200.0}, **topo)}
    return generate_scenario(seed=0, overrides=over)


def _equal_split_plan(a: Assignment, s) -> BandwidthPlan:
    n, j_all = a.n_ues, a.n_servers
    b_access = np.zeros((n, j_all))
    b_s = np.zeros((n, j_all - 1))
    for i, j in enumerate(a.servers):
        b_access[i, j] = s.radio.b_access_total / n
    on_sat = [i for i, j in enumerate(a.servers) if j < j_all - 1]
    for i in on_sat:
        b_s[i, a.servers[i]] = s.radio.b_s_total / len(on_sat)
    return BandwidthPlan.from_bandwidths(b_access, b_s)


def test_assignment_helpers():
    a = Assignment.from_servers([0, 1, 2, 3], 4)
    assert a.servers == (0, 1, 2, 3)
    assert a.bs_col == 3
    assert a.count_on(3) == 1
    assert a.is_valid()
    assert a.matrix.tolist() == [[1, 0, 0, 0], [0, 1, 0, 0],
                                 [0, 0, 1, 0], [0, 0, 0, 1]]
    with pytest.raises(ValueError):
        Assignment.from_servers([4], 4)
    bad = Assignment(x=((1, 1, 0, 0),))
    assert not bad.is_valid()


def test_flatten_roundtrip():
    rng = np.random.default_rng(0)
    b_access = rng.uniform(0, 1e7, size=(4, 4))
    b_s = rng.uniform(0, 1e7, size=(4, 3))
    flat = flatten_bandwidths(b_access, b_s)
    assert flat.shape == (4 * 7,)
    back_a, back_s = unflatten_bandwidths(flat, 4, 4)
    assert np.array_equal(back_a, b_access)
    assert np.array_equal(back_s, b_s)


def test_terr_energy_compute_term_single_ue():
    s = _scenario()
    a = Assignment.from_servers([3, 0, 1, 2], 4)
    plan = _equal_split_plan(a, s)
    x = a.matrix
    e = terr_energy(0, x, plan.b_access, s)
    bits = s.topology.task_bits[0]
    uplink = bits / access_rate(0, x, plan.b_access, s) * s.radio.p_ue[0]
    # 1e-28 * 5e5 * 300 * (3e9)^2 = 0.135 J on a sole occupant.
    assert abs((e - uplink) - 0.135) < 1e-12
    assert e > uplink


def test_terr_energy_shared_cpu_quarters_compute():
    s = _scenario()
    a = Assignment.from_servers([3, 3, 0, 1], 4)
    plan = _equal_split_plan(a, s)
    x = a.matrix
    for n in (0, 1):
        e = terr_energy(n, x, plan.b_access, s)
        uplink = bits = s.topology.task_bits[n]
        uplink = bits / access_rate(n, x, plan.b_access, s) * s.radio.p_ue[n]
        assert abs((e - uplink) - 0.135 / 4) < 1e-12


def test_terr_energy_zero_bits():
    s = generate_scenario(seed=0, overrides={
        "topology": {"task_bits": [0.0, 5e5, 5e5, 5e5], "d_ue_bs": 200.0}})
    a = Assignment.from_servers([3, 0, 1, 2], 4)
    assert terr_energy(0, a.matrix, _equal_split_plan(a, s).b_access, s) == 0.0


def test_sat_energy_reference_value():
    s = _scenario()
    a = Assignment.from_servers([1, 3, 3, 3], 4)
    x = a.matrix
    b_access = np.zeros((4, 4))
    b_access[0, 1] = 12.5e6
    b_s = np.zeros((4, 3))
    b_s[0, 1] = 25e6
    e = sat_energy(0, x, b_access, b_s, s)
    bits = s.topology.task_bits[0]
    expected = bits / access_rate(0, x, b_access, s) * s.radio.p_ue[0] \
        + bits / backhaul_rate(0, x, b_s, s) * s.radio.p_bs[0]
    assert abs(e - expected) < 1e-15
    assert abs(e - 0.0195) < 5e-4


def test_sat_energy_zero_forwarding_power():
    s = generate_scenario(seed=0, overrides={
        "radio": {"p_bs_dbm": -math.inf}, "topology": {"d_ue_bs": 200.0}})
    a = Assignment.from_servers([1, 3, 3, 3], 4)
    x = a.matrix
    b_access = np.zeros((4, 4))
    b_access[0, 1] = 12.5e6
    b_s = np.zeros((4, 3))
    b_s[0, 1] = 25e6
    e = sat_energy(0, x, b_access, b_s, s)
    bits = s.topology.task_bits[0]
    assert abs(e - bits / access_rate(0, x, b_access, s) * s.radio.p_ue[0]) \
        < 1e-18


def test_sat_energy_linear_in_bits_at_fixed_rates():
    s = _scenario()
    s2 = generate_scenario(seed=0, overrides={
        "topology": {"d_ue_bs": 200.0, "task_bits": 1e6}})
    a = Assignment.from_servers([1, 3, 3, 3], 4)
    x = a.matrix
    b_access = np.zeros((4, 4))
    b_access[0, 1] = 12.5e6
    b_s = np.zeros((4, 3))
    b_s[0, 1] = 25e6
    assert abs(sat_energy(0, x, b_access, b_s, s2)
               - 2 * sat_energy(0, x, b_access, b_s, s)) < 1e-12


def test_sat_energy_infinite_without_bandwidth():
    s = _scenario()
    a = Assignment.from_servers([0, 3, 3, 3], 4)
    x = a.matrix
    assert sat_energy(0, x, np.zeros((4, 4)), np.zeros((4, 3)), s) == math.inf


def test_total_energy_consensus_flag_equivalence():
    s = _scenario()
    a = Assignment.from_servers([3, 3, 1, 2], 4)
    plan = _equal_split_plan(a, s)
    e_b = total_energy(a.matrix, plan, s, use_xi_for_terr=False)
    e_xi = total_energy(a.matrix, plan, s, use_xi_for_terr=True)
    assert abs(e_b - e_xi) < 1e-15
    # Perturbing xi moves only the flag-on value.
    plan.xi = plan.xi * 1.1
    assert total_energy(a.matrix, plan, s, use_xi_for_terr=False) == e_b
    assert total_energy(a.matrix, plan, s, use_xi_for_terr=True) != e_xi


def test_compute_latency_sharing():
    s = _scenario()
    solo = Assignment.from_servers([0, 1, 2, 3], 4)
    # 5e5 * 300 / 3e9 = 0.05 s for a sole occupant.
    assert abs(compute_latency(0, 0, solo.matrix, s) - 0.05) < 1e-15
    pair = Assignment.from_servers([0, 0, 2, 3], 4)
    assert abs(compute_latency(0, 0, pair.matrix, s) - 0.1) < 1e-15
    assert abs(compute_latency(1, 0, pair.matrix, s) - 0.1) < 1e-15


def test_latency_totals_layout():
    s = _scenario()
    a = Assignment.from_servers([0, 3, 3, 1], 4)
    plan = _equal_split_plan(a, s)
    t_sat, t_terr = latency_totals(a.matrix, plan, s)
    assert not np.isnan(t_sat[0, 0])
    assert np.isnan(t_sat[0, 1]) and np.isnan(t_sat[0, 2])
    assert np.isnan(t_terr[0])
    assert not np.isnan(t_terr[1]) and not np.isnan(t_terr[2])
    assert not np.isnan(t_sat[3, 1])
    # Satellite path carries at least the propagation delay plus compute.
    assert t_sat[0, 0] > 2e-3 + 0.05


def test_residuals_c6_two_on_one_satellite():
    s = _scenario()
    a = Assignment.from_servers([1, 1, 3, 3], 4)
    plan = _equal_split_plan(a, s)
    res = residuals(a.matrix, plan, s)
    # Two co-assigned tasks at half frequency each: 2 * 0.135/4 = 0.0675 J.
    assert abs(res.c6[1] - (0.0675 - 0.5)) < 1e-12
    assert res.c6[0] == -0.5 and res.c6[2] == -0.5
    assert np.all(res.c2 == 0.0)


def test_residuals_c3_three_on_bs_violated():
    s = _scenario()
    a = Assignment.from_servers([3, 3, 3, 0], 4)
    plan = _equal_split_plan(a, s)
    res = residuals(a.matrix, plan, s)
    # Compute alone takes 0.15 s on a 3-way shared CPU, over the 0.105 s cap.
    for n in (0, 1, 2):
        assert res.c3[n] > 0.045


def test_residuals_budget_accounting():
    s = _scenario()
    a = Assignment.from_servers([0, 1, 2, 3], 4)
    plan = _equal_split_plan(a, s)
    res = residuals(a.matrix, plan, s)
    assert abs(res.c4) < 1e-9
    assert abs(res.c5) < 1e-9
    # Inactive coordinates do not count toward the budgets.
    plan.b_access[0, 3] = 1e9
    plan.b_s[3, 0] = 1e9
    res = residuals(a.matrix, plan, s)
    assert abs(res.c4) < 1e-9
    assert abs(res.c5) < 1e-9
    assert np.max(np.abs(res.consensus)) > 1e8


def test_sat_compute_energy_bookkeeping():
    s = _scenario()
    a = Assignment.from_servers([0, 0, 1, 3], 4)
    x = a.matrix
    total = sum(sat_compute_energy(j, x, s) for j in range(3))
    per_ue = 0.0
    for n, j in enumerate(a.servers):
        if j < 3:
            m = a.count_on(j)
            per_ue += (s.compute.eta_sat[n] * s.topology.task_bits[n]
                       * s.compute.kappa[n] * (s.compute.f_sat[j] / m) ** 2)
    assert abs(total - per_ue) < 1e-15
    assert sat_compute_energy(2, x, s) == 0.0


def test_total_energy_convex_on_active_segments():
    s = _scenario()
    a = Assignment.from_servers([0, 1, 3, 3], 4)
    x = a.matrix
    rng = np.random.default_rng(11)
    for _ in range(20):
        def random_plan():
            b_access = np.zeros((4, 4))
            b_s = np.zeros((4, 3))
            for i, j in enumerate(a.servers):
                b_access[i, j] = rng.uniform(1e5, 2e7)
            for i in (0, 1):
                b_s[i, a.servers[i]] = rng.uniform(1e5, 2e7)
            return BandwidthPlan.from_bandwidths(b_access, b_s)

        p1, p2 = random_plan(), random_plan()
        mid = BandwidthPlan.from_bandwidths(
            0.5 * (p1.b_access + p2.b_access), 0.5 * (p1.b_s + p2.b_s))
        e1 = total_energy(x, p1, s)
        e2 = total_energy(x, p2, s)
        em = total_energy(x, mid, s)
        assert em <= 0.5 * (e1 + e2) + 1e-9 * (e1 + e2)


def test_augmented_lagrangian_reductions():
    s = _scenario()
    a = Assignment.from_servers([0, 1, 3, 3], 4)
    plan = _equal_split_plan(a, s)
    rho = 1e-15
    # At consensus with zero dual the penalty vanishes.
    assert abs(augmented_lagrangian(a.matrix, plan, s, rho)
               - total_energy(a.matrix, plan, s)) < 1e-15
    # With rho = 0 only the splitting-form objective remains.
    plan.xi = plan.xi * 0.9
    assert abs(augmented_lagrangian(a.matrix, plan, s, 0.0)
               - total_energy(a.matrix, plan, s, use_xi_for_terr=True)) \
        < 1e-15


def test_augmented_lagrangian_penalty_quadratic():
    s = _scenario()
    a = Assignment.from_servers([0, 1, 3, 3], 4)
    plan = _equal_split_plan(a, s)
    rho = 1e-15
    base = augmented_lagrangian(a.matrix, plan, s, rho)
    # Perturb xi on a coordinate that no energy term reads (inactive
    # backhaul of a BS-assigned UE): the change is purely the penalty.
    k = plan.n_ues * plan.n_servers + 2 * (plan.n_servers - 1) + 0
    delta = 3e5
    gap_before = plan.b_flat[k] - plan.xi[k] - plan.varpi[k]
    plan.xi[k] += delta
    after = augmented_lagrangian(a.matrix, plan, s, rho)
    expected = 0.5 * rho * ((gap_before - delta) ** 2 - gap_before ** 2)
    assert abs((after - base) - expected) < 1e-12 * max(1.0, abs(base))
