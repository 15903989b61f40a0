"""Reference algorithms the learned optimizer is judged against.

Exhaustive search solves the bandwidth problem for every server tuple
and keeps the cheapest feasible one, which is the global optimum at the
scales where enumeration is affordable.  The equal-bandwidth baseline
freezes the band split and only optimizes the assignment.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from satedge.bandwidth import InfeasibleError, solve_given_assignment
from satedge.cost import (
    Assignment,
    BandwidthPlan,
    residuals,
    sat_compute_energy,
    total_energy,
)
from satedge.scenario import Scenario

ENUMERATION_CAP = 1_000_000


def enumerate_assignments(n_ues: int, n_servers: int):
    """All server tuples in lexicographic order."""
    return itertools.product(range(n_servers), repeat=n_ues)


def _c6_ok(x, s: Scenario) -> bool:
    return all(sat_compute_energy(j, x, s) <= s.compute.e_th[j]
               for j in range(s.topology.n_sats))


def _solve_candidate(args):
    """One enumeration entry: (index, value, servers) or a failure tag."""
    index, servers, s = args
    a = Assignment.from_servers(servers, s.n_servers)
    if not _c6_ok(a.matrix, s):
        return index, None, "C6"
    try:
        _, energy, _ = solve_given_assignment(a.matrix, s)
    except InfeasibleError as err:
        return index, None, err.constraint
    return index, energy, None


def exhaustive_search(s: Scenario, cap: int = ENUMERATION_CAP,
                      threads: int = 1, stats: dict | None = None):
    """Global optimum by enumeration of all J^N assignments.

    Ties go to the lowest assignment index, i.e. the lexicographically
    first server tuple.  `stats`, when given, is filled with evaluated,
    feasible, and per-family infeasible counts.
    """
    n_ues, n_servers = s.topology.n_ues, s.n_servers
    count = n_servers ** n_ues
    if count > cap:
        raise ValueError(
            f"{count} assignments exceed the enumeration cap {cap}")

    jobs = [(i, servers, s)
            for i, servers in enumerate(enumerate_assignments(n_ues,
                                                              n_servers))]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_solve_candidate, jobs,
                                    chunksize=max(1, count // threads)))
        results.sort(key=lambda r: r[0])
    else:
        results = [_solve_candidate(job) for job in jobs]

    best_index, best_value = None, math.inf
    families: dict = {}
    feasible = 0
    for index, value, family in results:
        if value is None:
            families[family] = families.get(family, 0) + 1
            continue
        feasible += 1
        if value < best_value:
            best_index, best_value = index, value
    if stats is not None:
        stats["evaluated"] = count
        stats["feasible"] = feasible
        stats["infeasible"] = count - feasible
        stats["infeasible_by_family"] = families
    if best_index is None:
        worst = max(families, key=families.get) if families else "C3"
        raise InfeasibleError(
            worst, f"no feasible assignment among {count} candidates")

    servers = jobs[best_index][1]
    a = Assignment.from_servers(servers, n_servers)
    plan, energy, _ = solve_given_assignment(a.matrix, s)
    return a, plan, energy


def equal_bandwidth_plan(a: Assignment, s: Scenario) -> BandwidthPlan:
    """Fixed split: access evenly over all UEs, backhaul evenly over the
    satellite-served ones."""
    n_ues, n_servers = s.topology.n_ues, s.n_servers
    plan = BandwidthPlan.zeros(n_ues, n_servers)
    sat_count = sum(1 for j in a.servers if j < n_servers - 1)
    for n, j in enumerate(a.servers):
        plan.b_access[n, j] = s.radio.b_access_total / n_ues
        if j < n_servers - 1:
            plan.b_s[n, j] = s.radio.b_s_total / sat_count
    plan.xi = plan.b_flat.copy()
    return plan


def equal_bandwidth(s: Scenario, x_solver=None, cap: int = ENUMERATION_CAP,
                    stats: dict | None = None):
    """Best assignment under the frozen equal band split.

    The default solver enumerates; a callable `x_solver(s, evaluate)`
    may pick the assignment instead, where evaluate maps an Assignment
    to (energy, feasible).
    """

    def evaluate(a: Assignment):
        plan = equal_bandwidth_plan(a, s)
        r = residuals(a.matrix, plan, s)
        if r.max_relative_violation(s) > 1e-9:
            return math.inf, False
        return total_energy(a.matrix, plan, s), True

    if x_solver is not None:
        a = x_solver(s, evaluate)
        energy, feasible = evaluate(a)
        if not feasible:
            raise InfeasibleError(
                "C3", f"assignment {a.servers} violates the equal-split "
                f"constraints")
        return a, energy

    n_ues, n_servers = s.topology.n_ues, s.n_servers
    count = n_servers ** n_ues
    if count > cap:
        raise ValueError(
            f"{count} assignments exceed the enumeration cap {cap}")
    best_a, best_value, feasible_count = None, math.inf, 0
    for servers in enumerate_assignments(n_ues, n_servers):
        a = Assignment.from_servers(servers, n_servers)
        energy, feasible = evaluate(a)
        if not feasible:
            continue
        feasible_count += 1
        if energy < best_value:
            best_a, best_value = a, energy
    if stats is not None:
        stats["evaluated"] = count
        stats["feasible"] = feasible_count
    if best_a is None:
        raise InfeasibleError(
            "C3", f"no assignment is feasible under the equal band split "
            f"({count} candidates)")
    return best_a, best_value
