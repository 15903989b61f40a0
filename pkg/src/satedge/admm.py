"""Consensus splitting loop for the joint offloading problem.

Each sweep updates the discrete assignment, the bandwidth vector, the
consensus copy, and the scaled dual, in that order.  The assignment
update screens its candidates (every tuple the inner solver visited,
or the whole space for the enumerating solver) at their own optimal
bandwidths, because a frozen plan starves exactly the coordinates a
rival assignment would need and so can never rank rivals fairly.  A
descent gate then compares the winner against the last accepted
objective value, so no sweep ratchets the objective upward by more
than the slack; a gated candidate from a learned solver is retried
once with a doubled training budget before the previous assignment is
kept.  A sweep that switches assignments restarts the consensus state
at the winner's bandwidths with the scaled dual aligned to their
slopes, which keeps the logged objective on its descent path.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import report
from .agent import HybridAgent, solve_x_subproblem, state_dim
from .bandwidth import (
    DEFAULT_SETTINGS,
    BarrierSettings,
    InfeasibleError,
    feasible_init,
    solve_B_subproblem,
    solve_given_assignment,
    solve_xi_subproblem,
    update_varpi,
)
from .baselines import ENUMERATION_CAP, enumerate_assignments
from .cost import (
    Assignment,
    BandwidthPlan,
    augmented_lagrangian,
    residuals,
    sat_compute_energy,
    total_energy,
)
from .duality import AscentSchedule, DualState, ExhaustiveMinimizer
from .scenario import ConfigError, Scenario, validate
from .vqc import CircuitSpec

X_SOLVERS = ("hybrid", "classical", "exhaustive")

# Above this many assignments the feasibility probe switches from a full
# scan to round-robin spread patterns.
PROBE_CAP = 4096


@dataclass(frozen=True)
class AdmmSettings:
    """Knobs of the splitting loop.

    rho carries J/Hz^2; the default is 1e-3 J/MHz^2, which keeps the
    quadratic penalty on the same footing as transport energies once the
    subproblem solvers rescale bandwidths to MHz.  epsilon_slack is
    relative: each descent comparison uses epsilon_slack * |reference|.
    """

    rho: float = 1e-15
    max_iters: int = 40
    primal_tol: float = 1e-6
    dual_tol: float = 1e-4
    epsilon_slack: float = 1e-9
    x_solver: str = "hybrid"

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (self.primal_tol > 0 and self.dual_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.epsilon_slack < 0:
            raise ValueError("epsilon_slack must be nonnegative")
        if self.x_solver not in X_SOLVERS:
            raise ValueError(f"unknown x_solver {self.x_solver!r}; "
                             f"expected one of {X_SOLVERS}")


@dataclass
class IterateRow:
    iteration: int
    accepted: bool
    lagrangian: float      # augmented objective of the kept assignment
    energy: float          # plain objective at the post-sweep plan
    dual_value: float      # best dual bound seen by this x-update
    consensus: float       # ||b - xi|| after the sweep (Hz)
    xi_change: float       # ||xi - xi_prev|| within the sweep (Hz)
    servers: tuple


@dataclass
class IterateLog:
    """Per-sweep history plus the convergence verdict."""

    rows: list = field(default_factory=list)
    converged: bool = False

    COLUMNS = ("iteration", "accepted", "lagrangian", "energy",
               "dual_value", "consensus", "xi_change", "servers")

    def append(self, row: IterateRow):
        self.rows.append(row)

    def accepted_lagrangians(self):
        return [r.lagrangian for r in self.rows if r.accepted]

    def csv_rows(self):
        return [(r.iteration, r.accepted, r.lagrangian, r.energy,
                 r.dual_value, r.consensus, r.xi_change,
                 "-".join(str(v) for v in r.servers))
                for r in self.rows]

    def write_csv(self, path, metadata=None, excluded=None):
        return report.write_csv(path, self.COLUMNS, self.csv_rows(),
                                metadata=metadata, excluded=excluded)


class DivergenceError(RuntimeError):
    """An inner solver blew up; carries the partial iterate log."""

    def __init__(self, message: str, log: IterateLog):
        super().__init__(message)
        self.log = log


def descent_check(l_new: float, l_old: float, epsilon_slack: float) -> bool:
    """Accept iff the objective does not rise by more than the slack."""
    return l_new - l_old <= epsilon_slack


def initial_plan(s: Scenario) -> BandwidthPlan:
    """Equal split over every coordinate, copy in consensus, dual zero.

    Spreading mass on inactive coordinates keeps every candidate
    assignment's objective finite during the first x-updates.
    """
    n, j = s.topology.n_ues, s.n_servers
    plan = BandwidthPlan.zeros(n, j)
    plan.b_access[:, :] = s.radio.b_access_total / (n * j)
    plan.b_s[:, :] = s.radio.b_s_total / (n * (j - 1))
    plan.xi = plan.b_flat.copy()
    return plan


def probe_plan(plan: BandwidthPlan, s: Scenario) -> BandwidthPlan:
    """The x-update's view of the consensus state for a learned solver.

    Zero coordinates take the equal split share so that every candidate
    assignment an agent explores keeps a finite objective; without the
    floor, all episodes off the incumbent hit the sentinel reward and
    carry no training signal.  The consensus iterate itself is never
    touched.
    """
    n, j = s.topology.n_ues, s.n_servers
    out = plan.copy()
    floor_a = s.radio.b_access_total / (n * j)
    floor_s = s.radio.b_s_total / (n * (j - 1))
    out.b_access = np.where(out.b_access > 0.0, out.b_access, floor_a)
    out.b_s = np.where(out.b_s > 0.0, out.b_s, floor_s)
    out.xi = out.b_flat
    out.varpi = np.zeros_like(out.xi)
    return out


def _c6_ok(a: Assignment, s: Scenario) -> bool:
    return all(sat_compute_energy(j, a.matrix, s) <= s.compute.e_th[j]
               for j in range(s.n_servers - 1))


def first_feasible_assignment(s: Scenario) -> Assignment:
    """Lexicographically first assignment that admits feasible bandwidths.

    Full scan when the space is small; round-robin spread patterns (which
    balance per-server load, hence compute latency) otherwise.
    """
    n, j = s.topology.n_ues, s.n_servers
    if j ** n <= PROBE_CAP:
        candidates = itertools.product(range(j), repeat=n)
    else:
        candidates = [tuple((k + i) % j for i in range(n)) for k in range(j)]
        candidates.append(tuple([j - 1] * n))
    for servers in candidates:
        a = Assignment.from_servers(servers, j)
        if not _c6_ok(a, s):
            continue
        try:
            feasible_init(a.matrix, s)
        except InfeasibleError:
            continue
        return a
    raise InfeasibleError(
        "C3", "no assignment admits a feasible bandwidth split")


class AssignmentTable:
    """Memoized optimal bandwidth solve per assignment.

    value() maps a server tuple to (energy, plan) with energy inf when
    the assignment is infeasible; best() screens an iterable of tuples
    and keeps the first-seen minimum, so passing candidates in
    lexicographic order reproduces the enumeration tie-break.
    """

    def __init__(self, s: Scenario,
                 barrier: BarrierSettings = DEFAULT_SETTINGS):
        self.s = s
        self.barrier = barrier
        self.cache: dict = {}

    def value(self, servers):
        servers = tuple(int(v) for v in servers)
        hit = self.cache.get(servers)
        if hit is None:
            a = Assignment.from_servers(servers, self.s.n_servers)
            if not _c6_ok(a, self.s):
                hit = (math.inf, None)
            else:
                try:
                    plan, energy, _ = solve_given_assignment(
                        a.matrix, self.s, self.barrier)
                    hit = (energy, plan)
                except InfeasibleError:
                    hit = (math.inf, None)
            self.cache[servers] = hit
        return hit

    def best(self, candidates):
        best_e, best_sv = math.inf, None
        for servers in candidates:
            e, _ = self.value(servers)
            if e < best_e:
                best_e, best_sv = e, tuple(servers)
        return best_e, best_sv


def reanchor(a: Assignment, plan_star: BandwidthPlan, s: Scenario,
             rho: float, align_tol: float = 1.0,
             max_passes: int = 6) -> BandwidthPlan:
    """Consensus state for a freshly adopted assignment.

    Bandwidths and copy start at the assignment's optimum.  Coordinates
    whose energy reads the copy would drift off it, so the scaled dual
    is walked to the fixed point where the copy update returns the
    bandwidths themselves; the walk contracts by roughly the ratio of
    energy curvature to rho per pass.
    """
    plan = BandwidthPlan.from_bandwidths(plan_star.b_access, plan_star.b_s)
    for _ in range(max_passes):
        trial = solve_xi_subproblem(a.matrix, plan, s, rho)
        delta = trial.xi - plan.b_flat
        if float(np.max(np.abs(delta))) <= align_tol:
            break
        plan.varpi = plan.varpi + delta
    plan.xi = plan.b_flat
    return plan


def default_solver(kind: str, s: Scenario, seed: int):
    """The x-update solver behind each AdmmSettings.x_solver name.

    The learned solvers run an 8-qubit circuit here: readout only needs
    n_servers wires and the loop retrains the agent at every multiplier
    iterate, so the statevector width is a pure time knob.
    """
    if kind == "exhaustive":
        return ExhaustiveMinimizer()
    dim, acts = state_dim(s), s.n_servers
    if kind == "classical":
        return HybridAgent.classical(dim, acts, seed=seed)
    circuit = CircuitSpec(n_qubits=8, n_layers=2, n_readout=acts)
    return HybridAgent.hybrid(dim, acts, circuit=circuit, seed=seed)


def run(s: Scenario, settings: AdmmSettings = AdmmSettings(), seed: int = 0,
        *, solver=None, dual_iters: int = 40, episodes_per_iter: int = 10,
        barrier: BarrierSettings = DEFAULT_SETTINGS,
        schedule: AscentSchedule = AscentSchedule()):
    """Full splitting loop; returns (assignment, plan, iterate log).

    Stops once the consensus residual falls under primal_tol * ||b|| and
    the copy's step under dual_tol * ||xi|| on a sweep that kept its
    assignment, or after max_iters sweeps.  Raises InfeasibleError when
    no assignment is feasible and DivergenceError (with the partial
    log) when an inner solver fails.
    """
    problems = validate(s)
    if problems:
        raise ConfigError("scenario failed validation: "
                          + "; ".join(problems))

    if solver is None:
        solver = default_solver(settings.x_solver, s, seed)
    learned = isinstance(solver, HybridAgent)
    table = AssignmentTable(s, barrier)
    pool_all = None
    if not learned:
        n, j = s.topology.n_ues, s.n_servers
        if j ** n > ENUMERATION_CAP:
            raise ValueError(f"{j ** n} assignments exceed the "
                             f"enumeration cap {ENUMERATION_CAP}")
        pool_all = list(enumerate_assignments(n, j))
    x = first_feasible_assignment(s)
    plan = initial_plan(s)
    dual = DualState.zeros(s)
    log = IterateLog()
    l_ref = math.inf
    anchored = None

    for t in range(settings.max_iters):
        try:
            visited = set()
            frozen = probe_plan(plan, s) if learned else plan
            cand, d_best, dual_value = solve_x_subproblem(
                solver, frozen, s, dual, schedule, iters=dual_iters,
                episodes_per_iter=episodes_per_iter, seed=seed + 101 * t,
                visited=visited)
            visited.add(cand.servers)
            visited.add(x.servers)
            pool = pool_all if pool_all is not None else sorted(visited)
            e_win, sv_win = table.best(pool)
            if sv_win is None:
                e_win, sv_win = table.value(x.servers)[0], x.servers
            switched = sv_win != x.servers
            slack = (settings.epsilon_slack * abs(l_ref)
                     if math.isfinite(l_ref) else 0.0)
            accepted = (not switched) or descent_check(e_win, l_ref, slack)
            if not accepted and learned:
                cand, d_best, dual_value = solve_x_subproblem(
                    solver, frozen, s, dual, schedule, iters=dual_iters,
                    episodes_per_iter=2 * episodes_per_iter,
                    seed=seed + 101 * t + 53, visited=visited)
                visited.add(cand.servers)
                e_win, sv_win = table.best(sorted(visited))
                switched = sv_win is not None and sv_win != x.servers
                accepted = ((not switched)
                            or descent_check(e_win, l_ref, slack))
        except FloatingPointError as err:
            raise DivergenceError(
                f"assignment solver diverged at sweep {t}: {err}",
                log) from err

        if not accepted:
            switched = False
        if switched:
            x = Assignment.from_servers(sv_win, s.n_servers)
        if accepted and x.servers != anchored:
            plan = reanchor(x, table.value(x.servers)[1], s, settings.rho)
            anchored = x.servers
        dual = d_best

        plan_b, _ = solve_B_subproblem(x.matrix, plan, s, settings.rho,
                                       barrier)
        plan_xi = solve_xi_subproblem(x.matrix, plan_b, s, settings.rho)
        xi_change = float(np.linalg.norm(plan_xi.xi - plan_b.xi))
        plan = update_varpi(plan_xi)
        consensus = float(np.linalg.norm(plan.b_flat - plan.xi))

        l_logged = augmented_lagrangian(x.matrix, plan, s, settings.rho)
        if accepted:
            l_ref = l_logged
        log.append(IterateRow(
            iteration=t, accepted=accepted, lagrangian=l_logged,
            energy=total_energy(x.matrix, plan, s), dual_value=dual_value,
            consensus=consensus, xi_change=xi_change, servers=x.servers))

        if (t > 0 and not switched
                and consensus <= settings.primal_tol
                * np.linalg.norm(plan.b_flat)
                and xi_change <= settings.dual_tol
                * np.linalg.norm(plan.xi)):
            log.converged = True
            break

    return x, plan, log


def result_document(a: Assignment, plan: BandwidthPlan, s: Scenario,
                    settings: AdmmSettings, log: IterateLog,
                    extras: dict | None = None,
                    elapsed_seconds: float | None = None) -> dict:
    """Structured summary of one solve; every knob that shaped the run
    is recorded so a result file alone suffices to reproduce it."""
    r = residuals(a.matrix, plan, s)
    doc = {
        "scenario": {
            "seed": s.seed,
            "n_ues": s.topology.n_ues,
            "n_servers": s.n_servers,
            "task_bits": list(s.topology.task_bits),
            "b_access_total": s.radio.b_access_total,
            "b_s_total": s.radio.b_s_total,
            "t_th": s.compute.t_th,
            "e_th": list(s.compute.e_th),
        },
        "settings": {
            "rho": settings.rho,
            "max_iters": settings.max_iters,
            "primal_tol": settings.primal_tol,
            "dual_tol": settings.dual_tol,
            "epsilon_slack": settings.epsilon_slack,
            "x_solver": settings.x_solver,
        },
        "assignment": {
            "servers": list(a.servers),
            "matrix": a.matrix.astype(int).tolist(),
        },
        "bandwidth": {
            "b_access": plan.b_access.tolist(),
            "b_s": plan.b_s.tolist(),
            "xi": plan.xi.tolist(),
            "varpi": plan.varpi.tolist(),
        },
        "objective": {
            "energy": total_energy(a.matrix, plan, s),
            "lagrangian": log.rows[-1].lagrangian if log.rows else math.nan,
            "dual_value": log.rows[-1].dual_value if log.rows else math.nan,
        },
        "residuals": {
            "c2_max": float(np.max(np.abs(r.c2))),
            "c3_max": float(np.max(r.c3)),
            "c4": r.c4,
            "c5": r.c5,
            "c6_max": float(np.max(r.c6)),
            "consensus_max": float(np.max(np.abs(r.consensus))),
            "max_relative": r.max_relative_violation(s),
        },
        "iterations": len(log.rows),
        "converged": log.converged,
        # the marked key keeps wall-clock time out of byte comparisons
        "timing": {f"{report.EXCLUDED_MARK} elapsed_seconds":
                   elapsed_seconds},
    }
    if extras:
        doc.update(extras)
    return doc
