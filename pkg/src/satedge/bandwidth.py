"""Convex bandwidth subproblems via a log-barrier interior-point method.

For a fixed server assignment the remaining problem is convex: energy
and latency are sums of terms e/R(b) and l/R(b) with R concave
increasing in the allocated bandwidth b, subject to per-UE latency
budgets, the two total-bandwidth caps, and nonnegativity.  Only the
bandwidth coordinates of active (UE, server) pairs enter; for N UEs
that is at most 2N variables, so dense Newton steps are cheap.

Internally everything is rescaled to MHz.  In raw Hz the quadratic
consensus penalty and the Hessian entries differ by ~24 orders of
magnitude, which wrecks the conditioning of the Newton system; the
rate function is scale-free under a common rescale of bandwidth and
SNR coefficient, so MHz is a pure change of units.

Solves implement a standard two-phase scheme: phase 1 minimizes the
worst latency violation (a minimax feasibility program, itself solved
with the same barrier machinery) and phase 2 follows the central path
of the actual objective.  KKT multipliers fall out of the final
barrier iterate as 1/(t * slack).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from satedge.channel import (
    SPEED_OF_LIGHT,
    isl_hops,
    rate_term,
    rate_term_d1,
    rate_term_d2,
    snr_coeff_access,
    snr_coeff_backhaul,
)
from satedge.cost import (
    BandwidthPlan,
    compute_latency,
    total_energy,
    unflatten_bandwidths,
)
from satedge.scenario import Scenario

MHZ = 1e6
FLOOR_HZ = 1.0          # C7 interior floor for active coordinates
GAP_TOL = 1e-9          # outer loop stops once (constraint count)/t <= this
PHASE1_TOL = 1e-11      # s; minimax value above -PHASE1_TOL means infeasible


class InfeasibleError(Exception):
    """A constraint family admits no strictly feasible point."""

    def __init__(self, constraint: str, message: str):
        super().__init__(message)
        self.constraint = constraint


@dataclass(frozen=True)
class BarrierSettings:
    t0: float = 1.0
    mu: float = 10.0
    newton_tol: float = 1e-8        # Newton decrement^2 / 2 threshold
    max_newton_iters: int = 60
    outer_iters: int = 30

    def __post_init__(self):
        if not self.mu > 1.0:
            raise ValueError("mu must exceed 1")
        if not (self.t0 > 0 and self.newton_tol > 0):
            raise ValueError("t0 and newton_tol must be positive")


DEFAULT_SETTINGS = BarrierSettings()


@dataclass
class KktReport:
    """Optimality certificate of one barrier solve."""

    residual: float                 # ||grad f + sum lambda_i grad g_i||_2
    multipliers: dict
    barrier_t: float
    newton_iters: int
    objective: float                # inner objective (energy terms + penalty)


@dataclass
class _ActiveSet:
    """Geometry of the active bandwidth coordinates for one assignment.

    Coordinates are ordered access links first (one per UE), then
    backhaul links (one per satellite-served UE).  All bandwidth values
    are MHz, latency weights are s*MHz so that weight/rate(b) is
    seconds when b is MHz.
    """

    n_coords: int
    c: np.ndarray                   # SNR coefficient per coord (MHz)
    lat_w: np.ndarray               # task_bits / 1e6 per coord
    groups: list                    # per UE, np.ndarray of its coord indices
    budgets: np.ndarray             # s, per UE: t_th minus fixed latency
    access_members: np.ndarray
    backhaul_members: np.ndarray
    cap_a: float                    # MHz
    cap_s: float
    flat_idx: np.ndarray            # position in the N(2J-1) flat layout
    servers: tuple


def _active_set(x, s: Scenario) -> _ActiveSet:
    xm = np.asarray(x)
    n_ues, n_servers = xm.shape
    bs_col = n_servers - 1
    servers = tuple(int(np.argmax(xm[n])) for n in range(n_ues))

    coords_c, coords_l, flat_idx = [], [], []
    groups = [[] for _ in range(n_ues)]
    access_members, backhaul_members = [], []
    budgets = np.empty(n_ues)

    for n in range(n_ues):
        j = servers[n]
        fixed = compute_latency(n, j, xm, s)
        if j != bs_col:
            fixed += s.topology.sat_altitude / SPEED_OF_LIGHT
            fixed += isl_hops(j, s) * (s.topology.task_bits[n]
                                       / s.topology.isl_rate
                                       + s.topology.isl_hop_delay)
        budgets[n] = s.compute.t_th - fixed
        if budgets[n] <= 0.0:
            raise InfeasibleError(
                "C3", f"UE {n} on server {j}: fixed latency {fixed:.6g} s "
                f"leaves no transmission budget within t_th "
                f"{s.compute.t_th:.6g} s")
        k = len(coords_c)
        coords_c.append(snr_coeff_access(n, s) / MHZ)
        coords_l.append(s.topology.task_bits[n] / MHZ)
        flat_idx.append(n * n_servers + j)
        groups[n].append(k)
        access_members.append(k)

    for n in range(n_ues):
        j = servers[n]
        if j == bs_col:
            continue
        k = len(coords_c)
        coords_c.append(snr_coeff_backhaul(n, s) / MHZ)
        coords_l.append(s.topology.task_bits[n] / MHZ)
        flat_idx.append(n_ues * n_servers + n * (n_servers - 1) + j)
        groups[n].append(k)
        backhaul_members.append(k)

    act = _ActiveSet(
        n_coords=len(coords_c),
        c=np.array(coords_c), lat_w=np.array(coords_l),
        groups=[np.array(g, dtype=int) for g in groups],
        budgets=budgets,
        access_members=np.array(access_members, dtype=int),
        backhaul_members=np.array(backhaul_members, dtype=int),
        cap_a=s.radio.b_access_total / MHZ,
        cap_s=s.radio.b_s_total / MHZ,
        flat_idx=np.array(flat_idx, dtype=int),
        servers=servers)

    # Rates saturate at c/ln2, so each UE's transmission latency can
    # never drop below sum(l*ln2/c); reject budgets under that floor.
    for n in range(n_ues):
        floor = sum(act.lat_w[k] * math.log(2.0) / act.c[k]
                    for k in act.groups[n])
        if act.budgets[n] <= floor:
            raise InfeasibleError(
                "C3", f"UE {n}: transmission budget {act.budgets[n]:.6g} s "
                f"is below the rate-saturation floor {floor:.6g} s")
    return act


def _phi(act: _ActiveSet, b: np.ndarray):
    """Reciprocal rates and derivatives: phi = 1/R, per coordinate."""
    r = np.array([rate_term(b[k], act.c[k]) for k in range(act.n_coords)])
    r1 = np.array([rate_term_d1(b[k], act.c[k]) for k in range(act.n_coords)])
    r2 = np.array([rate_term_d2(b[k], act.c[k]) for k in range(act.n_coords)])
    phi = 1.0 / r
    phi1 = -r1 / r ** 2
    phi2 = (2.0 * r1 ** 2 - r2 * r) / r ** 3
    return phi, phi1, phi2


def _latencies(act: _ActiveSet, b: np.ndarray) -> np.ndarray:
    phi = np.array([act.lat_w[k] / rate_term(b[k], act.c[k])
                    if b[k] > 0 else math.inf
                    for k in range(act.n_coords)])
    return np.array([phi[g].sum() for g in act.groups])


def _slacks(act: _ActiveSet, b: np.ndarray):
    lat = _latencies(act, b)
    sig = act.budgets - lat
    beta_a = act.cap_a - b[act.access_members].sum()
    beta_s = act.cap_s - b[act.backhaul_members].sum() \
        if act.backhaul_members.size else math.inf
    return sig, beta_a, beta_s


def _barrier_value(act, e, rho, target, t, b, floor):
    """t * objective + barrier, or +inf outside the domain."""
    if np.any(b <= floor):
        return math.inf
    sig, beta_a, beta_s = _slacks(act, b)
    if np.any(sig <= 0.0) or beta_a <= 0.0 or beta_s <= 0.0:
        return math.inf
    phi = np.array([1.0 / rate_term(b[k], act.c[k])
                    for k in range(act.n_coords)])
    f = float(e @ phi)
    if rho > 0.0:
        d = b - target
        f += 0.5 * rho * float(d @ d)
    val = t * f - float(np.sum(np.log(sig))) - math.log(beta_a) \
        - float(np.sum(np.log(b - floor)))
    if act.backhaul_members.size:
        val -= math.log(beta_s)
    return val


def _barrier_system(act, e, rho, target, t, b, floor):
    """Value, gradient, Hessian of the centering objective at b."""
    k = act.n_coords
    phi, phi1, phi2 = _phi(act, b)
    sig, beta_a, beta_s = _slacks(act, b)

    f = float(e @ phi)
    grad = e * phi1
    hess = np.diag(e * phi2)
    if rho > 0.0:
        d = b - target
        f += 0.5 * rho * float(d @ d)
        grad = grad + rho * d
        hess += rho * np.eye(k)
    val = t * f
    grad = t * grad
    hess = t * hess

    for n, g in enumerate(act.groups):
        gg = np.zeros(k)
        gg[g] = act.lat_w[g] * phi1[g]
        val -= math.log(sig[n])
        grad += gg / sig[n]
        hess += np.outer(gg, gg) / sig[n] ** 2
        hess[g, g] += act.lat_w[g] * phi2[g] / sig[n]

    ones_a = np.zeros(k)
    ones_a[act.access_members] = 1.0
    val -= math.log(beta_a)
    grad += ones_a / beta_a
    hess += np.outer(ones_a, ones_a) / beta_a ** 2
    if act.backhaul_members.size:
        ones_s = np.zeros(k)
        ones_s[act.backhaul_members] = 1.0
        val -= math.log(beta_s)
        grad += ones_s / beta_s
        hess += np.outer(ones_s, ones_s) / beta_s ** 2

    margin = b - floor
    val -= float(np.sum(np.log(margin)))
    grad -= 1.0 / margin
    hess[np.arange(k), np.arange(k)] += 1.0 / margin ** 2
    return val, grad, hess


def _centering(act, e, rho, target, t, b, settings, floor, grad_tol=None):
    """Newton with backtracking on the centering objective.

    Stops on the decrement criterion, or on ||grad|| <= grad_tol when a
    gradient target is given (the decrement bounds the centrality gap,
    not the stationarity norm the final certificate reports).
    """
    iters = 0
    for _ in range(settings.max_newton_iters):
        val, grad, hess = _barrier_system(act, e, rho, target, t, b, floor)
        if grad_tol is not None and float(np.linalg.norm(grad)) <= grad_tol:
            break
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            ridge = 1e-12 * float(np.trace(hess)) / len(b)
            step = np.linalg.solve(hess + ridge * np.eye(len(b)), -grad)
        decrement_sq = float(-grad @ step)
        if grad_tol is None and decrement_sq / 2.0 <= settings.newton_tol:
            break
        if decrement_sq <= 0.0:
            break
        alpha = 1.0
        if decrement_sq <= 0.0625:
            # Quadratic convergence region (decrement <= 1/4): the value
            # change is below float resolution of t*f, so only back off
            # far enough to stay inside the barrier domain.
            while alpha > 1e-14 and math.isinf(
                    _barrier_value(act, e, rho, target, t,
                                   b + alpha * step, floor)):
                alpha *= 0.5
        else:
            slope = float(grad @ step)
            while alpha > 1e-14:
                cand = _barrier_value(act, e, rho, target, t,
                                      b + alpha * step, floor)
                if cand <= val + 0.25 * alpha * slope:
                    break
                alpha *= 0.5
        if alpha <= 1e-14:
            break
        b = b + alpha * step
        iters += 1
    return b, iters


def _constraint_count(act) -> int:
    m = len(act.groups) + 1 + act.n_coords
    if act.backhaul_members.size:
        m += 1
    return m


def _phase2(act, e, rho, target, b0, settings):
    floor = FLOOR_HZ / MHZ
    m = _constraint_count(act)
    t = settings.t0
    b = np.asarray(b0, dtype=float).copy()
    total_iters = 0
    for _ in range(settings.outer_iters):
        b, it = _centering(act, e, rho, target, t, b, settings, floor)
        total_iters += it
        if m / t <= GAP_TOL:
            break
        t *= settings.mu

    # The certificate below reports ||grad F_t||/t, so polish at the
    # final t until the gradient itself meets the tolerance.
    b, it = _centering(act, e, rho, target, t, b, settings, floor,
                       grad_tol=0.3 * settings.newton_tol * t)
    total_iters += it

    sig, beta_a, beta_s = _slacks(act, b)
    phi, phi1, phi2 = _phi(act, b)
    lam_lat = 1.0 / (t * sig)
    lam_a = 1.0 / (t * beta_a)
    lam_s = 1.0 / (t * beta_s) if act.backhaul_members.size else 0.0
    lam_floor = 1.0 / (t * (b - floor))

    grad_f = e * phi1
    obj = float(e @ phi)
    if rho > 0.0:
        d = b - target
        grad_f = grad_f + rho * d
        obj += 0.5 * rho * float(d @ d)
    stat = grad_f - lam_floor
    for n, g in enumerate(act.groups):
        stat[g] += lam_lat[n] * act.lat_w[g] * phi1[g]
    stat[act.access_members] += lam_a
    if act.backhaul_members.size:
        stat[act.backhaul_members] += lam_s

    report = KktReport(
        residual=float(np.linalg.norm(stat)),
        multipliers={"latency": lam_lat, "access_budget": lam_a,
                     "backhaul_budget": lam_s, "floor": lam_floor},
        barrier_t=t, newton_iters=total_iters, objective=obj)
    return b, report


def _equal_split(act) -> np.ndarray:
    b = np.empty(act.n_coords)
    b[act.access_members] = act.cap_a / act.access_members.size
    if act.backhaul_members.size:
        b[act.backhaul_members] = act.cap_s / act.backhaul_members.size
    return b * (1.0 - 1e-6)


def _phase1(act, settings):
    """Minimize the worst latency violation; returns (b, minimax value).

    The slack variable rides along as the last optimization coordinate;
    its start value sits strictly above the worst violation so the
    initial point is interior by construction.
    """
    floor = FLOOR_HZ / MHZ
    b = _equal_split(act)
    lat = _latencies(act, b)
    viol = lat - act.budgets
    sval = float(np.max(viol)) + max(1e-3, 0.1 * abs(float(np.max(viol))))

    n_b = act.n_coords
    m = _constraint_count(act)
    t = settings.t0

    def system(z, t):
        b, sv = z[:n_b], z[n_b]
        phi, phi1, phi2 = _phi(act, b)
        sig, beta_a, beta_s = _slacks(act, b)
        sig = sig + sv
        val = t * sv
        grad = np.zeros(n_b + 1)
        grad[n_b] = t
        hess = np.zeros((n_b + 1, n_b + 1))
        for n, g in enumerate(act.groups):
            gg = np.zeros(n_b + 1)
            gg[g] = act.lat_w[g] * phi1[g]
            gg[n_b] = -1.0
            val -= math.log(sig[n])
            grad += gg / sig[n]
            hess += np.outer(gg, gg) / sig[n] ** 2
            hess[g, g] += act.lat_w[g] * phi2[g] / sig[n]
        ones_a = np.zeros(n_b + 1)
        ones_a[act.access_members] = 1.0
        val -= math.log(beta_a)
        grad += ones_a / beta_a
        hess += np.outer(ones_a, ones_a) / beta_a ** 2
        if act.backhaul_members.size:
            ones_s = np.zeros(n_b + 1)
            ones_s[act.backhaul_members] = 1.0
            val -= math.log(beta_s)
            grad += ones_s / beta_s
            hess += np.outer(ones_s, ones_s) / beta_s ** 2
        margin = b - floor
        val -= float(np.sum(np.log(margin)))
        grad[:n_b] -= 1.0 / margin
        hess[np.arange(n_b), np.arange(n_b)] += 1.0 / margin ** 2
        return val, grad, hess

    def value(z, t):
        b, sv = z[:n_b], z[n_b]
        if np.any(b <= floor):
            return math.inf
        sig, beta_a, beta_s = _slacks(act, b)
        sig = sig + sv
        if np.any(sig <= 0.0) or beta_a <= 0.0 or beta_s <= 0.0:
            return math.inf
        out = t * sv - float(np.sum(np.log(sig))) - math.log(beta_a) \
            - float(np.sum(np.log(b - floor)))
        if act.backhaul_members.size:
            out -= math.log(beta_s)
        return out

    z = np.concatenate([b, [sval]])
    for _ in range(settings.outer_iters + 10):
        for _ in range(settings.max_newton_iters):
            val, grad, hess = system(z, t)
            try:
                step = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError:
                ridge = 1e-12 * float(np.trace(hess)) / len(z)
                step = np.linalg.solve(hess + ridge * np.eye(len(z)), -grad)
            if float(-grad @ step) / 2.0 <= settings.newton_tol:
                break
            alpha, slope = 1.0, float(grad @ step)
            while alpha > 1e-14:
                if value(z + alpha * step, t) <= val + 0.25 * alpha * slope:
                    break
                alpha *= 0.5
            z = z + alpha * step
        # Early exit: any interior point with a safely negative slack
        # already certifies strict feasibility.
        if z[n_b] <= -1e-6:
            break
        if m / t <= PHASE1_TOL / max(abs(z[n_b]), 1e-9):
            break
        t *= settings.mu
        if t > 1e18:
            break
    return z[:n_b], float(z[n_b])


def _initial_point(act, settings, b_hint=None):
    floor = FLOOR_HZ / MHZ
    if b_hint is not None:
        b = np.maximum(np.asarray(b_hint, dtype=float), 2.0 * floor)
        used_a = b[act.access_members].sum()
        if used_a >= act.cap_a:
            b[act.access_members] *= act.cap_a * (1.0 - 1e-9) / used_a
        if act.backhaul_members.size:
            used_s = b[act.backhaul_members].sum()
            if used_s >= act.cap_s:
                b[act.backhaul_members] *= act.cap_s * (1.0 - 1e-9) / used_s
        sig, beta_a, beta_s = _slacks(act, b)
        if np.all(sig > 1e-12) and beta_a > 0.0 and beta_s > 0.0:
            return b

    b = _equal_split(act)
    sig, _, _ = _slacks(act, b)
    if np.all(sig > 1e-12):
        return b

    b, sval = _phase1(act, settings)
    if sval >= -PHASE1_TOL:
        worst = int(np.argmax(_latencies(act, b) - act.budgets))
        raise InfeasibleError(
            "C3", f"no bandwidth split meets the latency budget "
            f"(minimax violation {sval:.3e} s, worst UE {worst})")
    return b


def feasible_init(x, s: Scenario,
                  settings: BarrierSettings = DEFAULT_SETTINGS) -> BandwidthPlan:
    """Strictly feasible bandwidths for an assignment, or typed infeasibility.

    Equal split is used when it already meets every latency budget;
    otherwise the phase-1 minimax reallocation shifts bandwidth toward
    the violated UEs.
    """
    xm = np.asarray(x)
    act = _active_set(xm, s)
    b = _initial_point(act, settings)
    flat = np.zeros(xm.shape[0] * (2 * xm.shape[1] - 1))
    flat[act.flat_idx] = b * MHZ
    b_access, b_s = unflatten_bandwidths(flat, xm.shape[0], xm.shape[1])
    return BandwidthPlan.from_bandwidths(b_access, b_s)


def solve_given_assignment(x, s: Scenario,
                           settings: BarrierSettings = DEFAULT_SETTINGS):
    """Minimize total energy over bandwidths for a fixed assignment.

    Returns ``(plan, energy, report)``; raises :class:`InfeasibleError`
    when the assignment admits no feasible bandwidth split.  This is
    the direct convex solve used by the exhaustive baseline and for
    verification; the consensus machinery is bypassed (xi mirrors b).
    """
    xm = np.asarray(x)
    act = _active_set(xm, s)
    b0 = _initial_point(act, settings)

    e = np.empty(act.n_coords)
    for n, g in enumerate(act.groups):
        e[g[0]] = act.lat_w[g[0]] * s.radio.p_ue[n]
        if len(g) > 1:
            e[g[1]] = act.lat_w[g[1]] * s.radio.p_bs[n]

    b, report = _phase2(act, e, 0.0, np.zeros(act.n_coords), b0, settings)
    flat = np.zeros(xm.shape[0] * (2 * xm.shape[1] - 1))
    flat[act.flat_idx] = b * MHZ
    b_access, b_s = unflatten_bandwidths(flat, xm.shape[0], xm.shape[1])
    plan = BandwidthPlan.from_bandwidths(b_access, b_s)
    return plan, total_energy(xm, plan, s), report


def solve_B_subproblem(x, plan: BandwidthPlan, s: Scenario, rho: float,
                       settings: BarrierSettings = DEFAULT_SETTINGS):
    """Bandwidth update of the splitting scheme; returns (plan, report).

    Minimizes the satellite-branch transport energy plus the quadratic
    consensus penalty subject to latency, cap, and floor constraints.
    Terrestrial uplink energy reads the consensus copy, so BS-assigned
    access coordinates appear only through their latency constraint and
    the penalty.  Inactive coordinates decouple and take their penalty
    minimizer max(0, xi + varpi) in closed form.
    """
    xm = np.asarray(x)
    bs_col = xm.shape[1] - 1
    act = _active_set(xm, s)
    rho_m = rho * MHZ ** 2
    anchor = plan.xi + plan.varpi
    target = anchor[act.flat_idx] / MHZ

    e = np.empty(act.n_coords)
    for n, g in enumerate(act.groups):
        on_bs = act.servers[n] == bs_col
        e[g[0]] = 0.0 if on_bs else act.lat_w[g[0]] * s.radio.p_ue[n]
        if len(g) > 1:
            e[g[1]] = act.lat_w[g[1]] * s.radio.p_bs[n]

    b0 = _initial_point(act, settings, b_hint=plan.b_flat[act.flat_idx] / MHZ)
    b, report = _phase2(act, e, rho_m, target, b0, settings)

    new_flat = np.maximum(0.0, anchor)
    new_flat[act.flat_idx] = b * MHZ
    b_access, b_s = unflatten_bandwidths(new_flat, xm.shape[0], xm.shape[1])
    out = plan.copy()
    out.b_access, out.b_s = b_access, b_s
    return out, report


def _xi_terr_coordinate(e: float, c: float, rho: float, a: float) -> float:
    """Minimize e/R(xi) + (rho/2)(a - xi)^2 over xi >= 0 (MHz units).

    The derivative tends to -inf at 0+ and to +inf with xi, so the
    optimum is interior; safeguarded Newton on the derivative keeps a
    sign-changing bracket at all times.
    """
    if e == 0.0:
        return max(0.0, a)

    def dpsi(v):
        r = rate_term(v, c)
        r1 = rate_term_d1(v, c)
        return -e * r1 / r ** 2 + rho * (v - a)

    lo = 1e-9
    while dpsi(lo) > 0.0:
        lo *= 0.1
        if lo < 1e-300:
            return 0.0
    hi = max(abs(a), 1.0)
    while dpsi(hi) < 0.0:
        hi *= 2.0

    scale = rho * max(1.0, abs(a)) + e / max(rate_term(hi, c), 1e-300)
    tol = 1e-10 * scale
    v = 0.5 * (lo + hi)
    for _ in range(200):
        d = dpsi(v)
        if abs(d) <= tol and (hi - lo) <= 1e-9 * max(1.0, v):
            break
        if d > 0.0:
            hi = v
        else:
            lo = v
        r = rate_term(v, c)
        r1 = rate_term_d1(v, c)
        r2 = rate_term_d2(v, c)
        curv = e * (2.0 * r1 ** 2 - r2 * r) / r ** 3 + rho
        step = -d / curv
        nxt = v + step
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - v) < 1e-16 * max(1.0, v) and (hi - lo) < 1e-12:
            v = nxt
            break
        v = nxt
    return v


def solve_xi_subproblem(x, plan: BandwidthPlan, s: Scenario,
                        rho: float) -> BandwidthPlan:
    """Consensus-copy update: independent 1-D solves per coordinate.

    Every coordinate that does not feed terrestrial uplink energy has
    the closed form max(0, b - varpi); the active access coordinate of
    each BS-assigned UE trades uplink energy against the penalty.
    """
    xm = np.asarray(x)
    n_ues, n_servers = xm.shape
    bs_col = n_servers - 1
    a = plan.b_flat - plan.varpi
    xi_new = np.maximum(0.0, a)
    for n in range(n_ues):
        if not xm[n, bs_col]:
            continue
        k = n * n_servers + bs_col
        e = (s.topology.task_bits[n] / MHZ) * s.radio.p_ue[n]
        c = snr_coeff_access(n, s) / MHZ
        xi_new[k] = _xi_terr_coordinate(e, c, rho * MHZ ** 2, a[k] / MHZ) * MHZ
    out = plan.copy()
    out.xi = xi_new
    return out


def update_varpi(plan: BandwidthPlan) -> BandwidthPlan:
    """Scaled dual update: varpi <- varpi - (b - xi)."""
    out = plan.copy()
    out.varpi = plan.varpi - (plan.b_flat - plan.xi)
    return out
