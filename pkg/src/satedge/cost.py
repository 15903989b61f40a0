"""Energy objective, latency aggregates, constraint residuals, Lagrangian.

Server indexing: column ``J-1`` of an assignment matrix is the
terrestrial BS, columns ``0..J-2`` are satellites.  A task served by a
satellite consumes UE uplink energy plus BS forwarding energy; a task
served by the BS consumes UE uplink energy plus the compute energy of
the shared terrestrial CPU, whose frequency splits evenly among the
tasks assigned to it.  Satellite compute energy does not enter the
objective; it is budgeted per satellite by a separate constraint.

Infeasibility (zero rate on an active link) surfaces as infinite
energy or latency values, never as an exception, so enumeration code
can rank candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from satedge.channel import (
    access_latency,
    access_rate,
    backhaul_rate,
    sat_total_latency,
)
from satedge.scenario import Scenario


@dataclass(frozen=True)
class Assignment:
    """Binary server-selection matrix; each row selects exactly one column."""

    x: tuple[tuple[int, ...], ...]

    @classmethod
    def from_servers(cls, servers, n_servers: int) -> "Assignment":
        rows = []
        for j in servers:
            if not 0 <= j < n_servers:
                raise ValueError(f"server index {j} out of range")
            rows.append(tuple(int(k == j) for k in range(n_servers)))
        return cls(x=tuple(rows))

    @property
    def n_ues(self) -> int:
        return len(self.x)

    @property
    def n_servers(self) -> int:
        return len(self.x[0])

    @property
    def bs_col(self) -> int:
        return self.n_servers - 1

    @property
    def servers(self) -> tuple[int, ...]:
        """Chosen server index per UE."""
        return tuple(row.index(1) for row in self.x)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.x, dtype=int)

    def count_on(self, j: int) -> int:
        return sum(row[j] for row in self.x)

    def is_valid(self) -> bool:
        for row in self.x:
            if any(v not in (0, 1) for v in row):
                return False
            if sum(row) != 1:
                return False
        return True


@dataclass
class BandwidthPlan:
    """Bandwidth allocations plus the consensus copy and scaled dual.

    ``xi`` and ``varpi`` are flat vectors over all N(2J-1) bandwidth
    coordinates; the flattening order is row-major ``b_access`` first,
    then row-major ``b_s``.
    """

    b_access: np.ndarray   # (N, J) Hz
    b_s: np.ndarray        # (N, J-1) Hz
    xi: np.ndarray         # (N(2J-1),) Hz
    varpi: np.ndarray      # (N(2J-1),) Hz

    @classmethod
    def zeros(cls, n_ues: int, n_servers: int) -> "BandwidthPlan":
        k = n_ues * (2 * n_servers - 1)
        return cls(b_access=np.zeros((n_ues, n_servers)),
                   b_s=np.zeros((n_ues, n_servers - 1)),
                   xi=np.zeros(k), varpi=np.zeros(k))

    @classmethod
    def from_bandwidths(cls, b_access, b_s) -> "BandwidthPlan":
        """Start at consensus: xi copies the bandwidths, dual at zero."""
        b_access = np.asarray(b_access, dtype=float)
        b_s = np.asarray(b_s, dtype=float)
        flat = flatten_bandwidths(b_access, b_s)
        return cls(b_access=b_access.copy(), b_s=b_s.copy(),
                   xi=flat.copy(), varpi=np.zeros_like(flat))

    @property
    def n_ues(self) -> int:
        return self.b_access.shape[0]

    @property
    def n_servers(self) -> int:
        return self.b_access.shape[1]

    @property
    def b_flat(self) -> np.ndarray:
        return flatten_bandwidths(self.b_access, self.b_s)

    @property
    def xi_access(self) -> np.ndarray:
        """Access block of xi, reshaped to match b_access."""
        n, j = self.b_access.shape
        return self.xi[:n * j].reshape(n, j)

    @property
    def xi_backhaul(self) -> np.ndarray:
        n, j = self.b_access.shape
        return self.xi[n * j:].reshape(n, j - 1)

    def copy(self) -> "BandwidthPlan":
        return BandwidthPlan(b_access=self.b_access.copy(),
                             b_s=self.b_s.copy(),
                             xi=self.xi.copy(),
                             varpi=self.varpi.copy())


def flatten_bandwidths(b_access, b_s) -> np.ndarray:
    return np.concatenate([np.asarray(b_access, dtype=float).ravel(),
                           np.asarray(b_s, dtype=float).ravel()])


def unflatten_bandwidths(vec, n_ues: int, n_servers: int):
    vec = np.asarray(vec, dtype=float)
    na = n_ues * n_servers
    b_access = vec[:na].reshape(n_ues, n_servers)
    b_s = vec[na:].reshape(n_ues, n_servers - 1)
    return b_access, b_s


def _transport_energy(bits: float, rate: float, power: float) -> float:
    """Energy to move bits at a rate with a given transmit power.

    Zero power costs nothing even over a dead link (the latency side
    flags that as infeasible); positive power over a dead link costs
    the infinite sentinel.
    """
    if bits == 0.0 or power == 0.0:
        return 0.0
    if rate <= 0.0:
        return math.inf
    return bits / rate * power


def terr_energy(n: int, x, b_or_xi, s: Scenario) -> float:
    """Energy for serving UE n at the BS: uplink transport plus compute.

    The compute term uses the terrestrial CPU share f_terr/m where m is
    the number of BS-assigned tasks.
    """
    x = np.asarray(x)
    bs_col = x.shape[1] - 1
    bits = s.topology.task_bits[n]
    if bits == 0.0:
        return 0.0
    uplink = _transport_energy(bits, access_rate(n, x, b_or_xi, s),
                               s.radio.p_ue[n])
    m = int(x[:, bs_col].sum())
    f_share = s.compute.f_terr / m
    compute = s.compute.eta_terr[n] * bits * s.compute.kappa[n] * f_share ** 2
    return uplink + compute


def sat_energy(n: int, x, b_access, b_s, s: Scenario) -> float:
    """Transport energy for serving UE n on a satellite (uplink + forwarding)."""
    bits = s.topology.task_bits[n]
    if bits == 0.0:
        return 0.0
    return _transport_energy(bits, access_rate(n, x, b_access, s),
                             s.radio.p_ue[n]) \
        + _transport_energy(bits, backhaul_rate(n, x, b_s, s),
                            s.radio.p_bs[n])


def sat_compute_energy(j: int, x, s: Scenario) -> float:
    """Compute energy spent by satellite j; 0 when no task is assigned."""
    x = np.asarray(x)
    m = int(x[:, j].sum())
    if m == 0:
        return 0.0
    f_share = s.compute.f_sat[j] / m
    total = 0.0
    for n in range(x.shape[0]):
        if x[n, j]:
            total += (s.compute.eta_sat[n] * s.topology.task_bits[n]
                      * s.compute.kappa[n] * f_share ** 2)
    return total


def total_energy(x, plan: BandwidthPlan, s: Scenario,
                 use_xi_for_terr: bool = False) -> float:
    """Objective: satellite-branch transport plus BS-branch energy.

    With ``use_xi_for_terr`` the uplink term of BS-assigned UEs reads
    bandwidth from the consensus copy xi instead of b_access, which is
    the form the splitting scheme optimizes.
    """
    xm = np.asarray(x)
    bs_col = xm.shape[1] - 1
    terr_bw = plan.xi_access if use_xi_for_terr else plan.b_access
    total = 0.0
    for n in range(xm.shape[0]):
        if xm[n, bs_col]:
            total += terr_energy(n, xm, terr_bw, s)
        else:
            total += sat_energy(n, xm, plan.b_access, plan.b_s, s)
    return total


def compute_latency(n: int, j_server: int, x, s: Scenario) -> float:
    """Execution time of UE n's task on its server given co-assignment."""
    x = np.asarray(x)
    m = int(x[:, j_server].sum())
    bs_col = x.shape[1] - 1
    f = s.compute.f_terr if j_server == bs_col else s.compute.f_sat[j_server]
    cycles = s.topology.task_bits[n] * s.compute.kappa[n]
    return cycles * m / f


def latency_totals(x, plan: BandwidthPlan, s: Scenario):
    """End-to-end latency per UE: (satellite matrix, terrestrial vector).

    Entries for pairs that are not assigned hold NaN; each UE has
    exactly one defined entry across the two outputs.
    """
    xm = np.asarray(x)
    n_ues, n_servers = xm.shape
    bs_col = n_servers - 1
    t_sat = np.full((n_ues, n_servers - 1), np.nan)
    t_terr = np.full(n_ues, np.nan)
    for n in range(n_ues):
        j = int(np.argmax(xm[n]))
        if j == bs_col:
            t_terr[n] = access_latency(n, xm, plan.b_access, s) \
                + compute_latency(n, j, xm, s)
        else:
            t_sat[n, j] = sat_total_latency(n, j, xm, plan.b_access,
                                            plan.b_s, s) \
                + compute_latency(n, j, xm, s)
    return t_sat, t_terr


@dataclass
class ConstraintResiduals:
    """Signed constraint values; <= 0 (or |.| <= tol for equalities) is satisfied."""

    c2: np.ndarray         # per UE, row sum minus 1 (equality)
    c3: np.ndarray         # per UE, latency minus t_th (s)
    c4: float              # active access bandwidth minus budget (Hz)
    c5: float              # active backhaul bandwidth minus budget (Hz)
    c6: np.ndarray         # per satellite, compute energy minus e_th (J)
    consensus: np.ndarray  # b_flat minus xi (Hz, equality)

    def max_relative_violation(self, s: Scenario) -> float:
        """Worst violation, each family normalized by its natural scale."""
        b_scale = max(s.radio.b_access_total, s.radio.b_s_total)
        worst = max(np.max(np.abs(self.c2)), 0.0)
        if self.c3.size:
            worst = max(worst, float(np.max(self.c3)) / s.compute.t_th)
        worst = max(worst, self.c4 / s.radio.b_access_total)
        worst = max(worst, self.c5 / s.radio.b_s_total)
        for j, v in enumerate(self.c6):
            worst = max(worst, v / s.compute.e_th[j])
        if self.consensus.size:
            worst = max(worst, float(np.max(np.abs(self.consensus))) / b_scale)
        return worst


def residuals(x, plan: BandwidthPlan, s: Scenario) -> ConstraintResiduals:
    xm = np.asarray(x)
    n_ues, n_servers = xm.shape
    bs_col = n_servers - 1

    c2 = xm.sum(axis=1).astype(float) - 1.0

    t_sat, t_terr = latency_totals(xm, plan, s)
    c3 = np.empty(n_ues)
    for n in range(n_ues):
        j = int(np.argmax(xm[n]))
        latency = t_terr[n] if j == bs_col else t_sat[n, j]
        c3[n] = latency - s.compute.t_th

    c4 = float((xm * plan.b_access).sum()) - s.radio.b_access_total
    c5 = float((xm[:, :bs_col] * plan.b_s).sum()) - s.radio.b_s_total

    c6 = np.array([sat_compute_energy(j, xm, s) - s.compute.e_th[j]
                   for j in range(n_servers - 1)])

    consensus = plan.b_flat - plan.xi
    return ConstraintResiduals(c2=c2, c3=c3, c4=c4, c5=c5, c6=c6,
                               consensus=consensus)


def augmented_lagrangian(x, plan: BandwidthPlan, s: Scenario,
                         rho: float) -> float:
    """Objective in splitting form plus the quadratic consensus penalty.

    rho carries units J/Hz^2; the penalty couples b to its copy xi
    through the scaled dual varpi.
    """
    energy = total_energy(x, plan, s, use_xi_for_terr=True)
    gap = plan.b_flat - plan.xi - plan.varpi
    return energy + 0.5 * rho * float(gap @ gap)
