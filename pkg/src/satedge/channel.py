"""Link-level physics: path gains, Shannon rates, transmission latencies.

The access segment is the mmWave uplink from a UE to the BS; the
backhaul segment forwards a task from the BS to its nadir (gateway)
satellite and then over inter-satellite links to the serving satellite.
Only large-scale path gain is modeled, so rates depend on the allocated
bandwidth alone once the scenario is fixed.

All rates are bit/s, latencies s, bandwidths Hz.  A zero bandwidth
yields a zero rate (continuous extension of B*log2(1+c/B)) and an
infinite latency sentinel, never an exception, so search code can rank
infeasible candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from satedge.scenario import Scenario

SPEED_OF_LIGHT = 3.0e8  # m/s

LN2 = math.log(2.0)


def path_gain(f_cf: float, d: float) -> float:
    """Free-space power gain (c / 4 pi f)^2 / d^2 at carrier f_cf over d meters."""
    if f_cf <= 0:
        raise ValueError(f"carrier frequency must be positive, got {f_cf!r}")
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d!r}")
    amp = SPEED_OF_LIGHT / (4.0 * math.pi * f_cf)
    return (amp / d) ** 2


@dataclass(frozen=True)
class LinkGains:
    """Large-scale power gains of one scenario."""

    h_access: tuple[float, ...]   # per UE, uplink to the BS
    h_sat: float                  # BS to gateway satellite
    d_sat: float                  # m, BS to gateway slant range (nadir)


def link_gains(s: Scenario) -> LinkGains:
    h_access = tuple(path_gain(s.radio.f_cf_access, d)
                     for d in s.topology.d_ue_bs)
    d_sat = s.topology.sat_altitude
    return LinkGains(h_access=h_access,
                     h_sat=path_gain(s.radio.f_cf_backhaul, d_sat),
                     d_sat=d_sat)


def rate_term(b: float, c: float) -> float:
    """Shannon rate b*log2(1 + c/b) in bit/s, extended by 0 at b = 0.

    c is the received power over the noise spectral density (Hz); the
    rate is concave increasing in b and saturates at c/ln2.
    """
    if b <= 0.0:
        return 0.0
    return b * math.log1p(c / b) / LN2


def rate_term_d1(b: float, c: float) -> float:
    """First derivative of rate_term in b; diverges as b -> 0+."""
    return math.log1p(c / b) / LN2 - c / (LN2 * (b + c))


def rate_term_d2(b: float, c: float) -> float:
    """Second derivative of rate_term in b; strictly negative for b > 0."""
    return -c * c / (LN2 * b * (b + c) ** 2)


def snr_coeff_access(n: int, s: Scenario) -> float:
    """Received access power over noise PSD for UE n, in Hz."""
    h = path_gain(s.radio.f_cf_access, s.topology.d_ue_bs[n])
    return (s.radio.g_ue_tx * s.radio.g_bs_rx * s.radio.p_ue[n] * h
            / s.radio.noise_psd_access)


def snr_coeff_backhaul(n: int, s: Scenario) -> float:
    """Received backhaul power over noise PSD for UE n's forwarding, in Hz."""
    h = path_gain(s.radio.f_cf_backhaul, s.topology.sat_altitude)
    return (s.radio.g_bs_tx * s.radio.g_sat_rx * s.radio.p_bs[n] * h
            / s.radio.noise_psd_backhaul)


def access_rate(n: int, x, b_access, s: Scenario) -> float:
    """Uplink rate of UE n under assignment x and access allocation b_access."""
    x = np.asarray(x)
    b_access = np.asarray(b_access, dtype=float)
    c = snr_coeff_access(n, s)
    total = 0.0
    for j in range(x.shape[1]):
        if x[n, j]:
            total += rate_term(b_access[n, j], c)
    return total


def access_latency(n: int, x, b_access, s: Scenario) -> float:
    rate = access_rate(n, x, b_access, s)
    bits = s.topology.task_bits[n]
    if bits == 0.0:
        return 0.0
    if rate <= 0.0:
        return math.inf
    return bits / rate


def backhaul_rate(n: int, x, b_s, s: Scenario) -> float:
    """BS-to-satellite rate for UE n; 0 when the UE is served by the BS."""
    x = np.asarray(x)
    b_s = np.asarray(b_s, dtype=float)
    c = snr_coeff_backhaul(n, s)
    total = 0.0
    for j in range(s.topology.n_sats):
        if x[n, j]:
            total += rate_term(b_s[n, j], c)
    return total


def isl_hops(j: int, s: Scenario) -> int:
    """ISL hop count from the gateway satellite to satellite j (same orbit)."""
    return abs(j - s.topology.gateway_sat_index)


def sat_total_latency(n: int, j: int, x, b_access, b_s, s: Scenario) -> float:
    """Transmission latency of UE n's task to satellite j.

    Access uplink, BS-to-gateway backhaul transmission, gateway slant
    propagation, then per-hop ISL transmission and propagation to the
    serving satellite.  Compute latency is accounted separately.
    """
    t_access = access_latency(n, x, b_access, s)
    rate_bh = backhaul_rate(n, x, b_s, s)
    bits = s.topology.task_bits[n]
    if rate_bh <= 0.0 and bits > 0.0:
        return math.inf
    t_backhaul = bits / rate_bh if bits > 0.0 else 0.0
    hops = isl_hops(j, s)
    t_prop = s.topology.sat_altitude / SPEED_OF_LIGHT
    t_isl = hops * (bits / s.topology.isl_rate + s.topology.isl_hop_delay)
    return t_access + t_backhaul + t_prop + t_isl
