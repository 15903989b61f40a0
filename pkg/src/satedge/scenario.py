"""Problem instances for satellite-terrestrial edge offloading.

A scenario bundles everything the optimizer needs to know about one
network snapshot: mmWave access and satellite backhaul link budgets,
compute capacities and energy coefficients of the edge servers, and the
topology (UE placement, LEO constellation geometry, task sizes).

Conventions
-----------
* All stored quantities are SI (Hz, W, s, J, m, bit, cycles/bit).
* dB-scale source values keep a ``_dbi`` / ``_dbm`` suffix and are the
  fields that serialize; linear equivalents are exposed as properties.
* Per-UE and per-satellite quantities are tuples, so instances hash and
  compare exactly and survive a save/load round trip bit for bit.
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass

import numpy as np
import yaml

SCHEMA_VERSION = 1

# UE-to-BS distances are drawn uniformly from this interval (meters).
DIST_INTERVAL_M = (100.0, 400.0)


class ConfigError(ValueError):
    """Raised for malformed overrides or scenario documents."""


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watt(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class RadioParams:
    """Link-budget parameters for the access and backhaul segments."""

    g_ue_tx_dbi: float
    g_bs_rx_dbi: float
    g_bs_tx_dbi: float
    g_sat_rx_dbi: float
    p_ue_dbm: tuple[float, ...]        # per UE
    p_bs_dbm: tuple[float, ...]        # per UE (BS forwarding power)
    f_cf_access: float                 # Hz
    f_cf_backhaul: float               # Hz
    noise_psd_access_dbm: float        # dBm/Hz
    noise_psd_backhaul_dbm: float      # dBm/Hz
    b_access_total: float              # Hz
    b_s_total: float                   # Hz

    @property
    def g_ue_tx(self) -> float:
        return db_to_linear(self.g_ue_tx_dbi)

    @property
    def g_bs_rx(self) -> float:
        return db_to_linear(self.g_bs_rx_dbi)

    @property
    def g_bs_tx(self) -> float:
        return db_to_linear(self.g_bs_tx_dbi)

    @property
    def g_sat_rx(self) -> float:
        return db_to_linear(self.g_sat_rx_dbi)

    @property
    def p_ue(self) -> tuple[float, ...]:
        """UE transmit powers in W."""
        return tuple(dbm_to_watt(p) for p in self.p_ue_dbm)

    @property
    def p_bs(self) -> tuple[float, ...]:
        """BS transmit powers in W, one per forwarded task."""
        return tuple(dbm_to_watt(p) for p in self.p_bs_dbm)

    @property
    def noise_psd_access(self) -> float:
        """Access-link noise power spectral density in W/Hz."""
        return dbm_to_watt(self.noise_psd_access_dbm)

    @property
    def noise_psd_backhaul(self) -> float:
        return dbm_to_watt(self.noise_psd_backhaul_dbm)


@dataclass(frozen=True)
class ComputeParams:
    """Server compute capacities and energy coefficients."""

    kappa: tuple[float, ...]           # cycles/bit, per UE task
    f_terr: float                      # Hz, terrestrial server
    f_sat: tuple[float, ...]           # Hz, per satellite
    eta_terr: tuple[float, ...]        # switched capacitance, per UE
    eta_sat: tuple[float, ...]         # switched capacitance, per UE
    e_th: tuple[float, ...]            # J, per-satellite energy budget
    t_th: float                        # s, end-to-end latency budget


@dataclass(frozen=True)
class TopologyParams:
    """Node counts, geometry, and task sizes."""

    n_ues: int
    n_sats: int
    d_ue_bs: tuple[float, ...]         # m, per UE
    sat_altitude: float                # m
    gateway_sat_index: int             # satellite at the BS nadir
    isl_rate: float                    # bit/s
    isl_hop_delay: float               # s, per ISL hop
    task_bits: tuple[float, ...]       # bits, per UE


@dataclass(frozen=True)
class Scenario:
    radio: RadioParams
    compute: ComputeParams
    topology: TopologyParams
    seed: int

    @property
    def n_servers(self) -> int:
        """Satellites plus the terrestrial BS."""
        return self.topology.n_sats + 1


# Default parameter tree.  Per-UE / per-satellite entries may be given as
# scalars here or in overrides; they broadcast to the node count.
_DEFAULTS: dict = {
    "radio": {
        "g_ue_tx_dbi": 4.0,
        "g_bs_rx_dbi": 15.0,
        "g_bs_tx_dbi": 38.0,
        "g_sat_rx_dbi": 38.0,
        "p_ue_dbm": 23.0,
        "p_bs_dbm": 40.97,
        "f_cf_access": 28e9,
        "f_cf_backhaul": 30e9,
        "noise_psd_access_dbm": -174.0,
        "noise_psd_backhaul_dbm": -174.0,
        "b_access_total": 50e6,
        "b_s_total": 100e6,
    },
    "compute": {
        "kappa": 300.0,
        "f_terr": 3e9,
        "f_sat": 3e9,
        "eta_terr": 1e-28,
        "eta_sat": 1e-28,
        "e_th": 0.5,
        "t_th": 0.105,
    },
    "topology": {
        "n_ues": 4,
        "n_sats": 3,
        "d_ue_bs": None,               # sampled from DIST_INTERVAL_M
        "sat_altitude": 600e3,
        "gateway_sat_index": 1,
        "isl_rate": 1e10,
        "isl_hop_delay": 1.46e-3,
        "task_bits": 5e5,
    },
}

_PER_UE_FIELDS = {
    "p_ue_dbm", "p_bs_dbm", "kappa", "eta_terr", "eta_sat",
    "d_ue_bs", "task_bits",
}
_PER_SAT_FIELDS = {"f_sat", "e_th"}


def _merge(base: dict, overrides: dict, path: str = "") -> None:
    for key, value in overrides.items():
        if key not in base:
            raise ConfigError(f"unknown override key: {path}{key}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"override for {path}{key} must be a mapping")
            _merge(base[key], value, path=f"{path}{key}.")
        else:
            base[key] = value


def _as_tuple(value, count: int) -> tuple[float, ...]:
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in value)
    return (float(value),) * count


def _build_scenario(tree: dict, seed: int) -> Scenario:
    topo = tree["topology"]
    n_ues = int(topo["n_ues"])
    n_sats = int(topo["n_sats"])

    def field_value(section: str, name: str):
        raw = tree[section][name]
        if name in _PER_UE_FIELDS:
            return _as_tuple(raw, n_ues)
        if name in _PER_SAT_FIELDS:
            return _as_tuple(raw, n_sats)
        if name in ("n_ues", "n_sats", "gateway_sat_index"):
            return int(raw)
        return float(raw)

    radio = RadioParams(**{f.name: field_value("radio", f.name)
                           for f in dataclasses.fields(RadioParams)})
    compute = ComputeParams(**{f.name: field_value("compute", f.name)
                               for f in dataclasses.fields(ComputeParams)})
    topology = TopologyParams(**{f.name: field_value("topology", f.name)
                                 for f in dataclasses.fields(TopologyParams)})
    return Scenario(radio=radio, compute=compute, topology=topology,
                    seed=int(seed))


def generate_scenario(seed: int = 0, overrides: dict | None = None) -> Scenario:
    """Build a scenario from defaults, an override tree, and a seed.

    Only UE placement is random; everything else is deterministic, so
    two scenarios with different seeds differ in ``d_ue_bs`` alone.
    Unknown override keys raise :class:`ConfigError`.
    """
    tree = copy.deepcopy(_DEFAULTS)
    _merge(tree, overrides or {})
    if tree["topology"]["d_ue_bs"] is None:
        rng = np.random.default_rng(seed)
        lo, hi = DIST_INTERVAL_M
        n_ues = int(tree["topology"]["n_ues"])
        tree["topology"]["d_ue_bs"] = [float(d)
                                       for d in rng.uniform(lo, hi, n_ues)]
    return _build_scenario(tree, seed)


def validate(s: Scenario) -> list[str]:
    """Return a list of invariant violations, empty when the scenario is usable.

    Violations are data rather than exceptions so callers can report all
    of them at once.  Besides type-level checks (positivity, tuple
    lengths, index ranges) this verifies that every task could meet the
    latency budget on at least one server given unlimited bandwidth,
    i.e. that pure compute latency does not already exceed ``t_th``.
    """
    out: list[str] = []
    radio, comp, topo = s.radio, s.compute, s.topology
    n_ues, n_sats = topo.n_ues, topo.n_sats

    if n_ues < 1:
        out.append("topology.n_ues must be at least 1")
    if n_sats < 1:
        out.append("topology.n_sats must be at least 1")

    for name, value in [("radio.f_cf_access", radio.f_cf_access),
                        ("radio.f_cf_backhaul", radio.f_cf_backhaul),
                        ("radio.b_access_total", radio.b_access_total),
                        ("radio.b_s_total", radio.b_s_total),
                        ("compute.f_terr", comp.f_terr),
                        ("compute.t_th", comp.t_th),
                        ("topology.sat_altitude", topo.sat_altitude),
                        ("topology.isl_rate", topo.isl_rate)]:
        if not value > 0:
            out.append(f"{name} must be positive, got {value!r}")
    if topo.isl_hop_delay < 0:
        out.append(f"topology.isl_hop_delay must be nonnegative, "
                   f"got {topo.isl_hop_delay!r}")

    per_ue = [("radio.p_ue_dbm", radio.p_ue_dbm),
              ("radio.p_bs_dbm", radio.p_bs_dbm),
              ("compute.kappa", comp.kappa),
              ("compute.eta_terr", comp.eta_terr),
              ("compute.eta_sat", comp.eta_sat),
              ("topology.d_ue_bs", topo.d_ue_bs),
              ("topology.task_bits", topo.task_bits)]
    for name, seq in per_ue:
        if len(seq) != n_ues:
            out.append(f"{name} length {len(seq)} != n_ues {n_ues}")
    for name, seq in [("compute.f_sat", comp.f_sat),
                      ("compute.e_th", comp.e_th)]:
        if len(seq) != n_sats:
            out.append(f"{name} length {len(seq)} != n_sats {n_sats}")

    for name, seq in [("compute.kappa", comp.kappa),
                      ("compute.f_sat", comp.f_sat),
                      ("compute.eta_terr", comp.eta_terr),
                      ("compute.eta_sat", comp.eta_sat),
                      ("compute.e_th", comp.e_th),
                      ("topology.task_bits", topo.task_bits)]:
        for i, v in enumerate(seq):
            if not v > 0:
                out.append(f"{name}[{i}] must be positive, got {v!r}")

    lo, hi = DIST_INTERVAL_M
    for i, d in enumerate(topo.d_ue_bs):
        if not (lo <= d <= hi):
            out.append(f"topology.d_ue_bs[{i}] = {d!r} outside sampling "
                       f"interval [{lo}, {hi}] m")

    if not (0 <= topo.gateway_sat_index < n_sats):
        out.append(f"topology.gateway_sat_index {topo.gateway_sat_index} "
                   f"out of range [0, {n_sats})")

    # Feasibility floor: with unlimited bandwidth, transmission latency
    # vanishes, so some server must finish the computation within t_th.
    speeds = (comp.f_terr,) + comp.f_sat
    structure_ok = (len(comp.kappa) == n_ues
                    and len(topo.task_bits) == n_ues
                    and all(f > 0 for f in speeds))
    if structure_ok:
        for n in range(n_ues):
            cycles = topo.task_bits[n] * comp.kappa[n]
            best = min(cycles / f for f in speeds)
            if best > comp.t_th:
                out.append(f"latency budget unreachable for UE {n}: "
                           f"minimum compute latency {best:.6g} s "
                           f"exceeds t_th {comp.t_th:.6g} s")
    return out


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": s.seed,
        "radio": dataclasses.asdict(s.radio),
        "compute": dataclasses.asdict(s.compute),
        "topology": dataclasses.asdict(s.topology),
    }


def save_scenario(s: Scenario, path) -> None:
    """Write the scenario as a schema-versioned YAML document."""
    doc = scenario_to_dict(s)
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


_SECTIONS = {"radio": RadioParams, "compute": ComputeParams,
             "topology": TopologyParams}


def load_scenario(path) -> Scenario:
    """Load a YAML scenario document, checking schema and field coverage.

    Every field must be present; per-node fields may be scalars and then
    broadcast.  ``load_scenario(save_scenario(s)) == s`` holds exactly.
    """
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: document is not a mapping")

    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {version!r}, "
                          f"expected {SCHEMA_VERSION}")
    known_top = set(_SECTIONS) | {"schema_version", "seed"}
    for key in doc:
        if key not in known_top:
            raise ConfigError(f"{path}: unknown field: {key}")
    if "seed" not in doc:
        raise ConfigError(f"{path}: missing field: seed")

    tree: dict = {}
    for section, cls in _SECTIONS.items():
        if section not in doc or not isinstance(doc[section], dict):
            raise ConfigError(f"{path}: missing section: {section}")
        body = doc[section]
        names = {f.name for f in dataclasses.fields(cls)}
        for key in body:
            if key not in names:
                raise ConfigError(f"{path}: unknown field: {section}.{key}")
        for name in names:
            if name not in body:
                raise ConfigError(f"{path}: missing field: {section}.{name}")
        tree[section] = dict(body)
    return _build_scenario(tree, doc["seed"])
