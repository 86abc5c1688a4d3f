"""End-to-end key-rate pipelines, parameter optimisation, and sweeps.

Passive pipeline: build region quadratures, assemble photon-number
states and observables, bound cross-intensity fidelities, run the yield
and bit-error programs, transfer the test-basis error to a phase-error
bound through the coin overlap, and evaluate the asymptotic rate.  The
refined variant additionally splits single-photon states into their two
dominant eigenvectors and keys on the dominant one.

Injection-locked pipeline: analytic states (no quadrature), decoys in
the test basis only, key-basis yield recovered through the coin transfer
(the single-photon key/test mixtures coincide, so the transfer is the
identity).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import channel as channel_mod
from . import coin, lp, oil, passive
from .lp import InfeasibleProgramError
from .linalg import fidelity, pure_state_fidelity

BITS = (0, 1)
BASES = ("Z", "X")
INTENSITIES = ("I0", "I1", "I2")


def binary_entropy(p: float) -> float:
    """Binary Shannon entropy with the 0 log 0 = 0 convention."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


@dataclass(frozen=True)
class OptimizerSettings:
    """Golden-section coordinate-descent settings."""

    passes: int = 2
    iterations: int = 6
    search_nodes: int = 16
    mu_max_bracket: tuple = (0.05, 1.5)
    delta_theta_z_bracket: tuple = (0.01, 0.5)
    oil_intensity_bracket: tuple = (1e-3, 1.0)


@dataclass(frozen=True)
class ProtocolConfig:
    """Full run configuration; mirrors the JSON config file."""

    transmitter: str = "passive"
    analysis: str = "baseline"
    n_cut: int = 4
    quadrature_nodes: int = 48
    # passive source
    mu_max: float = 0.5
    delta_theta_z: float = 0.1
    delta_theta_x: float = 0.11
    delta_phi_x: float = 0.09
    t1: float = 0.05
    t2: float = 0.01
    # injection-locked source (test-basis intensity ladder)
    mu_in: float = 0.5
    mu_i1: float = 0.1
    mu_i2: float = 1e-4
    # channel
    alpha_db_per_km: float = 0.2
    p_dark: float = 1e-6
    detector_efficiency: float = 1.0
    f_ec: float = 1.16
    # sifting probabilities (asymptotic limit)
    p_zb: float = 1.0
    p_zazb: float = 1.0
    # sweep grids
    distances_km: tuple = (50.0,)
    att_db: tuple = (120.0,)
    seed: int = 1
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self):
        if self.transmitter not in ("passive", "oil"):
            raise ValueError(f"unknown transmitter {self.transmitter!r}")
        if self.analysis not in ("baseline", "refined"):
            raise ValueError(f"unknown analysis {self.analysis!r}")
        if self.transmitter == "oil" and self.analysis == "refined":
            raise ValueError("the refined analysis applies to the passive transmitter only")
        for name in ("p_zb", "p_zazb"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.n_cut < 1:
            raise ValueError("n_cut must be >= 1")


def config_from_dict(data: dict) -> ProtocolConfig:
    """Build a config from a JSON document, rejecting unknown keys."""
    data = dict(data)
    known = {f.name for f in dataclasses.fields(ProtocolConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "optimizer" in data and isinstance(data["optimizer"], dict):
        opt_known = {f.name for f in dataclasses.fields(OptimizerSettings)}
        opt_unknown = set(data["optimizer"]) - opt_known
        if opt_unknown:
            raise ValueError(f"unknown optimizer keys: {sorted(opt_unknown)}")
        opt = dict(data["optimizer"])
        for name in ("mu_max_bracket", "delta_theta_z_bracket", "oil_intensity_bracket"):
            if name in opt:
                opt[name] = tuple(opt[name])
        data["optimizer"] = OptimizerSettings(**opt)
    for name in ("distances_km", "att_db"):
        if name in data:
            data[name] = tuple(data[name])
    return ProtocolConfig(**data)


def config_to_dict(config: ProtocolConfig) -> dict:
    out = dataclasses.asdict(config)
    out["distances_km"] = list(config.distances_km)
    out["att_db"] = list(config.att_db)
    for name in ("mu_max_bracket", "delta_theta_z_bracket", "oil_intensity_bracket"):
        out["optimizer"][name] = list(out["optimizer"][name])
    return out


def config_hash(config: ProtocolConfig) -> str:
    text = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass
class KeyRateReport:
    """One pipeline evaluation with every intermediate bound on record."""

    transmitter: str
    distance_km: float
    att_db: float
    analysis: str
    rate: float
    rate_raw: float
    y1_lower: float
    e_ph_upper: float
    e_x_upper: float
    f_prime: float
    gain_key: float
    error_key: float
    p_region_key: float
    p1_given_region: float
    q_key_weight: float
    status: str = "ok"
    details: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    CSV_FIELDS = ("transmitter", "distance_km", "att_db", "analysis", "R", "Y1L",
                  "eph_U", "eX_U", "F_prime", "Q_key", "E_key", "p_omega",
                  "p1_omega", "q_key", "R_raw", "status", "lp_iterations",
                  "nodes", "config_hash")

    def csv_row(self) -> str:
        cells = (self.transmitter, repr(float(self.distance_km)), repr(float(self.att_db)),
                 self.analysis, repr(self.rate), repr(self.y1_lower), repr(self.e_ph_upper),
                 repr(self.e_x_upper), repr(self.f_prime), repr(self.gain_key),
                 repr(self.error_key), repr(self.p_region_key), repr(self.p1_given_region),
                 repr(self.q_key_weight), repr(self.rate_raw), self.status,
                 str(self.provenance.get("lp_iterations", 0)),
                 str(self.provenance.get("nodes", "")),
                 str(self.provenance.get("config_hash", "")))
        return ",".join(cells)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def csv_header() -> str:
    return ",".join(KeyRateReport.CSV_FIELDS)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _geometry(config: ProtocolConfig) -> passive.RegionGeometry:
    return passive.RegionGeometry(delta_theta_z=config.delta_theta_z,
                                  delta_theta_x=config.delta_theta_x,
                                  delta_phi_x=config.delta_phi_x,
                                  t1=config.t1, t2=config.t2)


def _channel(config: ProtocolConfig, distance_km: float) -> channel_mod.ChannelParams:
    return channel_mod.ChannelParams(distance_km=distance_km,
                                     alpha_db_per_km=config.alpha_db_per_km,
                                     p_dark=config.p_dark,
                                     detector_efficiency=config.detector_efficiency,
                                     f_ec=config.f_ec)


def _solve_or_raise(spec: lp.LinearProgramSpec, label: str, counter: dict) -> float:
    solution = lp.solve(spec)
    counter["lp_iterations"] = counter.get("lp_iterations", 0) + solution.iterations
    if solution.status != "optimal":
        raise InfeasibleProgramError(f"{label} program is {solution.status}")
    return float(solution.value)


def _rate_from_bounds(p_region: float, p1: float, q_weight: float, y1: float,
                      e_ph: float, gain: float, error_rate: float,
                      sift: float, f_ec: float) -> tuple[float, float]:
    privacy = 1.0 - binary_entropy(min(0.5, e_ph))
    raw = sift * p_region * (p1 * q_weight * y1 * privacy
                             - gain * f_ec * binary_entropy(error_rate))
    return max(0.0, raw), raw


def _cross_fidelity(mom_i, mom_j, n: int) -> float:
    """Exact fidelity on full blocks; projection chain bound on truncated ones."""
    rho_i = mom_i.normalized_block(n)
    rho_j = mom_j.normalized_block(n)
    f_proj = fidelity(rho_i, rho_j)
    t_i = mom_i.trace_fraction(n)
    t_j = mom_j.trace_fraction(n)
    if t_i >= 1.0 - 1e-12 and t_j >= 1.0 - 1e-12:
        return f_proj
    return coin.bures_chain_bound(t_i, t_j, f_proj)


# ---------------------------------------------------------------------------
# Passive pipeline
# ---------------------------------------------------------------------------

@dataclass
class PassiveComputation:
    """All region quantities one passive evaluation needs."""

    params: passive.PassiveParams
    channel: channel_mod.ChannelParams
    moments_bit: dict
    moments_union: dict
    observables_bit: dict
    gains_union: dict


def passive_computation(config: ProtocolConfig, distance_km: float, att_db: float,
                        nodes: int) -> PassiveComputation:
    geometry = _geometry(config)
    omega = config.mu_max * 10.0 ** (-att_db / 10.0)
    params = passive.PassiveParams(mu_max=config.mu_max, omega=omega,
                                   geometry=geometry, n_cut=config.n_cut)
    chan = _channel(config, distance_km)
    grid = (nodes, nodes, nodes)
    # the key-basis boxes span the full phase circle, where the midpoint
    # rule is spectrally accurate: a reduced periodic axis loses nothing
    # as long as the leakage modulation depth stays small
    phi_z = min(nodes, 20) if omega <= 0.05 else nodes
    grid_z = (nodes, phi_z, nodes)
    moments_bit, observables_bit = {}, {}
    for basis in BASES:
        for intensity in INTENSITIES:
            for bit in BITS:
                region_nodes = passive.build_region_nodes(
                    bit, basis, intensity, geometry, params.mu_max,
                    grid_z if basis == "Z" else grid)
                region = passive.RegionSpec(bit=bit, basis=basis, intensity=intensity)
                moments_bit[(bit, basis, intensity)] = passive.region_moments(
                    region, params, node_sets=[region_nodes])
                observables_bit[(bit, basis, intensity)] = channel_mod.passive_point_observables(
                    region_nodes, bit, basis, chan)
    moments_union = {}
    gains_union = {}
    for basis in BASES:
        for intensity in INTENSITIES:
            parts = [moments_bit[(bit, basis, intensity)] for bit in BITS]
            union = passive.combine_moments(parts)
            moments_union[(basis, intensity)] = union
            weighted = sum(parts[b].mass * observables_bit[(b, basis, intensity)].gain
                           for b in BITS)
            gains_union[(basis, intensity)] = weighted / union.mass
    return PassiveComputation(params=params, channel=chan, moments_bit=moments_bit,
                              moments_union=moments_union, observables_bit=observables_bit,
                              gains_union=gains_union)


def _passive_yield_inputs(comp: PassiveComputation, basis: str, n_cut: int):
    gains = {i: comp.gains_union[(basis, i)] for i in INTENSITIES}
    probs = {i: comp.moments_union[(basis, i)].photon_probabilities()[:n_cut + 1]
             for i in INTENSITIES}
    fids = {}
    for idx, i in enumerate(INTENSITIES):
        for j in INTENSITIES[idx + 1:]:
            for n in range(n_cut + 1):
                fids[(i, j, n)] = _cross_fidelity(comp.moments_union[(basis, i)],
                                                  comp.moments_union[(basis, j)], n)
    return gains, probs, fids


def _passive_error_references(comp: PassiveComputation, bit: int, n_cut: int) -> np.ndarray:
    """Expected bit-error probabilities of the I0 test-basis states."""
    moments = comp.moments_bit[(bit, "X", "I0")]
    out = np.empty(n_cut + 1)
    for n in range(n_cut + 1):
        out[n] = channel_mod.reference_error(moments.normalized_block(n) * moments.trace_fraction(n),
                                             moments.bases[n], comp.channel,
                                             bit=bit, interfere=True)
    return out


def passive_key_rate(config: ProtocolConfig, distance_km: float, att_db: float,
                     nodes: int | None = None) -> KeyRateReport:
    """Baseline or refined passive evaluation at one grid point."""
    nodes = config.quadrature_nodes if nodes is None else nodes
    comp = passive_computation(config, distance_km, att_db, nodes)
    counter: dict = {}
    n_cut = config.n_cut
    references = channel_mod.reference_yields(n_cut, comp.channel)

    y_lower = {}
    refined = config.analysis == "refined"
    if refined:
        splits_union, taus = {}, {}
        for basis in BASES:
            for i in INTENSITIES:
                split0 = lp.key_opp_split(comp.moments_bit[(0, basis, i)].normalized_block(1))
                split1 = lp.key_opp_split(comp.moments_bit[(1, basis, i)].normalized_block(1))
                q_key = 0.5 * (split0.q_key + split1.q_key)
                q_opp = 0.5 * (split0.q_opp + split1.q_opp)
                tau = {}
                for tag in ("key", "opp"):
                    v0 = getattr(split0, f"v_{tag}")
                    v1 = getattr(split1, f"v_{tag}")
                    tau[tag] = 0.5 * (np.outer(v0, v0.conj()) + np.outer(v1, v1.conj()))
                splits_union[(basis, i)] = lp.KeyOppSplit(q_key=q_key, q_opp=q_opp,
                                                          v_key=split0.v_key, v_opp=split0.v_opp)
                taus[(basis, i)] = tau
        splits_bit = {(a, i): lp.key_opp_split(comp.moments_bit[(a, "X", i)].normalized_block(1))
                      for a in BITS for i in INTENSITIES}

    for basis in BASES:
        gains, probs, fids = _passive_yield_inputs(comp, basis, n_cut)
        if not refined:
            spec = lp.yield_program(gains, probs, fids, references, n_cut)
        else:
            tag_fids, cross_tag = {}, {}
            for idx, i in enumerate(INTENSITIES):
                cross_tag[i] = fidelity(taus[(basis, i)]["key"], taus[(basis, i)]["opp"])
                for j in INTENSITIES[idx + 1:]:
                    for tag in ("key", "opp"):
                        tag_fids[(i, j, tag)] = fidelity(taus[(basis, i)][tag],
                                                         taus[(basis, j)][tag])
            spec = lp.refined_yield_program(gains, probs, fids, references, n_cut,
                                            {i: splits_union[(basis, i)] for i in INTENSITIES},
                                            tag_fids, cross_tag)
        y_lower[basis] = min(1.0, max(0.0, _solve_or_raise(spec, f"{basis} yield", counter)))

    # test-basis bit-error bound
    gamma_upper = {}
    error_refs = {a: _passive_error_references(comp, a, n_cut) for a in BITS}
    if not refined:
        for a in BITS:
            error_gains = {i: comp.observables_bit[(a, "X", i)].error_gain for i in INTENSITIES}
            probs_bit = {i: comp.moments_bit[(a, "X", i)].photon_probabilities()[:n_cut + 1]
                         for i in INTENSITIES}
            fids_bit = {}
            for idx, i in enumerate(INTENSITIES):
                for j in INTENSITIES[idx + 1:]:
                    for n in range(n_cut + 1):
                        fids_bit[(i, j, n)] = _cross_fidelity(comp.moments_bit[(a, "X", i)],
                                                              comp.moments_bit[(a, "X", j)], n)
            spec = lp.bit_error_program(error_gains, probs_bit, fids_bit, error_refs[a], n_cut)
            gamma_upper[a] = min(1.0, max(0.0, _solve_or_raise(spec, f"bit-{a} error", counter)))
        gamma_key = 0.5 * (gamma_upper[0] + gamma_upper[1])
        y_test = y_lower["X"]
    else:
        outcome_gains = {(a, b, i): comp.observables_bit[(a, "X", i)].outcome_gain(b != a)
                         for a in BITS for b in BITS for i in INTENSITIES}
        probs_ab = {(a, i): comp.moments_bit[(a, "X", i)].photon_probabilities()[:n_cut + 1]
                    for a in BITS for i in INTENSITIES}
        fids_ab = {}
        tag_fids_ab = {}
        for a in BITS:
            for idx, i in enumerate(INTENSITIES):
                for j in INTENSITIES[idx + 1:]:
                    for n in range(n_cut + 1):
                        fids_ab[(i, j, a, n)] = _cross_fidelity(comp.moments_bit[(a, "X", i)],
                                                                comp.moments_bit[(a, "X", j)], n)
                    for tag in ("key", "opp"):
                        tag_fids_ab[(i, j, a, tag)] = pure_state_fidelity(
                            getattr(splits_bit[(a, i)], f"v_{tag}"),
                            getattr(splits_bit[(a, j)], f"v_{tag}"))
        cross_bit = {}
        for i in INTENSITIES:
            for a, a2 in ((0, 1), (1, 0)):
                for t, t2 in (("key", "opp"), ("opp", "key")):
                    cross_bit[(a, a2, i, t, t2)] = pure_state_fidelity(
                        getattr(splits_bit[(a, i)], f"v_{t}"),
                        getattr(splits_bit[(a2, i)], f"v_{t2}"))

        def err_reference(a: int, b: int, n: int) -> float:
            gamma = float(error_refs[a][n])
            return gamma if b != a else float(references[n]) - gamma

        spec = lp.refined_error_program(outcome_gains, probs_ab, fids_ab, err_reference,
                                        n_cut, splits_bit, tag_fids_ab, cross_bit)
        gamma_key = min(1.0, max(0.0, _solve_or_raise(spec, "refined error", counter)))
        y_test = y_lower["X"]

    if y_test <= 1e-12:
        return _zero_report(config, distance_km, att_db, comp, counter, nodes,
                            reason="vanishing test-basis yield bound")
    e_x_upper = min(1.0, gamma_key / y_test)

    # coin overlap and phase error
    if not refined:
        eigendata = {(a, b): coin.state_eigendata(comp.moments_bit[(a, b, "I0")].normalized_block(1))
                     for a in BITS for b in BASES}
        overlap = coin.purification_overlap(eigendata)
        q_weight = 1.0
    else:
        splits_z = {a: lp.key_opp_split(comp.moments_bit[(a, "Z", "I0")].normalized_block(1))
                    for a in BITS}
        overlap = coin.bb84_pair_overlap(splits_z[0].v_key, splits_z[1].v_key,
                                         splits_bit[(0, "I0")].v_key,
                                         splits_bit[(1, "I0")].v_key)
        q_weight = 0.5 * (splits_z[0].q_key + splits_z[1].q_key)
    y_coin = 0.5 * (y_lower["Z"] + y_lower["X"])
    if y_coin <= 0.0:
        return _zero_report(config, distance_km, att_db, comp, counter, nodes,
                            reason="vanishing coin yield")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        f_prime = coin.coin_adjusted_fidelity(float(overlap.real), y_coin)
    e_ph_upper = coin.phase_error_upper(e_x_upper, f_prime)

    key_union = comp.moments_union[("Z", "I0")]
    p_region = key_union.mass
    p1 = float(key_union.photon_probabilities()[1])
    gain_key = comp.gains_union[("Z", "I0")]
    eq_key = sum(comp.moments_bit[(a, "Z", "I0")].mass
                 * comp.observables_bit[(a, "Z", "I0")].error_gain for a in BITS) / p_region
    error_key = eq_key / gain_key if gain_key > 0 else 0.0
    rate, raw = _rate_from_bounds(p_region, p1, q_weight, y_lower["Z"], e_ph_upper,
                                  gain_key, error_key, config.p_zb, config.f_ec)
    details = {
        "y_lower": {b: y_lower[b] for b in BASES},
        "gamma_key_upper": gamma_key,
        "overlap_real": float(overlap.real),
        "region_mass": {f"{b}:{i}": comp.moments_union[(b, i)].mass
                        for b in BASES for i in INTENSITIES},
        "gains": {f"{b}:{i}": comp.gains_union[(b, i)] for b in BASES for i in INTENSITIES},
        "photon_probabilities_key": [float(x) for x in
                                     key_union.photon_probabilities()[:config.n_cut + 1]],
        "omega": comp.params.omega,
    }
    return KeyRateReport(
        transmitter="passive", distance_km=distance_km, att_db=att_db,
        analysis=config.analysis, rate=rate, rate_raw=raw, y1_lower=y_lower["Z"],
        e_ph_upper=e_ph_upper, e_x_upper=e_x_upper, f_prime=f_prime,
        gain_key=gain_key, error_key=error_key, p_region_key=p_region,
        p1_given_region=p1, q_key_weight=q_weight, details=details,
        provenance=_provenance(config, counter, nodes))


def _provenance(config: ProtocolConfig, counter: dict, nodes: int) -> dict:
    return {"config_hash": config_hash(config), "nodes": nodes,
            "lp_iterations": counter.get("lp_iterations", 0)}


def _zero_report(config, distance_km, att_db, comp, counter, nodes, reason):
    key_union = comp.moments_union[("Z", "I0")]
    return KeyRateReport(
        transmitter=config.transmitter, distance_km=distance_km, att_db=att_db,
        analysis=config.analysis, rate=0.0, rate_raw=0.0, y1_lower=0.0,
        e_ph_upper=0.5, e_x_upper=1.0, f_prime=0.0,
        gain_key=comp.gains_union[("Z", "I0")], error_key=0.0,
        p_region_key=key_union.mass, p1_given_region=float(key_union.photon_probabilities()[1]),
        q_key_weight=1.0, status=f"zero-rate: {reason}",
        provenance=_provenance(config, counter, nodes))


# ---------------------------------------------------------------------------
# Injection-locked pipeline
# ---------------------------------------------------------------------------

def oil_key_rate(config: ProtocolConfig, distance_km: float, att_db: float,
                 nodes: int | None = None) -> KeyRateReport:
    """Injection-locked transmitter evaluation at one grid point."""
    eta_im = 10.0 ** (-att_db / 10.0)
    omega = eta_im * config.mu_in / 2.0
    params = oil.params_for_intensities(config.mu_in, config.mu_i1, config.mu_i2,
                                        omega, n_cut=config.n_cut)
    chan = _channel(config, distance_km)
    counter: dict = {}
    n_cut = config.n_cut
    references = channel_mod.reference_yields(n_cut, chan)

    settings = {(a, b, i): oil.setting_phases(a, b, i, params)
                for a in BITS for b in BASES for i in INTENSITIES if b == "X" or i == "I0"}
    intensities = {i: params.intensity(i) for i in INTENSITIES}

    gains = {i: channel_mod.oil_point_observables(intensities[i], 0.0, "X", 0, chan).gain
             for i in INTENSITIES}
    probs = {i: oil.photon_probabilities(intensities[i], omega, n_cut) for i in INTENSITIES}
    mixed = {(i, n): oil.mixed_state("X", i, params, n)
             for i in INTENSITIES for n in range(n_cut + 1)}
    fids = {}
    for idx, i in enumerate(INTENSITIES):
        for j in INTENSITIES[idx + 1:]:
            for n in range(n_cut + 1):
                fids[(i, j, n)] = fidelity(mixed[(i, n)], mixed[(j, n)])
    y_x = min(1.0, max(0.0, _solve_or_raise(
        lp.yield_program(gains, probs, fids, references, n_cut), "X yield", counter)))

    gamma_upper = {}
    for a in BITS:
        observables = {i: channel_mod.oil_point_observables(intensities[i], 0.0, "X", a, chan)
                       for i in INTENSITIES}
        error_gains = {i: observables[i].error_gain for i in INTENSITIES}
        vectors = {(i, n): oil.state_vector(settings[(a, "X", i)], params, n)
                   for i in INTENSITIES for n in range(1, n_cut + 1)}
        fids_bit = {}
        for idx, i in enumerate(INTENSITIES):
            for j in INTENSITIES[idx + 1:]:
                fids_bit[(i, j, 0)] = 1.0  # vacuum sector
                for n in range(1, n_cut + 1):
                    fids_bit[(i, j, n)] = pure_state_fidelity(vectors[(i, n)], vectors[(j, n)])
        error_refs = np.empty(n_cut + 1)
        for n in range(n_cut + 1):
            rho = oil.state_block(settings[(a, "X", "I0")], params, n)
            tr = float(np.trace(rho).real)
            error_refs[n] = channel_mod.reference_error(rho / tr, oil.oil_basis(n), chan,
                                                        bit=a, interfere=False)
        spec = lp.bit_error_program(error_gains, probs, fids_bit, error_refs, n_cut)
        gamma_upper[a] = min(1.0, max(0.0, _solve_or_raise(spec, f"bit-{a} error", counter)))

    if y_x <= 1e-12:
        raise InfeasibleProgramError("vanishing test-basis yield bound")
    e_x_upper = min(1.0, 0.5 * (gamma_upper[0] + gamma_upper[1]) / y_x)

    # key-basis yield through the coin transfer; the single-photon mixtures
    # of the two bases coincide, so the transfer collapses to the identity
    rho_key = oil.mixed_state("Z", "I0", params, 1)
    rho_test = oil.mixed_state("X", "I0", params, 1)
    if float(np.max(np.abs(rho_key - rho_test))) <= 1e-10:
        fid_zx = 1.0
    else:
        fid_zx = fidelity(rho_key, rho_test)
    y_z = coin.yield_transfer(y_x, fid_zx)[0]

    overlap = oil.single_photon_overlap(params)
    y_coin = 0.5 * (y_z + y_x)
    if y_coin <= 0.0:
        raise InfeasibleProgramError("vanishing coin yield")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        f_prime = coin.coin_adjusted_fidelity(float(overlap.real), y_coin)
    e_ph_upper = coin.phase_error_upper(e_x_upper, f_prime)

    key_obs = channel_mod.oil_point_observables(
        intensities["I0"],
        0.5 * (settings[(0, "Z", "I0")].phi12 + settings[(0, "Z", "I0")].phi23),
        "Z", 0, chan)
    p1 = float(oil.photon_probabilities(intensities["I0"], omega, 1)[1])
    privacy = 1.0 - binary_entropy(min(0.5, e_ph_upper))
    raw = config.p_zazb * (p1 * y_z * privacy
                           - key_obs.gain * config.f_ec * binary_entropy(key_obs.error_rate))
    details = {
        "y_lower": {"Z": y_z, "X": y_x},
        "overlap_real": float(overlap.real),
        "fid_zx": fid_zx,
        "intensities": intensities,
        "omega": omega,
        "gains": {i: gains[i] for i in INTENSITIES},
    }
    return KeyRateReport(
        transmitter="oil", distance_km=distance_km, att_db=att_db,
        analysis=config.analysis, rate=max(0.0, raw), rate_raw=raw, y1_lower=y_z,
        e_ph_upper=e_ph_upper, e_x_upper=e_x_upper, f_prime=f_prime,
        gain_key=key_obs.gain, error_key=key_obs.error_rate, p_region_key=1.0,
        p1_given_region=p1, q_key_weight=1.0, details=details,
        provenance=_provenance(config, counter, nodes or 0))


def key_rate(config: ProtocolConfig, distance_km: float, att_db: float,
             nodes: int | None = None) -> KeyRateReport:
    if config.transmitter == "passive":
        return passive_key_rate(config, distance_km, att_db, nodes)
    return oil_key_rate(config, distance_km, att_db, nodes)


# ---------------------------------------------------------------------------
# Optimisation and sweeps
# ---------------------------------------------------------------------------

def _golden_max(func, lo: float, hi: float, iterations: int) -> tuple[float, float]:
    """Deterministic golden-section maximisation on [lo, hi]."""
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(iterations):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = func(d)
    return (c, fc) if fc >= fd else (d, fd)


def optimize_point(config: ProtocolConfig, distance_km: float, att_db: float):
    """Coordinate-descent over the source parameters at one grid point.

    Passive: (mu_max, delta_theta_z).  Injection-locked: the two highest
    test-basis intensities (mu_in, mu_i1), the weakest being pinned.
    The search runs on a coarse quadrature grid; the winning parameters
    are re-evaluated at the production grid for the returned report.
    """
    settings = config.optimizer
    cache: dict = {}

    def evaluate(cfg: ProtocolConfig) -> float:
        key = (round(cfg.mu_max, 12), round(cfg.delta_theta_z, 12),
               round(cfg.mu_in, 12), round(cfg.mu_i1, 12))
        if key not in cache:
            try:
                report = key_rate(cfg, distance_km, att_db, nodes=settings.search_nodes)
                cache[key] = report.rate
            except (InfeasibleProgramError, passive.EmptyRegionError, ValueError):
                # invalid probe (e.g. decoy above signal intensity) scores zero
                cache[key] = 0.0
        return cache[key]

    best = config
    if config.transmitter == "passive":
        coordinates = (("mu_max", settings.mu_max_bracket),
                       ("delta_theta_z", settings.delta_theta_z_bracket))
    else:
        coordinates = (("mu_in", settings.oil_intensity_bracket),
                       ("mu_i1", settings.oil_intensity_bracket))
    for _ in range(settings.passes):
        for name, bracket in coordinates:
            lo, hi = bracket
            if name == "mu_i1":
                hi = min(hi, best.mu_in * 0.999)
                lo = max(lo, best.mu_i2 * 1.001)
                if lo >= hi:
                    continue
            value, _ = _golden_max(
                lambda x: evaluate(dataclasses.replace(best, **{name: x})),
                lo, hi, settings.iterations)
            best = dataclasses.replace(best, **{name: value})
    report = key_rate(best, distance_km, att_db)
    if report.rate <= 0.0 and report.status == "ok":
        report.status = "no positive rate over the search grid"
    return best, report


def sweep(config: ProtocolConfig, optimize: bool = False) -> list[KeyRateReport]:
    """One report per (distance, attenuation) grid point, in grid order.

    Failures at single points are recorded in the report status and do
    not abort the sweep.
    """
    reports = []
    for distance in config.distances_km:
        for att in config.att_db:
            try:
                if optimize:
                    _, report = optimize_point(config, distance, att)
                else:
                    report = key_rate(config, distance, att)
            except (InfeasibleProgramError, passive.EmptyRegionError) as exc:
                report = KeyRateReport(
                    transmitter=config.transmitter, distance_km=distance, att_db=att,
                    analysis=config.analysis, rate=0.0, rate_raw=0.0, y1_lower=0.0,
                    e_ph_upper=0.5, e_x_upper=1.0, f_prime=0.0, gain_key=0.0,
                    error_key=0.0, p_region_key=0.0, p1_given_region=0.0,
                    q_key_weight=0.0, status=f"failed: {exc}",
                    provenance={"config_hash": config_hash(config)})
            reports.append(report)
    return reports


def reports_to_csv(reports: list[KeyRateReport]) -> str:
    lines = [csv_header()]
    lines.extend(r.csv_row() for r in reports)
    return "\n".join(lines) + "\n"
