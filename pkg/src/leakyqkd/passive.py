"""Post-selected states of the passive time-bin transmitter.

Each round is driven by four uniformly random optical phases.  Interfering
consecutive pulses maps them to classical target variables: a polar angle
theta, a relative phase phi between the early (e) and late (l) time bins,
and a total intensity mu.  An internal measurement post-selects boxes in
(theta, phi, mu) space that define the bit, basis and intensity of the
round.  A blocking modulator with finite extinction leaves three weak
leakage pulses (modes 1, 3, 5) whose amplitudes are deterministic
functions of the same phases, with intensity scale omega.

Conditioned on a target point there are four equally likely phase
assignments (two sign choices per time bin), and after averaging the
common optical phase the emitted state decomposes into photon-number
blocks: each block is the n-photon sector of a product coherent-state
projector over the five modes (e, l, 1, 3, 5).  Region states are
averages of those blocks against the classical density of the target
variables, evaluated here by midpoint quadrature with a square-root
substitution on the integrable density singularity, or by a Monte-Carlo
oracle that samples the raw phases directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fock import NPhotonBasis, enumerate_basis, inv_sqrt_factorials, leak_truncated_subbasis

TWO_PI = 2.0 * math.pi

BITS = (0, 1)
BASES = ("Z", "X")
INTENSITIES = ("I0", "I1", "I2")
BRANCHES = ((1, 1), (1, -1), (-1, 1), (-1, -1))

MODE_COUNT = 5
LEAK_MODES = frozenset({2, 3, 4})

DEFAULT_NODES = (48, 48, 48)
MIN_NODES = 4


class EmptyRegionError(ValueError):
    """Raised when a post-selection region has zero probability mass."""


class ConvergenceError(RuntimeError):
    """Raised when quadrature refinement disagrees beyond tolerance."""

    def __init__(self, message, coarse, fine):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine


@lru_cache(maxsize=None)
def passive_basis(n: int) -> NPhotonBasis:
    """Leakage-sorted n-photon basis over modes (e, l, 1, 3, 5)."""
    return enumerate_basis(n, MODE_COUNT, LEAK_MODES)


@dataclass(frozen=True)
class RegionGeometry:
    """Angular windows and intensity thresholds of the post-selection boxes."""

    delta_theta_z: float
    delta_theta_x: float = 0.11
    delta_phi_x: float = 0.09
    t1: float = 0.05
    t2: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.delta_theta_z < math.pi / 2:
            raise ValueError(f"delta_theta_z={self.delta_theta_z} outside (0, pi/2)")
        if not 0.0 < self.delta_theta_x < math.pi / 2:
            raise ValueError(f"delta_theta_x={self.delta_theta_x} outside (0, pi/2)")
        if not 0.0 < self.delta_phi_x < math.pi:
            raise ValueError(f"delta_phi_x={self.delta_phi_x} outside (0, pi)")
        if not 0.0 < self.t2 < self.t1 < 2.0:
            raise ValueError(f"need 0 < t2 < t1 < 2, got t1={self.t1}, t2={self.t2}")


def _default_leak_cuts() -> dict:
    # full matrices for n <= 2, single leakage photon kept for n in {3, 4}
    return {3: 1, 4: 1}


@dataclass(frozen=True)
class PassiveParams:
    """Source parameters: peak intensity, leakage scale, geometry, cutoffs."""

    mu_max: float
    omega: float
    geometry: RegionGeometry
    n_cut: int = 4
    leak_cuts: dict = field(default_factory=_default_leak_cuts)

    def __post_init__(self):
        if self.mu_max <= 0.0:
            raise ValueError(f"mu_max={self.mu_max} must be positive")
        if not 0.0 <= self.omega <= self.mu_max:
            raise ValueError(f"omega={self.omega} outside [0, mu_max]")
        if self.n_cut < 1:
            raise ValueError("n_cut must be >= 1")

    def leak_cut_for(self, n: int):
        """Leakage photon cutoff for the n-photon block (None = keep all)."""
        return self.leak_cuts.get(n)

    def block_basis(self, n: int) -> NPhotonBasis:
        cut = self.leak_cut_for(n)
        basis = passive_basis(n)
        return basis if cut is None or cut >= n else leak_truncated_subbasis(basis, cut)


@dataclass(frozen=True)
class RegionSpec:
    """One post-selection region: bit (None = both), basis, intensity label."""

    bit: int | None
    basis: str
    intensity: str

    def __post_init__(self):
        if self.bit not in (None, 0, 1):
            raise ValueError(f"bit must be 0, 1 or None, got {self.bit}")
        if self.basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}")
        if self.intensity not in INTENSITIES:
            raise ValueError(f"intensity must be one of {INTENSITIES}")


@dataclass(frozen=True)
class TargetPoint:
    """Classical post-selection outcome (theta, phi, mu) of one round."""

    theta: float
    phi: float
    mu: float
    phi_e: float = 0.0

    @property
    def mu_e(self) -> float:
        return self.mu * math.cos(self.theta / 2.0) ** 2

    @property
    def mu_l(self) -> float:
        return self.mu * math.sin(self.theta / 2.0) ** 2

    @property
    def phi_l(self) -> float:
        return self.phi + self.phi_e


def wrap_phase(phi):
    """Wrap angles to (-pi, pi]."""
    out = np.mod(np.asarray(phi, dtype=float) + math.pi, TWO_PI) - math.pi
    out = np.where(out == -math.pi, math.pi, out)
    return float(out) if np.isscalar(phi) or out.ndim == 0 else out


def halfway_shift(delta):
    """0 when |delta| <= pi, pi otherwise: corrects the mean-phase branch.

    The mean of two unit phasors e^{i a}, e^{i b} points along
    (a + b)/2 only when |a - b| <= pi; beyond that it flips sign.
    """
    return np.where(np.abs(delta) <= math.pi, 0.0, math.pi)


def target_from_phases(phi1, phi2, phi3, phi4, mu_max) -> TargetPoint:
    """Map the four raw pulse phases to the target variables."""
    mu_e = mu_max * (1.0 + math.cos(phi1 - phi2)) / 2.0
    mu_l = mu_max * (1.0 + math.cos(phi3 - phi4)) / 2.0
    mu = mu_e + mu_l
    if mu > 0.0:
        theta = 2.0 * math.acos(min(1.0, math.sqrt(mu_e / mu)))
    else:
        theta = math.pi / 2.0  # measure-zero corner, any value works
    phi_e = (phi1 + phi2) / 2.0 + float(halfway_shift(phi1 - phi2))
    phi_l = (phi3 + phi4) / 2.0 + float(halfway_shift(phi3 - phi4))
    phi = float(wrap_phase(phi_l - phi_e))
    return TargetPoint(theta=theta, phi=phi, mu=mu, phi_e=float(wrap_phase(phi_e)))


def _half_angles(point: TargetPoint, mu_max: float) -> tuple[float, float]:
    for part, name in ((point.mu_e, "mu_e"), (point.mu_l, "mu_l")):
        if part > mu_max * (1.0 + 1e-12):
            raise ValueError(f"{name}={part} exceeds mu_max={mu_max}")
    arg_e = min(1.0, max(-1.0, 2.0 * point.mu_e / mu_max - 1.0))
    arg_l = min(1.0, max(-1.0, 2.0 * point.mu_l / mu_max - 1.0))
    return 0.5 * math.acos(arg_e), 0.5 * math.acos(arg_l)


def invert_phases(point: TargetPoint, phi_e: float, signs: tuple[int, int],
                  mu_max: float) -> tuple[float, float, float, float]:
    """One of the four raw-phase assignments consistent with a target point."""
    s_e, s_l = signs
    if s_e not in (1, -1) or s_l not in (1, -1):
        raise ValueError("branch signs must be +1 or -1")
    half_e, half_l = _half_angles(point, mu_max)
    phi1 = phi_e + s_e * half_e
    phi2 = phi_e - s_e * half_e
    phi3 = phi_e + point.phi + s_l * half_l
    phi4 = phi_e + point.phi - s_l * half_l
    return phi1, phi2, phi3, phi4


def joint_pdf(point: TargetPoint, mu_max: float) -> float:
    """Classical density of (theta, phi, mu); phi is uniform on (-pi, pi].

    The density diverges on the surfaces mu_e = mu_max and mu_l = mu_max;
    evaluation there is rejected (quadrature never places nodes on them).
    """
    c2 = math.cos(point.theta / 2.0) ** 2
    s2 = math.sin(point.theta / 2.0) ** 2
    g_e = 1.0 - point.mu * c2 / mu_max
    g_l = 1.0 - point.mu * s2 / mu_max
    if g_e <= 0.0 or g_l <= 0.0:
        raise ValueError("density evaluated on or beyond its singular boundary")
    return 1.0 / (TWO_PI * mu_max * math.pi ** 2 * math.sqrt(g_e) * math.sqrt(g_l))


def classify_region(point: TargetPoint, geometry: RegionGeometry,
                    mu_max: float) -> RegionSpec | None:
    """Post-selection outcome for one target point, or None if inconclusive."""
    bit, basis, intensity = _classify_arrays(
        np.atleast_1d(point.theta), np.atleast_1d(point.phi),
        np.atleast_1d(point.mu), geometry, mu_max)
    if bit[0] < 0 or intensity[0] < 0:
        return None
    return RegionSpec(bit=int(bit[0]), basis=BASES[int(basis[0])],
                      intensity=INTENSITIES[int(intensity[0])])


def _classify_arrays(theta, phi, mu, geometry, mu_max):
    g = geometry
    bit = np.full(theta.shape, -1, dtype=np.int8)
    basis = np.full(theta.shape, -1, dtype=np.int8)
    phi_w = wrap_phase(phi)
    z0 = theta < g.delta_theta_z
    z1 = theta > math.pi - g.delta_theta_z
    in_x_theta = np.abs(theta - math.pi / 2.0) < g.delta_theta_x
    x0 = in_x_theta & (np.abs(phi_w) < g.delta_phi_x)
    x1 = in_x_theta & (math.pi - np.abs(phi_w) < g.delta_phi_x)
    bit[z0] = 0
    basis[z0] = 0
    bit[z1] = 1
    basis[z1] = 0
    bit[x0] = 0
    basis[x0] = 1
    bit[x1] = 1
    basis[x1] = 1
    intensity = np.full(theta.shape, -1, dtype=np.int8)
    intensity[(mu >= g.t1 * mu_max) & (mu < 2.0 * mu_max)] = 0
    intensity[(mu >= g.t2 * mu_max) & (mu < g.t1 * mu_max)] = 1
    intensity[mu < g.t2 * mu_max] = 2
    return bit, basis, intensity


# ---------------------------------------------------------------------------
# Leakage amplitudes and photon-number blocks
# ---------------------------------------------------------------------------

def _branch_amplitudes(theta, phi, mu, s_e, s_l, omega, mu_max):
    """Coherent amplitudes of (e, l, 1, 3, 5) for one sign branch.

    Returns (amplitudes (5, N), leakage intensity mu_L (N)).  The common
    optical phase is factored out; only relative phases matter after the
    phase average.
    """
    c2 = np.cos(theta / 2.0) ** 2
    s2 = np.sin(theta / 2.0) ** 2
    half_e = 0.5 * np.arccos(np.clip(2.0 * mu * c2 / mu_max - 1.0, -1.0, 1.0))
    half_l = 0.5 * np.arccos(np.clip(2.0 * mu * s2 / mu_max - 1.0, -1.0, 1.0))
    c_off = s_e * half_e
    s_off = s_l * half_l
    amp = np.empty((MODE_COUNT, np.size(theta)), dtype=complex)
    amp[0] = np.sqrt(mu * c2)
    amp[1] = np.sqrt(mu * s2) * np.exp(1j * phi)
    amp[2] = math.sqrt(omega / 2.0) * np.exp(1j * c_off)
    amp[3] = 0.5 * math.sqrt(omega) * (np.exp(-1j * c_off) + np.exp(1j * (phi + s_off)))
    amp[4] = math.sqrt(omega / 2.0) * np.exp(1j * (phi - s_off))
    mu_leak = omega + np.abs(amp[3]) ** 2
    return amp, mu_leak


def leakage_functions(point: TargetPoint, signs: tuple[int, int], omega: float,
                      mu_max: float) -> tuple[float, float, float, float, float]:
    """Phase offsets (C, S), interference amplitude r, its phase h, and mu_L."""
    s_e, s_l = signs
    half_e, half_l = _half_angles(point, mu_max)
    c_off = s_e * half_e
    s_off = s_l * half_l
    r = math.sqrt(omega * (1.0 + math.cos(point.phi + c_off + s_off)) / 2.0)
    h = math.atan2(-math.sin(c_off) + math.sin(point.phi + s_off),
                   math.cos(c_off) + math.cos(point.phi + s_off))
    mu_leak = omega + r * r
    return c_off, s_off, r, h, mu_leak


def photon_number_block(point: TargetPoint, n: int, omega: float, mu_max: float,
                        basis: NPhotonBasis | None = None) -> np.ndarray:
    """Branch-averaged sub-normalised n-photon block at one target point.

    Trace equals the branch average of e^-(mu+mu_L) (mu+mu_L)^n / n!.
    """
    if basis is None:
        basis = passive_basis(n)
    if basis.k != MODE_COUNT:
        raise ValueError(f"expected a {MODE_COUNT}-mode basis, got k={basis.k}")
    if basis.n != n:
        raise ValueError(f"basis is for n={basis.n}, requested n={n}")
    theta = np.atleast_1d(float(point.theta))
    phi = np.atleast_1d(float(point.phi))
    mu = np.atleast_1d(float(point.mu))
    block = np.zeros((basis.dim, basis.dim), dtype=complex)
    inv = inv_sqrt_factorials(basis)
    cfg = np.array(basis.configs, dtype=np.intp)
    for s_e, s_l in BRANCHES:
        amp, mu_leak = _branch_amplitudes(theta, phi, mu, s_e, s_l, omega, mu_max)
        v = _sector_components(_mode_powers(amp, n), cfg, inv)[:, 0]
        block += 0.25 * math.exp(-(float(mu[0]) + float(mu_leak[0]))) * np.outer(v, v.conj())
    return block


# ---------------------------------------------------------------------------
# Region quadrature
# ---------------------------------------------------------------------------

def _theta_window(bit: int, basis: str, g: RegionGeometry) -> tuple[float, float]:
    if basis == "Z":
        return (0.0, g.delta_theta_z) if bit == 0 else (math.pi - g.delta_theta_z, math.pi)
    return (math.pi / 2.0 - g.delta_theta_x, math.pi / 2.0 + g.delta_theta_x)


def _phi_window(bit: int, basis: str, g: RegionGeometry) -> tuple[float, float]:
    if basis == "Z":
        return (-math.pi, math.pi)
    # bit-1 window sits across the +-pi branch cut; evaluate it unwrapped
    return (-g.delta_phi_x, g.delta_phi_x) if bit == 0 else (math.pi - g.delta_phi_x, math.pi + g.delta_phi_x)


def _mu_window(intensity: str, g: RegionGeometry) -> tuple[float, float]:
    return {"I0": (g.t1, 2.0), "I1": (g.t2, g.t1), "I2": (0.0, g.t2)}[intensity]


@dataclass(frozen=True)
class RegionNodes:
    """Flattened quadrature nodes and absolute weights for one region box.

    Weights include the classical density and all cell measures, so
    sum(weight) is the region probability and expectations are plain
    weighted means.
    """

    theta: np.ndarray
    phi: np.ndarray
    mu: np.ndarray
    weight: np.ndarray

    @property
    def mass(self) -> float:
        return float(np.sum(self.weight))

    def expectation(self, values: np.ndarray) -> float:
        return float(np.dot(self.weight, values) / self.mass)


def build_region_nodes(bit: int, basis: str, intensity: str, geometry: RegionGeometry,
                       mu_max: float, nodes=DEFAULT_NODES) -> RegionNodes:
    """Midpoint nodes for one (bit, basis, intensity) box.

    The mu axis is clipped per theta to the support of the density; when
    the inverse-square-root factor varies by more than 10x across the
    window (always the case for the top intensity window, which touches
    the singular surface) the substitution u = sqrt(1 - mu M / mu_max)
    with M = max(cos^2, sin^2)(theta/2) removes the singularity exactly.
    """
    n_t, n_p, n_m = nodes
    if min(n_t, n_p, n_m) < MIN_NODES:
        raise ValueError(f"need at least {MIN_NODES} nodes per axis, got {nodes}")
    t_lo, t_hi = _theta_window(bit, basis, geometry)
    p_lo, p_hi = _phi_window(bit, basis, geometry)
    m_lo_f, m_hi_f = _mu_window(intensity, geometry)
    d_theta = (t_hi - t_lo) / n_t
    d_phi = (p_hi - p_lo) / n_p
    thetas = t_lo + (np.arange(n_t) + 0.5) * d_theta
    phis = p_lo + (np.arange(n_p) + 0.5) * d_phi

    theta_parts, mu_parts, w_parts = [], [], []
    for th in thetas:
        c2 = math.cos(th / 2.0) ** 2
        s2 = math.sin(th / 2.0) ** 2
        big, small = max(c2, s2), min(c2, s2)
        mu_sing = mu_max / big
        lo = m_lo_f * mu_max
        hi = min(m_hi_f * mu_max, mu_sing)
        if hi <= lo:
            continue
        g_lo = 1.0 - lo * big / mu_max
        g_hi = 1.0 - hi * big / mu_max
        if g_lo > 100.0 * g_hi:
            u_hi = math.sqrt(g_lo)
            u_lo = math.sqrt(max(0.0, g_hi))
            d_u = (u_hi - u_lo) / n_m
            uu = u_lo + (np.arange(n_m) + 0.5) * d_u
            mu_col = mu_max * (1.0 - uu * uu) / big
            w_col = (d_theta * d_phi * d_u / (math.pi ** 3 * big)
                     / np.sqrt(1.0 - mu_col * small / mu_max))
        else:
            d_mu = (hi - lo) / n_m
            mu_col = lo + (np.arange(n_m) + 0.5) * d_mu
            w_col = (d_theta * d_phi * d_mu
                     / (2.0 * math.pi ** 3 * mu_max
                        * np.sqrt((1.0 - mu_col * c2 / mu_max) * (1.0 - mu_col * s2 / mu_max))))
        theta_parts.append(np.full(n_m, th))
        mu_parts.append(mu_col)
        w_parts.append(w_col)

    if not theta_parts:
        raise EmptyRegionError(f"region ({bit}, {basis}, {intensity}) has empty support")
    theta_col = np.concatenate(theta_parts)
    mu_col = np.concatenate(mu_parts)
    w_col = np.concatenate(w_parts)
    # tile over the phi axis (density is phi-uniform; states are not)
    n_cols = theta_col.size
    theta_all = np.tile(theta_col, n_p)
    mu_all = np.tile(mu_col, n_p)
    w_all = np.tile(w_col, n_p)
    phi_all = np.repeat(phis, n_cols)
    return RegionNodes(theta=theta_all, phi=phi_all, mu=mu_all, weight=w_all)


def region_nodes_for(region: RegionSpec, geometry: RegionGeometry, mu_max: float,
                     nodes=DEFAULT_NODES) -> list[RegionNodes]:
    bits = BITS if region.bit is None else (region.bit,)
    return [build_region_nodes(b, region.basis, region.intensity, geometry, mu_max, nodes)
            for b in bits]


@dataclass
class RegionMoments:
    """Raw region integrals: mass, block traces, and matrix blocks.

    blocks[n] is the integral of the sub-normalised n-photon block over
    the region (including the classical density), on bases[n]; traces[m]
    is the same integral of the full m-photon trace, m = 0..len-1, which
    is exact even when blocks[n] is leakage-truncated.
    """

    mass: float
    traces: np.ndarray
    blocks: dict
    bases: dict

    def photon_probabilities(self) -> np.ndarray:
        return self.traces / self.mass

    def normalized_block(self, n: int) -> np.ndarray:
        block = self.blocks[n]
        tr = float(np.trace(block).real)
        if tr <= 0.0:
            raise EmptyRegionError(f"n={n} block has vanishing trace")
        rho = block / tr
        return (rho + rho.conj().T) / 2.0

    def trace_fraction(self, n: int) -> float:
        """Weight the truncated block keeps of the full n-photon trace."""
        return min(1.0, float(np.trace(self.blocks[n]).real) / float(self.traces[n]))


def combine_moments(parts: list[RegionMoments]) -> RegionMoments:
    """Union of disjoint regions: raw integrals add."""
    first = parts[0]
    return RegionMoments(
        mass=sum(p.mass for p in parts),
        traces=np.sum([p.traces for p in parts], axis=0),
        blocks={n: np.sum([p.blocks[n] for p in parts], axis=0) for n in first.blocks},
        bases=first.bases,
    )


def region_moments(region: RegionSpec, params: PassiveParams, nodes=DEFAULT_NODES,
                   n_tail: int = 20, chunk: int = 16384,
                   node_sets: list[RegionNodes] | None = None) -> RegionMoments:
    """Quadrature of mass, photon-number traces and matrix blocks on a region."""
    if node_sets is None:
        node_sets = region_nodes_for(region, params.geometry, params.mu_max, nodes)
    theta = np.concatenate([s.theta for s in node_sets])
    phi = np.concatenate([s.phi for s in node_sets])
    mu = np.concatenate([s.mu for s in node_sets])
    weight = np.concatenate([s.weight for s in node_sets])
    mass = float(np.sum(weight))
    if mass <= 0.0:
        raise EmptyRegionError(f"region {region} has zero mass")

    n_tail = max(n_tail, params.n_cut)
    bases = {n: params.block_basis(n) for n in range(params.n_cut + 1)}
    inv_facts = {n: inv_sqrt_factorials(b) for n, b in bases.items()}
    cfg_arrays = {n: np.array(b.configs, dtype=np.intp) for n, b in bases.items()}
    blocks = {n: np.zeros((b.dim, b.dim), dtype=complex) for n, b in bases.items()}
    traces = np.zeros(n_tail + 1)

    branch_e = np.repeat([s for s, _ in BRANCHES], 1)
    branch_l = np.repeat([s for _, s in BRANCHES], 1)
    for start in range(0, theta.size, chunk):
        sl = slice(start, min(start + chunk, theta.size))
        size = sl.stop - sl.start
        # stack the four sign branches along the node axis
        th_c = np.tile(theta[sl], 4)
        ph_c = np.tile(phi[sl], 4)
        mu_c = np.tile(mu[sl], 4)
        w_c = np.tile(weight[sl], 4)
        s_e = np.repeat(branch_e, size)
        s_l = np.repeat(branch_l, size)
        amp, mu_leak = _branch_amplitudes(th_c, ph_c, mu_c, s_e, s_l,
                                          params.omega, params.mu_max)
        total = mu_c + mu_leak
        wb = 0.25 * w_c * np.exp(-total)
        acc = wb.copy()
        traces[0] += acc.sum()
        for m in range(1, n_tail + 1):
            acc = acc * (total / m)
            traces[m] += acc.sum()
        powers = _mode_powers(amp, params.n_cut)
        for n in blocks:
            comp = _sector_components(powers, cfg_arrays[n], inv_facts[n])
            blocks[n] += (comp * wb) @ comp.conj().T
    return RegionMoments(mass=mass, traces=traces, blocks=blocks, bases=bases)


def _mode_powers(amp: np.ndarray, n_max: int) -> np.ndarray:
    """powers[j, k, :] = amp[j]**k via cumulative products (k = 0..n_max)."""
    powers = np.empty((amp.shape[0], n_max + 1, amp.shape[1]), dtype=complex)
    powers[:, 0] = 1.0
    for k in range(1, n_max + 1):
        np.multiply(powers[:, k - 1], amp, out=powers[:, k])
    return powers


def _sector_components(powers: np.ndarray, cfg: np.ndarray, inv_fact: np.ndarray) -> np.ndarray:
    """Per-configuration coherent components, one row per basis state."""
    comp = powers[0][cfg[:, 0]].copy()
    for j in range(1, cfg.shape[1]):
        comp *= powers[j][cfg[:, j]]
    comp *= inv_fact[:, None]
    return comp


def region_average(region: RegionSpec, n: int, params: PassiveParams,
                   nodes=DEFAULT_NODES, refine_check: bool = False,
                   refine_rtol: float = 2e-3):
    """Normalised n-photon region state, its photon probability, and p_Omega.

    With `refine_check` the quadrature is repeated at doubled resolution
    and a ConvergenceError carrying both estimates is raised when the
    relative change in (mass, photon probability) exceeds `refine_rtol`.
    """
    if n > params.n_cut:
        raise ValueError(f"n={n} exceeds n_cut={params.n_cut}")
    moments = region_moments(region, params, nodes=nodes, n_tail=max(20, n))
    rho = moments.normalized_block(n)
    p_n = float(moments.traces[n] / moments.mass)
    result = (rho, p_n, moments.mass)
    if refine_check:
        fine_nodes = tuple(2 * x for x in nodes)
        fine = region_moments(region, params, nodes=fine_nodes, n_tail=max(20, n))
        fine_result = (fine.normalized_block(n), float(fine.traces[n] / fine.mass), fine.mass)
        rel_mass = abs(result[2] - fine_result[2]) / fine_result[2]
        rel_pn = abs(result[1] - fine_result[1]) / max(fine_result[1], 1e-300)
        if max(rel_mass, rel_pn) > refine_rtol:
            raise ConvergenceError(
                f"quadrature not converged on {region}: mass drift {rel_mass:.2e}, "
                f"p_n drift {rel_pn:.2e}", result, fine_result)
    return result


# ---------------------------------------------------------------------------
# Monte-Carlo oracle
# ---------------------------------------------------------------------------

@dataclass
class MonteCarloRegionEstimate:
    """Phase-sampled estimates of one region's n-photon block and weights.

    block_mean estimates the region-conditional mean of the sub-normalised
    block (matching region numerator / mass from quadrature), with per-entry
    standard errors of the real and imaginary parts.
    """

    n: int
    block_mean: np.ndarray
    block_se_real: np.ndarray
    block_se_imag: np.ndarray
    trace_mean: float
    trace_se: float
    region_mass: float
    mass_se: float
    accepted: int
    samples: int


def monte_carlo_region_estimate(params: PassiveParams, region: RegionSpec, n: int,
                                samples: int, seed: int,
                                chunk: int = 200_000) -> MonteCarloRegionEstimate:
    """Estimate region quantities by sampling the raw phases directly.

    Independent of the quadrature path: the leakage amplitudes come from
    the sampled phases themselves, not from the sign-branch formulas.
    """
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples for meaningful errors")
    rng = np.random.default_rng(seed)
    basis = params.block_basis(n)
    dim = basis.dim
    inv = inv_sqrt_factorials(basis)
    cfg_array = np.array(basis.configs, dtype=np.intp)
    root_half = math.sqrt(params.omega / 2.0)
    half_root = 0.5 * math.sqrt(params.omega)

    sum_e = np.zeros((dim, dim), dtype=complex)
    sum_e2 = np.zeros((dim, dim), dtype=complex)
    sum_abs2 = np.zeros((dim, dim))
    sum_t = 0.0
    sum_t2 = 0.0
    accepted = 0

    want_bit = -1 if region.bit is None else region.bit
    want_basis = BASES.index(region.basis)
    want_int = INTENSITIES.index(region.intensity)

    done = 0
    while done < samples:
        count = min(chunk, samples - done)
        done += count
        ph = rng.uniform(0.0, TWO_PI, size=(4, count))
        mu_e = params.mu_max * (1.0 + np.cos(ph[0] - ph[1])) / 2.0
        mu_l = params.mu_max * (1.0 + np.cos(ph[2] - ph[3])) / 2.0
        mu = mu_e + mu_l
        safe = np.where(mu > 0.0, mu, 1.0)
        theta = 2.0 * np.arccos(np.sqrt(np.clip(mu_e / safe, 0.0, 1.0)))
        phi_e = 0.5 * (ph[0] + ph[1]) + halfway_shift(ph[0] - ph[1])
        phi_l = 0.5 * (ph[2] + ph[3]) + halfway_shift(ph[2] - ph[3])
        phi = wrap_phase(phi_l - phi_e)
        bit, basis_code, intensity = _classify_arrays(theta, phi, mu,
                                                      params.geometry, params.mu_max)
        mask = (basis_code == want_basis) & (intensity == want_int)
        if want_bit >= 0:
            mask &= bit == want_bit
        else:
            mask &= bit >= 0
        m = int(np.count_nonzero(mask))
        if m == 0:
            continue
        accepted += m
        amp = np.empty((MODE_COUNT, m), dtype=complex)
        amp[0] = np.sqrt(mu_e[mask])
        amp[1] = np.sqrt(mu_l[mask]) * np.exp(1j * phi[mask])
        rot = np.exp(-1j * phi_e[mask])
        amp[2] = root_half * np.exp(1j * ph[0][mask]) * rot
        amp[3] = half_root * (np.exp(1j * ph[1][mask]) + np.exp(1j * ph[2][mask])) * rot
        amp[4] = root_half * np.exp(1j * ph[3][mask]) * rot
        mu_leak = np.sum(np.abs(amp[2:]) ** 2, axis=0)
        total = mu[mask] + mu_leak
        wfac = np.exp(-total)

        comp = _sector_components(_mode_powers(amp, n), cfg_array, inv)
        sum_e += (comp * wfac) @ comp.conj().T
        comp2 = comp * comp
        sum_e2 += (comp2 * wfac ** 2) @ comp2.conj().T
        mags = np.abs(comp) ** 2
        sum_abs2 += (mags * wfac ** 2) @ mags.T
        t = wfac * total ** n / math.factorial(n)
        sum_t += float(t.sum())
        sum_t2 += float((t * t).sum())

    if accepted == 0:
        raise EmptyRegionError(f"no samples landed in region {region}")

    mean = sum_e / accepted
    mean_sq_re = (sum_e2.real + sum_abs2) / (2.0 * accepted)
    mean_sq_im = (sum_abs2 - sum_e2.real) / (2.0 * accepted)
    var_re = np.clip(mean_sq_re - mean.real ** 2, 0.0, None)
    var_im = np.clip(mean_sq_im - mean.imag ** 2, 0.0, None)
    t_mean = sum_t / accepted
    t_var = max(0.0, sum_t2 / accepted - t_mean ** 2)
    p_hat = accepted / samples
    return MonteCarloRegionEstimate(
        n=n,
        block_mean=mean,
        block_se_real=np.sqrt(var_re / accepted),
        block_se_imag=np.sqrt(var_im / accepted),
        trace_mean=t_mean,
        trace_se=math.sqrt(t_var / accepted),
        region_mass=p_hat,
        mass_se=math.sqrt(p_hat * (1.0 - p_hat) / samples),
        accepted=accepted,
        samples=samples,
    )
