"""Independent numerical oracles for the pipeline's derived quantities.

Each check recomputes a quantity along a second, independent route
(brute-force enumeration, direct series expansion, Monte-Carlo sampling,
vertex enumeration) and compares.  The CLI `validate` subcommand runs
them all; the test suite calls them individually.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import channel as channel_mod
from . import coin, driver, lp, oil, passive
from .fock import basis_index, coherent_components, enumerate_basis
from .linalg import hermitian_eigen


# ---------------------------------------------------------------------------
# Independent elementary oracles
# ---------------------------------------------------------------------------

def jacobi_eigenvalues(matrix: np.ndarray, sweeps: int = 60) -> np.ndarray:
    """Cyclic complex Jacobi eigenvalues; independent of LAPACK."""
    a = np.array(matrix, dtype=complex)
    n = a.shape[0]
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-15:
                    continue
                off = max(off, abs(apq))
                phase = apq / abs(apq)
                tau = (a[q, q].real - a[p, p].real) / (2.0 * abs(apq))
                t = np.sign(tau) / (abs(tau) + math.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot = np.eye(n, dtype=complex)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s * phase
                rot[q, p] = -s * np.conj(phase)
                a = rot.conj().T @ a @ rot
        if off < 1e-14:
            break
    return np.sort(a.diagonal().real)


def vertex_enumeration_optimum(n_vars: int, constraints, objective, sense: str):
    """Exact LP optimum over [0,1]^n by enumerating basic feasible points.

    constraints: list of (coeffs array, sense, rhs).  Only for tiny
    programs; the hyperplane pool is all constraint boundaries plus the
    box faces.
    """
    planes = [(np.asarray(a, dtype=float), float(b)) for a, _, b in constraints]
    for i in range(n_vars):
        e = np.zeros(n_vars)
        e[i] = 1.0
        planes.append((e.copy(), 0.0))
        planes.append((e.copy(), 1.0))
    best = None
    for combo in itertools.combinations(range(len(planes)), n_vars):
        a = np.array([planes[k][0] for k in combo])
        b = np.array([planes[k][1] for k in combo])
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        x = np.linalg.solve(a, b)
        if np.any(x < -1e-9) or np.any(x > 1.0 + 1e-9):
            continue
        ok = True
        for coeffs, s, rhs in constraints:
            lhs = float(np.dot(coeffs, x))
            if s == "<=" and lhs > rhs + 1e-9:
                ok = False
                break
            if s == ">=" and lhs < rhs - 1e-9:
                ok = False
                break
        if not ok:
            continue
        value = float(np.dot(objective, x))
        if best is None:
            best = value
        elif sense == "min":
            best = min(best, value)
        else:
            best = max(best, value)
    return best


def textbook_decoy_bound(probs: dict, gains: dict, n_cut: int) -> float:
    """Shared-yield three-intensity decoy bound on the single-photon yield.

    Standard decoy program: one yield variable per photon number, common
    to all intensities; solved exactly by vertex enumeration.
    """
    n_vars = n_cut + 1
    constraints = []
    for label in ("I0", "I1", "I2"):
        p = np.asarray(probs[label][:n_vars], dtype=float)
        q = float(gains[label])
        constraints.append((p, "<=", q))
        constraints.append((p, ">=", q - (1.0 - float(np.sum(p)))))
    objective = np.zeros(n_vars)
    objective[1] = 1.0
    return vertex_enumeration_optimum(n_vars, constraints, objective, "min")


def spec_to_dense(spec: lp.LinearProgramSpec):
    index = {name: i for i, name in enumerate(spec.variables)}
    rows = []
    for con in spec.constraints:
        a = np.zeros(len(spec.variables))
        for name, coef in con.coeffs.items():
            a[index[name]] = coef
        rows.append((a, con.sense, con.rhs))
    c = np.zeros(len(spec.variables))
    for name, coef in spec.objective.items():
        c[index[name]] = coef
    return rows, c


# ---------------------------------------------------------------------------
# Direct-expansion state oracles
# ---------------------------------------------------------------------------

def _full_tensor_average(amplitude_sets, mode_cut: int):
    """Average pure-state projector over explicit global-phase samples.

    amplitude_sets: iterable of (weight, amplitudes (k,) complex) with
    absolute phases included.  Returns the averaged density matrix on
    the full truncated tensor basis (mode_cut + 1 levels per mode).
    """
    levels = mode_cut + 1
    sets = list(amplitude_sets)
    k = len(sets[0][1])
    dim = levels ** k
    out = np.zeros((dim, dim), dtype=complex)
    fact = np.array([math.factorial(m) for m in range(levels)])
    for weight, alphas in sets:
        coeffs = []
        for j in range(k):
            powers = alphas[j] ** np.arange(levels) / np.sqrt(fact)
            coeffs.append(powers * math.exp(-abs(alphas[j]) ** 2 / 2.0))
        vec = coeffs[0]
        for j in range(1, k):
            vec = np.kron(vec, coeffs[j])
        out += weight * np.outer(vec, vec.conj())
    return out


def _extract_sector(full: np.ndarray, basis, mode_cut: int) -> np.ndarray:
    levels = mode_cut + 1
    idx = []
    for cfg in basis.configs:
        flat = 0
        for occ in cfg:
            flat = flat * levels + occ
        idx.append(flat)
    idx = np.array(idx)
    return full[np.ix_(idx, idx)]


def passive_block_oracle(point: passive.TargetPoint, n: int, omega: float,
                         mu_max: float, phase_nodes: int = 512) -> np.ndarray:
    """n-photon block by explicit global-phase averaging of the raw state.

    Builds the full (truncated) five-mode tensor state from the inverted
    pulse phases for each sign branch, averages the projector over the
    reference phase numerically, and cuts out the n-photon sector.
    """
    basis = passive.passive_basis(n)
    sets = []
    for phase in (np.arange(phase_nodes) + 0.5) * (2.0 * math.pi / phase_nodes):
        for signs in passive.BRANCHES:
            p1, p2, p3, p4 = passive.invert_phases(point, phase, signs, mu_max)
            alphas = np.array([
                math.sqrt(point.mu_e) * np.exp(1j * phase),
                math.sqrt(point.mu_l) * np.exp(1j * (point.phi + phase)),
                math.sqrt(omega / 2.0) * np.exp(1j * p1),
                0.5 * math.sqrt(omega) * (np.exp(1j * p2) + np.exp(1j * p3)),
                math.sqrt(omega / 2.0) * np.exp(1j * p4),
            ])
            sets.append((0.25 / phase_nodes, alphas))
    full = _full_tensor_average(sets, mode_cut=n)
    return _extract_sector(full, basis, mode_cut=n)


def oil_block_oracle(setting, params, n: int, phase_nodes: int = 512) -> np.ndarray:
    """n-photon block by explicit numeric averaging of the seed phase."""
    basis = oil.oil_basis(n)
    base = oil.setting_amplitudes(setting, params)
    sets = [(1.0 / phase_nodes, base * np.exp(1j * phase))
            for phase in (np.arange(phase_nodes) + 0.5) * (2.0 * math.pi / phase_nodes)]
    full = _full_tensor_average(sets, mode_cut=n)
    return _extract_sector(full, basis, mode_cut=n)


def oil_monte_carlo_estimate(setting, params, n: int, samples: int, seed: int):
    """Monte-Carlo over the uniform seed phase: per-sample n-photon block.

    Within a fixed photon-number sector the seed phase cancels exactly,
    so the sampled mean matches the analytic block with zero variance;
    the estimate still exercises the sampling route end to end.
    Returns (mean block, per-entry standard error of the real part).
    """
    rng = np.random.default_rng(seed)
    basis = oil.oil_basis(n)
    base = oil.setting_amplitudes(setting, params)
    norm = math.exp(-float(np.sum(np.abs(base) ** 2)))
    mean = np.zeros((basis.dim, basis.dim), dtype=complex)
    sq = np.zeros((basis.dim, basis.dim))
    for phase in rng.uniform(0.0, 2.0 * math.pi, size=samples):
        vec = coherent_components(base * np.exp(1j * phase), basis)
        block = norm * np.outer(vec, vec.conj())
        mean += block
        sq += block.real ** 2
    mean /= samples
    var = np.clip(sq / samples - mean.real ** 2, 0.0, None)
    return mean, np.sqrt(var / samples)


# ---------------------------------------------------------------------------
# Density normalisation and box-frequency oracles
# ---------------------------------------------------------------------------

def total_density_mass(mu_max: float, n_theta: int = 800, n_u: int = 800) -> float:
    """Quadrature of the target-variable density over its full support."""
    d_theta = math.pi / n_theta
    thetas = (np.arange(n_theta) + 0.5) * d_theta
    c2 = np.cos(thetas / 2.0) ** 2
    s2 = np.sin(thetas / 2.0) ** 2
    big = np.maximum(c2, s2)
    small = np.minimum(c2, s2)
    d_u = 1.0 / n_u
    uu = (np.arange(n_u) + 0.5) * d_u
    mu = mu_max * (1.0 - uu[None, :] ** 2) / big[:, None]
    integrand = (2.0 / (math.pi ** 2 * big[:, None])
                 / np.sqrt(1.0 - mu * small[:, None] / mu_max))
    return float(np.sum(integrand) * d_theta * d_u)


def density_box_mass(mu_max: float, theta_box, phi_box, mu_box, n_grid: int = 600) -> float:
    """Quadrature of the density over an axis-aligned box away from the
    singular surfaces."""
    t_lo, t_hi = theta_box
    m_lo, m_hi = mu_box
    d_t = (t_hi - t_lo) / n_grid
    d_m = (m_hi - m_lo) / n_grid
    thetas = t_lo + (np.arange(n_grid) + 0.5) * d_t
    mus = m_lo + (np.arange(n_grid) + 0.5) * d_m
    c2 = np.cos(thetas / 2.0) ** 2
    s2 = np.sin(thetas / 2.0) ** 2
    ge = 1.0 - np.outer(mus, c2) / mu_max
    gl = 1.0 - np.outer(mus, s2) / mu_max
    if np.any(ge <= 0.0) or np.any(gl <= 0.0):
        raise ValueError("box touches the singular surface; move it inward")
    f = 1.0 / (mu_max * math.pi ** 2 * np.sqrt(ge * gl))
    phi_fraction = (phi_box[1] - phi_box[0]) / (2.0 * math.pi)
    return float(np.sum(f) * d_t * d_m * phi_fraction)


def sample_target_variables(rng, count: int, mu_max: float):
    ph = rng.uniform(0.0, 2.0 * math.pi, size=(4, count))
    mu_e = mu_max * (1.0 + np.cos(ph[0] - ph[1])) / 2.0
    mu_l = mu_max * (1.0 + np.cos(ph[2] - ph[3])) / 2.0
    mu = mu_e + mu_l
    safe = np.where(mu > 0.0, mu, 1.0)
    theta = 2.0 * np.arccos(np.sqrt(np.clip(mu_e / safe, 0.0, 1.0)))
    phi_e = 0.5 * (ph[0] + ph[1]) + passive.halfway_shift(ph[0] - ph[1])
    phi_l = 0.5 * (ph[2] + ph[3]) + passive.halfway_shift(ph[2] - ph[3])
    phi = passive.wrap_phase(phi_l - phi_e)
    return theta, phi, mu


# ---------------------------------------------------------------------------
# Named checks
# ---------------------------------------------------------------------------

def check_eigen_oracle(seed: int = 0) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(5):
        raw = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        h = (raw + raw.conj().T) / 2.0
        ours = hermitian_eigen(h).values
        reference = jacobi_eigenvalues(h)
        worst = max(worst, float(np.max(np.abs(ours - reference))))
    return worst < 1e-9, f"max eigenvalue deviation {worst:.2e}"


def check_basis_enumeration() -> tuple[bool, str]:
    for n, k in ((2, 4), (3, 5), (4, 5)):
        basis = enumerate_basis(n, k, leak_modes=range(2, k))
        brute = {tuple(c) for c in itertools.product(range(n + 1), repeat=k)
                 if sum(c) == n}
        if set(basis.configs) != brute or basis.dim != math.comb(n + k - 1, k - 1):
            return False, f"enumeration mismatch at n={n}, k={k}"
        for i, cfg in enumerate(basis.configs):
            if basis_index(basis, cfg) != i:
                return False, "index roundtrip failed"
    return True, "counts and roundtrips match brute force"


def check_phase_roundtrip(seed: int = 1, samples: int = 10_000) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    mu_max = 0.7
    worst = 0.0
    for _ in range(samples):
        raw = rng.uniform(0.0, 2.0 * math.pi, size=4)
        point = passive.target_from_phases(*raw, mu_max)
        for signs in passive.BRANCHES:
            back = passive.invert_phases(point, point.phi_e, signs, mu_max)
            again = passive.target_from_phases(*back, mu_max)
            worst = max(worst,
                        abs(again.theta - point.theta),
                        abs(passive.wrap_phase(again.phi - point.phi)),
                        abs(again.mu - point.mu))
    return worst < 1e-9, f"worst roundtrip deviation {worst:.2e} over {samples} samples"


def check_density_normalisation(seed: int = 2, samples: int = 1_000_000) -> tuple[bool, str]:
    mu_max = 0.6
    mass = total_density_mass(mu_max)
    if abs(mass - 1.0) > 2e-3:
        return False, f"total mass {mass:.6f}"
    box_theta = (0.4, 1.1)
    box_phi = (-1.0, 0.6)
    box_mu = (0.1 * mu_max, 0.8 * mu_max)
    expected = density_box_mass(mu_max, box_theta, box_phi, box_mu)
    rng = np.random.default_rng(seed)
    theta, phi, mu = sample_target_variables(rng, samples, mu_max)
    hits = ((theta > box_theta[0]) & (theta < box_theta[1])
            & (phi > box_phi[0]) & (phi < box_phi[1])
            & (mu > box_mu[0]) & (mu < box_mu[1]))
    freq = float(np.mean(hits))
    se = math.sqrt(freq * (1.0 - freq) / samples)
    z = abs(freq - expected) / se
    ok = z < 3.0
    return ok, f"total mass {mass:.6f}; box frequency z={z:.2f}"


def check_block_expansion(seed: int = 3) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    mu_max = 0.5
    omega = 0.01
    worst = 0.0
    for _ in range(2):
        point = passive.TargetPoint(theta=float(rng.uniform(0.3, 2.8)),
                                    phi=float(rng.uniform(-3.0, 3.0)),
                                    mu=float(rng.uniform(0.1, 0.9) * mu_max))
        for n in (1, 2):
            ours = passive.photon_number_block(point, n, omega, mu_max)
            reference = passive_block_oracle(point, n, omega, mu_max)
            worst = max(worst, float(np.max(np.abs(ours - reference))))
    return worst < 1e-10, f"max block deviation {worst:.2e}"


def check_oil_expansion(seed: int = 4) -> tuple[bool, str]:
    params = oil.params_for_intensities(0.5, 0.2, 1e-4, omega=0.02)
    worst = 0.0
    for bit in (0, 1):
        for basis_label, intensity in (("Z", "I0"), ("X", "I1")):
            setting = oil.setting_phases(bit, basis_label, intensity, params)
            for n in (1, 2):
                ours = oil.state_block(setting, params, n)
                reference = oil_block_oracle(setting, params, n)
                worst = max(worst, float(np.max(np.abs(ours - reference))))
    return worst < 1e-10, f"max block deviation {worst:.2e}"


def check_region_monte_carlo(seed: int = 5, samples: int = 400_000,
                             regions=None, max_n: int = 2) -> tuple[bool, str]:
    geometry = passive.RegionGeometry(delta_theta_z=0.15)
    params = passive.PassiveParams(mu_max=0.5, omega=0.005, geometry=geometry)
    if regions is None:
        regions = [passive.RegionSpec(0, "Z", "I0"), passive.RegionSpec(0, "X", "I0")]
    worst = 0.0
    for region in regions:
        moments = passive.region_moments(region, params, nodes=(48, 48, 48))
        for n in range(max_n + 1):
            mc = passive.monte_carlo_region_estimate(params, region, n, samples, seed)
            quad_mean = moments.blocks[n] / moments.mass
            dz_re = np.abs(quad_mean.real - mc.block_mean.real) / np.maximum(mc.block_se_real, 1e-14)
            dz_im = np.abs(quad_mean.imag - mc.block_mean.imag) / np.maximum(mc.block_se_imag, 1e-14)
            mask_re = (np.abs(quad_mean.real) > 1e-13) | (mc.block_se_real > 1e-13)
            mask_im = (np.abs(quad_mean.imag) > 1e-13) | (mc.block_se_imag > 1e-13)
            if np.any(mask_re):
                worst = max(worst, float(np.max(dz_re[mask_re])))
            if np.any(mask_im):
                worst = max(worst, float(np.max(dz_im[mask_im])))
            z_mass = abs(moments.mass - mc.region_mass) / mc.mass_se
            z_trace = abs(moments.traces[n] / moments.mass - mc.trace_mean) / max(mc.trace_se, 1e-14)
            worst = max(worst, z_mass, z_trace)
        seed += 1
    return worst < 3.0, f"worst z-score {worst:.2f}"


def check_lp_vertex_oracle(seed: int = 6, cases: int = 100) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(3, 6))
        m = int(rng.integers(4, 9))
        interior = rng.uniform(0.2, 0.8, size=n)
        a = rng.normal(size=(m, n))
        slack = rng.uniform(0.05, 0.5, size=m)
        b = a @ interior + slack
        names = tuple(f"x{i}" for i in range(n))
        rows = [lp.Constraint({names[i]: float(a[r, i]) for i in range(n)}, "<=", float(b[r]))
                for r in range(m)]
        c = rng.normal(size=n)
        sense = "min" if rng.integers(2) == 0 else "max"
        spec = lp.LinearProgramSpec(variables=names, sense=sense,
                                    objective={names[i]: float(c[i]) for i in range(n)},
                                    constraints=rows)
        got = lp.solve(spec)
        reference = vertex_enumeration_optimum(
            n, [(a[r], "<=", float(b[r])) for r in range(m)], c, sense)
        if got.status != "optimal" or reference is None:
            return False, "solver or oracle failed on a feasible program"
        worst = max(worst, abs(got.value - reference))
    return worst < 1e-7, f"max optimum deviation {worst:.2e} over {cases} programs"


def check_tangent_dominance(grid: int = 1000) -> tuple[bool, str]:
    ys = np.linspace(0.0, 1.0, grid)
    worst = 0.0
    for z in (0.03, 0.3, 0.62, 0.9, 0.99, 0.999, 1.0):
        for y_ref in (1e-4, 0.01, 0.2, 0.5, 0.8, 0.97):
            for side, sign in (("L", 1.0), ("U", -1.0)):
                line = coin.tangent_line(z, coin.safe_reference(y_ref, z, side), side)
                for y in ys:
                    gap = sign * (coin.transfer_bound(float(y), z, side) - line.evaluate(float(y)))
                    worst = min(worst, gap) if worst < gap else worst
                    if gap < -1e-12:
                        return False, f"dominance violated at z={z}, y_ref={y_ref}, y={y}"
    return True, "all tangent lines dominate their envelopes"


def check_channel_truth_feasibility(nodes: int = 32) -> tuple[bool, str]:
    """Model-generated observables admit the model's own yields/errors."""
    config = driver.ProtocolConfig(transmitter="passive", analysis="baseline",
                                   mu_max=0.45, delta_theta_z=0.12)
    slack = _channel_truth_slack(config, 50.0, 60.0, nodes)
    return slack < 1e-7, f"worst constraint violation {slack:.2e}"


def _channel_truth_slack(config, distance: float, att: float, nodes: int) -> float:
    comp = driver.passive_computation(config, distance, att, nodes)
    n_cut = config.n_cut
    worst = 0.0
    for basis in driver.BASES:
        gains, probs, fids = driver._passive_yield_inputs(comp, basis, n_cut)
        spec = lp.yield_program(gains, probs, fids,
                                channel_mod.reference_yields(n_cut, comp.channel), n_cut)
        node_sets = {i: passive.region_nodes_for(passive.RegionSpec(None, basis, i),
                                                 comp.params.geometry, comp.params.mu_max,
                                                 (nodes, nodes, nodes))
                     for i in driver.INTENSITIES}
        truth = {}
        for i in driver.INTENSITIES:
            yields, _ = channel_mod.passive_true_statistics(node_sets[i], comp.params,
                                                            comp.channel, n_cut)
            for n in range(n_cut + 1):
                truth[f"Y_{i}_{n}"] = float(yields[n])
        worst = max(worst, _constraint_violation(spec, truth))
        solution = lp.solve(spec)
        if solution.status != "optimal":
            return math.inf
        if solution.value > truth["Y_I0_1"] + 1e-7:
            worst = max(worst, solution.value - truth["Y_I0_1"])
    return worst


def _constraint_violation(spec: lp.LinearProgramSpec, assignment: dict) -> float:
    worst = 0.0
    for con in spec.constraints:
        lhs = sum(coef * assignment[name] for name, coef in con.coeffs.items())
        if con.sense == "<=":
            worst = max(worst, lhs - con.rhs)
        else:
            worst = max(worst, con.rhs - lhs)
    return worst


def check_reference_error_brute(seed: int = 7) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    eta, p_dark = 0.35, 0.01
    worst = 0.0
    for m in (0, 1, 2, 3):
        diag = rng.uniform(0.1, 1.0, size=m + 1)
        diag /= diag.sum()
        ours = float(np.dot(channel_mod.error_projector_diagonal(m, eta, p_dark), diag))
        brute = 0.0
        for j in range(m + 1):  # j photons at the correct detector
            for det_c in range(j + 1):
                for det_e in range(m - j + 1):
                    p_det = (math.comb(j, det_c) * eta ** det_c * (1 - eta) ** (j - det_c)
                             * math.comb(m - j, det_e) * eta ** det_e * (1 - eta) ** (m - j - det_e))
                    for dark_c in (0, 1):
                        for dark_e in (0, 1):
                            p_dk = ((p_dark if dark_c else 1 - p_dark)
                                    * (p_dark if dark_e else 1 - p_dark))
                            click_c = det_c > 0 or dark_c
                            click_e = det_e > 0 or dark_e
                            if click_e and not click_c:
                                err = 1.0
                            elif click_e and click_c:
                                err = 0.5
                            else:
                                err = 0.0
                            brute += diag[m - j] * p_det * p_dk * err
        worst = max(worst, abs(ours - brute))
    return worst < 1e-12, f"max deviation {worst:.2e}"


ALL_CHECKS = (
    ("eigen-oracle", check_eigen_oracle),
    ("basis-enumeration", check_basis_enumeration),
    ("phase-roundtrip", check_phase_roundtrip),
    ("density-normalisation", check_density_normalisation),
    ("passive-block-expansion", check_block_expansion),
    ("oil-block-expansion", check_oil_expansion),
    ("region-monte-carlo", check_region_monte_carlo),
    ("lp-vertex-oracle", check_lp_vertex_oracle),
    ("tangent-dominance", check_tangent_dominance),
    ("channel-truth-feasibility", check_channel_truth_feasibility),
    ("reference-error-brute", check_reference_error_brute),
)


def run_all(seed: int = 20240, samples: int = 200_000, fast: bool = False) -> bool:
    """Run every oracle check, print one pass/fail line each."""
    all_ok = True
    for name, func in ALL_CHECKS:
        kwargs = {}
        if name == "region-monte-carlo":
            kwargs = {"seed": seed, "samples": max(10_000, samples // (4 if fast else 1))}
        elif name == "phase-roundtrip":
            kwargs = {"seed": seed, "samples": 2_000 if fast else 10_000}
        elif name == "density-normalisation":
            kwargs = {"seed": seed, "samples": max(10_000, samples)}
        elif name == "lp-vertex-oracle":
            kwargs = {"seed": seed, "cases": 30 if fast else 100}
        elif name == "channel-truth-feasibility":
            kwargs = {"nodes": 24 if fast else 32}
        try:
            ok, detail = func(**kwargs)
        except Exception as exc:  # a crashed oracle is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    print("validation " + ("passed" if all_ok else "FAILED"))
    return all_ok
