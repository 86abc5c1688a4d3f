import math

import numpy as np
import pytest

from leakyqkd import channel, driver, lp, passive
from leakyqkd.linalg import fidelity, pure_state_fidelity
from leakyqkd.validation import (spec_to_dense, textbook_decoy_bound,
                                 vertex_enumeration_optimum)

INTENSITIES = ("I0", "I1", "I2")


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

def test_trivial_minimum():
    spec = lp.LinearProgramSpec(
        variables=("x",), sense="min", objective={"x": 1.0},
        constraints=[lp.Constraint({"x": 1.0}, ">=", 0.3)])
    solution = lp.solve(spec)
    assert solution.status == "optimal"
    assert solution.value == pytest.approx(0.3, abs=1e-12)


def test_infeasible_is_reported():
    spec = lp.LinearProgramSpec(
        variables=("x",), sense="min", objective={"x": 1.0},
        constraints=[lp.Constraint({"x": 1.0}, ">=", 0.7),
                     lp.Constraint({"x": 1.0}, "<=", 0.2)])
    assert lp.solve(spec).status == "infeasible"


def test_solver_is_deterministic():
    rng = np.random.default_rng(0)
    names = tuple(f"x{i}" for i in range(6))
    rows = []
    a = rng.normal(size=(8, 6))
    b = a @ np.full(6, 0.5) + rng.uniform(0.1, 0.4, size=8)
    for r in range(8):
        rows.append(lp.Constraint({names[i]: float(a[r, i]) for i in range(6)}, "<=", float(b[r])))
    spec = lp.LinearProgramSpec(variables=names, sense="max",
                                objective={n: 1.0 for n in names}, constraints=rows)
    first = lp.solve(spec)
    second = lp.solve(spec)
    assert first.value == second.value
    assert first.assignment == second.assignment
    assert first.iterations == second.iterations


def test_random_programs_match_vertex_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(3, 6))
        m = int(rng.integers(4, 9))
        interior = rng.uniform(0.2, 0.8, size=n)
        a = rng.normal(size=(m, n))
        b = a @ interior + rng.uniform(0.05, 0.5, size=m)
        names = tuple(f"x{i}" for i in range(n))
        rows = [lp.Constraint({names[i]: float(a[r, i]) for i in range(n)}, "<=", float(b[r]))
                for r in range(m)]
        c = rng.normal(size=n)
        sense = "min" if rng.integers(2) == 0 else "max"
        spec = lp.LinearProgramSpec(
            variables=names, sense=sense,
            objective={names[i]: float(c[i]) for i in range(n)}, constraints=rows)
        got = lp.solve(spec)
        reference = vertex_enumeration_optimum(
            n, [(a[r], "<=", float(b[r])) for r in range(m)], c, sense)
        assert got.status == "optimal"
        assert got.value == pytest.approx(reference, abs=1e-7)


def test_spec_rejects_unknown_variables():
    with pytest.raises(ValueError):
        lp.LinearProgramSpec(variables=("x",), sense="min", objective={"y": 1.0})


# ---------------------------------------------------------------------------
# Baseline programs
# ---------------------------------------------------------------------------

def poisson_probs(mu, n_cut):
    out = [math.exp(-mu)]
    for n in range(1, n_cut + 1):
        out.append(out[-1] * mu / n)
    return np.array(out)


def ideal_inputs(n_cut=2, eta=0.1, p_dark=1e-6):
    mus = {"I0": 0.5, "I1": 0.1, "I2": 0.002}
    probs = {i: poisson_probs(mus[i], n_cut) for i in INTENSITIES}
    yields = 1.0 - (1.0 - p_dark) ** 2 * (1.0 - eta) ** np.arange(25)
    gains = {i: float(1.0 - (1.0 - p_dark) ** 2 * math.exp(-eta * mus[i])) for i in INTENSITIES}
    fids = {(i, j, n): 1.0 for i in INTENSITIES for j in INTENSITIES for n in range(n_cut + 1)
            if i != j}
    return gains, probs, fids, yields[:n_cut + 1], yields


def test_unit_fidelity_recovers_textbook_decoy_bound():
    for n_cut in (2, 4):
        gains, probs, fids, refs, _ = ideal_inputs(n_cut=n_cut)
        spec = lp.yield_program(gains, probs, fids, refs, n_cut)
        ours = lp.solve(spec)
        reference = textbook_decoy_bound(probs, gains, n_cut)
        assert ours.status == "optimal"
        assert ours.value == pytest.approx(reference, abs=1e-6)


def test_zero_fidelity_decouples_to_single_intensity_bound():
    n_cut = 2
    gains, probs, _, refs, _ = ideal_inputs(n_cut=n_cut)
    fids = {(i, j, n): 0.0 for i in INTENSITIES for j in INTENSITIES for n in range(n_cut + 1)
            if i != j}
    spec = lp.yield_program(gains, probs, fids, refs, n_cut)
    decoupled = lp.solve(spec).value
    single = vertex_enumeration_optimum(
        n_cut + 1,
        [(probs["I0"], "<=", gains["I0"]),
         (probs["I0"], ">=", gains["I0"] - (1.0 - float(probs["I0"].sum())))],
        np.eye(n_cut + 1)[1], "min")
    assert decoupled == pytest.approx(single, abs=1e-7)


def test_yield_program_matches_hand_reduction():
    # single effective intensity, n_cut = 1: the optimum collapses to
    # max(0, (Q - 1 + p1)/p1)
    n_cut = 1
    mu, q = 0.5, 0.9
    probs = {i: poisson_probs(mu, n_cut) for i in INTENSITIES}
    gains = {i: q for i in INTENSITIES}
    fids = {(i, j, n): 1.0 for i in INTENSITIES for j in INTENSITIES for n in range(2)
            if i != j}
    refs = np.array([0.3, 0.5])
    spec = lp.yield_program(gains, probs, fids, refs, n_cut)
    p1 = float(probs["I0"][1])
    assert lp.solve(spec).value == pytest.approx((q - 1.0 + p1) / p1, abs=1e-9)


def test_bit_error_program_zero_errors_bounds_gamma_by_slack():
    n_cut = 2
    _, probs, fids, refs, _ = ideal_inputs(n_cut=n_cut)
    error_gains = {i: 0.0 for i in INTENSITIES}
    spec = lp.bit_error_program(error_gains, probs, fids,
                                np.full(n_cut + 1, 1e-3), n_cut)
    solution = lp.solve(spec)
    # all the error weight must hide in the unobserved tail
    tail = 1.0 - float(probs["I0"].sum())
    assert solution.value <= tail / float(probs["I0"][1]) + 1e-9
    assert solution.value < 1.0


def test_coin_constraints_never_hurt():
    n_cut = 2
    gains, probs, fids, refs, _ = ideal_inputs(n_cut=n_cut)
    realistic = {key: 0.98 for key in fids}
    with_coin = lp.solve(lp.yield_program(gains, probs, realistic, refs, n_cut)).value
    vacuous = {key: 0.0 for key in fids}
    without = lp.solve(lp.yield_program(gains, probs, vacuous, refs, n_cut)).value
    assert with_coin >= without - 1e-9


def test_channel_truth_feasible_for_ideal_decoy():
    n_cut = 4
    gains, probs, fids, refs, yields = ideal_inputs(n_cut=n_cut)
    spec = lp.yield_program(gains, probs, fids, refs, n_cut)
    truth = {f"Y_{i}_{n}": float(yields[n]) for i in INTENSITIES for n in range(n_cut + 1)}
    rows, _ = spec_to_dense(spec)
    index = {name: k for k, name in enumerate(spec.variables)}
    x = np.zeros(len(spec.variables))
    for name, value in truth.items():
        x[index[name]] = value
    for a, sense, rhs in rows:
        lhs = float(np.dot(a, x))
        assert lhs <= rhs + 1e-9 if sense == "<=" else lhs >= rhs - 1e-9
    assert lp.solve(spec).value <= truth["Y_I0_1"] + 1e-9


# ---------------------------------------------------------------------------
# Key/opp split
# ---------------------------------------------------------------------------

def test_split_of_maximally_mixed_qubit():
    with pytest.warns(RuntimeWarning, match="degenerate"):
        split = lp.key_opp_split(np.eye(2) / 2.0)
    assert split.q_key == pytest.approx(0.5, abs=1e-12)
    assert split.q_opp == pytest.approx(0.5, abs=1e-12)
    assert split.rest == pytest.approx(0.0, abs=1e-12)


def test_split_of_rank_one_state():
    vec = np.array([1.0, 1.0j]) / math.sqrt(2.0)
    split = lp.key_opp_split(np.outer(vec, vec.conj()))
    assert split.q_key == pytest.approx(1.0, abs=1e-12)
    assert split.q_opp == pytest.approx(0.0, abs=1e-12)


def test_split_residual_is_psd():
    rng = np.random.default_rng(5)
    raw = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = raw @ raw.conj().T
    rho /= np.trace(rho).real
    split = lp.key_opp_split(rho)
    rest = (rho - split.q_key * np.outer(split.v_key, split.v_key.conj())
            - split.q_opp * np.outer(split.v_opp, split.v_opp.conj()))
    assert np.linalg.eigvalsh(rest).min() > -1e-9


def test_split_of_small_key_region():
    geometry = passive.RegionGeometry(delta_theta_z=0.02)
    params = passive.PassiveParams(mu_max=0.5, omega=0.0, geometry=geometry)
    rho, _, _ = passive.region_average(passive.RegionSpec(0, "Z", "I0"), 1, params,
                                       nodes=(16, 16, 16))
    split = lp.key_opp_split(rho)
    assert split.q_key > 0.99
    assert abs(split.v_key[0]) ** 2 > 0.99


# ---------------------------------------------------------------------------
# Refined programs
# ---------------------------------------------------------------------------

def refined_setup(nodes=16, omega=1e-6, distance=50.0, att=60.0):
    config = driver.ProtocolConfig(transmitter="passive", analysis="baseline",
                                   mu_max=0.5, delta_theta_z=0.12, n_cut=2)
    comp = driver.passive_computation(config, distance, att, nodes)
    return config, comp


def test_refined_yield_dominates_baseline():
    config, comp = refined_setup()
    n_cut = config.n_cut
    references = channel.reference_yields(n_cut, comp.channel)
    gains, probs, fids = driver._passive_yield_inputs(comp, "Z", n_cut)
    base = lp.solve(lp.yield_program(gains, probs, fids, references, n_cut)).value

    splits, taus = {}, {}
    for i in INTENSITIES:
        s0 = lp.key_opp_split(comp.moments_bit[(0, "Z", i)].normalized_block(1))
        s1 = lp.key_opp_split(comp.moments_bit[(1, "Z", i)].normalized_block(1))
        splits[i] = lp.KeyOppSplit(q_key=0.5 * (s0.q_key + s1.q_key),
                                   q_opp=0.5 * (s0.q_opp + s1.q_opp),
                                   v_key=s0.v_key, v_opp=s0.v_opp)
        taus[i] = {t: 0.5 * (np.outer(getattr(s0, f"v_{t}"), getattr(s0, f"v_{t}").conj())
                             + np.outer(getattr(s1, f"v_{t}"), getattr(s1, f"v_{t}").conj()))
                   for t in ("key", "opp")}
    tag_fids = {(i, j, t): fidelity(taus[i][t], taus[j][t])
                for k, i in enumerate(INTENSITIES) for j in INTENSITIES[k + 1:]
                for t in ("key", "opp")}
    cross = {i: fidelity(taus[i]["key"], taus[i]["opp"]) for i in INTENSITIES}
    refined_spec = lp.refined_yield_program(gains, probs, fids, references, n_cut,
                                            splits, tag_fids, cross)
    refined = lp.solve(refined_spec).value
    # pure-eigenstate yields cannot be bounded worse than the mixture
    assert refined >= base - 1e-9


def test_refined_error_program_symmetric_under_bit_swap():
    # an exactly bit-symmetric channel needs vanishing leakage: the middle
    # leakage pulse intensity differs between the two test-bit windows
    config, comp = refined_setup(att=600.0)
    n_cut = config.n_cut
    references = channel.reference_yields(n_cut, comp.channel)
    outcome_gains = {(a, b, i): comp.observables_bit[(a, "X", i)].outcome_gain(b != a)
                     for a in (0, 1) for b in (0, 1) for i in INTENSITIES}
    probs = {(a, i): comp.moments_bit[(a, "X", i)].photon_probabilities()[:n_cut + 1]
             for a in (0, 1) for i in INTENSITIES}
    splits = {(a, i): lp.key_opp_split(comp.moments_bit[(a, "X", i)].normalized_block(1))
              for a in (0, 1) for i in INTENSITIES}
    fids, tag_fids = {}, {}
    for a in (0, 1):
        for k, i in enumerate(INTENSITIES):
            for j in INTENSITIES[k + 1:]:
                for n in range(n_cut + 1):
                    fids[(i, j, a, n)] = driver._cross_fidelity(
                        comp.moments_bit[(a, "X", i)], comp.moments_bit[(a, "X", j)], n)
                for t in ("key", "opp"):
                    tag_fids[(i, j, a, t)] = pure_state_fidelity(
                        getattr(splits[(a, i)], f"v_{t}"), getattr(splits[(a, j)], f"v_{t}"))
    cross = {(a, a2, i, t, t2): pure_state_fidelity(
                 getattr(splits[(a, i)], f"v_{t}"), getattr(splits[(a2, i)], f"v_{t2}"))
             for a, a2 in ((0, 1), (1, 0)) for i in INTENSITIES
             for t, t2 in (("key", "opp"), ("opp", "key"))}
    gamma_refs = {a: driver._passive_error_references(comp, a, n_cut) for a in (0, 1)}

    def reference(a, b, n):
        gamma = float(gamma_refs[a][n])
        return gamma if b != a else float(references[n]) - gamma

    spec = lp.refined_error_program(outcome_gains, probs, fids, reference, n_cut,
                                    splits, tag_fids, cross)
    solution = lp.solve(spec)
    assert solution.status == "optimal"
    key0 = solution.assignment["Y01_I0_key"]
    key1 = solution.assignment["Y10_I0_key"]
    # the two bit windows are mirror images of each other
    assert solution.value == pytest.approx(0.5 * (key0 + key1), abs=1e-12)
    single = {}
    for a, b in ((0, 1), (1, 0)):
        alone = lp.LinearProgramSpec(variables=spec.variables, sense="max",
                                     objective={f"Y{a}{b}_I0_key": 1.0},
                                     constraints=spec.constraints)
        single[a] = lp.solve(alone).value
    assert single[0] == pytest.approx(single[1], rel=1e-6)
