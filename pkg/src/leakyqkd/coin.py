"""Quantum-coin bound toolkit.

A virtual qubit ("coin") entangled with two alternative source states
obeys a Bloch-sphere constraint that relates the click statistics of the
two alternatives through their fidelity z:

    sqrt(z) <= sqrt(y y') + sqrt((1 - y)(1 - y')).

Solving for y' gives a convex lower envelope and a concave upper
envelope in y.  This module provides those envelopes, their tangent-line
relaxations (usable inside linear programs), projection-based fidelity
lower bounds via a Bures-distance chain, and the purification overlaps
that feed the phase-error transfer bound.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import bures_from_fidelity, fidelity

KINK_TOL = 1e-9
KINK_SHIFT = 1e-6

_INV_2SQRT2 = 1.0 / (2.0 * math.sqrt(2.0))


def _check_unit_interval(value: float, name: str) -> float:
    if not -1e-12 <= value <= 1.0 + 1e-12:
        raise ValueError(f"{name}={value} outside [0, 1]")
    return min(1.0, max(0.0, value))


def transfer_curve(y: float, fid: float, sign: int) -> float:
    """Smooth branches y + (1-z)(1-2y) +/- 2 sqrt(z(1-z) y(1-y))."""
    y = _check_unit_interval(y, "y")
    z = _check_unit_interval(fid, "fidelity")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    radical = 2.0 * math.sqrt(max(0.0, z * (1.0 - z) * y * (1.0 - y)))
    return y + (1.0 - z) * (1.0 - 2.0 * y) + sign * radical


def transfer_bound(y: float, fid: float, side: str) -> float:
    """Piecewise coin envelopes.

    Lower side: max(0, curve_minus) with the flat branch for y <= 1 - z.
    Upper side: min(1, curve_plus) with the flat branch for y >= z.
    """
    y = _check_unit_interval(y, "y")
    z = _check_unit_interval(fid, "fidelity")
    if side == "L":
        return transfer_curve(y, z, -1) if y > 1.0 - z else 0.0
    if side == "U":
        return transfer_curve(y, z, +1) if y < z else 1.0
    raise ValueError("side must be 'L' or 'U'")


def transfer_slope(y: float, fid: float, side: str) -> float:
    """d/dy of transfer_bound on its smooth branch; 0 on the flat branch."""
    y = _check_unit_interval(y, "y")
    z = _check_unit_interval(fid, "fidelity")
    sign = -1 if side == "L" else +1
    flat = (side == "L" and y <= 1.0 - z) or (side == "U" and y >= z)
    if flat:
        return 0.0
    denom = y * (1.0 - y)
    if denom <= 0.0:
        raise ValueError(f"slope undefined at y={y}")
    radical = math.sqrt(z * (1.0 - z))
    return (2.0 * z - 1.0) + sign * radical * (1.0 - 2.0 * y) / math.sqrt(denom)


@dataclass(frozen=True)
class TangentLine:
    """Tangent to a coin envelope: line(y) = intercept + slope * y.

    A tangent to the convex lower envelope under-estimates it everywhere;
    a tangent to the concave upper envelope over-estimates it everywhere.
    """

    slope: float
    intercept: float
    y_ref: float
    side: str

    def evaluate(self, y: float) -> float:
        return self.intercept + self.slope * y


def _kink(fid: float, side: str) -> float:
    return 1.0 - fid if side == "L" else fid


def tangent_line(fid: float, y_ref: float, side: str) -> TangentLine:
    """Tangent-line relaxation of the coin envelope at y_ref.

    y_ref must sit strictly inside one of the piecewise branches; a
    reference at the kink (or at 0/1 where the slope diverges) is
    rejected so the caller can perturb it.
    """
    z = _check_unit_interval(fid, "fidelity")
    if side not in ("L", "U"):
        raise ValueError("side must be 'L' or 'U'")
    kink = _kink(z, side)
    if abs(y_ref - kink) < KINK_TOL and 0.0 < kink < 1.0:
        raise ValueError(
            f"reference point {y_ref} sits at the envelope kink {kink}; perturb it"
        )
    if not 0.0 < y_ref < 1.0:
        raise ValueError(f"reference point {y_ref} must be interior to (0, 1)")
    value = transfer_bound(y_ref, z, side)
    slope = transfer_slope(y_ref, z, side)
    return TangentLine(slope=slope, intercept=value - slope * y_ref, y_ref=y_ref, side=side)


def safe_reference(y_ref: float, fid: float, side: str) -> float:
    """Nudge a reference point off kinks/extremes before building a tangent."""
    lo, hi = KINK_SHIFT, 1.0 - KINK_SHIFT
    y = min(hi, max(lo, y_ref))
    kink = _kink(fid, side)
    if abs(y - kink) < KINK_TOL:
        y = kink + KINK_SHIFT if side == "L" else kink - KINK_SHIFT
        y = min(hi, max(lo, y))
    return y


def yield_transfer(y_known: float, fid: float) -> tuple[float, float]:
    """Interval for the other branch's yield given one yield and fidelity.

    Fidelity 1 collapses the interval to a point; fidelity 0 gives [0, 1].
    """
    return (transfer_bound(y_known, fid, "L"), transfer_bound(y_known, fid, "U"))


def coin_adjusted_fidelity(re_overlap: float, y_coin_lower: float) -> float:
    """Effective fidelity (1 - (1 - Re<psi|psi'>)/Y_coin)^2, clamped to [0, 1].

    The coin imbalance is (1 - re_overlap)/2; dividing the full imbalance
    by the coin-round yield lower bound accounts for post-selecting on
    detected rounds.  When the imbalance exceeds the yield the bound
    degenerates and 0 is returned with a warning.
    """
    if not -1.0 - 1e-12 <= re_overlap <= 1.0 + 1e-12:
        raise ValueError(f"overlap {re_overlap} outside [-1, 1]")
    if not 0.0 < y_coin_lower <= 1.0:
        raise ValueError(f"coin yield lower bound {y_coin_lower} outside (0, 1]")
    ratio = (1.0 - min(1.0, re_overlap)) / y_coin_lower
    if ratio > 1.0:
        warnings.warn("coin imbalance exceeds yield; phase-error bound degenerates to 1",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    return (1.0 - ratio) ** 2


def phase_error_upper(e_x_upper: float, f_prime: float) -> float:
    """Phase-error upper bound: upper coin envelope at the X bit-error rate."""
    return transfer_bound(_check_unit_interval(e_x_upper, "e_x_upper"), f_prime, "U")


# ---------------------------------------------------------------------------
# Projection-based fidelity lower bound (Bures chain)
# ---------------------------------------------------------------------------

def bures_chain_bound(trace_i: float, trace_j: float, projected_fidelity: float) -> float:
    """Lower bound on F(rho_i, rho_j) via projections onto a common subspace.

    trace_i/j are Tr[Pi rho Pi] (the weight each state keeps under the
    projection) and projected_fidelity is the fidelity of the two
    normalised projected states.  Uses F(rho, Pi rho Pi / t) = t and the
    Bures triangle inequality along the three-leg chain.
    """
    for t, name in ((trace_i, "trace_i"), (trace_j, "trace_j")):
        if not 0.0 < t <= 1.0 + 1e-10:
            raise ValueError(f"{name}={t}: projection must keep weight in (0, 1]")
    # snap epsilon-level trace deficits: the square root would otherwise
    # blow machine noise up into sqrt(eps)-sized chain legs
    trace_i = 1.0 if trace_i > 1.0 - 1e-12 else trace_i
    trace_j = 1.0 if trace_j > 1.0 - 1e-12 else trace_j
    chain = (bures_from_fidelity(trace_i)
             + bures_from_fidelity(projected_fidelity)
             + bures_from_fidelity(trace_j))
    root = 1.0 - 0.5 * chain * chain
    return max(0.0, root) ** 2


def projected_fidelity_bound(rho_i: np.ndarray, rho_j: np.ndarray,
                             leak_counts: np.ndarray, cut: int) -> float:
    """Fidelity lower bound keeping only entries with <= cut leakage photons.

    `leak_counts` gives the leakage photon number of each basis index;
    the basis ordering must make the kept entries a contiguous prefix.
    With cut >= max leak count the bound equals the exact fidelity.
    """
    keep = int(np.searchsorted(leak_counts, cut + 0.5))
    if keep == 0:
        raise ValueError("projection annihilates the state (no kept entries)")
    t_i = float(np.trace(rho_i[:keep, :keep]).real)
    t_j = float(np.trace(rho_j[:keep, :keep]).real)
    if t_i <= 0.0 or t_j <= 0.0:
        raise ValueError("projection annihilates one of the states")
    f_proj = fidelity(rho_i[:keep, :keep] / t_i, rho_j[:keep, :keep] / t_j)
    return bures_chain_bound(min(1.0, t_i), min(1.0, t_j), f_proj)


# ---------------------------------------------------------------------------
# Purification overlaps
# ---------------------------------------------------------------------------

def fix_vector_gauge(vector: np.ndarray) -> np.ndarray:
    """Rotate a state vector so its largest-magnitude entry is real positive.

    Near-ties (within 1e-6 relative) anchor on the lowest index, so the
    gauge is stable for balanced-superposition states whose component
    magnitudes differ only by quadrature noise.  Zero vectors pass through.
    """
    mags = np.abs(vector)
    top = float(np.max(mags))
    if top == 0.0:
        return vector
    idx = int(np.argmax(mags >= top * (1.0 - 1e-6)))
    phase = vector[idx] / abs(vector[idx])
    return vector / phase


def bb84_pair_overlap(z0, z1, x0, x1) -> complex:
    """<psi_Z|psi_X> of two bit-entangled states built from pure emissions.

    psi_beta = (|0_beta>|s_0> + |1_beta>|s_1>)/sqrt(2) with BB84 ancilla
    bases; expanding the ancilla inner products gives the signed sum
    (s00 + s01 + s10 - s11)/(2 sqrt(2)) of emission overlaps.
    """
    return _INV_2SQRT2 * (np.vdot(z0, x0) + np.vdot(z0, x1)
                          + np.vdot(z1, x0) - np.vdot(z1, x1))


@dataclass(frozen=True)
class StateEigenData:
    """Descending eigenvalues and gauge-fixed eigenvectors of one state."""

    weights: np.ndarray
    vectors: np.ndarray  # column j is the eigenvector of weights[j]


def state_eigendata(rho: np.ndarray) -> StateEigenData:
    """Spectral data of a density matrix, sorted descending, gauge fixed."""
    values, vectors = np.linalg.eigh((rho + rho.conj().T) / 2.0)
    order = np.argsort(values)[::-1]
    values = np.clip(values[order], 0.0, None)
    cols = np.stack([fix_vector_gauge(vectors[:, j]) for j in order], axis=1)
    return StateEigenData(weights=values, vectors=cols)


def default_purification_phases(dim: int) -> dict[tuple[int, str], np.ndarray]:
    """Default purification phases: pi on the second eigenvector of the
    (0, Z) and (1, X) states, zero elsewhere."""
    phases = {(a, b): np.zeros(dim) for a in (0, 1) for b in ("Z", "X")}
    if dim > 1:
        phases[(0, "Z")][1] = math.pi
        phases[(1, "X")][1] = math.pi
    return phases


def purification_overlap(eigendata: dict[tuple[int, str], StateEigenData],
                         phases: dict[tuple[int, str], np.ndarray] | None = None) -> complex:
    """<psi_Z|psi_X> for purifications of four mixed single-photon states.

    Each state (bit a, basis beta) is purified against an orthonormal
    shield register with free phases xi, one per eigenvector; matching
    shield indices contract, giving a signed sum over eigenvector ranks
    weighted by sqrt(q q') and the eigenvector overlaps.
    """
    dims = {e.vectors.shape[0] for e in eigendata.values()}
    if len(dims) != 1:
        raise ValueError(f"mismatched state dimensions: {sorted(dims)}")
    dim = dims.pop()
    if phases is None:
        phases = default_purification_phases(dim)

    def leg(a, beta, j):
        e = eigendata[(a, beta)]
        q = e.weights[j] if j < e.weights.size else 0.0
        xi = phases[(a, beta)][j] if j < len(phases[(a, beta)]) else 0.0
        return math.sqrt(max(0.0, q)), xi, e.vectors[:, j]

    total = 0.0 + 0.0j
    for j in range(dim):
        rq0z, xi0z, v0z = leg(0, "Z", j)
        rq1z, xi1z, v1z = leg(1, "Z", j)
        rq0x, xi0x, v0x = leg(0, "X", j)
        rq1x, xi1x, v1x = leg(1, "X", j)
        total += rq0z * rq0x * np.exp(1j * (xi0x - xi0z)) * np.vdot(v0z, v0x)
        total += rq0z * rq1x * np.exp(1j * (xi1x - xi0z)) * np.vdot(v0z, v1x)
        total += rq1z * rq0x * np.exp(1j * (xi0x - xi1z)) * np.vdot(v1z, v0x)
        total -= rq1z * rq1x * np.exp(1j * (xi1x - xi1z)) * np.vdot(v1z, v1x)
    return _INV_2SQRT2 * total
