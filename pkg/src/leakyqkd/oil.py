"""States of the injection-locked modulator-free transmitter.

Each round emits two signal time bins (early e, late l) carved out of a
single laser pulse by two controlled phase steps phi12 and phi23, plus
two residual leakage pulses (previous P and following F bins) that a
blocking modulator attenuates to intensity omega each.  After averaging
the uniform global phase, the n-photon blocks are coherent-projector
sectors over the four modes (e, l, P, F) with amplitudes

    sqrt(mu_e) e^{i phi12/2},  sqrt(mu_l) e^{i (phi12 + phi23/2)},
    sqrt(omega),               sqrt(omega) e^{i (phi12 + phi23)},

where mu_e = mu_in (1 + cos phi12)/2 and mu_l = mu_in (1 + cos phi23)/2.
The leakage amplitudes follow the conservative split-pulse accounting
(sqrt(omega) per leaked bin, not sqrt(omega/2)), which can only favour
the eavesdropper.

Key basis (one intensity): phase pairs (+pi/2, +pi/2) and (-pi/2, -pi/2).
Test basis (bit in a time bin): (kappa pi, pi) and (pi, kappa pi), with
kappa in [0, 1] selecting the intensity mu_in (1 + cos kappa pi)/2; the
phase sum phi12 + phi23 is bit-independent, and for kappa = 0 also basis
independent, so the leakage marginal reveals nothing about the bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fock import NPhotonBasis, coherent_block, coherent_components, enumerate_basis

MODE_COUNT = 4
LEAK_MODES = frozenset({2, 3})
INTENSITIES = ("I0", "I1", "I2")


@lru_cache(maxsize=None)
def oil_basis(n: int) -> NPhotonBasis:
    """n-photon basis over modes (e, l, P, F), leakage-sorted."""
    return enumerate_basis(n, MODE_COUNT, LEAK_MODES)


def intensity_of_kappa(kappa: float, mu_in: float) -> float:
    """Test-basis signal intensity produced by phase fraction kappa."""
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"kappa={kappa} outside [0, 1]")
    return mu_in * (1.0 + math.cos(kappa * math.pi)) / 2.0


def kappa_for_intensity(mu_target: float, mu_in: float) -> float:
    """Inverse of intensity_of_kappa (monotone on [0, 1])."""
    if not 0.0 <= mu_target <= mu_in:
        raise ValueError(f"target intensity {mu_target} outside [0, mu_in={mu_in}]")
    return math.acos(min(1.0, max(-1.0, 2.0 * mu_target / mu_in - 1.0))) / math.pi


def _default_kappas() -> dict:
    return {"I0": 0.0}


@dataclass(frozen=True)
class OilParams:
    """Source intensity, leakage scale, and the test-basis intensity ladder."""

    mu_in: float
    omega: float
    kappas: dict = field(default_factory=_default_kappas)
    n_cut: int = 4

    def __post_init__(self):
        if self.mu_in <= 0.0:
            raise ValueError("mu_in must be positive")
        if self.omega < 0.0:
            raise ValueError("omega must be >= 0")
        for label, kappa in self.kappas.items():
            if label not in INTENSITIES:
                raise ValueError(f"unknown intensity label {label!r}")
            if not 0.0 <= kappa <= 1.0:
                raise ValueError(f"kappa={kappa} for {label} outside [0, 1]")
        if self.kappas.get("I0", 0.0) != 0.0:
            raise ValueError("I0 must map to kappa = 0 (signal intensity)")
        if self.n_cut < 1:
            raise ValueError("n_cut must be >= 1")

    def intensity(self, label: str) -> float:
        return intensity_of_kappa(self.kappas[label], self.mu_in)


def params_for_intensities(mu_in: float, mu_i1: float, mu_i2: float, omega: float,
                           n_cut: int = 4) -> OilParams:
    """Build OilParams from the three test-basis intensities (I0 = mu_in)."""
    kappas = {"I0": 0.0,
              "I1": kappa_for_intensity(mu_i1, mu_in),
              "I2": kappa_for_intensity(mu_i2, mu_in)}
    return OilParams(mu_in=mu_in, omega=omega, kappas=kappas, n_cut=n_cut)


@dataclass(frozen=True)
class OilSetting:
    """One emission setting: bit, basis, intensity, and its phase pair."""

    bit: int
    basis: str
    intensity: str
    phi12: float
    phi23: float


def setting_phases(bit: int, basis: str, intensity: str, params: OilParams) -> OilSetting:
    """Controlled phase pair for one (bit, basis, intensity) choice.

    The key basis carries no decoys: only I0 is allowed there.
    """
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    if basis == "Z":
        if intensity != "I0":
            raise ValueError("no decoy intensities in the key basis")
        sign = 1.0 if bit == 0 else -1.0
        return OilSetting(bit, basis, intensity, sign * math.pi / 2.0, sign * math.pi / 2.0)
    if basis == "X":
        if intensity not in params.kappas:
            raise ValueError(f"intensity {intensity!r} has no configured kappa")
        kappa = params.kappas[intensity]
        if bit == 0:
            return OilSetting(bit, basis, intensity, kappa * math.pi, math.pi)
        return OilSetting(bit, basis, intensity, math.pi, kappa * math.pi)
    raise ValueError("basis must be 'Z' or 'X'")


def setting_amplitudes(setting: OilSetting, params: OilParams) -> np.ndarray:
    """Coherent amplitudes over (e, l, P, F); global phase averaged out."""
    mu_e = params.mu_in * (1.0 + math.cos(setting.phi12)) / 2.0
    mu_l = params.mu_in * (1.0 + math.cos(setting.phi23)) / 2.0
    root_w = math.sqrt(params.omega)
    return np.array([
        math.sqrt(mu_e) * np.exp(0.5j * setting.phi12),
        math.sqrt(mu_l) * np.exp(1j * (setting.phi12 + 0.5 * setting.phi23)),
        root_w,
        root_w * np.exp(1j * (setting.phi12 + setting.phi23)),
    ])


def setting_intensity(setting: OilSetting, params: OilParams) -> float:
    """Signal intensity mu_e + mu_l of one setting."""
    return (params.mu_in * (1.0 + math.cos(setting.phi12)) / 2.0
            + params.mu_in * (1.0 + math.cos(setting.phi23)) / 2.0)


def state_block(setting: OilSetting, params: OilParams, n: int,
                basis: NPhotonBasis | None = None) -> np.ndarray:
    """Sub-normalised n-photon block of one setting's emitted state.

    Trace is Poisson: e^-(mu + 2 omega) (mu + 2 omega)^n / n!.
    """
    if n > params.n_cut:
        raise ValueError(f"n={n} exceeds n_cut={params.n_cut}")
    if basis is None:
        basis = oil_basis(n)
    return coherent_block(setting_amplitudes(setting, params), basis)


def state_vector(setting: OilSetting, params: OilParams, n: int,
                 basis: NPhotonBasis | None = None) -> np.ndarray:
    """Normalised pure n-photon state of one setting (n >= 1).

    Carries the phase convention of the printed amplitudes (the block is
    the rank-1 projector onto this vector).
    """
    if basis is None:
        basis = oil_basis(n)
    vec = coherent_components(setting_amplitudes(setting, params), basis)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("n-photon component has zero weight")
    return vec / norm


def mixed_state(basis_label: str, intensity: str, params: OilParams, n: int) -> np.ndarray:
    """Normalised equal-bit mixture of the two n-photon settings."""
    blocks = [state_block(setting_phases(bit, basis_label, intensity, params), params, n)
              for bit in (0, 1)]
    mix = 0.5 * (blocks[0] + blocks[1])
    tr = float(np.trace(mix).real)
    if tr <= 0.0:
        raise ValueError("mixture has zero weight in this photon sector")
    rho = mix / tr
    return (rho + rho.conj().T) / 2.0


def photon_probabilities(mu: float, omega: float, n_max: int) -> np.ndarray:
    """Poisson photon-number distribution with mean mu + 2 omega."""
    lam = mu + 2.0 * omega
    out = np.empty(n_max + 1)
    out[0] = math.exp(-lam)
    for n in range(1, n_max + 1):
        out[n] = out[n - 1] * lam / n
    return out


# Global phases aligning the four key/test n=1 states so that the
# bit-entangled Z and X states coincide exactly (they purify the same
# mixed state); makes the coin overlap Re<psi_Z|psi_X> = 1 for any
# (mu_in, omega).
_OVERLAP_PHASES = {(0, "Z"): -math.pi / 4.0, (1, "Z"): math.pi / 4.0,
                   (0, "X"): 0.0, (1, "X"): -math.pi / 2.0}


def single_photon_overlap(params: OilParams) -> complex:
    """<psi_Z|psi_X> of the bit-entangled single-photon I0 emissions."""
    from .coin import bb84_pair_overlap

    vecs = {}
    for bit in (0, 1):
        for basis_label in ("Z", "X"):
            setting = setting_phases(bit, basis_label, "I0", params)
            vec = state_vector(setting, params, 1)
            vecs[(bit, basis_label)] = vec * np.exp(1j * _OVERLAP_PHASES[(bit, basis_label)])
    return bb84_pair_overlap(vecs[(0, "Z")], vecs[(1, "Z")], vecs[(0, "X")], vecs[(1, "X")])
