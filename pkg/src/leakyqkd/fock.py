"""Photon-number basis bookkeeping for a fixed set of optical modes.

The n-photon sector of k bosonic modes is spanned by occupation vectors
(n_1, ..., n_k) summing to n.  A subset of the modes is designated as
*leakage* modes; bases are ordered so that configurations with fewer
leakage photons come first.  Truncating the operator support to at most
``cut`` leakage photons is then a simple prefix operation on the basis.

Also provides the n-photon block of a product coherent-state projector,
which is the single state-construction primitive both transmitters use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _compositions(total: int, parts: int):
    """Yield all occupation tuples of `parts` modes summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def leak_count(config: tuple[int, ...], leak_modes: frozenset[int]) -> int:
    """Total photon number in the leakage modes of one configuration."""
    return sum(config[i] for i in leak_modes)


@dataclass(frozen=True, eq=False)
class NPhotonBasis:
    """Ordered basis of the n-photon sector over k modes.

    Configurations are sorted by ascending leakage photon number, ties
    broken by descending lexicographic order on (non-leak occupations,
    leak occupations), which makes zero-/low-leak blocks contiguous
    prefixes and the ordering bit-reproducible.
    """

    n: int
    k: int
    leak_modes: frozenset[int]
    configs: tuple[tuple[int, ...], ...]
    _index: dict = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.configs)

    def leak_counts(self) -> np.ndarray:
        return np.array([leak_count(c, self.leak_modes) for c in self.configs])


def enumerate_basis(n: int, k: int, leak_modes=()) -> NPhotonBasis:
    """Enumerate the n-photon basis of k modes in leakage-sorted order.

    The basis size is binomial(n + k - 1, k - 1).
    """
    if n < 0 or k < 1:
        raise ValueError(f"need n >= 0 and k >= 1, got n={n}, k={k}")
    leak = frozenset(leak_modes)
    if leak and (min(leak) < 0 or max(leak) >= k):
        raise ValueError(f"leak mode indices {sorted(leak)} outside 0..{k - 1}")
    signal = [i for i in range(k) if i not in leak]
    leak_sorted = sorted(leak)

    def key(config):
        n_leak = sum(config[i] for i in leak_sorted)
        return (
            n_leak,
            tuple(-config[i] for i in signal),
            tuple(-config[i] for i in leak_sorted),
        )

    configs = tuple(sorted(_compositions(n, k), key=key))
    index = {c: i for i, c in enumerate(configs)}
    return NPhotonBasis(n=n, k=k, leak_modes=leak, configs=configs, _index=index)


def basis_index(basis: NPhotonBasis, config) -> int:
    """Position of a configuration in the basis ordering."""
    config = tuple(int(x) for x in config)
    if len(config) != basis.k:
        raise ValueError(f"configuration has {len(config)} modes, basis has {basis.k}")
    if sum(config) != basis.n:
        raise ValueError(f"configuration carries {sum(config)} photons, basis sector is n={basis.n}")
    return basis._index[config]


def leak_truncated_subbasis(basis: NPhotonBasis, cut: int) -> NPhotonBasis:
    """Prefix sub-basis with at most `cut` photons in the leakage modes."""
    if cut < 0:
        raise ValueError("leakage cut must be >= 0")
    kept = tuple(c for c in basis.configs if leak_count(c, basis.leak_modes) <= cut)
    index = {c: i for i, c in enumerate(kept)}
    return NPhotonBasis(n=basis.n, k=basis.k, leak_modes=basis.leak_modes,
                        configs=kept, _index=index)


def inv_sqrt_factorials(basis: NPhotonBasis) -> np.ndarray:
    out = np.empty(basis.dim)
    for i, c in enumerate(basis.configs):
        prod = 1.0
        for occ in c:
            prod *= math.factorial(occ)
        out[i] = 1.0 / math.sqrt(prod)
    return out


def coherent_components(alphas: np.ndarray, basis: NPhotonBasis) -> np.ndarray:
    """Un-normalised n-photon amplitudes of product coherent states.

    Parameters
    ----------
    alphas : (k,) or (k, N) complex array
        Per-mode coherent amplitudes, one column per evaluation point.
    basis : NPhotonBasis

    Returns
    -------
    (dim,) or (dim, N) complex array with rows
        prod_j alphas[j]**c_j / sqrt(c_j!), for each configuration c.
        The coherent-state normalisation exp(-|alpha|^2 / 2) is *not*
        included; callers fold it into their weights.
    """
    alphas = np.asarray(alphas, dtype=complex)
    squeeze = alphas.ndim == 1
    if squeeze:
        alphas = alphas[:, None]
    if alphas.shape[0] != basis.k:
        raise ValueError(f"got {alphas.shape[0]} amplitudes for a {basis.k}-mode basis")
    # powers[j, p, :] = alphas[j]**p, p = 0..n; 0**0 == 1 covers dark modes
    powers = alphas[:, None, :] ** np.arange(basis.n + 1)[None, :, None]
    inv = inv_sqrt_factorials(basis)
    out = np.empty((basis.dim, alphas.shape[1]), dtype=complex)
    for i, c in enumerate(basis.configs):
        v = powers[0, c[0]].copy()
        for j in range(1, basis.k):
            v *= powers[j, c[j]]
        out[i] = v * inv[i]
    return out[:, 0] if squeeze else out


def coherent_block(alphas, basis: NPhotonBasis) -> np.ndarray:
    """n-photon block of |alpha><alpha| for a product coherent state.

    Sub-normalised: its trace is the Poisson weight
    exp(-|alpha|^2) |alpha|^(2n) / n!.
    """
    v = coherent_components(alphas, basis)
    total = float(np.sum(np.abs(np.asarray(alphas, dtype=complex)) ** 2))
    return math.exp(-total) * np.outer(v, v.conj())
