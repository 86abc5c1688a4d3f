"""Dense complex Hermitian linear algebra used throughout the pipeline.

Small matrices only (dimension <= ~70): eigendecompositions, PSD square
roots, Uhlmann fidelity and the Bures distance, with explicit validation
so that malformed operators fail loudly instead of propagating NaNs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-12
PSD_EIGENVALUE_FLOOR = -1e-10
TRACE_TOL = 1e-8


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in ascending order, orthonormal eigenvectors as columns."""

    values: np.ndarray
    vectors: np.ndarray


def max_asymmetry(matrix: np.ndarray) -> float:
    """Largest entry of |H - H^dagger|."""
    return float(np.max(np.abs(matrix - matrix.conj().T)))


def require_hermitian(matrix: np.ndarray, tol: float = HERMITICITY_TOL, rtol: bool = True) -> np.ndarray:
    """Validate Hermiticity and return the exactly-Hermitian part.

    The tolerance is relative to the largest matrix entry when `rtol`.
    """
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    scale = max(1.0, float(np.max(np.abs(matrix)))) if rtol else 1.0
    asym = max_asymmetry(matrix)
    if asym > tol * scale:
        raise ValueError(f"matrix is not Hermitian: max asymmetry {asym:.3e}")
    return (matrix + matrix.conj().T) / 2.0


def hermitian_eigen(matrix: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix (ascending eigenvalues)."""
    h = require_hermitian(matrix)
    values, vectors = np.linalg.eigh(h)
    return EigenDecomposition(values=values, vectors=vectors)


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Hermitian square root of a PSD matrix.

    Eigenvalues in [PSD_EIGENVALUE_FLOOR, 0) are clamped to zero
    (quadrature noise); anything below the floor is an error.
    """
    eig = hermitian_eigen(matrix)
    lo = float(eig.values[0])
    if lo < PSD_EIGENVALUE_FLOOR * max(1.0, float(eig.values[-1])):
        raise ValueError(f"matrix is not PSD: eigenvalue {lo:.3e}")
    roots = np.sqrt(np.clip(eig.values, 0.0, None))
    v = eig.vectors
    out = (v * roots) @ v.conj().T
    return (out + out.conj().T) / 2.0


def _require_density(matrix: np.ndarray, name: str) -> np.ndarray:
    h = require_hermitian(matrix, tol=1e-8)
    tr = float(np.trace(h).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"{name} has trace {tr:.12f}, expected 1 within {TRACE_TOL}")
    return h


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity F(rho, sigma) = Tr[sqrt(sqrt(rho) sigma sqrt(rho))]^2.

    Both arguments must be unit-trace PSD matrices of the same dimension.
    Computed through eigenvalues of sqrt(rho) sigma sqrt(rho) for
    determinism; the result is clipped to [0, 1].
    """
    rho = _require_density(rho, "rho")
    sigma = _require_density(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    s = psd_sqrt(rho)
    inner = s @ sigma @ s
    values = np.linalg.eigvalsh((inner + inner.conj().T) / 2.0)
    root_sum = float(np.sum(np.sqrt(np.clip(values, 0.0, None))))
    return min(1.0, root_sum * root_sum)


def pure_state_fidelity(psi: np.ndarray, chi: np.ndarray) -> float:
    """|<psi|chi>|^2 for normalised state vectors."""
    return float(abs(np.vdot(psi, chi)) ** 2)


def bures_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Bures distance d_B = sqrt(2 (1 - sqrt(F)))."""
    return bures_from_fidelity(fidelity(rho, sigma))


def bures_from_fidelity(fid: float) -> float:
    fid = min(1.0, max(0.0, fid))
    return math.sqrt(2.0 * (1.0 - math.sqrt(fid)))
