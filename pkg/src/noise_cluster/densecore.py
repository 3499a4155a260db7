"""Dense complex linear-algebra kernels shared by every other module.

Matrices are plain ``numpy.ndarray`` of complex128 in row-major order.  The
matrix exponential is scaling-and-squaring with the order-13 diagonal Pade
approximant (scipy's ``expm``); the principal logarithm is Schur-based inverse
scaling-and-squaring with an eigendecomposition fallback for well-conditioned
diagonalizable inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "BranchCutError",
    "NotPsdError",
    "Spectrum",
    "mat_exp",
    "mat_log_principal",
    "mat_sqrt_psd",
    "kron",
    "frobenius_norm",
    "spectral_norm",
    "spectrum",
    "cmatrix_to_json",
    "cmatrix_from_json",
]

PSD_CLAMP = -1e-10
BRANCH_CUT_TOL = 1e-12


class BranchCutError(ValueError):
    """An eigenvalue sits on (or within tolerance of) the log branch cut."""

    def __init__(self, eigenvalue: complex, message: str | None = None):
        self.eigenvalue = eigenvalue
        super().__init__(
            message
            or f"eigenvalue {eigenvalue} lies within {BRANCH_CUT_TOL} of the "
            "closed negative real axis; the principal logarithm is not defined"
        )


class NotPsdError(ValueError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""

    def __init__(self, eigenvalue: float):
        self.eigenvalue = eigenvalue
        super().__init__(
            f"eigenvalue {eigenvalue} is below the PSD clamp threshold {PSD_CLAMP}"
        )


@dataclass
class Spectrum:
    """Eigendecomposition A = V diag(w) V^-1 with its reconstruction residual."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def _require_finite(a: np.ndarray) -> None:
    if not np.all(np.isfinite(a.view(float))):
        raise ValueError("matrix has non-finite entries")


def mat_exp(a) -> np.ndarray:
    """Matrix exponential e^a (Pade-13 scaling and squaring)."""
    a = _as_square(a)
    _require_finite(a)
    return np.asarray(sla.expm(a))


def spectrum(a) -> Spectrum:
    """Full eigendecomposition with the relative reconstruction residual."""
    a = _as_square(a)
    _require_finite(a)
    w, v = np.linalg.eig(a)
    try:
        recon = v @ np.diag(w) @ np.linalg.inv(v)
        denom = frobenius_norm(a)
        residual = frobenius_norm(recon - a) / denom if denom > 0 else 0.0
    except np.linalg.LinAlgError:
        residual = np.inf
    return Spectrum(eigenvalues=w, eigenvectors=v, residual=float(residual))


def mat_log_principal(a) -> np.ndarray:
    """Principal matrix logarithm: all eigenvalues of the result in (-pi, pi].

    Raises :class:`BranchCutError` if any eigenvalue of ``a`` lies within
    ``1e-12`` of the closed negative real axis (where the zeroth branch is
    ill-defined), and ``ValueError`` for singular input.
    """
    a = _as_square(a)
    _require_finite(a)
    w = np.linalg.eigvals(a)
    for lam in w:
        # distance from the set {x <= 0, im = 0}
        dist = abs(lam.imag) if lam.real < 0 else abs(lam)
        if dist <= BRANCH_CUT_TOL:
            if abs(lam) <= BRANCH_CUT_TOL:
                raise ValueError(f"matrix is singular (eigenvalue {lam})")
            raise BranchCutError(lam)
    log = np.asarray(sla.logm(a))
    resid = frobenius_norm(mat_exp(log) - a) / (1.0 + frobenius_norm(a))
    if resid > 1e-9:
        # Schur path struggled; retry via eigendecomposition when the matrix
        # is verifiably diagonalizable and well conditioned.
        spec = spectrum(a)
        cond = np.linalg.cond(spec.eigenvectors)
        if spec.residual < 1e-10 and cond < 1e8:
            vinv = np.linalg.inv(spec.eigenvectors)
            log = spec.eigenvectors @ np.diag(np.log(spec.eigenvalues)) @ vinv
            resid = frobenius_norm(mat_exp(log) - a) / (1.0 + frobenius_norm(a))
        if resid > 1e-9:
            raise ValueError(
                f"matrix logarithm failed to converge (round-trip residual {resid:.3e})"
            )
    return log


def mat_sqrt_psd(a) -> np.ndarray:
    """Hermitian PSD square root, clamping round-off negatives above -1e-10."""
    a = _as_square(a)
    _require_finite(a)
    herm_dev = spectral_norm(a - a.conj().T)
    if herm_dev > 1e-10 * max(1.0, spectral_norm(a)):
        raise ValueError(f"matrix is not Hermitian (deviation {herm_dev:.3e})")
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    if w.min(initial=0.0) < PSD_CLAMP:
        raise NotPsdError(float(w.min()))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def kron(a, b) -> np.ndarray:
    """Kronecker product; the first factor is the most-significant one."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a)))


def spectral_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a), ord=2))


def cmatrix_to_json(a) -> dict:
    """Serialize a square complex matrix as {dim, re, im} (row-major)."""
    a = _as_square(a)
    return {
        "dim": a.shape[0],
        "re": a.real.ravel().tolist(),
        "im": a.imag.ravel().tolist(),
    }


def cmatrix_from_json(obj: dict) -> np.ndarray:
    dim = int(obj["dim"])
    re = np.asarray(obj["re"], dtype=float).reshape(dim, dim)
    im = np.asarray(obj["im"], dtype=float).reshape(dim, dim)
    a = re + 1j * im
    _require_finite(a)
    return a


def dump_cmatrix(a, path) -> None:
    with open(path, "w") as fh:
        json.dump(cmatrix_to_json(a), fh)


def load_cmatrix(path) -> np.ndarray:
    with open(path) as fh:
        return cmatrix_from_json(json.load(fh))
