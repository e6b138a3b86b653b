"""Orthogonal matching pursuit for coding signals against a dictionary.

Standard greedy OMP: pick the atom most correlated with the current
residual (ties broken toward the lowest index), refit all selected
coefficients by least squares, repeat until a stopping rule fires.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch

STALL_REL = 1e-12


@dataclass(frozen=True)
class OmpStop:
    """Stopping rule; at least one criterion must be set."""

    max_sparsity: Optional[int] = None
    residual_threshold: Optional[float] = None

    def __post_init__(self):
        if self.max_sparsity is None and self.residual_threshold is None:
            raise ValueError("OmpStop needs max_sparsity or residual_threshold")
        if self.max_sparsity is not None and self.max_sparsity < 1:
            raise ValueError("max_sparsity must be a positive integer")
        if self.residual_threshold is not None and self.residual_threshold < 0:
            raise ValueError("residual_threshold must be >= 0")


@dataclass
class SparseCode:
    """OMP output for one signal.

    support and coeffs are aligned; renormalized flags that the
    dictionary columns were rescaled to unit norm internally, so coeffs
    refer to the rescaled atoms.
    """

    support: list
    coeffs: np.ndarray
    residual_norm: float
    renormalized: bool = False


def normalize_dictionary(D: np.ndarray) -> tuple[np.ndarray, bool]:
    """Unit-norm columns; second value reports whether rescaling happened.

    Columns already within 1e-6 of unit norm are passed through
    untouched; zero columns are left as zeros (they can never win the
    correlation step).
    """
    D = np.asarray(D, dtype=np.float64)
    norms = np.linalg.norm(D, axis=0)
    if np.max(np.abs(norms - 1.0), initial=0.0) <= 1e-6:
        return D, False
    safe = np.where(norms > 0, norms, 1.0)
    return D / safe, True



def _encode_normalized(D: np.ndarray, y: np.ndarray, stop: OmpStop,
                       renormalized: bool) -> SparseCode:
    M, N = D.shape
    thr = stop.residual_threshold
    cap = stop.max_sparsity if stop.max_sparsity is not None else min(M, N)
    cap = min(cap, N)

    support: list = []
    coeffs = np.zeros(0)
    residual = y.copy()
    res_norm = float(np.linalg.norm(residual))
    if res_norm == 0.0 or (thr is not None and res_norm <= thr):
        return SparseCode(support, coeffs, res_norm, renormalized)

    selected = np.zeros(N, dtype=bool)
    while len(support) < cap:
        corr = np.abs(D.T @ residual)
        corr[selected] = -1.0
        atom = int(np.argmax(corr))
        if corr[atom] <= 0.0:
            break  # residual orthogonal to every remaining atom
        trial = support + [atom]
        sol, *_ = np.linalg.lstsq(D[:, trial], y, rcond=None)
        new_residual = y - D[:, trial] @ sol
        new_norm = float(np.linalg.norm(new_residual))
        if res_norm - new_norm < STALL_REL * res_norm:
            break  # no progress; drop the trial atom
        support = trial
        selected[atom] = True
        coeffs = sol
        residual = new_residual
        res_norm = new_norm
        if thr is not None and res_norm <= thr:
            break
    return SparseCode(support, coeffs, res_norm, renormalized)


def omp_encode(D: np.ndarray, y: np.ndarray, stop: OmpStop) -> SparseCode:
    """Code one signal. Columns of D are normalized internally if needed."""
    y = np.asarray(y, dtype=np.float64)
    if D.ndim != 2 or y.ndim != 1 or D.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"dictionary {D.shape} incompatible with signal {y.shape}")
    Dn, renorm = normalize_dictionary(np.asarray(D, dtype=np.float64))
    return _encode_normalized(Dn, y, stop, renorm)


def batch_encode(D: np.ndarray, signals: np.ndarray,
                 stop: OmpStop) -> list:
    """Code every column of signals independently, preserving order."""
    signals = np.asarray(signals, dtype=np.float64)
    if D.ndim != 2 or signals.ndim != 2 or D.shape[0] != signals.shape[0]:
        raise DimensionMismatch(
            f"dictionary {D.shape} incompatible with signals {signals.shape}")
    Dn, renorm = normalize_dictionary(np.asarray(D, dtype=np.float64))
    return [_encode_normalized(Dn, signals[:, p], stop, renorm)
            for p in range(signals.shape[1])]


def reconstruct(D: np.ndarray, code: SparseCode) -> np.ndarray:
    """D_support @ coeffs against the same (normalized) dictionary."""
    Dn, _ = normalize_dictionary(np.asarray(D, dtype=np.float64))
    out = np.zeros(Dn.shape[0])
    if code.support:
        out = Dn[:, code.support] @ code.coeffs
    return out
