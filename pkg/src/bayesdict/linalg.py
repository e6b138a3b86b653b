"""Symmetric positive-definite solves used by both inference engines.

Every precision inverse in the toolkit goes through a Cholesky
factorization (solve against identity or a right-hand side), never an
unstructured matrix inverse. On a factorization failure a single jitter
of 1e-10 * trace/n is added to the diagonal; a second failure raises
SingularPrecision, which callers treat as a numerical blow-up.
"""

import numpy as np
import scipy.linalg

from .errors import SingularPrecision

JITTER_SCALE = 1e-10


def spd_factor(P: np.ndarray):
    """Cholesky-factor an SPD matrix with the one-shot jitter policy.

    Returns a (cho_factor, logdet_of_P) pair; the factor feeds
    scipy.linalg.cho_solve.
    """
    try:
        c, low = scipy.linalg.cho_factor(P, lower=True, check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError):
        n = P.shape[0]
        jitter = JITTER_SCALE * np.trace(P) / n
        try:
            c, low = scipy.linalg.cho_factor(
                P + jitter * np.eye(n), lower=True, check_finite=False)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise SingularPrecision(
                f"{n}x{n} precision matrix not positive definite "
                f"after jitter {jitter:g}") from exc
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    return (c, low), logdet


def spd_solve(factor, b: np.ndarray) -> np.ndarray:
    """Solve P x = b given a factor from spd_factor."""
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def spd_inverse(P: np.ndarray) -> tuple[np.ndarray, float]:
    """Invert an SPD matrix via Cholesky; returns (inverse, logdet of P).

    The result is explicitly symmetrized so downstream symmetry checks
    hold to round-off.
    """
    factor, logdet = spd_factor(P)
    inv = spd_solve(factor, np.eye(P.shape[0]))
    inv = 0.5 * (inv + inv.T)
    return inv, logdet


def spd_logdet(S: np.ndarray) -> float:
    """log det of an SPD matrix (e.g. a stored covariance)."""
    _, logdet = spd_factor(S)
    return logdet
