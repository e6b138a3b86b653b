"""Blocked Gibbs sampler over (X, D, alpha, gamma).

Each iteration draws the code columns, then the dictionary atoms one at
a time against a running residual, then the coefficient precisions, then
the noise precision, all from their exact conditionals. The chain is a
pure function of (config, data): one seeded generator drives every draw
in a fixed order.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import EmptyTrace, SingularPrecision, TailLargerThanTrace
from .linalg import spd_factor, spd_solve
from .model import (
    GibbsState,
    ModelConfig,
    TrainingSet,
    initialize_gibbs_state,
    parse_estimate_mode,
    validate_config,
)

_TINY = np.finfo(np.float64).tiny


@dataclass
class ChainTrace:
    """Kept dictionary samples plus per-iteration diagnostics."""

    kept_dicts: list = field(default_factory=list)
    residual_per_iter: list = field(default_factory=list)
    gamma_per_iter: list = field(default_factory=list)


def sample_codes(state: GibbsState, data: TrainingSet) -> None:
    """Draw each code column from N(g S D'y_l, S), S = (g D'D + A_l)^-1.

    The draw factors the precision P = R'R (R the upper Cholesky
    factor), solves for the conditional mean, and returns
    mean + R^-1 z with z standard normal, so no covariance is formed.
    """
    D, gamma, rng = state.D, state.gamma, state.rng
    N = D.shape[1]
    G = gamma * (D.T @ D)
    C = gamma * (D.T @ data.Y)
    rows = np.arange(N)
    for l in range(data.L):
        P = G.copy()
        P[rows, rows] += state.alpha[:, l]
        (chol, _), _ = spd_factor(P)
        mean = spd_solve((chol, True), C[:, l])
        z = rng.standard_normal(N)
        state.X[:, l] = mean + scipy.linalg.solve_triangular(
            chol, z, lower=True, trans=1, check_finite=False)


def sample_atoms(state: GibbsState, data: TrainingSet, beta: float) -> None:
    """Draw atoms sequentially from their isotropic Gaussian conditionals.

    Atom n conditions on all other atoms at their latest values through
    the deflated data Y^-n = Y - D^-n X, maintained as a running
    residual R = Y - DX with rank-1 corrections as each atom changes.
    """
    inv_beta = 0.0 if np.isinf(beta) else 1.0 / beta
    gamma, rng = state.gamma, state.rng
    M, N = state.D.shape
    R = data.Y - state.D @ state.X
    for n in range(N):
        xn = state.X[n, :]
        Rn = R + np.outer(state.D[:, n], xn)
        prec = gamma * float(xn @ xn) + inv_beta
        if prec <= 0:
            raise SingularPrecision(
                f"atom {n}: nonpositive scalar precision {prec:g}")
        var = 1.0 / prec
        mu = (gamma * var) * (Rn @ xn)
        d_new = mu + np.sqrt(var) * rng.standard_normal(M)
        state.D[:, n] = d_new
        R = Rn - np.outer(d_new, xn)


def sample_alpha(state: GibbsState, cfg: ModelConfig) -> None:
    """alpha_nl ~ Gamma(a + 1/2, b + x_nl^2 / 2), independently."""
    rates = cfg.b + 0.5 * state.X ** 2
    draws = state.rng.gamma(cfg.a + 0.5, 1.0 / rates)
    state.alpha = np.maximum(draws, _TINY)


def sample_gamma(state: GibbsState, data: TrainingSet,
                 cfg: ModelConfig) -> None:
    """gamma ~ Gamma(c + ML/2, d + ||Y - DX||_F^2 / 2)."""
    resid = data.Y - state.D @ state.X
    shape = cfg.c + data.M * data.L / 2.0
    rate = cfg.d + 0.5 * float(np.sum(resid * resid))
    state.gamma = max(float(state.rng.gamma(shape, 1.0 / rate)), _TINY)


def run_gibbs(cfg: ModelConfig, data: TrainingSet) -> tuple[ChainTrace, GibbsState]:
    """Run the chain for max_iters sweeps, keeping dictionaries after burn-in.

    With thinning k, every k-th post-burn-in sample is kept, starting
    with the first one.
    """
    validate_config(cfg, data)
    state = initialize_gibbs_state(cfg, data)
    trace = ChainTrace()
    for t in range(1, cfg.max_iters + 1):
        sample_codes(state, data)
        sample_atoms(state, data, cfg.beta)
        sample_alpha(state, cfg)
        sample_gamma(state, data, cfg)
        resid = data.Y - state.D @ state.X
        trace.residual_per_iter.append(float(np.linalg.norm(resid)))
        trace.gamma_per_iter.append(state.gamma)
        if t > cfg.burn_in and (t - cfg.burn_in - 1) % cfg.thinning == 0:
            trace.kept_dicts.append(state.D.copy())
    return trace, state


def estimate_dictionary(trace: ChainTrace, mode: str) -> np.ndarray:
    """Point estimate from the kept samples: last one, or a tail average."""
    kind, k = parse_estimate_mode(mode)
    if not trace.kept_dicts:
        raise EmptyTrace("no dictionary samples were kept")
    if kind == "last_sample":
        return trace.kept_dicts[-1].copy()
    if k > len(trace.kept_dicts):
        raise TailLargerThanTrace(
            f"average_tail({k}) needs {k} samples, trace holds "
            f"{len(trace.kept_dicts)}")
    tail = np.stack(trace.kept_dicts[-k:])
    return tail.mean(axis=0)
