"""Metadata-conditioned community priors and their closed-form updates.

Two prior families: a k x K table for discrete metadata, and a Bernstein
polynomial expansion of degree N for ordered metadata rescaled to [0, 1].
Both keep columns on the probability simplex over communities, which
guarantees P(s|x) is a lawful distribution for every metadata value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import MetadataColumn

THETA_FLOOR = 1e-12


@dataclass(frozen=True)
class BlockAffinity:
    """Symmetric nonnegative edge-propensity matrix between communities."""

    k: int
    theta: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=np.float64)
        if th.shape != (self.k, self.k):
            raise ValueError("theta must be k x k")
        if not np.allclose(th, th.T, rtol=0, atol=1e-12):
            raise ValueError("theta must be symmetric")
        if np.any(th < 0):
            raise ValueError("theta must be nonnegative")
        object.__setattr__(self, "theta", th)
        th.flags.writeable = False


@dataclass(frozen=True)
class DiscretePrior:
    """P(s|x) table: gamma[s, x] for categories x = 0..K-1."""

    k: int
    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] != self.k:
            raise ValueError("gamma must be k x K")
        if np.any(g < -1e-12) or np.any(g > 1 + 1e-12):
            raise ValueError("gamma entries must lie in [0, 1]")
        if not np.allclose(g.sum(axis=0), 1.0, atol=1e-9):
            raise ValueError("gamma columns must sum to 1")
        object.__setattr__(self, "gamma", g)
        g.flags.writeable = False

    @property
    def K(self) -> int:
        return self.gamma.shape[1]


@dataclass(frozen=True)
class BernsteinPrior:
    """P(s|x) = sum_j gamma[s, j] B_j(x) with degree-N Bernstein basis."""

    k: int
    degree: int
    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.float64)
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if g.shape != (self.k, self.degree + 1):
            raise ValueError("gamma must be k x (N+1)")
        if np.any(g < -1e-12) or np.any(g > 1 + 1e-12):
            raise ValueError("gamma entries must lie in [0, 1]")
        if not np.allclose(g.sum(axis=0), 1.0, atol=1e-9):
            raise ValueError("gamma columns must sum to 1")
        object.__setattr__(self, "gamma", g)
        g.flags.writeable = False


def bernstein_basis(N: int, x) -> np.ndarray:
    """Evaluate the N+1 Bernstein basis polynomials at x in [0, 1].

    Returns shape (N+1,) for scalar x, else (len(x), N+1).  Components
    are nonnegative and sum to 1.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    x_arr = np.asarray(x, dtype=np.float64)
    if np.any(x_arr < 0) or np.any(x_arr > 1):
        raise ValueError("x must lie in [0, 1]")
    scalar = x_arr.ndim == 0
    xs = np.atleast_1d(x_arr)[:, None]
    j = np.arange(N + 1)
    coeff = np.array([math.comb(N, jj) for jj in j], dtype=np.float64)
    # 0**0 = 1 handles the endpoints.
    basis = coeff * xs ** j * (1.0 - xs) ** (N - j)
    return basis[0] if scalar else basis


def eval_prior(prior: DiscretePrior | BernsteinPrior, x) -> np.ndarray:
    """Community distribution for one metadata value.

    Discrete priors take a category code, Bernstein priors a scalar in
    [0, 1].
    """
    if isinstance(prior, DiscretePrior):
        code = int(x)
        if not 0 <= code < prior.K:
            raise ValueError(f"category code {code} out of range 0..{prior.K - 1}")
        return prior.gamma[:, code].copy()
    basis = bernstein_basis(prior.degree, float(x))
    return prior.gamma @ basis


def prior_matrix(prior: DiscretePrior | BernsteinPrior,
                 metadata: MetadataColumn) -> np.ndarray:
    """Per-node prior rows (n, k) for a whole metadata column.

    Missing ordered values get a uniform row; discrete columns have no
    missing values (absence is its own category).
    """
    if isinstance(prior, DiscretePrior):
        if metadata.kind != "discrete":
            raise ValueError("discrete prior needs discrete metadata")
        if metadata.K != prior.K:
            raise ValueError("category count mismatch")
        return prior.gamma.T[metadata.codes]
    if metadata.kind != "ordered":
        raise ValueError("Bernstein prior needs ordered metadata")
    basis = bernstein_basis(prior.degree, metadata.x)
    rows = basis @ prior.gamma.T
    rows[metadata.missing] = 1.0 / prior.k
    return rows


def m_step_gamma_discrete(node_marginals: np.ndarray,
                          metadata: MetadataColumn) -> DiscretePrior:
    """Closed-form prior update: each column is the mean belief of its
    category's nodes; empty categories fall back to uniform."""
    q = np.asarray(node_marginals, dtype=np.float64)
    if metadata.kind != "discrete":
        raise ValueError("need discrete metadata")
    n, k = q.shape
    if metadata.n != n:
        raise ValueError("marginals and metadata disagree on node count")
    K = metadata.K
    sums = np.zeros((k, K))
    for s in range(k):
        sums[s] = np.bincount(metadata.codes, weights=q[:, s], minlength=K)
    counts = np.bincount(metadata.codes, minlength=K).astype(np.float64)
    gamma = np.full((k, K), 1.0 / k)
    nonempty = counts > 0
    gamma[:, nonempty] = sums[:, nonempty] / counts[nonempty]
    # Guard against rounding drift off the simplex.
    gamma = np.clip(gamma, 0.0, 1.0)
    gamma /= gamma.sum(axis=0, keepdims=True)
    return DiscretePrior(k=k, gamma=gamma)


def ordered_objective(gamma: np.ndarray, basis: np.ndarray,
                      q: np.ndarray) -> float:
    """Weighted log-likelihood of the expansion, sum_us q_su log P(s|x_u)."""
    px = basis @ gamma.T
    with np.errstate(divide="ignore"):
        logs = np.where(px > 0, np.log(np.maximum(px, 1e-300)), -np.inf)
    vals = q * logs
    return float(np.sum(np.where(q > 0, vals, 0.0)))


def m_step_gamma_ordered(node_marginals: np.ndarray,
                         metadata: MetadataColumn,
                         N: int,
                         init: BernsteinPrior,
                         inner_tol: float = 1e-8,
                         inner_max: int = 200) -> BernsteinPrior:
    """Fit the Bernstein coefficients by the inner fixed-point iteration.

    Alternates the responsibilities with the coefficient update until the
    largest coefficient change drops below ``inner_tol``.  Missing nodes
    are excluded from the sums.  The iteration is a minorization scheme,
    so the objective is non-decreasing.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    q = np.asarray(node_marginals, dtype=np.float64)
    if metadata.kind != "ordered":
        raise ValueError("need ordered metadata")
    n, k = q.shape
    if metadata.n != n:
        raise ValueError("marginals and metadata disagree on node count")
    if np.any(q < -1e-12) or not np.allclose(q.sum(axis=1), 1.0, atol=1e-8):
        raise ValueError("marginals must be row-stochastic")

    keep = ~metadata.missing
    qk = q[keep]
    basis = bernstein_basis(N, metadata.x[keep])       # (n_obs, N+1)
    gamma = init.gamma.copy()
    if qk.shape[0] == 0:
        return BernsteinPrior(k=k, degree=N, gamma=gamma)

    for _ in range(inner_max):
        denom = basis @ gamma.T                        # (n_obs, k) = P(s|x_u)
        ratio = qk / np.maximum(denom, 1e-300)
        numer = gamma * (ratio.T @ basis)              # (k, N+1)
        col = numer.sum(axis=0)
        new = np.where(col > 0, numer / np.maximum(col, 1e-300), 1.0 / k)
        change = np.abs(new - gamma).max()
        gamma = new
        if change < inner_tol:
            break
    gamma = np.clip(gamma, 0.0, 1.0)
    gamma /= gamma.sum(axis=0, keepdims=True)
    return BernsteinPrior(k=k, degree=N, gamma=gamma)
