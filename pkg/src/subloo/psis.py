"""Pareto smoothed importance sampling.

The largest importance ratios are replaced by quantiles of a generalized
Pareto distribution (GPD) fitted to them, and the fitted shape ``k_hat``
is kept as a reliability diagnostic:

=================  ======
``k_hat <= 0.5``   ok
``0.5 < k <= 0.7`` warn
``k_hat > 0.7``    bad
=================  ======

The GPD here has location 0 and CDF ``1 - (1 + k x / sigma) ** (-1 / k)``,
so ``k > 0`` is a heavy (Pareto-like) tail and ``k = 0`` the exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import logsumexp

from .exceptions import DegenerateTailError, InsufficientDrawsError, InsufficientTailError

__all__ = [
    "GpdFit",
    "PsisResult",
    "fit_gpd",
    "gpd_quantile",
    "psis_smooth",
    "tail_size",
    "khat_flag",
    "MIN_DRAWS",
    "MIN_TAIL",
]

MIN_TAIL = 5
MIN_DRAWS = 25
KHAT_WARN = 0.5
KHAT_BAD = 0.7

KhatFlag = Literal["ok", "warn", "bad"]


@dataclass(frozen=True)
class GpdFit:
    k: float
    sigma: float
    tail_size: int


@dataclass(frozen=True, eq=False)
class PsisResult:
    """Output of :func:`psis_smooth`.

    ``smoothed_log_weights`` are normalized so that they log-sum-exp to 0.
    ``k_hat`` is NaN when ``degenerate`` is set (tail with no spread, weights
    left as they were).
    """

    smoothed_log_weights: np.ndarray
    k_hat: float
    tail_size: int
    degenerate: bool

    @property
    def flag(self) -> KhatFlag:
        return khat_flag(self.k_hat, degenerate=self.degenerate)


def tail_size(n_draws: int) -> int:
    """Number of largest ratios that get smoothed: ``ceil(min(0.2 S, 3 sqrt(S)))``."""
    return int(math.ceil(min(0.2 * n_draws, 3.0 * math.sqrt(n_draws))))


def _zhang_stephens(x, prior_strength):
    # x: sorted ascending, positive. Profile-posterior estimate over a grid
    # of b = -k / sigma, Zhang & Stephens (2009).
    n = x.size
    n_grid = 30 + int(math.sqrt(n))
    quartile = x[int(n / 4 + 0.5) - 1]
    j = np.arange(1, n_grid + 1, dtype=np.float64)
    b = 1.0 / x[-1] + (1.0 - np.sqrt(n_grid / (j - 0.5))) / (3.0 * quartile)

    k_of_b = np.log1p(-b[:, None] * x[None, :]).mean(axis=1)
    profile = n * (np.log(-b / k_of_b) - k_of_b - 1.0)
    # posterior weight of each grid point, 1 / sum_l exp(L_l - L_j)
    weights = np.exp(profile - logsumexp(profile))
    keep = weights >= 10 * np.finfo(float).eps
    weights, b = weights[keep], b[keep]
    weights /= weights.sum()

    b_post = float(np.sum(b * weights))
    k = float(np.log1p(-b_post * x).mean())
    sigma = -k / b_post
    if prior_strength:
        # weakly informative prior pulling k towards 0.5
        k = (n * k + prior_strength * 0.5) / (n + prior_strength)
    return k, sigma


def fit_gpd(tail_sample, prior_strength: float = 10.0) -> GpdFit:
    """Fit a zero-location GPD to positive exceedances.

    Parameters
    ----------
    tail_sample : array_like
        Exceedances over a threshold, all > 0, at least 5 of them.
    prior_strength : float, default 10
        Pseudo-count of the weak prior on ``k`` centered at 0.5 used for
        Pareto smoothing. Its pull is ``prior_strength / (M + prior_strength)``
        and vanishes for large samples; pass 0 for the plain
        profile-posterior estimate.

    Returns
    -------
    GpdFit
    """
    x = np.sort(np.asarray(tail_sample, dtype=np.float64).reshape(-1))
    if x.size < MIN_TAIL:
        raise InsufficientTailError(f"need at least {MIN_TAIL} exceedances, got {x.size}")
    if not np.all(np.isfinite(x)) or x[0] <= 0:
        raise ValueError("exceedances must be finite and strictly positive")
    if x[-1] == x[0]:
        raise DegenerateTailError("tail sample has zero variance")
    k, sigma = _zhang_stephens(x, prior_strength)
    return GpdFit(k=k, sigma=sigma, tail_size=int(x.size))


def gpd_quantile(probs, k: float, sigma: float) -> np.ndarray:
    """Inverse CDF of the zero-location GPD, for ``0 <= probs < 1``."""
    p = np.asarray(probs, dtype=np.float64)
    if abs(k) < np.finfo(float).eps:
        return -sigma * np.log1p(-p)
    return sigma * np.expm1(-k * np.log1p(-p)) / k


def psis_smooth(log_weights, prior_strength: float = 10.0) -> PsisResult:
    """Pareto-smooth a vector of log importance ratios.

    The ``M = tail_size(S)`` largest ratios above the cutoff (the
    ``M + 1``-th largest) are replaced, in rank order, by
    ``cutoff + F^{-1}((j - 0.5) / M)`` for the fitted GPD, truncated at
    the largest raw ratio, and the result is renormalized.

    When the tail has fewer than 5 distinct exceedances or no spread the
    weights are only renormalized and ``degenerate`` is set.

    Parameters
    ----------
    log_weights : array_like, shape (S,)
        Log ratios, any additive constant. ``S >= 25``.

    Returns
    -------
    PsisResult
    """
    lw = np.array(log_weights, dtype=np.float64).reshape(-1)
    n_draws = lw.size
    if n_draws < MIN_DRAWS:
        raise InsufficientDrawsError(f"Pareto smoothing needs at least {MIN_DRAWS} draws, got {n_draws}")
    if not np.all(np.isfinite(lw)):
        raise ValueError("log_weights must be finite")

    lw -= lw.max()
    m_tail = tail_size(n_draws)
    # top m_tail + 1 values, the first of which is the cutoff
    top = np.argpartition(lw, n_draws - m_tail - 1)[n_draws - m_tail - 1 :]
    top = top[np.argsort(lw[top], kind="stable")]
    cutoff = max(lw[top[0]], np.log(np.finfo(float).tiny))
    tail_idx = top[1:][lw[top[1:]] > cutoff]

    k_hat = math.nan
    degenerate = True
    if tail_idx.size >= MIN_TAIL:
        exp_cut = math.exp(cutoff)
        excess = np.exp(lw[tail_idx]) - exp_cut
        if excess[-1] > excess[0]:
            degenerate = False
            k_hat, sigma = _zhang_stephens(excess, prior_strength)
            if np.isfinite(k_hat):
                probs = (np.arange(tail_idx.size) + 0.5) / tail_idx.size
                smoothed = np.log(gpd_quantile(probs, k_hat, sigma) + exp_cut)
                # never above the largest raw ratio (0 after the shift)
                lw[tail_idx] = np.minimum(smoothed, 0.0)
    lw -= logsumexp(lw)
    return PsisResult(
        smoothed_log_weights=lw,
        k_hat=float(k_hat),
        tail_size=int(tail_idx.size),
        degenerate=degenerate,
    )


def khat_flag(k_hat: float, degenerate: bool = False) -> KhatFlag:
    """Classify a Pareto shape estimate as ``"ok"``, ``"warn"`` or ``"bad"``."""
    if degenerate:
        return "ok"
    if not math.isfinite(k_hat):
        if k_hat == math.inf:
            return "bad"
        raise ValueError(f"k_hat={k_hat} is not finite and not marked degenerate")
    if k_hat <= KHAT_WARN:
        return "ok"
    if k_hat <= KHAT_BAD:
        return "warn"
    return "bad"
