"""PSIS-LOO estimates of ``log p(y_i | y_{-i})`` from (approximate) posterior draws.

For draws from a proposal ``q`` the importance ratio for leaving out
observation ``i`` is

    r_s ∝ p(theta_s | y) / q(theta_s | y) / p(y_i | theta_s)

which reduces to the classic inverse-likelihood ratio when ``q`` is the
posterior. The whole product is Pareto-smoothed once per observation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .draws import DrawsBundle
from .psis import KhatFlag, PsisResult, psis_smooth

__all__ = [
    "LooPointEstimate",
    "correction_log_ratios",
    "loo_lpd",
    "loo_all",
    "posterior_khat",
]


@dataclass(frozen=True)
class LooPointEstimate:
    obs: int
    loo_lpd: float
    k_hat: float
    flag: KhatFlag


def correction_log_ratios(bundle: DrawsBundle, i) -> np.ndarray:
    """``-log p(y_i|theta_s) + log p(theta_s|y) - log q(theta_s|y)`` for every draw."""
    i = bundle.check_obs(i)
    return bundle.log_ratio - bundle.log_lik[:, i]


def loo_lpd(bundle: DrawsBundle, i) -> LooPointEstimate:
    """PSIS estimate of ``log p(y_i | y_{-i})`` for one observation.

    Requires at least 25 draws.
    """
    i = bundle.check_obs(i)
    res: PsisResult = psis_smooth(correction_log_ratios(bundle, i))
    value = float(logsumexp(res.smoothed_log_weights + bundle.log_lik[:, i]))
    return LooPointEstimate(obs=i, loo_lpd=value, k_hat=res.k_hat, flag=res.flag)


def loo_all(bundle: DrawsBundle) -> list[LooPointEstimate]:
    """:func:`loo_lpd` for every observation, the O(nS) reference path."""
    out = []
    for i in range(bundle.n_obs):
        try:
            out.append(loo_lpd(bundle, i))
        except ValueError as err:
            raise type(err)(f"observation {i}: {err}") from err
    return out


def posterior_khat(bundle: DrawsBundle) -> float:
    """Pareto k-hat of ``p / q`` alone, a diagnostic of the posterior approximation.

    NaN when the ratios are constant, e.g. exact posterior draws (a log
    ratio spread below 1e-8 is treated as rounding noise).
    """
    lr = bundle.log_ratio
    if np.ptp(lr) < 1e-8:
        return math.nan
    return psis_smooth(lr).k_hat
