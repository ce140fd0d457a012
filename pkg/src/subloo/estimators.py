"""Hansen-Hurwitz estimation of elpd from a with-replacement PPS subsample.

With ``m`` draws ``a_1..a_m`` from probabilities ``pi``, values
``v_j = log p_hat(y_{a_j} | y_{-a_j})`` and ``r_j = v_j / pi_{a_j}``:

* mean elpd          ``(1 / n) mean(r)``            (``n`` times it is the total)
* its variance       ``sum (r_j - mean(r))^2 / (n^2 m (m - 1))``
* sigma_loo^2        ``T1 + T2`` with
  ``T1 = sum(v_j^2 / pi_j) / (n m)`` and
  ``T2 = sum (r_j / n - mean(r) / n)^2 / (m (m - 1)) - (mean(r) / n)^2``

All three are unbiased for every ``pi`` (the last can be negative in a
given sample). Estimators work on the mean scale; reports carry both the
mean and the total.

The low-level ``hh_*_kernel`` functions operate on the last axis and
broadcast over leading ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .draws import DrawsBundle
from .exceptions import DegreesOfFreedomError
from .loo import LooPointEstimate, loo_all, loo_lpd
from .sampling import SamplingPlan, Subsample, build_alias, draw_subsample

__all__ = [
    "ElpdReport",
    "ComparisonReport",
    "hh_mean_kernel",
    "hh_variance_kernel",
    "sigma_loo_sq_kernel",
    "hh_elpd",
    "hh_variance",
    "sigma_loo_sq",
    "srs_elpd",
    "LooCache",
    "estimate_elpd",
    "full_elpd",
    "compare_models",
]


# -- kernels ------------------------------------------------------------------


def hh_mean_kernel(values, probs, n):
    """``mean(values / probs) / n`` along the last axis."""
    values = np.asarray(values, dtype=np.float64)
    return np.mean(values / probs, axis=-1) / n


def hh_variance_kernel(values, probs, n):
    values = np.asarray(values, dtype=np.float64)
    m = values.shape[-1]
    if m < 2:
        raise DegreesOfFreedomError(f"variance needs m >= 2 subsampled values, got {m}")
    ratios = values / probs
    centered = ratios - ratios.mean(axis=-1, keepdims=True)
    return np.sum(centered**2, axis=-1) / (n * n * m * (m - 1))


def sigma_loo_sq_kernel(values, probs, n):
    values = np.asarray(values, dtype=np.float64)
    m = values.shape[-1]
    if m < 2:
        raise DegreesOfFreedomError(f"sigma_loo estimate needs m >= 2 subsampled values, got {m}")
    ratios = values / probs
    t1 = np.sum(values * ratios, axis=-1) / (n * m)
    mean_hat = ratios.mean(axis=-1, keepdims=True) / n
    t2 = np.sum((ratios / n - mean_hat) ** 2, axis=-1) / (m * (m - 1)) - mean_hat[..., 0] ** 2
    return t1 + t2


# -- plan / subsample level ---------------------------------------------------


def _subsample_probs(values, plan, subsample):
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size != subsample.m:
        raise ValueError(f"got {values.size} values for a subsample of size {subsample.m}")
    if values.size < 1:
        raise ValueError("empty subsample")
    return values, plan.pi_tilde[subsample.indices]


def hh_elpd(values, plan: SamplingPlan, subsample: Subsample) -> float:
    """Hansen-Hurwitz estimate of the mean elpd; multiply by ``plan.n`` for the total.

    ``values[j]`` is the LOO log density of observation ``subsample.indices[j]``.
    """
    v, p = _subsample_probs(values, plan, subsample)
    return float(hh_mean_kernel(v, p, plan.n))


def hh_variance(values, plan: SamplingPlan, subsample: Subsample) -> float:
    """Estimated variance of :func:`hh_elpd` (mean scale). Needs ``m >= 2``."""
    v, p = _subsample_probs(values, plan, subsample)
    return float(hh_variance_kernel(v, p, plan.n))


def sigma_loo_sq(values, plan: SamplingPlan, subsample: Subsample) -> float:
    """Unbiased estimate of the population variance of the pointwise LOO values.

    May be negative for a particular subsample; it is returned as is.
    """
    v, p = _subsample_probs(values, plan, subsample)
    return float(sigma_loo_sq_kernel(v, p, plan.n))


def srs_elpd(values, n: int) -> tuple[float, float]:
    """Simple random sampling (uniform, with replacement) mean elpd and its variance.

    The sample mean and ``sample variance / m``; computed as Hansen-Hurwitz
    with ``pi = 1 / n``.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    probs = np.full(v.size, 1.0 / n)
    return float(hh_mean_kernel(v, probs, n)), float(hh_variance_kernel(v, probs, n))


# -- workflow -----------------------------------------------------------------


def _nan_to_none(d):
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


@dataclass
class ElpdReport:
    """Subsampled elpd estimate with diagnostics.

    ``elpd_hat`` and ``se_subsampling`` are on the total scale (sum over
    all ``n`` observations); ``elpd_mean_hat`` and ``se_mean`` on the mean
    scale. ``sigma_loo_hat`` is NaN (``null`` in JSON) when the variance
    estimate came out negative.
    """

    elpd_hat: float
    se_subsampling: float
    sigma_loo_hat: float
    m: int
    n: int
    khat_bad_fraction: float
    elpd_mean_hat: float = math.nan
    se_mean: float = math.nan
    sigma_loo_sq_hat: float = math.nan
    sigma_loo_sq_negative: bool = False
    strategy: str = ""
    clamped_count: int = 0
    n_psis_evaluations: int = 0
    posterior_khat: float = math.nan
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _nan_to_none(asdict(self))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass
class ComparisonReport:
    """Paired difference ``A - B`` of total elpd on a shared subsample."""

    elpd_diff: float
    se_diff: float
    shared_subsample: Subsample
    elpd_a: float = math.nan
    elpd_b: float = math.nan
    se_a: float = math.nan
    se_b: float = math.nan
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("elpd_diff", "se_diff", "elpd_a", "elpd_b", "se_a", "se_b")}
        d = _nan_to_none(d)
        d["shared_subsample"] = self.shared_subsample.to_dict()
        d["config"] = self.config
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


class LooCache:
    """Evaluates :func:`~subloo.loo.loo_lpd` at most once per observation."""

    def __init__(self, bundle: DrawsBundle):
        self.bundle = bundle
        self._store: dict[int, LooPointEstimate] = {}

    def __len__(self):
        return len(self._store)

    def get(self, i) -> LooPointEstimate:
        i = int(i)
        est = self._store.get(i)
        if est is None:
            est = self._store[i] = loo_lpd(self.bundle, i)
        return est

    def values(self, indices) -> np.ndarray:
        return np.array([self.get(i).loo_lpd for i in np.asarray(indices).reshape(-1)])

    def bad_fraction(self, indices) -> float:
        distinct = np.unique(indices)
        return float(np.mean([self.get(i).flag == "bad" for i in distinct]))


def _report(values, plan, subsample, bad_fraction, n_psis):
    n = plan.n
    mean_hat = hh_elpd(values, plan, subsample)
    if subsample.m >= 2:
        se_mean = math.sqrt(hh_variance(values, plan, subsample))
        s2 = sigma_loo_sq(values, plan, subsample)
    else:
        se_mean = s2 = math.nan
    return ElpdReport(
        elpd_hat=n * mean_hat,
        se_subsampling=n * se_mean,
        sigma_loo_hat=math.sqrt(s2) if s2 >= 0 else math.nan,
        m=subsample.m,
        n=n,
        khat_bad_fraction=bad_fraction,
        elpd_mean_hat=mean_hat,
        se_mean=se_mean,
        sigma_loo_sq_hat=s2,
        sigma_loo_sq_negative=bool(s2 < 0),
        strategy=plan.strategy,
        clamped_count=plan.clamped_count,
        n_psis_evaluations=n_psis,
    )


def estimate_elpd(
    bundle: DrawsBundle,
    plan: SamplingPlan,
    m: int,
    seed,
    cache: LooCache | None = None,
    subsample: Subsample | None = None,
) -> tuple[ElpdReport, Subsample]:
    """Subsample ``m`` observations by PPS and estimate elpd from them.

    PSIS runs only for the distinct subsampled observations, so the cost is
    O(n) for the table plus O(m S). Pass ``subsample`` to reuse a saved one
    instead of drawing.
    """
    if plan.n != bundle.n_obs:
        raise ValueError(f"plan covers {plan.n} observations, bundle has {bundle.n_obs}")
    if subsample is None:
        subsample = draw_subsample(build_alias(plan), m, seed)
    cache = cache if cache is not None else LooCache(bundle)
    before = len(cache)
    values = cache.values(subsample.indices)
    report = _report(values, plan, subsample, cache.bad_fraction(subsample.indices), len(cache) - before)
    return report, subsample


def full_elpd(bundle: DrawsBundle) -> ElpdReport:
    """Reference report from PSIS-LOO on every observation (``se_subsampling = 0``)."""
    ests = loo_all(bundle)
    v = np.array([e.loo_lpd for e in ests])
    n = v.size
    return ElpdReport(
        elpd_hat=float(v.sum()),
        se_subsampling=0.0,
        sigma_loo_hat=float(v.std()),
        m=n,
        n=n,
        khat_bad_fraction=float(np.mean([e.flag == "bad" for e in ests])),
        elpd_mean_hat=float(v.mean()),
        se_mean=0.0,
        sigma_loo_sq_hat=float(v.var()),
        strategy="full",
        n_psis_evaluations=n,
    )


def compare_models(
    bundle_a: DrawsBundle,
    bundle_b: DrawsBundle,
    plan: SamplingPlan,
    subsample: Subsample,
) -> ComparisonReport:
    """Paired Hansen-Hurwitz comparison of two models on one subsample.

    Pointwise differences ``loo_A(i) - loo_B(i)`` go through the same
    estimator, so noise from which observations were drawn cancels.
    """
    if bundle_a.n_obs != bundle_b.n_obs:
        raise ValueError(f"models see different data: n={bundle_a.n_obs} vs n={bundle_b.n_obs}")
    if plan.n != bundle_a.n_obs:
        raise ValueError(f"plan covers {plan.n} observations, bundles have {bundle_a.n_obs}")
    va = LooCache(bundle_a).values(subsample.indices)
    vb = LooCache(bundle_b).values(subsample.indices)
    n = plan.n

    def total_and_se(v):
        se = n * math.sqrt(hh_variance(v, plan, subsample)) if subsample.m >= 2 else math.nan
        return n * hh_elpd(v, plan, subsample), se

    diff, se_diff = total_and_se(va - vb)
    ea, se_a = total_and_se(va)
    eb, se_b = total_and_se(vb)
    return ComparisonReport(
        elpd_diff=diff, se_diff=se_diff, shared_subsample=subsample, elpd_a=ea, elpd_b=eb, se_a=se_a, se_b=se_b
    )
