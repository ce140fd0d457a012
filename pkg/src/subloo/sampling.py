"""Probability-proportional-to-size subsampling of observations.

Sampling probabilities are taken proportional to ``-lpd_i``, minus some
log predictive density of each observation, and draws are made with
replacement through a Walker/Vose alias table: O(n) to build, O(1) per
draw.

Strategies (how ``lpd_i`` is obtained):

``lpd_full``        ``log p(y_i | y)`` estimated from the draws bundle
``expected_lpd_q``  ``E_q[log p(y_i | theta)]``, column means of the bundle
``lpd_point``       ``log p(y_i | theta_hat)`` for a user-supplied point
``lpd_at_q_mean``   same, at the mean of the approximation
``lpd_at_q_mode``   same, at the mode of the approximation
``uniform``         equal probabilities (simple random sampling)

``expected_lpd_data`` (an expectation over datasets) is listed for
completeness but cannot be computed from one dataset.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .draws import DrawsBundle, full_data_lpd_all
from .exceptions import ConfigurationError

__all__ = [
    "STRATEGIES",
    "PI_FLOOR",
    "ClampWarning",
    "SamplingPlan",
    "AliasTable",
    "Subsample",
    "compute_pi",
    "build_alias",
    "draw_subsample",
]

STRATEGIES = (
    "lpd_full",
    "expected_lpd_data",
    "expected_lpd_q",
    "lpd_at_q_mean",
    "lpd_at_q_mode",
    "lpd_point",
    "uniform",
)
_POINT_STRATEGIES = ("lpd_point", "lpd_at_q_mean", "lpd_at_q_mode")

PI_FLOOR = 1e-6
_DRAW_CHUNK = 1 << 16


class ClampWarning(UserWarning):
    """Some ``-lpd_i`` fell below the positivity floor and were clamped."""


@dataclass(frozen=True, eq=False)
class SamplingPlan:
    pi_tilde: np.ndarray
    strategy: str
    clamped_count: int = 0

    @property
    def n(self) -> int:
        return self.pi_tilde.size


@dataclass(frozen=True, eq=False)
class AliasTable:
    """``prob[j]``: chance cell ``j`` keeps its own index, else ``alias[j]``."""

    prob: np.ndarray
    alias: np.ndarray

    def __post_init__(self):
        # prob and alias of a cell side by side, so a draw reads one cache line
        object.__setattr__(self, "_cells", self.prob + 1j * self.alias)

    @property
    def n(self) -> int:
        return self.prob.size

    def probabilities(self) -> np.ndarray:
        """Distribution implied by the table (cell masses summed per index)."""
        n = self.n
        out = self.prob / n
        out += np.bincount(self.alias, weights=(1.0 - self.prob) / n, minlength=n)
        return out


@dataclass(frozen=True, eq=False)
class Subsample:
    indices: np.ndarray
    seed: int

    @property
    def m(self) -> int:
        return self.indices.size

    def to_dict(self) -> dict:
        return {"seed": int(self.seed), "m": self.m, "indices": self.indices.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Subsample":
        idx = np.asarray(d["indices"], dtype=np.int64)
        if idx.size != int(d["m"]):
            raise ValueError(f"subsample m={d['m']} but {idx.size} indices")
        return cls(indices=idx, seed=int(d["seed"]))

    @classmethod
    def from_json(cls, text: str) -> "Subsample":
        return cls.from_dict(json.loads(text))


def compute_pi(bundle: DrawsBundle | None, strategy: str, point_lpd=None) -> SamplingPlan:
    """Subsampling probabilities for ``strategy``.

    Raw sizes are ``max(-lpd_i, 1e-6)``; every clamp is counted and a
    :class:`ClampWarning` is emitted (densities above 1 give positive lpd;
    rescaling the data is the real fix).

    Parameters
    ----------
    bundle : DrawsBundle or None
        Needed by ``lpd_full`` and ``expected_lpd_q`` (and by ``uniform``
        when ``point_lpd`` is not given, to know ``n``).
    strategy : str
        One of :data:`STRATEGIES`.
    point_lpd : array_like, optional
        ``log p(y_i | theta_hat)``, required by the point strategies.
    """
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
    if strategy == "expected_lpd_data":
        raise ConfigurationError(
            "strategy 'expected_lpd_data' is an expectation over datasets and cannot be computed from one dataset"
        )

    if strategy == "uniform":
        if bundle is not None:
            n = bundle.n_obs
        elif point_lpd is not None:
            n = np.asarray(point_lpd).size
        else:
            raise ConfigurationError("strategy 'uniform' needs a bundle or a point_lpd vector to know n")
        return SamplingPlan(pi_tilde=np.full(n, 1.0 / n), strategy=strategy, clamped_count=0)

    if strategy in _POINT_STRATEGIES:
        if point_lpd is None:
            raise ConfigurationError(f"strategy {strategy!r} requires point_lpd")
        lpd = np.asarray(point_lpd, dtype=np.float64).reshape(-1)
        if bundle is not None and lpd.size != bundle.n_obs:
            raise ConfigurationError(f"point_lpd has {lpd.size} entries, bundle has {bundle.n_obs} observations")
    else:
        if bundle is None:
            raise ConfigurationError(f"strategy {strategy!r} requires a draws bundle")
        if strategy == "lpd_full":
            lpd = full_data_lpd_all(bundle)
        else:
            lpd = bundle.log_lik.mean(axis=0)

    if lpd.size == 0 or not np.all(np.isfinite(lpd)):
        raise ConfigurationError("lpd values must be finite and non-empty")
    raw = -lpd
    clamped = raw < PI_FLOOR
    n_clamped = int(clamped.sum())
    if n_clamped:
        warnings.warn(
            f"{n_clamped} observation(s) have log predictive density >= {-PI_FLOOR:g}; "
            f"their sizes were clamped to {PI_FLOOR:g}",
            ClampWarning,
            stacklevel=2,
        )
        raw = np.where(clamped, PI_FLOOR, raw)
    return SamplingPlan(pi_tilde=raw / raw.sum(), strategy=strategy, clamped_count=n_clamped)


def build_alias(plan: SamplingPlan) -> AliasTable:
    """Vose's alias table for ``plan.pi_tilde``."""
    p = np.asarray(plan.pi_tilde, dtype=np.float64)
    n = p.size
    scaled = (p * n).tolist()
    prob = [1.0] * n
    alias = list(range(n))
    small = [j for j, v in enumerate(scaled) if v < 1.0]
    large = [j for j, v in enumerate(scaled) if v >= 1.0]
    while small and large:
        lo = small.pop()
        hi = large.pop()
        prob[lo] = scaled[lo]
        alias[lo] = hi
        scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
        if scaled[hi] < 1.0:
            small.append(hi)
        else:
            large.append(hi)
    # whatever remains is 1 up to rounding; prob/alias already default to (1, self)
    return AliasTable(prob=np.array(prob), alias=np.array(alias, dtype=np.int64))


def draw_subsample(table: AliasTable, m: int, seed: int) -> Subsample:
    """``m`` independent draws from the alias table, reproducible from ``seed``."""
    m = int(m)
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    rng = np.random.default_rng(seed)
    n = table.n
    out = np.empty(m, dtype=np.int64)
    for start in range(0, m, _DRAW_CHUNK):
        k = min(_DRAW_CHUNK, m - start)
        idx = rng.integers(0, n, size=k)
        u = rng.random(k)
        cell = table._cells.take(idx)
        out[start : start + k] = np.where(u < cell.real, idx, cell.imag.astype(np.int64))
    return Subsample(indices=out, seed=int(seed))
