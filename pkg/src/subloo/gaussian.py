"""Conjugate Gaussian linear regression with known noise variance.

    y_i ~ N(x_i' beta, noise_sd^2),    beta ~ N(prior_mean, prior_cov)

Everything about this model is available in closed form: the posterior,
the full-data and leave-one-out predictive densities. That makes it the
reference against which the sampling-based estimators are checked.
Approximate posteriors (Laplace, mean-field) are Gaussians built from the
same quantities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import linalg

from .draws import DrawsBundle

__all__ = [
    "ConjugateLinearModel",
    "GaussianPosterior",
    "fit_exact",
    "fit_laplace",
    "fit_mean_field",
    "fit",
    "sample_posterior",
    "make_bundle",
    "point_lpd",
    "exact_loo_lpd",
    "exact_loo_lpd_all",
    "exact_full_lpd",
    "exact_full_lpd_all",
    "simulate_lr",
]

_LOG_2PI = math.log(2.0 * math.pi)

PosteriorKind = Literal["exact", "laplace", "mean_field"]


def _cholesky(a, what):
    try:
        return linalg.cholesky(a, lower=True)
    except linalg.LinAlgError:
        raise np.linalg.LinAlgError(f"{what} is not symmetric positive definite") from None


def _spd_inverse(a, what):
    chol = _cholesky(a, what)
    inv = linalg.cho_solve((chol, True), np.eye(a.shape[0]))
    return 0.5 * (inv + inv.T)


def _mvn_logpdf(theta, mean, cov):
    # theta: (S, D)
    chol = _cholesky(cov, "covariance")
    z = linalg.solve_triangular(chol, (theta - mean).T, lower=True)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (np.einsum("ds,ds->s", z, z) + logdet + mean.size * _LOG_2PI)


@dataclass(frozen=True, eq=False)
class ConjugateLinearModel:
    X: np.ndarray
    y: np.ndarray
    noise_sd: float = 1.0
    prior_mean: np.ndarray = None
    prior_cov: np.ndarray = None

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        n, d = X.shape
        if y.size != n:
            raise ValueError(f"X has {n} rows but y has {y.size} entries")
        if not self.noise_sd > 0:
            raise ValueError(f"noise_sd must be > 0, got {self.noise_sd}")
        mean = np.zeros(d) if self.prior_mean is None else np.array(self.prior_mean, dtype=np.float64).reshape(-1)
        cov = 100.0 * np.eye(d) if self.prior_cov is None else np.array(self.prior_cov, dtype=np.float64)
        if cov.ndim == 0:
            cov = float(cov) * np.eye(d)
        if mean.shape != (d,) or cov.shape != (d, d):
            raise ValueError(f"prior must have mean shape ({d},) and cov shape ({d}, {d})")
        if not np.allclose(cov, cov.T):
            raise np.linalg.LinAlgError("prior_cov is not symmetric")
        _cholesky(cov, "prior_cov")
        for name, val in (("X", X), ("y", y), ("prior_mean", mean), ("prior_cov", cov)):
            val.flags.writeable = False
            object.__setattr__(self, name, val)
        object.__setattr__(self, "noise_sd", float(self.noise_sd))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def prior_precision(self) -> np.ndarray:
        return _spd_inverse(self.prior_cov, "prior_cov")

    def with_data(self, X, y) -> "ConjugateLinearModel":
        return ConjugateLinearModel(
            X=np.asarray(X).reshape(-1, self.dim),
            y=y,
            noise_sd=self.noise_sd,
            prior_mean=self.prior_mean,
            prior_cov=self.prior_cov,
        )

    def with_prior(self, prior_mean=None, prior_cov=None) -> "ConjugateLinearModel":
        return ConjugateLinearModel(
            X=self.X,
            y=self.y,
            noise_sd=self.noise_sd,
            prior_mean=self.prior_mean if prior_mean is None else prior_mean,
            prior_cov=self.prior_cov if prior_cov is None else prior_cov,
        )

    def log_prior(self, theta) -> np.ndarray:
        theta = np.atleast_2d(theta)
        return _mvn_logpdf(theta, self.prior_mean, self.prior_cov)

    def to_dict(self) -> dict:
        return {
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "noise_sd": self.noise_sd,
            "prior_mean": self.prior_mean.tolist(),
            "prior_cov": self.prior_cov.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ConjugateLinearModel":
        return cls(
            X=np.asarray(d["X"], dtype=np.float64).reshape(len(d["y"]), -1),
            y=d["y"],
            noise_sd=d["noise_sd"],
            prior_mean=d["prior_mean"],
            prior_cov=d["prior_cov"],
        )

    @classmethod
    def from_json(cls, text: str) -> "ConjugateLinearModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class GaussianPosterior:
    mean: np.ndarray
    cov: np.ndarray
    kind: PosteriorKind = "exact"

    def logpdf(self, theta) -> np.ndarray:
        return _mvn_logpdf(np.atleast_2d(theta), self.mean, self.cov)


def _precision_and_shift(model):
    s2 = model.noise_sd**2
    prior_prec = model.prior_precision
    prec = prior_prec + model.X.T @ model.X / s2
    shift = prior_prec @ model.prior_mean + model.X.T @ model.y / s2
    return 0.5 * (prec + prec.T), shift


def fit_exact(model: ConjugateLinearModel) -> GaussianPosterior:
    """Closed-form conjugate posterior."""
    prec, shift = _precision_and_shift(model)
    cov = _spd_inverse(prec, "posterior precision")
    return GaussianPosterior(mean=cov @ shift, cov=cov, kind="exact")


def _neg_log_post_grad_hess(model, theta):
    s2 = model.noise_sd**2
    prior_prec = model.prior_precision
    resid = model.y - model.X @ theta
    grad = prior_prec @ (theta - model.prior_mean) - model.X.T @ resid / s2
    hess = prior_prec + model.X.T @ model.X / s2
    return grad, 0.5 * (hess + hess.T)


def fit_laplace(model: ConjugateLinearModel, max_iter: int = 5) -> GaussianPosterior:
    """Gaussian at the posterior mode with inverse-Hessian covariance.

    The mode is found by Newton's method, which for this quadratic
    log posterior lands on it in one step.
    """
    theta = model.prior_mean.copy()
    for _ in range(max_iter):
        grad, hess = _neg_log_post_grad_hess(model, theta)
        step = linalg.cho_solve((_cholesky(hess, "negative Hessian"), True), grad)
        theta = theta - step
        if np.max(np.abs(step)) <= 1e-12 * (1.0 + np.max(np.abs(theta))):
            break
    _, hess = _neg_log_post_grad_hess(model, theta)
    return GaussianPosterior(mean=theta, cov=_spd_inverse(hess, "negative Hessian"), kind="laplace")


def fit_mean_field(model: ConjugateLinearModel) -> GaussianPosterior:
    """KL(q || p)-optimal diagonal Gaussian: exact mean, variances ``1 / diag(precision)``."""
    prec, _ = _precision_and_shift(model)
    exact = fit_exact(model)
    return GaussianPosterior(mean=exact.mean, cov=np.diag(1.0 / np.diag(prec)), kind="mean_field")


def fit(model: ConjugateLinearModel, kind: PosteriorKind) -> GaussianPosterior:
    fitters = {"exact": fit_exact, "laplace": fit_laplace, "mean_field": fit_mean_field}
    if kind not in fitters:
        raise ValueError(f"unknown approximation {kind!r}; choose from {', '.join(fitters)}")
    return fitters[kind](model)


def sample_posterior(post: GaussianPosterior, S: int, seed) -> np.ndarray:
    """``S`` i.i.d. draws, shape ``(S, D)``."""
    if S < 1:
        raise ValueError(f"S must be >= 1, got {S}")
    rng = np.random.default_rng(seed)
    chol = _cholesky(post.cov, "posterior covariance")
    z = rng.standard_normal((S, post.mean.size))
    return post.mean + z @ chol.T


def _loglik_matrix(model, theta):
    # built as (n, S) C-order so the transpose is the Fortran (S, n) layout
    mu = model.X @ theta.T
    np.subtract(model.y[:, None], mu, out=mu)
    mu /= model.noise_sd
    np.square(mu, out=mu)
    mu *= -0.5
    mu -= 0.5 * _LOG_2PI + math.log(model.noise_sd)
    return mu.T


def make_bundle(model: ConjugateLinearModel, post: GaussianPosterior, S: int, seed) -> DrawsBundle:
    """Draw from ``post`` and assemble a :class:`DrawsBundle`.

    ``log_p`` is the unnormalized log posterior, prior plus summed
    likelihood; ``log_q`` is the log density of ``post``.
    """
    theta = sample_posterior(post, S, seed)
    log_lik = _loglik_matrix(model, theta)
    log_p = model.log_prior(theta) + log_lik.sum(axis=1)
    return DrawsBundle(log_lik=log_lik, log_p=log_p, log_q=post.logpdf(theta))


def point_lpd(model: ConjugateLinearModel, theta) -> np.ndarray:
    """``log p(y_i | theta)`` for every observation at a single parameter value."""
    theta = np.asarray(theta, dtype=np.float64).reshape(1, -1)
    return _loglik_matrix(model, theta)[0]


def _normal_logpdf(x, mean, var):
    return -0.5 * (_LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def exact_full_lpd(model: ConjugateLinearModel, i) -> float:
    """``log p(y_i | y)`` under the exact posterior."""
    post = fit_exact(model)
    x = model.X[int(i)]
    return float(_normal_logpdf(model.y[int(i)], x @ post.mean, x @ post.cov @ x + model.noise_sd**2))


def exact_full_lpd_all(model: ConjugateLinearModel) -> np.ndarray:
    post = fit_exact(model)
    var = np.einsum("id,de,ie->i", model.X, post.cov, model.X) + model.noise_sd**2
    return _normal_logpdf(model.y, model.X @ post.mean, var)


def exact_loo_lpd(model: ConjugateLinearModel, i) -> float:
    """``log p(y_i | y_{-i})`` by refitting the posterior without row ``i``."""
    i = int(i)
    if not 0 <= i < model.n:
        raise IndexError(f"observation {i} out of range for n={model.n}")
    if model.n == 1:
        mean, cov = model.prior_mean, model.prior_cov
    else:
        keep = np.arange(model.n) != i
        post = fit_exact(model.with_data(model.X[keep], model.y[keep]))
        mean, cov = post.mean, post.cov
    x = model.X[i]
    return float(_normal_logpdf(model.y[i], x @ mean, x @ cov @ x + model.noise_sd**2))


def exact_loo_lpd_all(model: ConjugateLinearModel) -> np.ndarray:
    """All ``log p(y_i | y_{-i})`` at once via rank-one downdates of the full posterior.

    With full-data posterior ``N(mu, Sigma)``, noise variance ``s2`` and
    leverage ``l_i = x_i' Sigma x_i / s2``, the held-out residual is
    ``(y_i - x_i' mu) / (1 - l_i)`` with predictive variance ``s2 / (1 - l_i)``.
    """
    post = fit_exact(model)
    s2 = model.noise_sd**2
    h = np.einsum("id,de,ie->i", model.X, post.cov, model.X)
    lev = h / s2
    resid = model.y - model.X @ post.mean
    loo_resid = resid / (1.0 - lev)
    return _normal_logpdf(loo_resid, 0.0, s2 / (1.0 - lev))


def simulate_lr(
    n: int,
    D: int,
    design: Literal["correlated", "independent"],
    seed,
    *,
    rho: float = 0.9,
    noise_sd: float = 1.0,
    prior_sd: float = 10.0,
    outlier_fraction: float = 0.0,
    outlier_shift: float = 10.0,
) -> ConjugateLinearModel:
    """Simulate a regression dataset with independent or equicorrelated predictors.

    Coefficients are drawn N(0, 1); the returned model has prior
    N(0, prior_sd^2 I). ``outlier_fraction`` of the responses get shifted by
    ``±outlier_shift * noise_sd`` to produce a skewed lpd population.
    """
    if n < 1 or D < 1:
        raise ValueError(f"need n >= 1 and D >= 1, got n={n}, D={D}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, D))
    if design == "independent":
        X = z
    elif design == "correlated":
        corr = np.full((D, D), rho)
        np.fill_diagonal(corr, 1.0)
        X = z @ linalg.cholesky(corr, lower=True).T
    else:
        raise ValueError(f"design must be 'correlated' or 'independent', got {design!r}")
    beta = rng.standard_normal(D)
    y = X @ beta + noise_sd * rng.standard_normal(n)
    n_out = int(round(outlier_fraction * n))
    if n_out:
        which = rng.choice(n, size=n_out, replace=False)
        y[which] += outlier_shift * noise_sd * rng.choice([-1.0, 1.0], size=n_out)
    return ConjugateLinearModel(
        X=X, y=y, noise_sd=noise_sd, prior_mean=np.zeros(D), prior_cov=prior_sd**2 * np.eye(D)
    )
