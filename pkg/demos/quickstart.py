"""Subsampled LOO on a regression fitted with a mean-field approximation.

Run with ``python demos/quickstart.py``. Takes a few seconds.
"""

import numpy as np

from subloo import gaussian
from subloo.estimators import estimate_elpd, full_elpd
from subloo.loo import posterior_khat
from subloo.sampling import compute_pi

# Ten thousand observations with strongly correlated predictors. The
# mean-field approximation ignores those correlations, so its draws are
# too narrow and every LOO ratio needs the p/q correction.
model = gaussian.simulate_lr(10_000, 5, "correlated", seed=1)
q = gaussian.fit_mean_field(model)
bundle = gaussian.make_bundle(model, q, 2000, seed=2)
print(f"draws: S={bundle.n_draws}, n={bundle.n_obs}")
print(f"k_hat of p/q for the whole approximation: {posterior_khat(bundle):.2f}")

# Sampling sizes from the plug-in lpd at the approximation's mean cost
# O(n) and no PSIS at all.
plan = compute_pi(bundle, "lpd_at_q_mean", point_lpd=gaussian.point_lpd(model, q.mean))

# PSIS runs only for the distinct observations in the subsample.
report, subsample = estimate_elpd(bundle, plan, m=200, seed=3)
print(f"subsampled elpd_loo: {report.elpd_hat:.1f} (subsampling SE {report.se_subsampling:.2f})")
print(f"  PSIS evaluations: {report.n_psis_evaluations} of {report.n}")
print(f"  sigma_loo estimate: {report.sigma_loo_hat:.3f}")
print(f"  share of subsampled points with k_hat > 0.7: {report.khat_bad_fraction:.0%}")

# The closed-form answer for this conjugate model, for reference.
exact = gaussian.exact_loo_lpd_all(model)
print(f"exact elpd_loo:      {exact.sum():.1f}")

# A smaller problem where the full PSIS-LOO pass is cheap enough to compare.
small = model.with_data(model.X[:1000], model.y[:1000])
q_small = gaussian.fit_mean_field(small)
b_small = gaussian.make_bundle(small, q_small, 2000, seed=4)
full = full_elpd(b_small)
sub, _ = estimate_elpd(
    b_small,
    compute_pi(b_small, "lpd_at_q_mean", point_lpd=gaussian.point_lpd(small, q_small.mean)),
    m=100,
    seed=5,
)
print(f"n=1000: full PSIS-LOO {full.elpd_hat:.1f}, subsampled {sub.elpd_hat:.1f} +- {sub.se_subsampling:.2f}, "
      f"exact {np.sum(gaussian.exact_loo_lpd_all(small)):.1f}")
