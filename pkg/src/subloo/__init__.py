"""Leave-one-out cross-validation for large data.

PSIS-LOO from (approximate) posterior draws, combined with
probability-proportional-to-size subsampling and Hansen-Hurwitz
estimation of the elpd total.
"""

__version__ = "0.1.0"

from .draws import DrawsBundle, full_data_lpd, full_data_lpd_all, load_draws, save_draws
from .estimators import (
    ComparisonReport,
    ElpdReport,
    LooCache,
    compare_models,
    estimate_elpd,
    full_elpd,
    hh_elpd,
    hh_variance,
    sigma_loo_sq,
    srs_elpd,
)
from .loo import LooPointEstimate, correction_log_ratios, loo_all, loo_lpd, posterior_khat
from .psis import GpdFit, PsisResult, fit_gpd, khat_flag, psis_smooth
from .sampling import AliasTable, SamplingPlan, Subsample, build_alias, compute_pi, draw_subsample
