"""Numerical laboratory for score-field regularity in OU diffusion models.

Exact score fields of analytically known targets, curvature and growth
bounds with sweep verification, a piecewise-quadratic counter-example
family, the exponential-integrator backward sampler, and the metrics that
tie them together.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend
from .bounds import (BoundReport, BoundRow, cor32_Ct, early_stopping_constant,
                     ht_proxy, kl_predicted, prior_horizon, sweep_verify,
                     thm5_bounds, thm31_bounds, thm33_bounds, thm37_bounds)
from .counterexample import (BlockRatio, BlockSpec, ChainReport, ChainSpec,
                             assemble_chain, block_ratio, block_target, erf,
                             verify_chain)
from .errors import (ConfigError, ContractError, EvaluationDomainError,
                     HorizonExceededError, QuadratureError, RejectionError,
                     ScoreLabError, SpecError, UnsupportedOperationError)
from .metrics import RateFit, eps0, kl_kde_1d, moments, rate_fit, w1_1d, w1_sliced
from .sampler import (BackwardRun, SamplerConfig, ScoreSource, backward_run,
                      exp_step, forward_sample, make_score_source)
from .scorefield import (QuadratureConfig, closed_form_mixture, compact_qbar,
                         mixture_qbar, qbar_field, score_field, smooth_qbar)
from .targets import (CompactMeasureSpec, GaussianMixtureSpec,
                      SmoothPotentialSpec, TargetSpec, catalog,
                      eval_potential, mixture_at_time, validate_metadata)

__all__ = [name for name in dir() if not name.startswith("_")]
