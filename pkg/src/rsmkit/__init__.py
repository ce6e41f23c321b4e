"""rsmkit: sequential response-surface optimization of multiple responses
through desirability functions, with design generation, factor screening,
steepest ascent, canonical analysis, bootstrap robustness, and a built-in
comfort/daylight metrics engine."""

from .ascent import AscentPath, select_recenter, steepest_path
from .bootstrap import BootstrapResult, bootstrap_stationary, percentile_ci
from .campaign import CampaignState, default_config, run_campaign
from .canonical import (CanonicalAnalysis, canonical_path, classify,
                        jacobi_eigh, stationary_point)
from .desirability import (DesirabilitySpec, d_max, d_min, d_target,
                           desirability, overall)
from .designs import (CCDSpec, Design, DesignPoint, Factor,
                      FractionalFactorialSpec, alias_structure,
                      central_composite, code_to_natural, first_order_design,
                      fractional_factorial, full_factorial, natural_to_code,
                      read_design_csv)
from .evaluator import (EvaluationResult, SurrogateSpec, csv_batch_eval,
                        surrogate_eval, surrogate_ioh, surrogate_udi)
from .metrics import (AdaptiveComfortParams, HourlyZoneSeries, IlluminanceGrid,
                      OutdoorSeries, adaptive_upper_limit, cda, da, ioh,
                      prevailing_mean, sda, udi)
from .modelfit import (AnovaTable, FittedModel, anova, fit,
                       information_criteria, spearman)
from .screening import (InactiveFactorPolicy, ScreeningResult, assign_inactive,
                        lasso_cv, stepwise_bic)

__version__ = "0.1.0"
