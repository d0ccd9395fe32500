"""Generalized Cox proportional hazards with spline (KAN) log-risk functions."""

__version__ = "0.1.0"

from .cox import (BreslowBaseline, LinearCphFit, RiskSetIndex, SurvivalRecord, breslow_baseline,
                  build_risk_index, fit_linear_cph, log_partial_likelihood,
                  log_partial_likelihood_grad, predict_survival)
from .datasets import (CsvSchema, Dataset, SyntheticConfig, generate_synthetic, load_csv, split,
                       write_csv)
from .errors import (ConfigurationError, DataError, GcphError, InputError, NumericalError,
                     UndefinedMetricError)
from .kan import (GcphModel, load_model, log_risk, log_risk_batch, log_risk_grad_batch,
                  per_feature_curve, save_model)
from .metrics import (Horizon, KaplanMeier, brier_score, c_index, evaluate_at_horizons,
                      kaplan_meier, percentile_horizons)
from .spline import Activation, KnotGrid, activation_eval, activation_grad, basis_fn, bspline_basis
from .symbolic import SymbolicModel, SymbolicTerm, affine_fit, render_formula, symbolify
from .trainer import (RegConfig, TrainConfig, TrainLog, entropy_loss, l1_norm_per_activation,
                      total_loss, total_loss_grad, train, train_multi_seed)
