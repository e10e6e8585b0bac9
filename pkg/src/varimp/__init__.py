"""Variance-decomposition variable importance for linear models and forests."""

from .causal import (CausalReport, Edge, InterventionRanking, ScreenSettings,
                     discern_structure, important_set, rank_interventions)
from .dataset import (Dataset, GroupSpec, MomentModel, load_csv, moments,
                      seq_r2, subset_r2)
from .errors import InputError, NumericalError, VarimpError
from .estimators import ImportanceForest, LinearImportance
from .forest import (ForestImportance, ForestModel, ForestParams, dump_forest,
                     fit_forest, forest_oomph, importance_shares, oob_mse,
                     oob_predictions, oob_r2, permutation_importance)
from .inference import BootstrapPlan, bca_interval, bootstrap_importance
from .oomph import (OomphAssessment, assess_oomph, shift_response, t_squared,
                    usefulness)
from .pmvd import (OrderWeight, PmvdComparison, PmvdSettings,
                   compare_pmvd_variants, order_weight, pmvd_exact,
                   pmvd_perturbed, proportional_value)
from .result import ImportanceResult
from .shapley import (gamma_weight, johnson_weights, lmg_exact,
                      lmg_permutation_oracle, lmg_sampled)

__version__ = "0.1.0"

__all__ = [
    "BootstrapPlan", "CausalReport", "Dataset", "Edge", "ForestImportance",
    "ForestModel", "ForestParams", "GroupSpec", "ImportanceForest",
    "ImportanceResult", "InputError", "InterventionRanking",
    "LinearImportance", "MomentModel", "NumericalError", "OomphAssessment",
    "OrderWeight", "PmvdComparison", "PmvdSettings", "VarimpError",
    "assess_oomph", "bca_interval", "bootstrap_importance",
    "compare_pmvd_variants", "discern_structure", "dump_forest", "fit_forest",
    "forest_oomph", "gamma_weight", "importance_shares", "important_set",
    "johnson_weights", "lmg_exact", "lmg_permutation_oracle", "lmg_sampled",
    "load_csv", "moments", "oob_mse", "oob_predictions", "oob_r2",
    "order_weight", "permutation_importance", "pmvd_exact", "pmvd_perturbed",
    "proportional_value", "rank_interventions", "seq_r2", "shift_response",
    "subset_r2", "t_squared", "usefulness",
]
