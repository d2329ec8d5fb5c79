"""Binary expansion linear effect (BELIEF) models for a binary response."""

from .bitalgebra import Subgroup, hadamard_column, mask_label, span, wht
from .errors import BeliefError, ConfigError, DataError, DegeneracyError, SeparationError, SingularDesignError
from .estimator import (
    BeliefFit,
    CellTable,
    aggregate,
    check_bounds,
    classify_degeneracy,
    covariance,
    detect_separation,
    fit,
    fit_lse,
    fit_mp,
    fit_ridge,
    load_model,
    predict,
    save_model,
)
from .expansion import (
    BitPanel,
    ExpansionConfig,
    VariableSpec,
    binary_expand,
    binary_expand_array,
    build_panel,
    ecdf_transform,
    reconstruct,
)
from .glm_bridge import belief_to_glm, glm_to_belief, hidden_interaction_report, taylor_sensitivity
from .inference import independence_report, precision_zero_check, significant_slopes

__version__ = "0.1.0"

__all__ = [
    "Subgroup", "hadamard_column", "mask_label", "span", "wht",
    "BeliefError", "ConfigError", "DataError", "DegeneracyError", "SeparationError", "SingularDesignError",
    "BeliefFit", "CellTable", "aggregate", "check_bounds", "classify_degeneracy", "covariance",
    "detect_separation", "fit", "fit_lse", "fit_mp", "fit_ridge", "load_model", "predict", "save_model",
    "BitPanel", "ExpansionConfig", "VariableSpec", "binary_expand", "binary_expand_array", "build_panel",
    "ecdf_transform", "reconstruct",
    "belief_to_glm", "glm_to_belief", "hidden_interaction_report", "taylor_sensitivity",
    "independence_report", "precision_zero_check", "significant_slopes",
]
