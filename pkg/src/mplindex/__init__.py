"""Deflator-based multi-period/multilateral price indexes from value/quantity panels."""

from .algebra import (
    BlockInverse,
    DesignSystem,
    GramBlocks,
    OlsFit,
    build_design_system,
    gram_blocks,
    ols_fit,
    schur_block12,
    structured_normal_matrix,
    structured_normal_rhs,
    transition_matrix,
)
from .bilateral import (
    BilateralInput,
    bilateral_from_panel,
    classical_form_matrix,
    classical_index,
    convex_weights,
    convex_weights_from_values,
    mpl_two_period,
    quadratic_form_index,
)
from .dummy import DummyFit, fit_dummy_index, presence_components
from .errors import (
    BasketViolation,
    DegenerateDeflator,
    DegenerateForm,
    DuplicateObservation,
    EmptyBasket,
    EstimationError,
    FormatError,
    InconsistentCell,
    InvalidDimension,
    InvalidPrice,
    MplIndexError,
    RedrawExhausted,
    SingularSystem,
    UndefinedVariance,
    UnidentifiedModel,
    ValidationError,
)
from .estimator import (
    DeflatorEstimate,
    IndexSeries,
    deflator_covariance,
    estimate_deflators,
    index_variance,
    pseudo_reciprocal,
    to_index_series,
    with_variance_method,
)
from .panel import (
    BasketReport,
    Panel,
    PriceMatrix,
    build_reference_basket,
    emit_panel,
    implied_prices,
    load_panel,
)
from .simulate import (
    EstimatorSummary,
    SimulationConfig,
    SimulationReport,
    simulate,
)
from .updating import UpdateResult, update_multilateral, update_multiperiod

__version__ = "0.1.0"

__all__ = [
    "BasketReport",
    "BasketViolation",
    "BilateralInput",
    "BlockInverse",
    "DeflatorEstimate",
    "DegenerateDeflator",
    "DegenerateForm",
    "DesignSystem",
    "DummyFit",
    "DuplicateObservation",
    "EmptyBasket",
    "EstimationError",
    "EstimatorSummary",
    "FormatError",
    "GramBlocks",
    "InconsistentCell",
    "IndexSeries",
    "InvalidDimension",
    "InvalidPrice",
    "MplIndexError",
    "OlsFit",
    "Panel",
    "PriceMatrix",
    "RedrawExhausted",
    "SimulationConfig",
    "SimulationReport",
    "SingularSystem",
    "UndefinedVariance",
    "UnidentifiedModel",
    "UpdateResult",
    "ValidationError",
    "bilateral_from_panel",
    "build_design_system",
    "build_reference_basket",
    "classical_form_matrix",
    "classical_index",
    "convex_weights",
    "convex_weights_from_values",
    "deflator_covariance",
    "emit_panel",
    "estimate_deflators",
    "fit_dummy_index",
    "gram_blocks",
    "implied_prices",
    "index_variance",
    "load_panel",
    "mpl_two_period",
    "ols_fit",
    "presence_components",
    "pseudo_reciprocal",
    "quadratic_form_index",
    "schur_block12",
    "simulate",
    "structured_normal_matrix",
    "structured_normal_rhs",
    "to_index_series",
    "transition_matrix",
    "update_multilateral",
    "update_multiperiod",
    "with_variance_method",
]
