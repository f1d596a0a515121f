"""Songwriter attribution from symbolic song encodings.

Songs are reduced to binary musical features, screened by a Monte-Carlo
chi-squared test, and classified with elastic-net logistic regression. The
screening threshold and the penalty are chosen by nested cross-validation.
"""

__version__ = "0.1.0"

from .corpus import Author, Corpus, CorpusError, Song, load_corpus, parse_corpus, validate_corpus  # noqa: E402
from .enet import ElasticNetFit, TuningPair, cv_select, fit  # noqa: E402
from .features import FeatureId, FeatureMatrix, Family, build_matrix, extract_features, feature_catalog  # noqa: E402
from .pipeline import (  # noqa: E402
    PipelineConfig,
    fit_final,
    loo_calibration,
    predict_with_ci,
    select_threshold,
    variable_importance,
)
from .screening import screen, simulate_null_pvalue  # noqa: E402

__all__ = [
    "__version__",
    "Author",
    "Corpus",
    "CorpusError",
    "Song",
    "load_corpus",
    "parse_corpus",
    "validate_corpus",
    "ElasticNetFit",
    "TuningPair",
    "cv_select",
    "fit",
    "FeatureId",
    "FeatureMatrix",
    "Family",
    "build_matrix",
    "extract_features",
    "feature_catalog",
    "PipelineConfig",
    "fit_final",
    "loo_calibration",
    "predict_with_ci",
    "select_threshold",
    "variable_importance",
    "screen",
    "simulate_null_pvalue",
]
