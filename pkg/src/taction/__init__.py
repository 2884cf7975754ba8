"""taction: tactile material-perception pipeline.

Feature extraction from pressing / static-contact / sliding finger-surface
recordings, sensation-rating regression, and material classification, with
a deterministic repeated-holdout evaluation harness and a synthetic
ground-truth corpus generator for end-to-end verification.
"""

from ._kernels import USING_NUMBA, mix_seed
from .config import RunConfig, load_config
from .curvefit import FitResult, ModelKind, default_init, eval_model, fit, r_squared
from .dataio import (CorpusManifest, RatingMatrix, RawRatings, Recording,
                     load_corpus, load_ratings, normalize_ratings)
from .extract import (FeatureVector, assemble_features, extract_heatflux,
                      extract_pressing, extract_sliding, extract_temperature,
                      segment_pressing)
from .models import (Dataset, ImportanceRanking, TrainedModel, model_from_json,
                     model_to_json, predict, predict_class, predict_proba,
                     rf_feature_importance, train)
from .models.standardize import standardize_apply, standardize_fit
from .registry import FEATURE_GROUPS, FEATURE_NAMES

__version__ = "0.1.0"

__all__ = [
    "USING_NUMBA", "mix_seed", "RunConfig", "load_config",
    "FitResult", "ModelKind", "default_init", "eval_model", "fit",
    "r_squared", "CorpusManifest", "RatingMatrix", "RawRatings", "Recording",
    "load_corpus", "load_ratings", "normalize_ratings", "FeatureVector",
    "assemble_features", "extract_heatflux", "extract_pressing",
    "extract_sliding", "extract_temperature", "segment_pressing", "Dataset",
    "ImportanceRanking", "TrainedModel", "model_from_json", "model_to_json",
    "predict", "predict_class", "predict_proba", "rf_feature_importance",
    "train", "standardize_apply", "standardize_fit", "FEATURE_GROUPS",
    "FEATURE_NAMES", "__version__",
]
