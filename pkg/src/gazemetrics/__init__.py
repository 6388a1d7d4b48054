"""gazemetrics: oculomotor feature extraction and condition statistics.

Pipeline: ingest canonical CSVs -> gap segmentation + Savitzky-Golay
smoothing -> angular velocity -> adaptive velocity-threshold saccade
detection -> dispersion and blink features -> 31-feature vectors ->
cohort statistics (normality-gated omnibus tests, FDR, pairwise effects).
"""

from .model import (Condition, FeatureVector, GazeRecording, ScreenGeometry,
                    feature_names)
from .pipeline import PipelineParams, extract_features

__version__ = "0.1.0"

__all__ = [
    "Condition",
    "FeatureVector",
    "GazeRecording",
    "PipelineParams",
    "ScreenGeometry",
    "extract_features",
    "feature_names",
    "__version__",
]
