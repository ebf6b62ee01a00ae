"""Duct-instance feature pipeline for breast-biopsy tissue label rasters."""

__version__ = "0.1.0"

from .raster import (
    DEFAULT_FOREGROUND,
    DIAGNOSES,
    BitMask,
    BoundingBox,
    LabelRaster,
    RoiRecord,
    TissueLabel,
    binarize,
    read_label_raster,
    resize_nearest,
    write_label_raster,
)
from .instances import (
    InstanceMap,
    MatchReport,
    connected_components,
    derive_instances_weak,
    match_instances,
    morphological_close,
)
from .features import (
    FEATURE_NAMES,
    CooccurrenceMatrix,
    FeatureVector,
    Region,
    aggregate_features,
    cooccurrence_features,
    duct_features,
    extract_feature_vector,
    histogram_features,
    roi_features,
)

__all__ = [
    "__version__",
    "DEFAULT_FOREGROUND",
    "DIAGNOSES",
    "BitMask",
    "BoundingBox",
    "LabelRaster",
    "RoiRecord",
    "TissueLabel",
    "binarize",
    "read_label_raster",
    "resize_nearest",
    "write_label_raster",
    "InstanceMap",
    "MatchReport",
    "connected_components",
    "derive_instances_weak",
    "match_instances",
    "morphological_close",
    "FEATURE_NAMES",
    "CooccurrenceMatrix",
    "FeatureVector",
    "Region",
    "aggregate_features",
    "cooccurrence_features",
    "duct_features",
    "extract_feature_vector",
    "histogram_features",
    "roi_features",
]
