"""Distances between WiFi RSSI likelihoods for unsupervised indoor location discrimination."""

__version__ = "0.1.0"

from .distance import (DistanceMatrix, Measure, pairwise_matrix, segment_distance,
                       univariate_distance)
from .embed import Embedding, classical_mds
from .evaluation import (CorrelationReport, LabeledSegment, RocCurve, classify_pair,
                         correlations, label_pairs, roc_auc)
from .ingest import (AccelObservation, Blacklist, WifiDataset, WifiObservation,
                     augment_ap_invisibility, filter_mobile_aps, parse_accel_records,
                     parse_wifi_records, restrict_device)
from .likelihood import (EvaluationGrid, Kde, Normal, Pmf, SegmentFingerprint, estimate_kde,
                         estimate_normal, estimate_pmf, evaluate_on_grid, fingerprint_segment)
from .motionseg import (MotionSegmentation, WifiSegment, WindowConfig,
                        extract_stationary_segments, segment_motion, window_statistic)
from .synthetic import SyntheticSceneConfig, generate_synthetic_scene

__all__ = [
    "AccelObservation", "Blacklist", "CorrelationReport", "DistanceMatrix", "Embedding",
    "EvaluationGrid", "Kde", "LabeledSegment", "Measure", "MotionSegmentation", "Normal", "Pmf",
    "RocCurve", "SegmentFingerprint", "SyntheticSceneConfig", "WifiDataset", "WifiObservation",
    "WifiSegment", "WindowConfig", "augment_ap_invisibility", "classical_mds", "classify_pair",
    "correlations", "estimate_kde", "estimate_normal", "estimate_pmf", "evaluate_on_grid",
    "extract_stationary_segments", "filter_mobile_aps", "fingerprint_segment",
    "generate_synthetic_scene", "label_pairs", "pairwise_matrix", "parse_accel_records",
    "parse_wifi_records", "restrict_device", "roc_auc", "segment_distance", "segment_motion",
    "univariate_distance", "window_statistic",
]
