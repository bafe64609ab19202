"""Explainable intrusion detection with self-organizing maps."""

__version__ = "0.1.0"

from .classify import (  # noqa: E402
    EvalReport,
    LabeledMap,
    SOMClassifier,
    evaluate,
    label_units,
    predict,
    resolve_unlabeled,
)
from .explain import (  # noqa: E402
    explanation_bundle,
    feature_heatmap,
    kmeans_units,
    local_explanation,
    starburst,
    u_matrix,
)
from .ingest import (  # noqa: E402
    Dataset,
    FlowPreprocessor,
    MinMaxClampScaler,
    RawTable,
    SignificanceSelector,
    load_csv,
)
from .quality import QualityReport, quality_report  # noqa: E402
from .som import SelfOrganizingMap, SomMap, TrainConfig, init_map, train  # noqa: E402

__all__ = [
    "Dataset", "EvalReport", "FlowPreprocessor", "LabeledMap", "MinMaxClampScaler",
    "QualityReport", "RawTable", "SOMClassifier", "SelfOrganizingMap", "SignificanceSelector",
    "SomMap", "TrainConfig", "evaluate", "explanation_bundle", "feature_heatmap", "init_map",
    "kmeans_units", "label_units", "load_csv", "local_explanation", "predict", "quality_report",
    "resolve_unlabeled", "starburst", "train", "u_matrix",
]
