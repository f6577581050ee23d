"""Multi-disease risk prediction on tabular health records.

Submodules
----------
dataio    CSV ingestion, normalization, stratified splits, synthetic data.
features  Statistical and saliency scores, score blending, top-k masks.
sev_eb    Population optimizer with a stability gate and shrinking bounds.
network   Causal-conv, LSTM and attention classifier with manual gradients.
metrics   Confusion-based scores, ROC curves and AUC.
pipeline  End-to-end train/eval/predict/bench and model artifacts.
"""

from . import dataio, errors, features, metrics, network, pipeline, sev_eb
from .dataio import RecordTable, load_table, synth_generate
from .pipeline import ModelArtifact, PipelineConfig, load_config, run_eval, run_predict, run_train

__version__ = "0.1.0"

__all__ = [
    "dataio", "errors", "features", "metrics", "network", "pipeline", "sev_eb",
    "RecordTable", "load_table", "synth_generate",
    "ModelArtifact", "PipelineConfig", "load_config", "run_eval", "run_predict", "run_train",
]
