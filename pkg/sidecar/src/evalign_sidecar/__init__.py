"""Reranker sidecar: train a sequence-pair relevance model on annotated
cases and emit per-sentence scores in the evalign score-TSV contract.

The sidecar talks to the main pipeline only through files: it reads the
case XML and gold JSON, and writes the score TSV that `evalign ensemble`
ingests.  No model runs inside the main pipeline.
"""

__version__ = "0.1.0"

from .errors import SidecarError
from .model import TrainConfig, finetune, load_model, save_model
from .pairs import TrainingPair, build_training_pairs
from .scoring import emit_scores

__all__ = [
    "__version__",
    "SidecarError",
    "TrainConfig",
    "TrainingPair",
    "build_training_pairs",
    "emit_scores",
    "finetune",
    "load_model",
    "save_model",
]
