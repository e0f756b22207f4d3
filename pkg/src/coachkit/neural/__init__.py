from coachkit.neural.model import (
    ModelConfig,
    TransformerClassifier,
    InvalidConfig,
    ShapeMismatch,
    init_model,
)
from coachkit.neural.train import (
    TrainingConfig,
    TrainResult,
    EpochRecord,
    EmptySplit,
    NonFiniteLoss,
    train,
    save_train_log,
)
from coachkit.neural.gradcheck import grad_check
from coachkit.neural.artifact import save_model, load_model, ARTIFACT_MAGIC
from coachkit.neural.classify import TextClassifier

__all__ = [
    "ModelConfig",
    "TransformerClassifier",
    "InvalidConfig",
    "ShapeMismatch",
    "init_model",
    "TrainingConfig",
    "TrainResult",
    "EpochRecord",
    "EmptySplit",
    "NonFiniteLoss",
    "train",
    "save_train_log",
    "grad_check",
    "save_model",
    "load_model",
    "ARTIFACT_MAGIC",
    "TextClassifier",
]
