"""Prototype-verbalizer engine for few-shot classification over exported
mask-position embeddings."""

from .engine import (
    AdamConfig,
    Checkpoint,
    ProjectionEncoder,
    PrototypeSet,
    TrainConfig,
    TrainResult,
    cosine_similarity,
    instance_instance_loss,
    instance_prototype_loss,
    load_checkpoint,
    loss_gradients,
    save_checkpoint,
    total_loss,
    train,
)
from .errors import (
    DataError,
    DegenerateEpisodeError,
    NumericalError,
    ProtoVerbError,
    UsageError,
)
from .scoring import (
    ClassScores,
    EnsembleConfig,
    ManualScorer,
    PrototypeScorer,
    ensemble_scores,
    evaluate,
    manual_scores,
    predict,
    proto_scores,
    standard_scale,
)
from .store import (
    DatasetHeader,
    EmbeddingDataset,
    EmbeddingRecord,
    Episode,
    NoiseSpec,
    inject_noise,
    load_dataset,
    sample_episode,
    validate_dataset,
    write_dataset,
)

__all__ = [
    "AdamConfig",
    "Checkpoint",
    "ClassScores",
    "DataError",
    "DatasetHeader",
    "DegenerateEpisodeError",
    "EmbeddingDataset",
    "EmbeddingRecord",
    "EnsembleConfig",
    "Episode",
    "ManualScorer",
    "NoiseSpec",
    "NumericalError",
    "ProjectionEncoder",
    "ProtoVerbError",
    "PrototypeScorer",
    "PrototypeSet",
    "TrainConfig",
    "TrainResult",
    "UsageError",
    "cosine_similarity",
    "ensemble_scores",
    "evaluate",
    "inject_noise",
    "instance_instance_loss",
    "instance_prototype_loss",
    "load_checkpoint",
    "load_dataset",
    "loss_gradients",
    "manual_scores",
    "predict",
    "proto_scores",
    "sample_episode",
    "save_checkpoint",
    "standard_scale",
    "total_loss",
    "train",
    "validate_dataset",
    "write_dataset",
]
