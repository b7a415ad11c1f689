"""Request and response schemas for the orchestration service.

The service runs next to the data it reads, so requests carry filesystem
paths; artifact-producing endpoints write their outputs (and a sibling
manifest) to the paths given.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    """Shape of every non-2xx body; `kind` maps to the CLI exit code."""

    kind: str
    message: str
    line: Optional[int] = None
    record_id: Optional[str] = None


class IssueModel(BaseModel):
    line: Optional[int] = None
    record_id: Optional[str] = None
    message: str


class ValidateRequest(BaseModel):
    path: str


class ValidateResponse(BaseModel):
    valid: bool
    n_issues: int
    issues: list[IssueModel]
    manifest: dict


class SampleRequest(BaseModel):
    path: str
    k_shot: int = Field(ge=1)
    n_way: Optional[int] = None  # default: every class in the dataset
    seed: int = 0
    noise_m: int = Field(default=0, ge=0)
    corruption_seed: Optional[int] = None  # default: the episode seed
    out_path: Optional[str] = None


class SampleResponse(BaseModel):
    episode: dict
    out_path: Optional[str] = None
    manifest: dict


class TrainRequest(BaseModel):
    dataset_path: str
    out_path: str
    k_shot: int = Field(default=8, ge=1)
    n_way: Optional[int] = None
    seed: int = 0
    variant: str = "full"
    noise_m: int = Field(default=0, ge=0)
    corruption_seed: Optional[int] = None
    # hyperparameter overrides; precedence: these > config file > defaults
    steps: Optional[int] = None
    learning_rate: Optional[float] = None
    d_proto: Optional[int] = None
    init_scale: Optional[float] = None
    config_path: Optional[str] = None


class TrainResponse(BaseModel):
    checkpoint_path: str
    manifest_path: str
    n_steps: int
    final_loss: Optional[float] = None
    effective_config: dict
    manifest: dict


class PerClassAccuracy(BaseModel):
    class_index: int
    class_name: str
    accuracy: Optional[float] = None  # None: no test records for the class


class EvalRequest(BaseModel):
    dataset_path: str
    checkpoint_path: str
    scorers: list[str] = ["proto"]
    out_path: Optional[str] = None
    include_predictions: bool = False


class EvalResponse(BaseModel):
    accuracy: float
    n_test: int
    scorer_ids: list[str]
    per_class: list[PerClassAccuracy]
    predictions: Optional[list[dict]] = None
    out_path: Optional[str] = None
    manifest: dict


class GridRequest(BaseModel):
    dataset_path: str
    out_dir: str
    k_values: list[int] = [8]
    seeds: list[int] = [0, 1, 2]
    variants: list[str] = ["full"]
    noise_levels: list[int] = [0]
    workers: int = Field(default=4, ge=1)
    steps: Optional[int] = None
    learning_rate: Optional[float] = None
    d_proto: Optional[int] = None
    init_scale: Optional[float] = None
    config_path: Optional[str] = None


class GridResponse(BaseModel):
    n_cells: int
    n_computed: int
    n_skipped: int
    aggregate_path: str
    long_csv_path: str
    manifest_path: str
    aggregate: list[dict]
    accuracy_drops: list[dict]
    manifest: dict


class ProbeRequest(BaseModel):
    checkpoint_path: str
    vocab_path: str
    top_k: int = Field(default=10, ge=1)
    out_path: Optional[str] = None


class ProbeResponse(BaseModel):
    report: dict
    out_path: Optional[str] = None
    manifest: dict


class SimilarityRequest(BaseModel):
    checkpoint_path: str
    vocab_path: str
    # exactly one of `words` (inline mapping) or `words_path` (JSON file)
    words: Optional[dict[str, list[str]]] = None
    words_path: Optional[str] = None
    out_path: Optional[str] = None


class SimilarityResponse(BaseModel):
    class_names: list[str]
    matrix: list[list[float]]
    out_path: Optional[str] = None
    manifest: dict


class SynthRequest(BaseModel):
    out_path: str
    n_classes: int = Field(default=4, ge=2)
    dim: int = Field(default=16, ge=1)
    train_per_class: int = Field(default=32, ge=1)
    test_per_class: int = Field(default=50, ge=0)
    separation: float = Field(default=4.0, ge=0.0)
    seed: int = 0
    orthogonal_means: bool = True
    with_logprobs: bool = True
    nuisance_dims: int = Field(default=0, ge=0)
    nuisance_scale: float = Field(default=4.0, ge=0.0)


class SynthResponse(BaseModel):
    out_path: str
    n_records: int
    header: dict
    manifest: dict
