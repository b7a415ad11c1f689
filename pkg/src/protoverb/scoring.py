"""Turning representations into predictions.

Three scorers produce per-class score vectors:

- prototype scorer: softmax over cosine similarities between the projected
  query and the prototypes (a probability vector);
- manual scorer: per class, the arithmetic mean of that class's label-word
  log-probabilities carried on the record;
- ensemble: each scorer's vector is standard-scaled per instance (subtract
  mean, divide by population std; constant vectors become all zeros), then
  averaged elementwise.

Predictions take the smallest index attaining the maximum score.  All
operations here are pure; evaluation order over the test split is the
dataset file order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError, UsageError
from .engine import project

ENSEMBLE_ID = "ensemble"


@dataclass
class ClassScores:
    scores: np.ndarray
    scorer_id: str
    instance_id: str

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 1 or self.scores.shape[0] < 1:
            raise DataError("scores must be a non-empty vector")
        if not np.all(np.isfinite(self.scores)):
            raise NumericalError(f"non-finite scores from {self.scorer_id!r}")


@dataclass(frozen=True)
class EnsembleConfig:
    scorer_ids: tuple
    scaler: str = "per_instance_standard"

    def __post_init__(self):
        object.__setattr__(self, "scorer_ids", tuple(self.scorer_ids))
        if not self.scorer_ids:
            raise UsageError("ensemble needs at least one scorer")
        if len(set(self.scorer_ids)) != len(self.scorer_ids):
            raise UsageError("duplicate scorer ids in ensemble config")
        if self.scaler != "per_instance_standard":
            raise UsageError(f"unknown scaler {self.scaler!r}")


def softmax(values):
    """Stable softmax (max subtraction) over a 1-D array."""
    values = np.asarray(values, dtype=np.float64)
    shifted = values - values.max()
    ex = np.exp(shifted)
    return ex / ex.sum()


def proto_scores(encoder, prototypes, h, instance_id=""):
    """Softmax over cosine similarities to every prototype."""
    v = project(encoder, h)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise NumericalError(
            f"projected query {instance_id!r} has zero norm")
    punit, pnorms = _prototype_units(prototypes)
    sims = punit @ (v / nv)
    return ClassScores(scores=softmax(sims), scorer_id="proto",
                       instance_id=instance_id)


def _prototype_units(prototypes):
    norms = np.linalg.norm(prototypes.vectors, axis=1)
    bad = np.nonzero(norms == 0.0)[0]
    if bad.size:
        raise NumericalError(f"zero-norm prototype for class {int(bad[0])}")
    return prototypes.vectors / norms[:, None], norms


def predict(class_scores):
    """Index of the maximum score; ties break to the lowest index."""
    return int(np.argmax(class_scores.scores))


def manual_scores(record, n_classes):
    """Mean label-word log-probability per class, from the record itself."""
    if record.label_word_logprobs is None:
        raise DataError("record carries no label-word log-probs",
                        record_id=record.id)
    if len(record.label_word_logprobs) != n_classes:
        raise DataError(
            f"label_word_logprobs has {len(record.label_word_logprobs)} "
            f"classes, expected {n_classes}", record_id=record.id)
    means = [float(np.mean(ws)) for ws in record.label_word_logprobs]
    return ClassScores(scores=np.asarray(means), scorer_id="manual",
                       instance_id=record.id)


def standard_scale(values):
    """Subtract mean, divide by population std; constant input -> zeros."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] < 2:
        raise UsageError("standard_scale needs a vector of length >= 2")
    centered = values - values.mean()
    std = np.sqrt(np.mean(centered * centered))
    if std == 0.0:
        return np.zeros_like(values)
    return centered / std


def ensemble_scores(per_scorer, config):
    """Elementwise mean of per-instance standard-scaled score vectors.

    ``per_scorer`` maps scorer_id -> ClassScores for one instance; every id
    in the config must be present and all vectors must share N.
    """
    vectors = []
    instance_id = None
    n = None
    for sid in config.scorer_ids:
        if sid not in per_scorer:
            raise UsageError(f"missing scorer output {sid!r}")
        cs = per_scorer[sid]
        if n is None:
            n = cs.scores.shape[0]
            instance_id = cs.instance_id
        elif cs.scores.shape[0] != n:
            raise DataError(f"scorer {sid!r} produced {cs.scores.shape[0]} "
                            f"scores, expected {n}")
        vectors.append(standard_scale(cs.scores))
    mean = np.mean(np.stack(vectors), axis=0)
    return ClassScores(scores=mean, scorer_id=ENSEMBLE_ID,
                       instance_id=instance_id)


class PrototypeScorer:
    """Scores records with a trained encoder + prototype set."""

    scorer_id = "proto"

    def __init__(self, encoder, prototypes):
        self.encoder = encoder
        self.prototypes = prototypes

    def score(self, record):
        return proto_scores(self.encoder, self.prototypes, record.embedding,
                            instance_id=record.id)


class ManualScorer:
    """Scores records from their exported label-word log-probs."""

    scorer_id = "manual"

    def __init__(self, n_classes):
        self.n_classes = n_classes

    def score(self, record):
        return manual_scores(record, self.n_classes)


@dataclass
class Prediction:
    instance_id: str
    gold: int
    predicted: int
    scores: dict  # scorer_id -> list of per-class scores


@dataclass
class EvaluationReport:
    accuracy: float
    per_class: list  # accuracy per class; None where a class has no test records
    n_test: int
    scorer_ids: tuple
    predictions: list


def evaluate(test_records, scorers, n_classes):
    """Accuracy of the (possibly ensembled) scorers over a test split.

    With one scorer its raw argmax decides; with several, the per-instance
    standard-scale ensemble decides.  Predictions come back in input order.
    """
    if not test_records:
        raise DataError("test split is empty")
    if not scorers:
        raise UsageError("no scorers configured")
    ids = tuple(s.scorer_id for s in scorers)
    config = EnsembleConfig(scorer_ids=ids)
    correct = 0
    class_total = np.zeros(n_classes, dtype=np.int64)
    class_correct = np.zeros(n_classes, dtype=np.int64)
    predictions = []
    for rec in test_records:
        if rec.label is None:
            raise DataError("test record has no gold label", record_id=rec.id)
        per_scorer = {s.scorer_id: s.score(rec) for s in scorers}
        if len(scorers) == 1:
            decided = per_scorer[ids[0]]
        else:
            decided = ensemble_scores(per_scorer, config)
        pred = predict(decided)
        scores_out = {sid: per_scorer[sid].scores.tolist() for sid in ids}
        if len(scorers) > 1:
            scores_out[ENSEMBLE_ID] = decided.scores.tolist()
        predictions.append(Prediction(instance_id=rec.id, gold=rec.label,
                                      predicted=pred, scores=scores_out))
        class_total[rec.label] += 1
        if pred == rec.label:
            correct += 1
            class_correct[rec.label] += 1
    per_class = [
        (class_correct[c] / class_total[c]) if class_total[c] else None
        for c in range(n_classes)
    ]
    out_ids = ids if len(scorers) == 1 else ids + (ENSEMBLE_ID,)
    return EvaluationReport(accuracy=correct / len(test_records),
                            per_class=per_class, n_test=len(test_records),
                            scorer_ids=out_ids, predictions=predictions)
