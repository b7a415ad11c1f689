"""Scorers, the per-instance scaler, ensembling, and evaluation."""

import math
import random

import numpy as np
import pytest

import reference

from protoverb.engine import ProjectionEncoder, PrototypeSet
from protoverb.errors import DataError, NumericalError, UsageError
from protoverb.scoring import (
    ClassScores,
    EnsembleConfig,
    ManualScorer,
    PrototypeScorer,
    ensemble_scores,
    evaluate,
    manual_scores,
    predict,
    proto_scores,
    softmax,
    standard_scale,
)
from protoverb.store import EmbeddingRecord


IDENTITY_3 = ProjectionEncoder(np.eye(3))
AXES_3 = PrototypeSet(np.eye(3))


def test_proto_scores_are_probabilities():
    rng = random.Random(31)
    for _ in range(50):
        h = [rng.uniform(-2, 2) for _ in range(3)]
        if all(v == 0 for v in h):
            continue
        cs = proto_scores(IDENTITY_3, AXES_3, h, instance_id="q")
        assert cs.scores.shape == (3,)
        assert np.all(cs.scores > 0)
        assert float(cs.scores.sum()) == pytest.approx(1.0, abs=1e-9)


def test_proto_scores_rescale_invariant():
    h = [0.5, -1.0, 2.0]
    base = proto_scores(IDENTITY_3, AXES_3, h).scores
    for factor in (1e-6, 3.0, 1e6):
        scaled = proto_scores(IDENTITY_3, AXES_3,
                              [v * factor for v in h]).scores
        assert np.allclose(scaled, base, atol=1e-12)


def test_proto_scores_prefer_nearest_prototype():
    cs = proto_scores(IDENTITY_3, AXES_3, [0.1, 0.9, 0.2])
    assert predict(cs) == 1


def test_proto_scores_zero_projection():
    # nonzero raw embedding that the encoder annihilates
    enc = ProjectionEncoder(np.array([[1.0, -1.0, 0.0]]))
    protos = PrototypeSet(np.array([[1.0], [-1.0]]))
    with pytest.raises(NumericalError, match="zero norm"):
        proto_scores(enc, protos, [2.0, 2.0, 5.0], instance_id="q")


def test_proto_scores_zero_norm_prototype():
    protos = PrototypeSet(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(NumericalError, match="class 1"):
        proto_scores(ProjectionEncoder(np.eye(2)), protos, [1.0, 1.0])


def test_predict_tie_breaks_to_lowest_index():
    assert predict(ClassScores([0.4, 0.4, 0.2], "proto", "q")) == 0
    assert predict(ClassScores([0.1, 0.3, 0.3], "proto", "q")) == 1


def test_class_scores_reject_non_finite():
    with pytest.raises(NumericalError):
        ClassScores([0.5, float("nan")], "proto", "q")


def test_manual_scores_are_per_class_means():
    rec = EmbeddingRecord("r", "test", [0.0], label=0,
                          label_word_logprobs=[[-1.0, -3.0], [-0.5]])
    cs = manual_scores(rec, 2)
    assert cs.scorer_id == "manual"
    assert np.allclose(cs.scores, [-2.0, -0.5])


def test_manual_scores_errors():
    bare = EmbeddingRecord("r", "test", [0.0], label=0)
    with pytest.raises(DataError, match="no label-word"):
        manual_scores(bare, 2)
    rec = EmbeddingRecord("r", "test", [0.0], label=0,
                          label_word_logprobs=[[-1.0]])
    with pytest.raises(DataError, match="expected 3"):
        manual_scores(rec, 3)


# --- scaler + ensemble -------------------------------------------------


def test_standard_scale_worked_value():
    got = standard_scale([2.0, 4.0, 6.0])
    assert np.allclose(got, [-1.224745, 0.0, 1.224745], atol=1e-6)
    assert got.mean() == pytest.approx(0.0, abs=1e-12)
    assert np.sqrt(np.mean(got * got)) == pytest.approx(1.0, abs=1e-12)


def test_standard_scale_matches_reference():
    rng = random.Random(8)
    for _ in range(100):
        vals = [rng.uniform(-5, 5) for _ in range(rng.randint(2, 6))]
        assert np.allclose(standard_scale(vals),
                           reference.naive_standard_scale(vals), atol=1e-12)


def test_standard_scale_constant_input_is_zeros():
    assert np.array_equal(standard_scale([3.0, 3.0, 3.0]), np.zeros(3))


def test_standard_scale_needs_length_two():
    with pytest.raises(UsageError):
        standard_scale([1.0])
    with pytest.raises(UsageError):
        standard_scale([])


def test_ensemble_single_scorer_is_identity_decision():
    # a single scorer's ensemble output is its scaled vector, whose argmax
    # matches the raw argmax
    rng = random.Random(12)
    cfg = EnsembleConfig(scorer_ids=("proto",))
    for _ in range(100):
        raw = [rng.uniform(-4, 4) for _ in range(rng.randint(2, 6))]
        cs = ClassScores(raw, "proto", "q")
        out = ensemble_scores({"proto": cs}, cfg)
        assert out.scorer_id == "ensemble"
        assert predict(out) == predict(cs)
        assert np.allclose(out.scores, standard_scale(raw), atol=1e-12)


def test_ensemble_affine_invariance():
    # scaling/shifting any member's scores leaves the ensemble unchanged
    rng = random.Random(13)
    cfg = EnsembleConfig(scorer_ids=("proto", "manual"))
    for _ in range(100):
        n = rng.randint(2, 5)
        a = [rng.uniform(-4, 4) for _ in range(n)]
        b = [rng.uniform(-4, 4) for _ in range(n)]
        base = ensemble_scores(
            {"proto": ClassScores(a, "proto", "q"),
             "manual": ClassScores(b, "manual", "q")}, cfg).scores
        scale = rng.uniform(0.1, 9.0)
        shift = rng.uniform(-20, 20)
        moved = ensemble_scores(
            {"proto": ClassScores([scale * v + shift for v in a], "proto", "q"),
             "manual": ClassScores(b, "manual", "q")}, cfg).scores
        assert np.allclose(moved, base, atol=1e-9)


def test_ensemble_combines_both_members():
    cfg = EnsembleConfig(scorer_ids=("proto", "manual"))
    a = ClassScores([1.0, 0.0], "proto", "q")
    b = ClassScores([0.0, 1.0], "manual", "q")
    out = ensemble_scores({"proto": a, "manual": b}, cfg)
    assert np.allclose(out.scores, [0.0, 0.0], atol=1e-12)


def test_ensemble_errors():
    cfg = EnsembleConfig(scorer_ids=("proto", "manual"))
    a = ClassScores([1.0, 0.0], "proto", "q")
    with pytest.raises(UsageError, match="missing scorer"):
        ensemble_scores({"proto": a}, cfg)
    short = ClassScores([1.0, 0.0, 2.0], "manual", "q")
    with pytest.raises(DataError, match="expected 2"):
        ensemble_scores({"proto": a, "manual": short}, cfg)
    with pytest.raises(UsageError):
        EnsembleConfig(scorer_ids=())
    with pytest.raises(UsageError):
        EnsembleConfig(scorer_ids=("proto", "proto"))
    with pytest.raises(UsageError):
        EnsembleConfig(scorer_ids=("proto",), scaler="minmax")


def test_softmax_matches_reference():
    rng = random.Random(77)
    for _ in range(50):
        vals = [rng.uniform(-30, 30) for _ in range(rng.randint(1, 6))]
        assert np.allclose(softmax(vals), reference.naive_softmax(vals),
                           atol=1e-12)


# --- evaluate ----------------------------------------------------------


def axis_record(i, cls, n_classes=3, good=True, logprobs=None):
    emb = [0.0] * n_classes
    emb[cls] = 1.0 if good else -1.0
    return EmbeddingRecord(f"q{i}", "test", emb, label=cls,
                           label_word_logprobs=logprobs)


def test_evaluate_single_scorer():
    records = [axis_record(0, 0), axis_record(1, 1), axis_record(2, 2),
               axis_record(3, 0, good=False)]
    report = evaluate(records, [PrototypeScorer(IDENTITY_3, AXES_3)], 3)
    assert report.accuracy == 0.75
    assert report.n_test == 4
    assert report.scorer_ids == ("proto",)
    assert report.per_class == [0.5, 1.0, 1.0]
    assert [p.instance_id for p in report.predictions] == \
        ["q0", "q1", "q2", "q3"]
    assert report.predictions[3].gold == 0
    assert report.predictions[3].predicted != 0
    assert set(report.predictions[0].scores) == {"proto"}


def test_evaluate_per_class_none_for_absent_class():
    records = [axis_record(0, 0), axis_record(1, 1)]
    report = evaluate(records, [PrototypeScorer(IDENTITY_3, AXES_3)], 3)
    assert report.per_class[2] is None


def test_evaluate_ensemble_appends_scorer_id():
    # manual scorer disagrees on purpose; the ensemble decides
    records = [axis_record(0, 0, logprobs=[[-0.1], [-5.0], [-5.0]]),
               axis_record(1, 1, logprobs=[[-5.0], [-0.1], [-5.0]])]
    scorers = [PrototypeScorer(IDENTITY_3, AXES_3), ManualScorer(3)]
    report = evaluate(records, scorers, 3)
    assert report.scorer_ids == ("proto", "manual", "ensemble")
    assert report.accuracy == 1.0
    for p in report.predictions:
        assert set(p.scores) == {"proto", "manual", "ensemble"}


def test_evaluate_ensemble_can_fix_proto_mistake():
    # proto is mildly wrong, manual is confidently right
    rec = EmbeddingRecord("q", "test", [0.9, 1.0, 0.0], label=0,
                          label_word_logprobs=[[-0.1], [-9.0], [-9.0]])
    scorers = [PrototypeScorer(IDENTITY_3, AXES_3), ManualScorer(3)]
    solo = evaluate([rec], [scorers[0]], 3)
    both = evaluate([rec], scorers, 3)
    assert solo.accuracy == 0.0
    assert both.accuracy == 1.0


def test_evaluate_errors():
    with pytest.raises(DataError, match="empty"):
        evaluate([], [PrototypeScorer(IDENTITY_3, AXES_3)], 3)
    with pytest.raises(UsageError, match="no scorers"):
        evaluate([axis_record(0, 0)], [], 3)
    unlabeled = EmbeddingRecord("p", "vocab_probe", [1.0, 0.0, 0.0],
                                token="x")
    with pytest.raises(DataError, match="gold label"):
        evaluate([unlabeled], [PrototypeScorer(IDENTITY_3, AXES_3)], 3)
