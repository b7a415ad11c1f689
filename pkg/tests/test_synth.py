"""Synthetic cluster dataset generator."""

import numpy as np
import pytest

from protoverb.errors import UsageError
from protoverb.store import load_dataset
from protoverb.synth import make_cluster_dataset, write_cluster_dataset


def test_deterministic_in_seed():
    a = make_cluster_dataset(seed=5, train_per_class=4, test_per_class=2)
    b = make_cluster_dataset(seed=5, train_per_class=4, test_per_class=2)
    c = make_cluster_dataset(seed=6, train_per_class=4, test_per_class=2)
    assert a == b
    assert a != c


def test_counts_and_splits():
    ds = make_cluster_dataset(n_classes=3, dim=8, train_per_class=5,
                              test_per_class=4, vocab_words_per_class=2,
                              n_filler_tokens=3)
    assert len(ds.by_split("train")) == 15
    assert len(ds.by_split("test")) == 12
    assert len(ds.by_split("vocab_probe")) == 3 * 2 + 3
    assert ds.header.class_names == ("World", "Sports", "Business")
    for c, group in enumerate(ds.train_by_class()):
        assert len(group) == 5
        assert all(r.label == c for r in group)


def test_generic_class_names_beyond_defaults():
    ds = make_cluster_dataset(n_classes=6, dim=8, train_per_class=1,
                              test_per_class=0, with_logprobs=False)
    assert ds.header.class_names == tuple(f"class_{i}" for i in range(6))


def test_probe_tokens_and_fillers():
    ds = make_cluster_dataset(n_classes=2, dim=4, train_per_class=1,
                              test_per_class=0, vocab_words_per_class=2,
                              n_filler_tokens=1)
    tokens = sorted(r.token for r in ds.by_split("vocab_probe"))
    assert tokens == ["filler_0", "sports_w0", "sports_w1",
                      "world_w0", "world_w1"]


def test_logprobs_shape_and_sign():
    ds = make_cluster_dataset(n_classes=4, train_per_class=3, test_per_class=2)
    word_counts = (1, 3, 2, 4)
    for rec in ds.by_split("train") + ds.by_split("test"):
        lwl = rec.label_word_logprobs
        assert len(lwl) == 4
        for c, ws in enumerate(lwl):
            assert len(ws) == word_counts[c]
            assert all(v <= 0.0 for v in ws)
    for rec in ds.by_split("vocab_probe"):
        assert rec.label_word_logprobs is None


def test_logprobs_track_geometry():
    # on a well-separated dataset the own-class word score should usually
    # be the largest
    ds = make_cluster_dataset(separation=8.0, train_per_class=20,
                              test_per_class=0, seed=1)
    hits = sum(
        1 for rec in ds.by_split("train")
        if max(range(4), key=lambda c: max(rec.label_word_logprobs[c]))
        == rec.label)
    assert hits >= 70  # of 80


def test_without_logprobs():
    ds = make_cluster_dataset(with_logprobs=False, train_per_class=2,
                              test_per_class=1)
    for rec in ds.by_split("train"):
        assert rec.label_word_logprobs is None


def test_orthogonal_means_give_exact_separation():
    sep = 6.0
    ds = make_cluster_dataset(separation=sep, train_per_class=200,
                              test_per_class=0, dim=8, seed=3,
                              with_logprobs=False)
    groups = ds.train_by_class()
    means = [np.mean([r.embedding for r in g], axis=0) for g in groups]
    for i in range(4):
        for j in range(i + 1, 4):
            d = float(np.linalg.norm(means[i] - means[j]))
            assert d == pytest.approx(sep, abs=0.5)


def test_random_means_are_separation_radius():
    ds = make_cluster_dataset(separation=5.0, orthogonal_means=False,
                              train_per_class=300, test_per_class=0, dim=6,
                              seed=4, with_logprobs=False)
    for g in ds.train_by_class():
        center = np.mean([r.embedding for r in g], axis=0)
        assert float(np.linalg.norm(center)) == pytest.approx(5.0, abs=0.6)


def test_nuisance_subspace_is_inflated_and_unsignaled():
    q, scale = 6, 5.0
    ds = make_cluster_dataset(dim=16, nuisance_dims=q, nuisance_scale=scale,
                              train_per_class=300, test_per_class=0,
                              separation=6.0, seed=2, with_logprobs=False)
    rows = np.stack([r.embedding for r in ds.by_split("train")])
    labels = np.array([r.label for r in ds.by_split("train")])
    head_std = rows[:, : 16 - q].std()
    tail = rows[:, 16 - q:]
    assert float(tail.std()) == pytest.approx(scale, rel=0.15)
    assert float(tail.std()) > 3.0 * float(head_std)
    # class means carry no signal in the nuisance coordinates
    for c in range(4):
        assert np.all(np.abs(tail[labels == c].mean(axis=0)) < 1.5)


def test_write_helper_roundtrips(tmp_path):
    path = tmp_path / "synth.ndjson"
    ds = write_cluster_dataset(path, n_classes=2, dim=4, train_per_class=3,
                               test_per_class=2, seed=9)
    assert load_dataset(path) == ds


@pytest.mark.parametrize("kwargs", [
    {"n_classes": 1},
    {"dim": 0},
    {"train_per_class": 0},
    {"test_per_class": -1},
    {"separation": -0.5},
    {"nuisance_dims": 16},
    {"nuisance_dims": -1},
    {"nuisance_scale": -2.0},
    {"n_classes": 5, "dim": 4},                       # orthogonal needs room
    {"n_classes": 5, "dim": 8, "nuisance_dims": 5},   # signal dim too small
])
def test_argument_validation(kwargs):
    with pytest.raises(UsageError):
        make_cluster_dataset(**kwargs)
