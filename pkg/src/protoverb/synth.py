"""Synthetic embedding datasets built from Gaussian clusters.

Every dataset produced here is a deterministic function of its arguments:
one seeded stream drives class means, record noise, per-word log
probabilities, and probe tokens, drawn in that fixed order.
"""

from __future__ import annotations

import math

from .errors import UsageError
from .rng import DeterministicRng
from .store import (
    DatasetHeader,
    EmbeddingDataset,
    EmbeddingRecord,
    write_dataset,
)

import numpy as np

DEFAULT_CLASS_NAMES = ("World", "Sports", "Business", "Tech")

# words per class cycle through this so manual-scorer inputs are ragged,
# matching real verbalizers where classes rarely share a word count
_WORDS_PER_CLASS_CYCLE = (1, 3, 2, 4)


def _class_names(n_classes):
    if n_classes <= len(DEFAULT_CLASS_NAMES):
        return list(DEFAULT_CLASS_NAMES[:n_classes])
    return [f"class_{i}" for i in range(n_classes)]


def _class_means(rng, n_classes, dim, separation, orthogonal):
    """Cluster centers with pairwise distance `separation` (in noise sigmas).

    Orthogonal placement puts class c at (separation / sqrt(2)) * e_c, which
    makes the distance exact; random placement scales unit directions by
    `separation` and the distance only approximate.
    """
    if orthogonal:
        if dim < n_classes:
            raise UsageError(
                f"orthogonal means need dim >= n_classes, got dim {dim} for "
                f"{n_classes} classes"
            )
        means = np.zeros((n_classes, dim), dtype=np.float64)
        scale = separation / math.sqrt(2.0)
        for c in range(n_classes):
            means[c, c] = scale
        return means
    directions = rng.normals((n_classes, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    return separation * directions / norms


def _word_logprobs(rng, point, means, kappa, n_words_by_class):
    """Per-class label-word log probabilities for one instance.

    Scores come from a softmax over scaled cosine affinities to the class
    means, so the manual route is informative but noisier than the
    geometry itself. Each word takes the class log probability minus a
    nonnegative jitter, keeping every value <= 0.
    """
    unit = point / np.linalg.norm(point)
    mean_units = means / np.linalg.norm(means, axis=1, keepdims=True)
    logits = kappa * (mean_units @ unit)
    logits -= logits.max()
    logprobs = logits - math.log(np.sum(np.exp(logits)))
    out = []
    for c, n_words in enumerate(n_words_by_class):
        jitter = rng.uniforms((n_words,), 0.0, 0.5)
        out.append([float(logprobs[c] - j) for j in jitter])
    return out


def make_cluster_dataset(
    n_classes=4,
    dim=16,
    train_per_class=32,
    test_per_class=50,
    separation=4.0,
    seed=0,
    orthogonal_means=True,
    with_logprobs=True,
    kappa=3.0,
    vocab_words_per_class=3,
    vocab_noise=0.35,
    n_filler_tokens=4,
    nuisance_dims=0,
    nuisance_scale=4.0,
    template_id="synthetic-cluster",
    model_id="gaussian-clusters-v1",
):
    """Build an embedding dataset of unit-variance Gaussian clusters.

    `separation` is the inter-mean distance measured in noise standard
    deviations. When `nuisance_dims` > 0, class means stay out of the last
    `nuisance_dims` coordinates and noise there is inflated by
    `nuisance_scale`: a class-independent high-variance subspace that a
    learned projection can suppress but a random one cannot. Besides
    train and test records the dataset carries probe records:
    `vocab_words_per_class` tokens drawn near each mean (noise scaled by
    `vocab_noise`) plus `n_filler_tokens` tokens from the origin, so
    vocabulary search has both signal and distractors.
    """
    if n_classes < 2:
        raise UsageError(f"need at least 2 classes, got {n_classes}")
    if dim < 1:
        raise UsageError(f"dim must be positive, got {dim}")
    if train_per_class < 1 or test_per_class < 0:
        raise UsageError("per-class record counts out of range")
    if separation < 0:
        raise UsageError(f"separation must be nonnegative, got {separation}")
    if not 0 <= nuisance_dims < dim:
        raise UsageError(
            f"nuisance_dims must be in [0, {dim - 1}], got {nuisance_dims}"
        )
    if nuisance_scale < 0:
        raise UsageError(f"nuisance_scale must be nonnegative, got {nuisance_scale}")

    rng = DeterministicRng(seed)
    names = _class_names(n_classes)
    signal_dim = dim - nuisance_dims
    means_signal = _class_means(rng, n_classes, signal_dim, separation, orthogonal_means)
    means = np.zeros((n_classes, dim), dtype=np.float64)
    means[:, :signal_dim] = means_signal

    def noise(scale=1.0):
        z = rng.normals((dim,))
        if nuisance_dims:
            z[signal_dim:] *= nuisance_scale
        return scale * z
    n_words_by_class = [
        _WORDS_PER_CLASS_CYCLE[c % len(_WORDS_PER_CLASS_CYCLE)]
        for c in range(n_classes)
    ]

    header = DatasetHeader(
        dim=dim, class_names=names, template_id=template_id, model_id=model_id
    )
    records = []
    for split, per_class in (("train", train_per_class), ("test", test_per_class)):
        for c in range(n_classes):
            for i in range(per_class):
                point = means[c] + noise()
                logprobs = None
                if with_logprobs:
                    logprobs = _word_logprobs(
                        rng, point, means, kappa, n_words_by_class
                    )
                records.append(
                    EmbeddingRecord(
                        id=f"{split}-{names[c].lower()}-{i:04d}",
                        split=split,
                        embedding=point,
                        label=c,
                        label_word_logprobs=logprobs,
                    )
                )
    for c in range(n_classes):
        for w in range(vocab_words_per_class):
            point = means[c] + noise(vocab_noise)
            records.append(
                EmbeddingRecord(
                    id=f"probe-{names[c].lower()}-{w}",
                    split="vocab_probe",
                    embedding=point,
                    token=f"{names[c].lower()}_w{w}",
                )
            )
    for f in range(n_filler_tokens):
        point = noise()
        records.append(
            EmbeddingRecord(
                id=f"probe-filler-{f}",
                split="vocab_probe",
                embedding=point,
                token=f"filler_{f}",
            )
        )
    return EmbeddingDataset(header, records)


def write_cluster_dataset(path, **kwargs):
    """Generate a cluster dataset and write it to `path`; returns the dataset."""
    dataset = make_cluster_dataset(**kwargs)
    write_dataset(dataset, path)
    return dataset
