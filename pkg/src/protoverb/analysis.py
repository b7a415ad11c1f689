"""Experiment sweeps over episodes: ablations, label noise, vocabulary probes.

All sweeps are driven by a single `ExperimentGrid` so that a cell is
identified the same way everywhere: (k_shot, seed, loss_variant, m). The
training seed, the episode sampling seed, and the label-corruption seed
of a cell are all the cell's seed, which pairs clean and corrupted runs
for drop computations.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import statistics

from .engine import LOSS_VARIANTS, TrainConfig, cosine_similarity, project, train
from .errors import DataError, NumericalError, UsageError
from .scoring import PrototypeScorer, evaluate, softmax
from .store import EmbeddingDataset, inject_noise, sample_episode

import numpy as np


@dataclasses.dataclass(frozen=True)
class ExperimentGrid:
    """Cartesian cell layout for sweeps.

    noise_levels are counts of corrupted support labels; 0 is the clean
    baseline and is always run even when omitted from the list.
    """

    k_values: tuple = (8,)
    seeds: tuple = tuple(range(20))
    loss_variants: tuple = ("full",)
    noise_levels: tuple = (0,)

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "loss_variants", tuple(self.loss_variants))
        object.__setattr__(
            self, "noise_levels", tuple(int(m) for m in self.noise_levels)
        )
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise UsageError(f"k_values must be positive, got {self.k_values}")
        if not self.seeds:
            raise UsageError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise UsageError("seeds must be distinct")
        if not self.loss_variants:
            raise UsageError("loss_variants must be non-empty")
        for variant in self.loss_variants:
            if variant not in LOSS_VARIANTS:
                raise UsageError(
                    f"unknown loss variant {variant!r}; expected one of "
                    f"{', '.join(LOSS_VARIANTS)}"
                )
        if any(m < 0 for m in self.noise_levels):
            raise UsageError(f"noise levels must be >= 0, got {self.noise_levels}")

    def to_json_obj(self):
        return {
            "k_values": list(self.k_values),
            "seeds": list(self.seeds),
            "loss_variants": list(self.loss_variants),
            "noise_levels": list(self.noise_levels),
        }


@dataclasses.dataclass(frozen=True)
class CellResult:
    """One trained and evaluated episode."""

    k_shot: int
    seed: int
    loss_variant: str
    m: int
    accuracy: float
    n_test: int

    def to_json_obj(self):
        return dataclasses.asdict(self)


def run_cell(dataset, k_shot, seed, loss_variant, m, base_config):
    """Train one episode cell and evaluate the prototype route on the test split.

    The cell seed drives episode sampling, label corruption, and
    parameter initialization; two calls with equal arguments produce
    identical results.
    """
    n_classes = dataset.header.n_classes
    episode = sample_episode(dataset, n_classes, k_shot, seed)
    if m > 0:
        episode = inject_noise(episode, m, corruption_seed=seed)
    config = dataclasses.replace(base_config, seed=seed, loss_variant=loss_variant)
    result = train(episode, dataset.header, config)
    scorer = PrototypeScorer(result.encoder, result.prototypes)
    report = evaluate(dataset.by_split("test"), [scorer], n_classes)
    return CellResult(
        k_shot=k_shot,
        seed=seed,
        loss_variant=loss_variant,
        m=m,
        accuracy=report.accuracy,
        n_test=report.n_test,
    )


def _mean_std(values):
    mean = statistics.fmean(values)
    std = statistics.pstdev(values)  # population: a single seed reports 0
    return mean, std


@dataclasses.dataclass(frozen=True)
class SweepReport:
    """Long-format cell results plus per-(k, variant, m) aggregates."""

    grid: ExperimentGrid
    cells: tuple
    template_id: str
    model_id: str

    def aggregate(self):
        """Mean and std of accuracy grouped by (k_shot, loss_variant, m)."""
        groups = {}
        for cell in self.cells:
            groups.setdefault((cell.k_shot, cell.loss_variant, cell.m), []).append(
                cell.accuracy
            )
        out = []
        for key in sorted(groups, key=lambda t: (t[0], t[1], t[2])):
            mean, std = _mean_std(groups[key])
            out.append(
                {
                    "k_shot": key[0],
                    "loss_variant": key[1],
                    "m": key[2],
                    "mean_accuracy": mean,
                    "std_accuracy": std,
                    "n_seeds": len(groups[key]),
                }
            )
        return out

    def accuracy_drops(self):
        """Mean accuracy drop from the m=0 baseline, per (k_shot, variant, m).

        Pairs runs by seed before averaging; requires the baseline cell
        for every (k_shot, variant, seed) present.
        """
        by_key = {
            (c.k_shot, c.loss_variant, c.seed, c.m): c.accuracy for c in self.cells
        }
        levels = sorted({c.m for c in self.cells})
        out = []
        for k in self.grid.k_values:
            for variant in self.grid.loss_variants:
                for m in levels:
                    drops = []
                    for seed in self.grid.seeds:
                        if (k, variant, seed, m) not in by_key:
                            continue
                        base = by_key.get((k, variant, seed, 0))
                        if base is None:
                            raise DataError(
                                f"missing clean baseline for k={k} seed={seed} "
                                f"variant={variant}"
                            )
                        drops.append(base - by_key[(k, variant, seed, m)])
                    if not drops:
                        continue
                    mean, std = _mean_std(drops)
                    out.append(
                        {
                            "k_shot": k,
                            "loss_variant": variant,
                            "m": m,
                            "mean_drop": mean,
                            "std_drop": std,
                            "n_seeds": len(drops),
                        }
                    )
        return out

    def to_json_obj(self):
        return {
            "template_id": self.template_id,
            "model_id": self.model_id,
            "grid": self.grid.to_json_obj(),
            "cells": [c.to_json_obj() for c in self.cells],
            "aggregate": self.aggregate(),
            "accuracy_drops": self.accuracy_drops(),
        }

    def to_long_csv(self):
        """Long-format rows (template, k, seed, variant, m, accuracy)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["template_id", "k_shot", "seed", "loss_variant", "m", "accuracy"])
        for cell in self.cells:
            writer.writerow(
                [
                    self.template_id,
                    cell.k_shot,
                    cell.seed,
                    cell.loss_variant,
                    cell.m,
                    repr(cell.accuracy),
                ]
            )
        return buf.getvalue()


def run_sweep(dataset, grid, base_config=None, cell_runner=run_cell):
    """Run every grid cell serially in deterministic order.

    Order is (k, seed, variant, m) ascending with m=0 forced into the
    level set. `cell_runner` is injectable so orchestrators can reuse the
    layout while caching cells.
    """
    if base_config is None:
        base_config = TrainConfig()
    levels = tuple(sorted(set(grid.noise_levels) | {0}))
    cells = []
    for k in grid.k_values:
        for seed in grid.seeds:
            for variant in grid.loss_variants:
                for m in levels:
                    cells.append(cell_runner(dataset, k, seed, variant, m, base_config))
    return SweepReport(
        grid=grid,
        cells=tuple(cells),
        template_id=dataset.header.template_id,
        model_id=dataset.header.model_id,
    )


def run_ablation(dataset, grid, base_config=None):
    """Sweep loss variants on clean episodes."""
    clean = dataclasses.replace(grid, noise_levels=(0,))
    return run_sweep(dataset, clean, base_config)


def run_noise_sweep(dataset, grid, base_config=None):
    """Sweep corrupted-support levels; returns a report with drop tables."""
    return run_sweep(dataset, grid, base_config)


@dataclasses.dataclass(frozen=True)
class ProbeReport:
    """Per class, the probe tokens nearest its prototype."""

    class_names: tuple
    top_k: int
    ranked: tuple  # per class: tuple of (token, score), best first

    def to_json_obj(self):
        return {
            "top_k": self.top_k,
            "classes": [
                {
                    "class_index": c,
                    "class_name": self.class_names[c],
                    "tokens": [
                        {"rank": r, "token": token, "score": score}
                        for r, (token, score) in enumerate(self.ranked[c])
                    ],
                }
                for c in range(len(self.class_names))
            ],
        }


def probe_vocabulary(encoder, prototypes, class_names, probe_records, top_k=10):
    """Rank probe tokens by cosine similarity to each learned prototype.

    Ties break toward the lexicographically smaller token so rankings are
    reproducible across platforms.
    """
    if top_k < 1:
        raise UsageError(f"top_k must be positive, got {top_k}")
    if len(class_names) != prototypes.n_classes:
        raise DataError(
            f"{len(class_names)} class names for {prototypes.n_classes} prototypes"
        )
    probes = list(probe_records)
    if not probes:
        raise DataError("no vocab_probe records to rank")
    proto = prototypes.vectors
    norms = np.linalg.norm(proto, axis=1)
    if np.any(norms == 0.0):
        raise NumericalError("zero-norm prototype")
    units = proto / norms[:, None]
    scored = []
    for record in probes:
        if record.split != "vocab_probe":
            raise DataError(
                f"record '{record.id}': expected split vocab_probe, "
                f"got {record.split}"
            )
        v = project(encoder, np.asarray(record.embedding, dtype=np.float64))
        nv = np.linalg.norm(v)
        if nv == 0.0:
            raise NumericalError(
                f"record '{record.id}': zero-norm projection"
            )
        sims = units @ (v / nv)
        scored.append((record.token, np.clip(sims, -1.0, 1.0)))
    ranked = []
    for c in range(proto.shape[0]):
        order = sorted(scored, key=lambda ts: (-ts[1][c], ts[0]))
        ranked.append(tuple((token, float(sims[c])) for token, sims in order[:top_k]))
    return ProbeReport(
        class_names=tuple(class_names), top_k=top_k, ranked=tuple(ranked)
    )


@dataclasses.dataclass(frozen=True)
class SimilarityReport:
    """Row-stochastic map from learned prototypes to manual label-word centers."""

    class_names: tuple
    matrix: tuple  # rows: prototypes; columns: manual word-group centers

    def to_json_obj(self):
        return {
            "class_names": list(self.class_names),
            "matrix": [list(row) for row in self.matrix],
        }


def proto_manual_similarity(encoder, prototypes, class_names, class_word_records):
    """Softmax-normalized cosine similarity between prototypes and word centers.

    `class_word_records` holds, per class, the probe records of that
    class's manual label words. Each row of the result softmaxes the
    similarities of one prototype over all classes' word centers, so rows
    sum to one.
    """
    n_classes = prototypes.n_classes
    if len(class_names) != n_classes:
        raise DataError(
            f"{len(class_names)} class names for {n_classes} prototypes"
        )
    if len(class_word_records) != n_classes:
        raise DataError(
            f"expected word records for {n_classes} classes, got "
            f"{len(class_word_records)}"
        )
    centers = []
    for c, records in enumerate(class_word_records):
        if not records:
            raise DataError(f"class '{class_names[c]}': no label-word records")
        projected = [
            project(encoder, np.asarray(r.embedding, dtype=np.float64))
            for r in records
        ]
        center = np.mean(projected, axis=0)
        if np.linalg.norm(center) == 0.0:
            raise NumericalError(
                f"class '{class_names[c]}': zero-norm word center"
            )
        centers.append(center)
    rows = []
    for i in range(n_classes):
        sims = np.array(
            [
                cosine_similarity(prototypes.vectors[i], centers[j])
                for j in range(n_classes)
            ]
        )
        rows.append(tuple(float(x) for x in softmax(sims)))
    return SimilarityReport(
        class_names=tuple(class_names), matrix=tuple(rows)
    )


def gather_class_word_records(dataset, words_by_class):
    """Resolve per-class word lists to vocab_probe records by token.

    `words_by_class` maps class name to a list of token strings; every
    token must exist exactly once in the dataset's probe split.
    """
    by_token = {}
    for record in dataset.by_split("vocab_probe"):
        if record.token in by_token:
            raise DataError(f"duplicate probe token {record.token!r}")
        by_token[record.token] = record
    out = []
    for name in dataset.header.class_names:
        if name not in words_by_class:
            raise DataError(f"no label words given for class '{name}'")
        words = words_by_class[name]
        if not words:
            raise DataError(f"empty label-word list for class '{name}'")
        records = []
        for word in words:
            if word not in by_token:
                raise DataError(
                    f"label word {word!r} for class '{name}' has no probe record"
                )
            records.append(by_token[word])
        out.append(records)
    extra = set(words_by_class) - set(dataset.header.class_names)
    if extra:
        raise DataError(
            f"label words given for unknown classes: {sorted(extra)}"
        )
    return out


def json_dump(obj, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
