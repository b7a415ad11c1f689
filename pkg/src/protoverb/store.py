"""Embedding datasets: NDJSON loading, validation, episode sampling, noise.

File format
-----------
Line 1 is the header object::

    {"format_version": 1, "dim": 8, "class_names": ["World", ...],
     "template_id": "t1", "model_id": "my-mlm"}

Every following line is one record::

    {"id": "train-0", "split": "train", "label": 2, "embedding": [...],
     "label_word_logprobs": [[-1.2], [-0.8, -2.0], ...]}   # optional field
    {"id": "vp-0", "split": "vocab_probe", "token": "ball", "embedding": [...]}

Embeddings are 32-bit floats written with shortest round-trip decimal
formatting, so ``load_dataset(write_dataset(d))`` reproduces every value
bit-exactly.  Files whose name ends in ``.gz`` are gzip-compressed.

Datasets are immutable after load and safe to share across threads;
sampling and corruption are pure functions of their arguments.
"""

import gzip
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError
from .rng import DeterministicRng

SPLITS = ("train", "test", "vocab_probe")
FORMAT_VERSION = 1


def _f32_token(x):
    """Shortest decimal that parses back to the same float32."""
    return float(str(np.float32(x)))


@dataclass(frozen=True)
class DatasetHeader:
    dim: int
    class_names: tuple
    template_id: str
    model_id: str
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.format_version != FORMAT_VERSION:
            raise DataError(f"unsupported format_version {self.format_version}")
        if self.dim < 1:
            raise DataError(f"dim must be >= 1, got {self.dim}")
        if not self.class_names:
            raise DataError("class_names must be non-empty")
        if len(set(self.class_names)) != len(self.class_names):
            raise DataError("class_names contains duplicates")

    @property
    def n_classes(self):
        return len(self.class_names)

    def to_json_obj(self):
        return {
            "format_version": self.format_version,
            "dim": self.dim,
            "class_names": list(self.class_names),
            "template_id": self.template_id,
            "model_id": self.model_id,
        }


class EmbeddingRecord:
    """One exported mask-position embedding with metadata.

    ``embedding`` is a read-only float32 array of length ``dim``.
    ``label_word_logprobs``, when present, holds one tuple of log-probs per
    class (the per-label-word mask scores for this instance).
    """

    __slots__ = ("id", "split", "label", "embedding", "token", "label_word_logprobs")

    def __init__(self, id, split, embedding, label=None, token=None,
                 label_word_logprobs=None):
        self.id = id
        self.split = split
        self.label = label
        arr = np.asarray(embedding, dtype=np.float32)
        arr.flags.writeable = False
        self.embedding = arr
        self.token = token
        if label_word_logprobs is not None:
            label_word_logprobs = tuple(tuple(float(v) for v in ws)
                                        for ws in label_word_logprobs)
        self.label_word_logprobs = label_word_logprobs

    def __eq__(self, other):
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (self.id == other.id and self.split == other.split
                and self.label == other.label and self.token == other.token
                and self.label_word_logprobs == other.label_word_logprobs
                and np.array_equal(self.embedding, other.embedding))

    def __repr__(self):
        return f"EmbeddingRecord(id={self.id!r}, split={self.split!r}, label={self.label!r})"

    def to_json_obj(self):
        obj = {"id": self.id, "split": self.split}
        if self.label is not None:
            obj["label"] = self.label
        if self.token is not None:
            obj["token"] = self.token
        obj["embedding"] = [_f32_token(v) for v in self.embedding]
        if self.label_word_logprobs is not None:
            obj["label_word_logprobs"] = [list(ws) for ws in self.label_word_logprobs]
        return obj


def _check_record_obj(obj, header, lineno):
    """Validate one parsed record object; returns an EmbeddingRecord."""
    if not isinstance(obj, dict):
        raise DataError("record line is not a JSON object", line=lineno)
    rid = obj.get("id")
    if not isinstance(rid, str) or not rid:
        raise DataError("missing or non-string 'id'", line=lineno)
    split = obj.get("split")
    if split not in SPLITS:
        raise DataError(f"split must be one of {SPLITS}, got {split!r}",
                        line=lineno, record_id=rid)
    label = obj.get("label")
    if split in ("train", "test"):
        if not isinstance(label, int) or isinstance(label, bool):
            raise DataError("label required for train/test records",
                            line=lineno, record_id=rid)
        if not 0 <= label < header.n_classes:
            raise DataError(
                f"label {label} out of range [0, {header.n_classes})",
                line=lineno, record_id=rid)
    elif label is not None:
        raise DataError("vocab_probe records must not carry a label",
                        line=lineno, record_id=rid)
    token = obj.get("token")
    if token is not None and split != "vocab_probe":
        raise DataError("token is only allowed on vocab_probe records",
                        line=lineno, record_id=rid)
    if token is not None and not isinstance(token, str):
        raise DataError("token must be a string", line=lineno, record_id=rid)
    emb = obj.get("embedding")
    if not isinstance(emb, list) or len(emb) != header.dim:
        got = len(emb) if isinstance(emb, list) else "missing"
        raise DataError(
            f"embedding has {got} entries, header dim is {header.dim}",
            line=lineno, record_id=rid)
    for v in emb:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise DataError("embedding entries must be finite numbers",
                            line=lineno, record_id=rid)
    lwl = obj.get("label_word_logprobs")
    if lwl is not None:
        if not isinstance(lwl, list) or len(lwl) != header.n_classes:
            raise DataError(
                f"label_word_logprobs must have {header.n_classes} per-class lists",
                line=lineno, record_id=rid)
        for ws in lwl:
            if not isinstance(ws, list) or not ws:
                raise DataError("each class needs >= 1 label-word log-prob",
                                line=lineno, record_id=rid)
            for v in ws:
                if not isinstance(v, (int, float)) or isinstance(v, bool) \
                        or not math.isfinite(v) or v > 0:
                    raise DataError("label-word log-probs must be finite and <= 0",
                                    line=lineno, record_id=rid)
    return EmbeddingRecord(rid, split, emb, label=label, token=token,
                           label_word_logprobs=lwl)


class EmbeddingDataset:
    """Validated header + records; immutable and index-ready."""

    def __init__(self, header, records):
        self.header = header
        self.records = tuple(records)
        self._by_id = {}
        for rec in self.records:
            if rec.id in self._by_id:
                raise DataError(f"duplicate record id {rec.id!r}")
            self._by_id[rec.id] = rec

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingDataset):
            return NotImplemented
        return self.header == other.header and self.records == other.records

    def record(self, rid):
        try:
            return self._by_id[rid]
        except KeyError:
            raise DataError(f"unknown record id {rid!r}") from None

    def by_split(self, split):
        if split not in SPLITS:
            raise UsageError(f"unknown split {split!r}")
        return [r for r in self.records if r.split == split]

    def train_by_class(self):
        """Train records grouped by label, in file order within each class."""
        groups = [[] for _ in range(self.header.n_classes)]
        for rec in self.records:
            if rec.split == "train":
                groups[rec.label].append(rec)
        return groups


def _open_text(path, mode):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def _iter_parsed(path):
    """Yields (lineno, parsed_object); raises DataError with line numbers."""
    with _open_text(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            stripped = raw.strip()
            if not stripped:
                if raw.endswith("\n"):
                    raise DataError("blank line", line=lineno)
                continue  # trailing newline-less EOF artifact
            try:
                yield lineno, json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise DataError(f"invalid JSON ({exc.msg})", line=lineno) from None


def _parse_header_obj(obj, lineno):
    if not isinstance(obj, dict):
        raise DataError("header line is not a JSON object", line=lineno)
    try:
        version = obj["format_version"]
        dim = obj["dim"]
        class_names = obj["class_names"]
        template_id = obj["template_id"]
        model_id = obj["model_id"]
    except KeyError as exc:
        raise DataError(f"header missing field {exc.args[0]!r}", line=lineno) from None
    if not isinstance(dim, int) or isinstance(dim, bool):
        raise DataError("header dim must be an integer", line=lineno)
    if not isinstance(class_names, list) or not all(isinstance(c, str) for c in class_names):
        raise DataError("header class_names must be a list of strings", line=lineno)
    try:
        return DatasetHeader(dim=dim, class_names=tuple(class_names),
                             template_id=str(template_id), model_id=str(model_id),
                             format_version=version)
    except DataError as exc:
        raise DataError(exc.message, line=lineno) from None


def load_dataset(path):
    """Parse and validate an NDJSON dataset; raises DataError on the first
    violation, annotated with its line number."""
    try:
        lines = _iter_parsed(path)
        try:
            lineno, obj = next(lines)
        except StopIteration:
            raise DataError("empty file: no header line", line=1) from None
        header = _parse_header_obj(obj, lineno)
        records = []
        seen = set()
        for lineno, obj in lines:
            rec = _check_record_obj(obj, header, lineno)
            if rec.id in seen:
                raise DataError("duplicate record id", line=lineno, record_id=rec.id)
            seen.add(rec.id)
            records.append(rec)
        return EmbeddingDataset(header, records)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def validate_dataset(path):
    """Collect every validation issue instead of stopping at the first.

    Returns (header_or_None, record_count, issues) where issues is a list of
    dicts {line, record_id, message}.  I/O problems raise UsageError so the
    caller can distinguish them from format violations.
    """
    issues = []
    header = None
    count = 0
    try:
        lines = _iter_parsed(path)
        try:
            lineno, obj = next(lines)
            header = _parse_header_obj(obj, lineno)
        except StopIteration:
            issues.append({"line": 1, "record_id": None, "message": "empty file: no header line"})
            return None, 0, issues
        except DataError as exc:
            issues.append({"line": exc.line, "record_id": None, "message": exc.message})
            return None, 0, issues
        seen = set()
        while True:
            try:
                lineno, obj = next(lines)
            except StopIteration:
                break
            except DataError as exc:
                issues.append({"line": exc.line, "record_id": exc.record_id,
                               "message": exc.message})
                break  # stream is unrecoverable after a parse failure
            count += 1
            try:
                rec = _check_record_obj(obj, header, lineno)
                if rec.id in seen:
                    raise DataError("duplicate record id", line=lineno, record_id=rec.id)
                seen.add(rec.id)
            except DataError as exc:
                issues.append({"line": exc.line, "record_id": exc.record_id,
                               "message": exc.message})
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    return header, count, issues


def write_dataset(dataset, path):
    """Serialize with canonical key order and float32 round-trip decimals."""
    with _open_text(path, "w") as fh:
        fh.write(json.dumps(dataset.header.to_json_obj()) + "\n")
        for rec in dataset.records:
            fh.write(json.dumps(rec.to_json_obj()) + "\n")
    return str(path)


@dataclass(frozen=True)
class NoiseSpec:
    num_corrupted: int = 0
    corruption_seed: int = 0


@dataclass(frozen=True)
class Episode:
    """An N-way K-shot support sample, optionally label-corrupted.

    ``support[c]`` holds the k_shot records sampled from class c (this
    sampling structure never changes).  ``labels`` maps record id to the
    label the trainer sees; after corruption exactly
    ``noise_spec.num_corrupted`` of them differ from ``original_labels``.
    """

    n_way: int
    k_shot: int
    seed: int
    support: tuple
    labels: dict
    original_labels: dict
    noise_spec: NoiseSpec = field(default_factory=NoiseSpec)

    def iter_support(self):
        """Records in canonical order: class ascending, slot ascending."""
        for group in self.support:
            yield from group

    def groups(self):
        """Records grouped by assigned (possibly corrupted) label."""
        out = [[] for _ in range(self.n_way)]
        for rec in self.iter_support():
            out[self.labels[rec.id]].append(rec)
        return out

    def corrupted_ids(self):
        return sorted(rid for rid, lab in self.labels.items()
                      if lab != self.original_labels[rid])

    def to_json_obj(self):
        return {
            "n_way": self.n_way,
            "k_shot": self.k_shot,
            "seed": self.seed,
            "noise_spec": {"num_corrupted": self.noise_spec.num_corrupted,
                           "corruption_seed": self.noise_spec.corruption_seed},
            "support": [[rec.id for rec in group] for group in self.support],
            "labels": {rec.id: self.labels[rec.id] for rec in self.iter_support()},
            "original_labels": {rec.id: self.original_labels[rec.id]
                                for rec in self.iter_support()},
        }


def sample_episode(dataset, n_way, k_shot, seed):
    """Draw k_shot train records per class, without replacement.

    Classes are processed in ascending index order on a single Philox
    stream keyed by ``seed``; within a class the candidate pool is in file
    order, so identical inputs give byte-identical episodes.
    """
    n_classes = dataset.header.n_classes
    if not 1 <= n_way <= n_classes:
        raise UsageError(f"n_way must be in [1, {n_classes}], got {n_way}")
    if k_shot < 1:
        raise UsageError(f"k_shot must be >= 1, got {k_shot}")
    pools = dataset.train_by_class()
    rng = DeterministicRng(seed)
    support = []
    for c in range(n_way):
        pool = pools[c]
        if len(pool) < k_shot:
            raise DataError(
                f"class {c} ({dataset.header.class_names[c]!r}) has only "
                f"{len(pool)} train records, need {k_shot}")
        picks = rng.choose(len(pool), k_shot)
        support.append(tuple(pool[i] for i in picks))
    labels = {rec.id: c for c, group in enumerate(support) for rec in group}
    return Episode(n_way=n_way, k_shot=k_shot, seed=seed,
                   support=tuple(support), labels=labels,
                   original_labels=dict(labels))


def inject_noise(episode, m, corruption_seed):
    """Give m uniformly-chosen support records a uniformly-chosen wrong label.

    Corruption always starts from ``original_labels`` (re-corrupting an
    episode replaces, never composes).  Slots are chosen over the canonical
    support order; each chosen record's new label is uniform over the
    n_way - 1 other classes.  Deterministic in ``corruption_seed``.
    """
    total = episode.n_way * episode.k_shot
    if not 0 <= m <= total:
        raise UsageError(f"num_corrupted must be in [0, {total}], got {m}")
    if m > 0 and episode.n_way < 2:
        raise UsageError("cannot corrupt labels with a single class")
    flat = list(episode.iter_support())
    labels = dict(episode.original_labels)
    rng = DeterministicRng(corruption_seed)
    for slot in rng.choose(total, m):
        rec = flat[slot]
        orig = episode.original_labels[rec.id]
        draw = rng.randbelow(episode.n_way - 1)
        labels[rec.id] = draw if draw < orig else draw + 1
    return Episode(n_way=episode.n_way, k_shot=episode.k_shot, seed=episode.seed,
                   support=episode.support, labels=labels,
                   original_labels=dict(episode.original_labels),
                   noise_spec=NoiseSpec(num_corrupted=m,
                                        corruption_seed=corruption_seed))
