"""Dataset parsing, validation, episode sampling, and label noise."""

import gzip
import json
import math

import numpy as np
import pytest

from protoverb.errors import DataError, UsageError
from protoverb.store import (
    DatasetHeader,
    EmbeddingDataset,
    EmbeddingRecord,
    inject_noise,
    load_dataset,
    sample_episode,
    validate_dataset,
    write_dataset,
)


HEADER = {"format_version": 1, "dim": 3, "class_names": ["A", "B"],
          "template_id": "t0", "model_id": "m0"}


def rec(i, split="train", label=0, dim=3, **extra):
    # key order mirrors the canonical serialization so byte comparisons work
    obj = {"id": f"r{i}", "split": split}
    if split in ("train", "test"):
        obj["label"] = label
    if "token" in extra:
        obj["token"] = extra.pop("token")
    obj["embedding"] = extra.pop("embedding", [float(i)] * dim)
    obj.update(extra)
    return obj


def write_lines(path, *objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs))
    return path


def small_file(tmp_path, *records):
    return write_lines(tmp_path / "data.ndjson", HEADER, *records)


def test_roundtrip_preserves_everything(tmp_path):
    path = small_file(
        tmp_path,
        rec(0, label=0),
        rec(1, split="test", label=1,
            label_word_logprobs=[[-0.5, -1.25], [-2.0]]),
        rec(2, split="vocab_probe", token="alpha"),
    )
    ds = load_dataset(path)
    out = tmp_path / "copy.ndjson"
    write_dataset(ds, out)
    assert load_dataset(out) == ds
    assert out.read_text() == path.read_text()


def test_gzip_roundtrip(tmp_path):
    path = small_file(tmp_path, rec(0), rec(1, label=1))
    ds = load_dataset(path)
    gz = tmp_path / "data.ndjson.gz"
    write_dataset(ds, gz)
    with gzip.open(gz, "rt", encoding="utf-8") as fh:
        assert fh.read() == path.read_text()
    assert load_dataset(gz) == ds


def test_embeddings_are_float32_and_frozen(tmp_path):
    ds = load_dataset(small_file(tmp_path, rec(0, embedding=[0.1, 0.2, 0.3])))
    emb = ds.records[0].embedding
    assert emb.dtype == np.float32
    with pytest.raises(ValueError):
        emb[0] = 5.0


def test_float32_shortest_roundtrip_serialization(tmp_path):
    # 0.1 is not representable; the stored decimal must re-read to the
    # exact same float32 bit pattern.
    ds = load_dataset(small_file(tmp_path, rec(0, embedding=[0.1, 1e-8, 3.0])))
    out = tmp_path / "echo.ndjson"
    write_dataset(ds, out)
    reread = load_dataset(out)
    assert np.array_equal(reread.records[0].embedding, ds.records[0].embedding)


def test_missing_file_is_usage_error(tmp_path):
    with pytest.raises(UsageError):
        load_dataset(tmp_path / "nope.ndjson")
    with pytest.raises(UsageError):
        validate_dataset(tmp_path / "nope.ndjson")


def test_empty_file(tmp_path):
    path = tmp_path / "empty.ndjson"
    path.write_text("")
    with pytest.raises(DataError, match="no header"):
        load_dataset(path)


def test_blank_line_rejected(tmp_path):
    path = tmp_path / "blank.ndjson"
    path.write_text(json.dumps(HEADER) + "\n\n" + json.dumps(rec(0)) + "\n")
    with pytest.raises(DataError) as err:
        load_dataset(path)
    assert err.value.line == 2


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "broken.ndjson"
    path.write_text(json.dumps(HEADER) + "\n{not json\n")
    with pytest.raises(DataError) as err:
        load_dataset(path)
    assert err.value.line == 2
    assert "JSON" in err.value.message


@pytest.mark.parametrize("patch,fragment", [
    ({"format_version": 2}, "format_version"),
    ({"dim": 0}, "dim"),
    ({"dim": "3"}, "integer"),
    ({"class_names": []}, "class_names"),
    ({"class_names": ["A", "A"]}, "class_names"),
    ({"class_names": "AB"}, "list of strings"),
])
def test_bad_headers(tmp_path, patch, fragment):
    bad = dict(HEADER)
    bad.update(patch)
    with pytest.raises(DataError, match=fragment):
        load_dataset(write_lines(tmp_path / "h.ndjson", bad))


def test_header_missing_field(tmp_path):
    bad = dict(HEADER)
    del bad["model_id"]
    with pytest.raises(DataError, match="model_id"):
        load_dataset(write_lines(tmp_path / "h.ndjson", bad))


def test_header_not_an_object(tmp_path):
    path = tmp_path / "h.ndjson"
    path.write_text("[1, 2]\n")
    with pytest.raises(DataError, match="not a JSON object"):
        load_dataset(path)


@pytest.mark.parametrize("mutate,fragment", [
    (lambda r: r.pop("id"), "id"),
    (lambda r: r.update(id=""), "id"),
    (lambda r: r.update(split="dev"), "split"),
    (lambda r: r.pop("label"), "label required"),
    (lambda r: r.update(label=True), "label required"),
    (lambda r: r.update(label=2), "out of range"),
    (lambda r: r.update(label=-1), "out of range"),
    (lambda r: r.update(token="x"), "vocab_probe"),
    (lambda r: r.update(embedding=[1.0, 2.0]), "header dim"),
    (lambda r: r.pop("embedding"), "embedding"),
    (lambda r: r.update(embedding=[1.0, 2.0, float("nan")]), "finite"),
    (lambda r: r.update(embedding=[1.0, 2.0, True]), "finite"),
    (lambda r: r.update(label_word_logprobs=[[-1.0]]), "per-class"),
    (lambda r: r.update(label_word_logprobs=[[-1.0], []]), ">= 1"),
    (lambda r: r.update(label_word_logprobs=[[-1.0], [0.5]]), "<= 0"),
])
def test_bad_records(tmp_path, mutate, fragment):
    bad = rec(0)
    mutate(bad)
    path = write_lines(tmp_path / "r.ndjson", HEADER, bad)
    with pytest.raises(DataError, match=fragment) as err:
        load_dataset(path)
    assert err.value.line == 2


def test_probe_record_must_not_carry_label(tmp_path):
    bad = rec(0, split="vocab_probe", token="alpha")
    bad["label"] = 0
    with pytest.raises(DataError, match="must not carry a label"):
        load_dataset(write_lines(tmp_path / "r.ndjson", HEADER, bad))


def test_token_must_be_string(tmp_path):
    bad = rec(0, split="vocab_probe", token=7)
    with pytest.raises(DataError, match="token must be a string"):
        load_dataset(write_lines(tmp_path / "r.ndjson", HEADER, bad))


def test_duplicate_record_id(tmp_path):
    dup = rec(0)
    path = write_lines(tmp_path / "d.ndjson", HEADER, rec(0), dup)
    with pytest.raises(DataError, match="duplicate") as err:
        load_dataset(path)
    assert err.value.line == 3
    assert err.value.record_id == "r0"


def test_validate_collects_multiple_issues(tmp_path):
    bad1 = rec(1, label=9)
    bad2 = rec(2, dim=2)
    path = write_lines(tmp_path / "v.ndjson", HEADER, rec(0), bad1, bad2, rec(0))
    header, count, issues = validate_dataset(path)
    assert header is not None and count == 4
    assert [i["line"] for i in issues] == [3, 4, 5]
    assert issues[2]["message"] == "duplicate record id"


def test_validate_clean_file(tmp_path):
    path = small_file(tmp_path, rec(0), rec(1, split="test", label=1))
    header, count, issues = validate_dataset(path)
    assert header.dim == 3 and count == 2 and issues == []


def test_validate_stops_after_parse_failure(tmp_path):
    path = tmp_path / "v.ndjson"
    path.write_text(json.dumps(HEADER) + "\n{oops\n"
                    + json.dumps(rec(1, label=9)) + "\n")
    _, count, issues = validate_dataset(path)
    # the later label issue is unreachable once the stream breaks
    assert count == 0 and len(issues) == 1 and issues[0]["line"] == 2


def test_validate_bad_header_short_circuits(tmp_path):
    bad = dict(HEADER, dim=0)
    path = write_lines(tmp_path / "v.ndjson", bad, rec(0))
    header, count, issues = validate_dataset(path)
    assert header is None and count == 0 and len(issues) == 1


def test_dataset_lookup_helpers(tmp_path):
    ds = load_dataset(small_file(
        tmp_path, rec(0), rec(1, label=1),
        rec(2, split="test", label=0), rec(3, split="vocab_probe", token="a")))
    assert ds.record("r1").label == 1
    with pytest.raises(DataError, match="unknown record id"):
        ds.record("missing")
    assert [r.id for r in ds.by_split("test")] == ["r2"]
    with pytest.raises(UsageError):
        ds.by_split("dev")
    groups = ds.train_by_class()
    assert [[r.id for r in g] for g in groups] == [["r0"], ["r1"]]


def test_constructor_rejects_duplicate_ids():
    header = DatasetHeader(dim=1, class_names=("A", "B"),
                           template_id="t", model_id="m")
    a = EmbeddingRecord("x", "train", [1.0], label=0)
    b = EmbeddingRecord("x", "train", [2.0], label=1)
    with pytest.raises(DataError, match="duplicate"):
        EmbeddingDataset(header, [a, b])


# --- episode sampling -------------------------------------------------


def four_class_dataset(per_class=6, dim=4):
    header = DatasetHeader(dim=dim, class_names=("A", "B", "C", "D"),
                           template_id="t", model_id="m")
    records = []
    for c in range(4):
        for i in range(per_class):
            records.append(EmbeddingRecord(
                f"c{c}i{i}", "train", [float(c), float(i)] + [0.0] * (dim - 2),
                label=c))
    return EmbeddingDataset(header, records)


def test_sample_episode_shape_and_order():
    ds = four_class_dataset()
    ep = sample_episode(ds, n_way=4, k_shot=3, seed=5)
    assert len(ep.support) == 4
    for c, group in enumerate(ep.support):
        assert len(group) == 3
        assert all(r.label == c for r in group)
        ids = [r.id for r in group]
        assert len(set(ids)) == 3          # without replacement
        assert ids == sorted(ids)          # file order within a class
    flat = [r.id for r in ep.iter_support()]
    assert flat == [r.id for g in ep.support for r in g]
    assert ep.labels == ep.original_labels
    assert ep.corrupted_ids() == []


def test_sample_episode_deterministic():
    ds = four_class_dataset()
    a = sample_episode(ds, 4, 2, seed=11)
    b = sample_episode(ds, 4, 2, seed=11)
    c = sample_episode(ds, 4, 2, seed=12)
    assert a.to_json_obj() == b.to_json_obj()
    assert a.to_json_obj() != c.to_json_obj()


def test_sample_episode_n_way_prefix():
    # n_way < n_classes keeps the lowest class indices
    ds = four_class_dataset()
    ep = sample_episode(ds, n_way=2, k_shot=2, seed=0)
    assert sorted(set(ep.labels.values())) == [0, 1]


@pytest.mark.parametrize("n_way,k_shot", [(0, 1), (5, 1), (2, 0), (2, -3)])
def test_sample_episode_rejects_bad_shape(n_way, k_shot):
    with pytest.raises(UsageError):
        sample_episode(four_class_dataset(), n_way, k_shot, seed=0)


def test_sample_episode_insufficient_pool_names_class():
    ds = four_class_dataset(per_class=2)
    with pytest.raises(DataError, match="'A'"):
        sample_episode(ds, 4, 3, seed=0)


# --- label corruption -------------------------------------------------


def test_inject_noise_exact_count_and_valid_labels():
    ds = four_class_dataset()
    ep = sample_episode(ds, 4, 4, seed=3)
    for m in (0, 1, 5, 16):
        noisy = inject_noise(ep, m, corruption_seed=20 + m)
        flipped = noisy.corrupted_ids()
        assert len(flipped) == m
        for rid in flipped:
            assert noisy.labels[rid] != noisy.original_labels[rid]
            assert 0 <= noisy.labels[rid] < 4
        # untouched slots keep their labels
        for rid, lab in noisy.original_labels.items():
            if rid not in flipped:
                assert noisy.labels[rid] == lab
        assert noisy.noise_spec.num_corrupted == m


def test_inject_noise_deterministic():
    ep = sample_episode(four_class_dataset(), 4, 3, seed=1)
    a = inject_noise(ep, 4, corruption_seed=9)
    b = inject_noise(ep, 4, corruption_seed=9)
    c = inject_noise(ep, 4, corruption_seed=10)
    assert a.labels == b.labels
    assert a.labels != c.labels


def test_inject_noise_replaces_rather_than_composes():
    ep = sample_episode(four_class_dataset(), 4, 3, seed=1)
    once = inject_noise(ep, 2, corruption_seed=7)
    twice = inject_noise(once, 2, corruption_seed=7)
    assert twice.labels == once.labels
    assert twice.original_labels == ep.original_labels
    # recorrupting with m=0 restores the clean assignment
    clean = inject_noise(once, 0, corruption_seed=7)
    assert clean.labels == ep.labels


def test_inject_noise_bounds():
    ep = sample_episode(four_class_dataset(), 4, 2, seed=0)
    with pytest.raises(UsageError):
        inject_noise(ep, -1, corruption_seed=0)
    with pytest.raises(UsageError):
        inject_noise(ep, 9, corruption_seed=0)
    single = sample_episode(four_class_dataset(), 1, 2, seed=0)
    with pytest.raises(UsageError, match="single class"):
        inject_noise(single, 1, corruption_seed=0)
    assert inject_noise(single, 0, corruption_seed=0).labels == single.labels


def test_inject_noise_wrong_label_distribution():
    # over many seeds every wrong label for a fixed slot should appear
    ds = four_class_dataset()
    ep = sample_episode(ds, 4, 1, seed=2)
    seen = set()
    target = next(iter(ep.original_labels))
    for s in range(60):
        noisy = inject_noise(ep, 4, corruption_seed=s)
        seen.add(noisy.labels[target])
    orig = ep.original_labels[target]
    assert orig not in seen
    assert seen == set(range(4)) - {orig}
