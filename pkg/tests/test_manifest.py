"""Run manifests and the cached grid runner's bookkeeping."""

import hashlib
import json

import pytest

from protoverb.engine import TrainConfig
from protoverb.errors import UsageError
from protoverb.gridrun import effective_train_config, grid_from_flags
from protoverb.manifest import (
    ManifestTimer,
    config_digest,
    file_digest,
    tool_version,
)


def test_tool_version_is_installed_version():
    assert tool_version() == "0.1.0"


def test_file_digest_matches_sha256(tmp_path):
    path = tmp_path / "blob.bin"
    path.write_bytes(b"some bytes\x00\xff")
    assert file_digest(path) == hashlib.sha256(b"some bytes\x00\xff").hexdigest()


def test_file_digest_missing_file(tmp_path):
    with pytest.raises(UsageError):
        file_digest(tmp_path / "absent")


def test_config_digest_is_key_order_independent():
    assert config_digest({"a": 1, "b": [2, 3]}) \
        == config_digest({"b": [2, 3], "a": 1})
    assert config_digest({"a": 1}) != config_digest({"a": 2})


def test_manifest_shape(tmp_path):
    data = tmp_path / "in.txt"
    data.write_text("x")
    timer = ManifestTimer("train", {"k": 4})
    timer.add_input(data)
    out = tmp_path / "manifest.json"
    timer.write(out)
    obj = json.loads(out.read_text())
    assert obj["command"] == "train"
    assert obj["config"] == {"k": 4}
    assert obj["tool_version"] == tool_version()
    assert obj["wall_time_s"] >= 0
    assert list(obj["input_digests"]) == [str(data)]
    assert obj["input_digests"][str(data)] == file_digest(data)


def test_effective_train_config_precedence():
    defaults = TrainConfig()
    merged = effective_train_config(
        defaults, {"steps": 7, "learning_rate": 0.5}, {"steps": 3})
    assert merged.steps == 3           # flag beats file
    assert merged.learning_rate == 0.5  # file beats default
    assert merged.d_proto == defaults.d_proto
    # None flags mean "not given"
    merged = effective_train_config(defaults, {}, {"steps": None})
    assert merged.steps == defaults.steps


def test_effective_train_config_rejects_unknown_keys():
    with pytest.raises(UsageError, match="stepz"):
        effective_train_config(TrainConfig(), {"stepz": 7}, {})


def test_grid_from_flags_deduplicates_and_sorts():
    grid = grid_from_flags([4, 2, 4], [1, 0, 1], ["full"], [3, 0])
    assert grid.k_values == (2, 4)
    assert grid.seeds == (0, 1)
    assert grid.noise_levels == (0, 3)
