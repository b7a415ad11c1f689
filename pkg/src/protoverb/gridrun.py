"""Resumable grid execution over a bounded worker pool.

Each cell writes its own JSON file keyed by the dataset digest and the
effective cell config digest; a rerun skips any cell whose file already
matches both. Cells are independent and internally deterministic, so the
pool size changes scheduling only, never results.
"""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor

from .analysis import CellResult, ExperimentGrid, SweepReport, run_cell
from .errors import UsageError
from .manifest import config_digest

CELL_FORMAT_VERSION = 1


def _cell_config_obj(k_shot, seed, variant, m, base_config):
    return {
        "k_shot": k_shot,
        "seed": seed,
        "loss_variant": variant,
        "m": m,
        "steps": base_config.steps,
        "learning_rate": base_config.learning_rate,
        "d_proto": base_config.d_proto,
        "init_scale": base_config.init_scale,
        "adam": {
            "beta1": base_config.adam.beta1,
            "beta2": base_config.adam.beta2,
            "epsilon": base_config.adam.epsilon,
        },
    }


def _cell_path(out_dir, k_shot, seed, variant, m):
    return os.path.join(out_dir, f"cell_{variant}_k{k_shot}_m{m}_s{seed}.json")


def _load_cached_cell(path, want_config_digest, want_dataset_digest):
    """Return the cached CellResult if the cell file matches both digests."""
    if not os.path.exists(path):
        return None
    try:
        with open(path, "r", encoding="utf-8") as f:
            obj = json.load(f)
    except (OSError, json.JSONDecodeError):
        return None
    if obj.get("format_version") != CELL_FORMAT_VERSION:
        return None
    if obj.get("config_digest") != want_config_digest:
        return None
    if obj.get("dataset_digest") != want_dataset_digest:
        return None
    r = obj["result"]
    return CellResult(
        k_shot=int(r["k_shot"]),
        seed=int(r["seed"]),
        loss_variant=str(r["loss_variant"]),
        m=int(r["m"]),
        accuracy=float(r["accuracy"]),
        n_test=int(r["n_test"]),
    )


def run_grid(dataset, grid, base_config, out_dir, dataset_digest, workers=4):
    """Run a sweep with per-cell caching under `out_dir`.

    Returns (report, n_computed, n_skipped). Existing cell files whose
    config and dataset digests match are reused without recomputation.
    """
    if workers < 1:
        raise UsageError(f"workers must be positive, got {workers}")
    os.makedirs(out_dir, exist_ok=True)
    levels = tuple(sorted(set(grid.noise_levels) | {0}))
    keys = [
        (k, seed, variant, m)
        for k in grid.k_values
        for seed in grid.seeds
        for variant in grid.loss_variants
        for m in levels
    ]

    cached = {}
    pending = []
    for key in keys:
        k, seed, variant, m = key
        digest = config_digest(_cell_config_obj(k, seed, variant, m, base_config))
        path = _cell_path(out_dir, k, seed, variant, m)
        cell = _load_cached_cell(path, digest, dataset_digest)
        if cell is not None:
            cached[key] = cell
        else:
            pending.append((key, digest, path))

    def compute(entry):
        key, digest, path = entry
        k, seed, variant, m = key
        cell = run_cell(dataset, k, seed, variant, m, base_config)
        payload = {
            "format_version": CELL_FORMAT_VERSION,
            "config_digest": digest,
            "dataset_digest": dataset_digest,
            "config": _cell_config_obj(k, seed, variant, m, base_config),
            "result": cell.to_json_obj(),
        }
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)  # atomic: interrupted runs never leave bad cells
        return key, cell

    computed = {}
    if pending:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for key, cell in pool.map(compute, pending):
                computed[key] = cell

    cells = tuple(cached.get(key) or computed[key] for key in keys)
    report = SweepReport(
        grid=grid,
        cells=cells,
        template_id=dataset.header.template_id,
        model_id=dataset.header.model_id,
    )
    return report, len(computed), len(cached)


def write_grid_reports(report, out_dir):
    """Write the aggregate JSON table and the plot-ready long CSV."""
    agg_path = os.path.join(out_dir, "aggregate.json")
    with open(agg_path, "w", encoding="utf-8") as f:
        json.dump(report.to_json_obj(), f, indent=2, sort_keys=True)
        f.write("\n")
    csv_path = os.path.join(out_dir, "long.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        f.write(report.to_long_csv())
    return agg_path, csv_path


def grid_from_flags(k_values, seeds, loss_variants, noise_levels):
    """Build an ExperimentGrid from already-parsed flag sequences.

    Numeric lists are deduplicated and sorted: overlapping spans such as
    '0-2,1' name cells, and a cell named twice is still one cell.
    """
    variants = tuple(dict.fromkeys(loss_variants))
    return ExperimentGrid(
        k_values=tuple(sorted(set(k_values))),
        seeds=tuple(sorted(set(seeds))),
        loss_variants=variants,
        noise_levels=tuple(sorted(set(noise_levels))) if noise_levels else (0,),
    )


def effective_train_config(defaults, file_config, flag_overrides):
    """Merge train settings with precedence flags > config file > defaults.

    `file_config` and `flag_overrides` are partial dicts; unknown keys in
    the config file are rejected rather than silently ignored.
    """
    allowed = {"steps", "learning_rate", "d_proto", "init_scale"}
    merged = {
        "steps": defaults.steps,
        "learning_rate": defaults.learning_rate,
        "d_proto": defaults.d_proto,
        "init_scale": defaults.init_scale,
    }
    for source in (file_config, flag_overrides):
        for key, value in source.items():
            if key not in allowed:
                raise UsageError(f"unknown config key {key!r}")
            if value is not None:
                merged[key] = value
    return dataclasses.replace(
        defaults,
        steps=int(merged["steps"]),
        learning_rate=float(merged["learning_rate"]),
        d_proto=int(merged["d_proto"]),
        init_scale=float(merged["init_scale"]),
    )
