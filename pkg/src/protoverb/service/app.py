"""FastAPI application exposing the training and analysis pipeline.

Every domain failure surfaces as a structured body whose `kind` the CLI
maps onto its exit-code contract: usage errors 400, data errors 422,
numerical failures 500.
"""

from __future__ import annotations

import dataclasses
import json

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from ..analysis import (
    gather_class_word_records,
    probe_vocabulary,
    proto_manual_similarity,
)
from ..engine import TrainConfig, load_checkpoint, save_checkpoint, train
from ..errors import DataError, ProtoVerbError, UsageError
from ..gridrun import (
    effective_train_config,
    grid_from_flags,
    run_grid,
    write_grid_reports,
)
from ..manifest import ManifestTimer, file_digest, tool_version
from ..scoring import ManualScorer, PrototypeScorer, evaluate
from ..store import inject_noise, load_dataset, sample_episode, validate_dataset
from ..synth import write_cluster_dataset
from . import models

_STATUS_BY_KIND = {"usage": 400, "data": 422, "numerical": 500}


def _json_write(obj, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            obj = json.load(f)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path}: invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise UsageError(f"config file {path}: expected a JSON object")
    return obj


def _hyper_config(req):
    """flags > config file > defaults, for the shared train hyperparameters."""
    file_cfg = _read_config_file(req.config_path) if req.config_path else {}
    flags = {
        "steps": req.steps,
        "learning_rate": req.learning_rate,
        "d_proto": req.d_proto,
        "init_scale": req.init_scale,
    }
    return effective_train_config(TrainConfig(), file_cfg, flags)


def _config_obj(config):
    return {
        "steps": config.steps,
        "learning_rate": config.learning_rate,
        "d_proto": config.d_proto,
        "init_scale": config.init_scale,
        "seed": config.seed,
        "loss_variant": config.loss_variant,
        "adam": {
            "beta1": config.adam.beta1,
            "beta2": config.adam.beta2,
            "epsilon": config.adam.epsilon,
        },
    }


def _episode_for(dataset, n_way, k_shot, seed, noise_m, corruption_seed):
    way = n_way if n_way is not None else dataset.header.n_classes
    episode = sample_episode(dataset, way, k_shot, seed)
    if noise_m > 0:
        cseed = corruption_seed if corruption_seed is not None else seed
        episode = inject_noise(episode, noise_m, corruption_seed=cseed)
    return episode


def _check_checkpoint_dataset(ckpt, dataset, what="dataset"):
    dim = ckpt.meta["dim"]
    if dim != dataset.header.dim:
        raise DataError(
            f"checkpoint expects dim {dim}, {what} has dim {dataset.header.dim}"
        )


def _build_scorers(names, ckpt, n_classes):
    if not names:
        raise UsageError("no scorers requested")
    scorers = []
    for name in names:
        if name == "proto":
            if ckpt.prototypes.n_classes != n_classes:
                raise DataError(
                    f"checkpoint has {ckpt.prototypes.n_classes} prototypes, "
                    f"dataset has {n_classes} classes"
                )
            scorers.append(PrototypeScorer(ckpt.encoder, ckpt.prototypes))
        elif name == "manual":
            scorers.append(ManualScorer(n_classes))
        else:
            raise UsageError(
                f"unknown scorer {name!r}; expected 'proto' or 'manual'"
            )
    return scorers


def create_app():
    app = FastAPI(title="protoverb service", version=tool_version())

    @app.exception_handler(ProtoVerbError)
    def _domain_error(request, exc):
        body = {"kind": exc.kind, "message": str(exc)}
        if isinstance(exc, DataError):
            body["line"] = exc.line
            body["record_id"] = exc.record_id
        return JSONResponse(
            status_code=_STATUS_BY_KIND.get(exc.kind, 500), content=body
        )

    @app.get("/health", response_model=models.HealthResponse)
    def health():
        return models.HealthResponse(status="ok", version=tool_version())

    @app.post("/validate", response_model=models.ValidateResponse)
    def validate(req: models.ValidateRequest):
        timer = ManifestTimer("validate", req.model_dump())
        _, _, issues = validate_dataset(req.path)
        timer.add_input(req.path)
        return models.ValidateResponse(
            valid=not issues,
            n_issues=len(issues),
            issues=[models.IssueModel(**i) for i in issues],
            manifest=timer.to_json_obj(),
        )

    @app.post("/sample", response_model=models.SampleResponse)
    def sample(req: models.SampleRequest):
        timer = ManifestTimer("sample", req.model_dump())
        dataset = load_dataset(req.path)
        timer.add_input(req.path)
        episode = _episode_for(
            dataset, req.n_way, req.k_shot, req.seed, req.noise_m, req.corruption_seed
        )
        obj = episode.to_json_obj()
        if req.out_path:
            _json_write(obj, req.out_path)
            timer.write(req.out_path + ".manifest.json")
        return models.SampleResponse(
            episode=obj, out_path=req.out_path, manifest=timer.to_json_obj()
        )

    @app.post("/train", response_model=models.TrainResponse)
    def train_cmd(req: models.TrainRequest):
        base = _hyper_config(req)
        config = dataclasses.replace(base, seed=req.seed, loss_variant=req.variant)
        timer = ManifestTimer(
            "train", {**req.model_dump(), "effective": _config_obj(config)}
        )
        dataset = load_dataset(req.dataset_path)
        timer.add_input(req.dataset_path)
        if req.config_path:
            timer.add_input(req.config_path)
        episode = _episode_for(
            dataset, req.n_way, req.k_shot, req.seed, req.noise_m, req.corruption_seed
        )
        result = train(episode, dataset.header, config)
        save_checkpoint(result, dataset.header, config, req.out_path)
        manifest_path = req.out_path + ".manifest.json"
        timer.write(manifest_path)
        final = result.loss_trace[-1][3] if result.loss_trace else None
        return models.TrainResponse(
            checkpoint_path=req.out_path,
            manifest_path=manifest_path,
            n_steps=len(result.loss_trace),
            final_loss=final,
            effective_config=_config_obj(config),
            manifest=timer.to_json_obj(),
        )

    @app.post("/eval", response_model=models.EvalResponse)
    def eval_cmd(req: models.EvalRequest):
        timer = ManifestTimer("eval", req.model_dump())
        dataset = load_dataset(req.dataset_path)
        timer.add_input(req.dataset_path)
        ckpt = load_checkpoint(req.checkpoint_path)
        timer.add_input(req.checkpoint_path)
        _check_checkpoint_dataset(ckpt, dataset)
        n_classes = dataset.header.n_classes
        scorers = _build_scorers(req.scorers, ckpt, n_classes)
        report = evaluate(dataset.by_split("test"), scorers, n_classes)
        per_class = [
            models.PerClassAccuracy(
                class_index=c,
                class_name=dataset.header.class_names[c],
                accuracy=report.per_class[c],
            )
            for c in range(n_classes)
        ]
        predictions = [
            {
                "instance_id": p.instance_id,
                "gold": p.gold,
                "predicted": p.predicted,
                "scores": p.scores,
            }
            for p in report.predictions
        ]
        if req.out_path:
            _json_write(
                {
                    "accuracy": report.accuracy,
                    "n_test": report.n_test,
                    "scorer_ids": list(report.scorer_ids),
                    "per_class": [p.model_dump() for p in per_class],
                    "predictions": predictions,
                },
                req.out_path,
            )
            timer.write(req.out_path + ".manifest.json")
        return models.EvalResponse(
            accuracy=report.accuracy,
            n_test=report.n_test,
            scorer_ids=list(report.scorer_ids),
            per_class=per_class,
            predictions=predictions if req.include_predictions else None,
            out_path=req.out_path,
            manifest=timer.to_json_obj(),
        )

    @app.post("/grid", response_model=models.GridResponse)
    def grid_cmd(req: models.GridRequest):
        base = _hyper_config(req)
        grid = grid_from_flags(req.k_values, req.seeds, req.variants, req.noise_levels)
        timer = ManifestTimer(
            "grid",
            {
                **req.model_dump(),
                "effective": _config_obj(base),
                "grid": grid.to_json_obj(),
            },
        )
        dataset = load_dataset(req.dataset_path)
        timer.add_input(req.dataset_path)
        if req.config_path:
            timer.add_input(req.config_path)
        digest = file_digest(req.dataset_path)
        report, n_computed, n_skipped = run_grid(
            dataset, grid, base, req.out_dir, digest, workers=req.workers
        )
        agg_path, csv_path = write_grid_reports(report, req.out_dir)
        manifest_path = f"{req.out_dir}/manifest.json"
        timer.write(manifest_path)
        return models.GridResponse(
            n_cells=len(report.cells),
            n_computed=n_computed,
            n_skipped=n_skipped,
            aggregate_path=agg_path,
            long_csv_path=csv_path,
            manifest_path=manifest_path,
            aggregate=report.aggregate(),
            accuracy_drops=report.accuracy_drops(),
            manifest=timer.to_json_obj(),
        )

    @app.post("/probe", response_model=models.ProbeResponse)
    def probe_cmd(req: models.ProbeRequest):
        timer = ManifestTimer("probe", req.model_dump())
        ckpt = load_checkpoint(req.checkpoint_path)
        timer.add_input(req.checkpoint_path)
        vocab = load_dataset(req.vocab_path)
        timer.add_input(req.vocab_path)
        _check_checkpoint_dataset(ckpt, vocab, what="vocab file")
        report = probe_vocabulary(
            ckpt.encoder,
            ckpt.prototypes,
            tuple(ckpt.meta["class_names"]),
            vocab.by_split("vocab_probe"),
            top_k=req.top_k,
        )
        obj = report.to_json_obj()
        if req.out_path:
            with open(req.out_path, "w", encoding="utf-8") as f:
                for cls in obj["classes"]:
                    for tok in cls["tokens"]:
                        f.write(
                            json.dumps(
                                {
                                    "class_index": cls["class_index"],
                                    "class_name": cls["class_name"],
                                    **tok,
                                }
                            )
                            + "\n"
                        )
            timer.write(req.out_path + ".manifest.json")
        return models.ProbeResponse(
            report=obj, out_path=req.out_path, manifest=timer.to_json_obj()
        )

    @app.post("/similarity", response_model=models.SimilarityResponse)
    def similarity_cmd(req: models.SimilarityRequest):
        timer = ManifestTimer("similarity", req.model_dump())
        if (req.words is None) == (req.words_path is None):
            raise UsageError("provide exactly one of 'words' or 'words_path'")
        ckpt = load_checkpoint(req.checkpoint_path)
        timer.add_input(req.checkpoint_path)
        vocab = load_dataset(req.vocab_path)
        timer.add_input(req.vocab_path)
        _check_checkpoint_dataset(ckpt, vocab, what="vocab file")
        if req.words_path:
            words = _read_config_file(req.words_path)
            timer.add_input(req.words_path)
        else:
            words = req.words
        class_words = gather_class_word_records(vocab, words)
        report = proto_manual_similarity(
            ckpt.encoder, ckpt.prototypes, tuple(ckpt.meta["class_names"]), class_words
        )
        if req.out_path:
            _json_write(report.to_json_obj(), req.out_path)
            timer.write(req.out_path + ".manifest.json")
        return models.SimilarityResponse(
            class_names=list(report.class_names),
            matrix=[list(row) for row in report.matrix],
            out_path=req.out_path,
            manifest=timer.to_json_obj(),
        )

    @app.post("/synth", response_model=models.SynthResponse)
    def synth_cmd(req: models.SynthRequest):
        timer = ManifestTimer("synth", req.model_dump())
        dataset = write_cluster_dataset(
            req.out_path,
            n_classes=req.n_classes,
            dim=req.dim,
            train_per_class=req.train_per_class,
            test_per_class=req.test_per_class,
            separation=req.separation,
            seed=req.seed,
            orthogonal_means=req.orthogonal_means,
            with_logprobs=req.with_logprobs,
            nuisance_dims=req.nuisance_dims,
            nuisance_scale=req.nuisance_scale,
        )
        timer.write(req.out_path + ".manifest.json")
        return models.SynthResponse(
            out_path=req.out_path,
            n_records=len(dataset),
            header=dataset.header.to_json_obj(),
            manifest=timer.to_json_obj(),
        )

    return app
