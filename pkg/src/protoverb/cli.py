"""Command-line client for the pipeline service.

Commands run against an in-process service instance by default, so the
CLI works offline with plain file paths; `--server` points every command
at a remote service instead, and `serve` starts one.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import asyncio
import json
import sys

import click
import httpx

from .manifest import tool_version

# exit contract: usage errors exit 1 (click defaults to 2)
click.UsageError.exit_code = 1

_EXIT_BY_KIND = {"usage": 1, "data": 2, "numerical": 3}


class ServiceClient:
    """POSTs payloads either over the wire or straight into the ASGI app."""

    def __init__(self, server=None):
        self.server = server

    def post(self, path, payload):
        if self.server:
            try:
                with httpx.Client(base_url=self.server, timeout=600.0) as client:
                    r = client.post(path, json=payload)
                    return r.status_code, r.json()
            except httpx.HTTPError as exc:
                click.echo(f"error: cannot reach service: {exc}", err=True)
                sys.exit(1)

        from .service import create_app

        async def go():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://service"
            ) as client:
                r = await client.post(path, json=payload)
                return r.status_code, r.json()

        return asyncio.run(go())


def _call(ctx, path, payload):
    status, body = ctx.obj.post(path, payload)
    if status == 200:
        return body
    message = body.get("message", str(body)) if isinstance(body, dict) else str(body)
    kind = body.get("kind") if isinstance(body, dict) else None
    click.echo(f"error: {message}", err=True)
    sys.exit(_EXIT_BY_KIND.get(kind, 1))


def _print_json(body):
    body = {k: v for k, v in body.items() if k != "manifest"}
    click.echo(json.dumps(body, indent=2, sort_keys=True))


def _parse_int_list(text, flag):
    """Comma-separated ints; 'a-b' spans are inclusive (e.g. '0-19,25')."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise click.UsageError(f"{flag}: cannot parse {part!r}") from None
    if not out:
        raise click.UsageError(f"{flag}: empty list")
    return out


@click.group()
@click.version_option(tool_version(), prog_name="protoverb")
@click.option(
    "--server",
    default=None,
    metavar="URL",
    help="Base URL of a running service; default executes in process.",
)
@click.pass_context
def main(ctx, server):
    """Few-shot prototype-verbalizer pipeline."""
    ctx.obj = ServiceClient(server)


@main.command()
@click.argument("dataset", type=click.Path())
@click.pass_context
def validate(ctx, dataset):
    """Check an embedding dataset; exit 0 only when it is violation free."""
    body = _call(ctx, "/validate", {"path": dataset})
    for issue in body["issues"]:
        parts = []
        if issue.get("line") is not None:
            parts.append(f"line {issue['line']}")
        if issue.get("record_id") is not None:
            parts.append(f"record '{issue['record_id']}'")
        parts.append(issue["message"])
        click.echo(": ".join(parts))
    n = body["n_issues"]
    click.echo("0 errors" if n == 0 else f"{n} error(s)")
    if not body["valid"]:
        sys.exit(2)


@main.command()
@click.argument("dataset", type=click.Path())
@click.option("--k", "k_shot", type=int, required=True, help="Shots per class.")
@click.option("--n-way", type=int, default=None, help="Classes to sample (default: all).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noise", "noise_m", type=int, default=0, show_default=True,
              help="Support labels to corrupt.")
@click.option("--corruption-seed", type=int, default=None,
              help="Noise stream seed (default: --seed).")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write episode JSON here instead of stdout.")
@click.pass_context
def sample(ctx, dataset, k_shot, n_way, seed, noise_m, corruption_seed, out_path):
    """Sample a support episode and print or save it."""
    body = _call(ctx, "/sample", {
        "path": dataset, "k_shot": k_shot, "n_way": n_way, "seed": seed,
        "noise_m": noise_m, "corruption_seed": corruption_seed,
        "out_path": out_path,
    })
    if out_path:
        click.echo(f"wrote {out_path}")
    else:
        _print_json(body["episode"])


@main.command()
@click.argument("dataset", type=click.Path())
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Checkpoint file to write.")
@click.option("--k", "k_shot", type=int, default=8, show_default=True)
@click.option("--n-way", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--variant", default="full", show_default=True,
              help="Loss variant: full, proto_only, or instance_mean.")
@click.option("--steps", type=int, default=None)
@click.option("--lr", "learning_rate", type=float, default=None)
@click.option("--d-proto", type=int, default=None)
@click.option("--init-scale", type=float, default=None)
@click.option("--noise", "noise_m", type=int, default=0, show_default=True)
@click.option("--corruption-seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config file; flags override it.")
@click.pass_context
def train(ctx, dataset, out_path, k_shot, n_way, seed, variant, steps,
          learning_rate, d_proto, init_scale, noise_m, corruption_seed,
          config_path):
    """Train an encoder and prototypes on a sampled episode."""
    body = _call(ctx, "/train", {
        "dataset_path": dataset, "out_path": out_path, "k_shot": k_shot,
        "n_way": n_way, "seed": seed, "variant": variant, "steps": steps,
        "learning_rate": learning_rate, "d_proto": d_proto,
        "init_scale": init_scale, "noise_m": noise_m,
        "corruption_seed": corruption_seed, "config_path": config_path,
    })
    _print_json({
        "checkpoint_path": body["checkpoint_path"],
        "n_steps": body["n_steps"],
        "final_loss": body["final_loss"],
    })


@main.command(name="eval")
@click.argument("dataset", type=click.Path())
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--scorers", default="proto", show_default=True,
              help="Comma-separated: proto, manual.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the full report (with predictions) here.")
@click.option("--predictions", "include_predictions", is_flag=True,
              help="Include per-instance predictions on stdout.")
@click.pass_context
def eval_cmd(ctx, dataset, checkpoint, scorers, out_path, include_predictions):
    """Score the test split and report accuracy."""
    names = [s.strip() for s in scorers.split(",") if s.strip()]
    body = _call(ctx, "/eval", {
        "dataset_path": dataset, "checkpoint_path": checkpoint,
        "scorers": names, "out_path": out_path,
        "include_predictions": include_predictions,
    })
    shown = {
        "accuracy": body["accuracy"],
        "n_test": body["n_test"],
        "scorer_ids": body["scorer_ids"],
        "per_class": body["per_class"],
    }
    if include_predictions:
        shown["predictions"] = body["predictions"]
    if out_path:
        shown["out_path"] = out_path
    _print_json(shown)


@main.command()
@click.argument("dataset", type=click.Path())
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--k", default="8", show_default=True,
              help="k_shot values, e.g. '1,4,8'.")
@click.option("--seeds", default="0,1,2", show_default=True,
              help="Seeds, e.g. '0-19' (inclusive span).")
@click.option("--variant", "variants", default="full", show_default=True,
              help="Comma-separated loss variants.")
@click.option("--noise", "noise_levels", default="0", show_default=True,
              help="Corrupted-label counts, e.g. '0,1,3'.")
@click.option("--workers", type=int, default=4, show_default=True)
@click.option("--steps", type=int, default=None)
@click.option("--lr", "learning_rate", type=float, default=None)
@click.option("--d-proto", type=int, default=None)
@click.option("--init-scale", type=float, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.pass_context
def grid(ctx, dataset, out_dir, k, seeds, variants, noise_levels, workers,
         steps, learning_rate, d_proto, init_scale, config_path):
    """Run a (k, seed, variant, noise) sweep with per-cell caching."""
    body = _call(ctx, "/grid", {
        "dataset_path": dataset, "out_dir": out_dir,
        "k_values": _parse_int_list(k, "--k"),
        "seeds": _parse_int_list(seeds, "--seeds"),
        "variants": [v.strip() for v in variants.split(",") if v.strip()],
        "noise_levels": _parse_int_list(noise_levels, "--noise"),
        "workers": workers, "steps": steps, "learning_rate": learning_rate,
        "d_proto": d_proto, "init_scale": init_scale,
        "config_path": config_path,
    })
    _print_json({
        "n_cells": body["n_cells"],
        "n_computed": body["n_computed"],
        "n_skipped": body["n_skipped"],
        "aggregate_path": body["aggregate_path"],
        "long_csv_path": body["long_csv_path"],
        "aggregate": body["aggregate"],
        "accuracy_drops": body["accuracy_drops"],
    })


@main.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--vocab", required=True, type=click.Path(),
              help="Dataset whose vocab_probe records are ranked.")
@click.option("--top-k", type=int, default=10, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write ranked tokens as NDJSON here instead of stdout.")
@click.pass_context
def probe(ctx, checkpoint, vocab, top_k, out_path):
    """Rank probe tokens against each learned prototype."""
    body = _call(ctx, "/probe", {
        "checkpoint_path": checkpoint, "vocab_path": vocab,
        "top_k": top_k, "out_path": out_path,
    })
    if out_path:
        click.echo(f"wrote {out_path}")
        return
    for cls in body["report"]["classes"]:
        for tok in cls["tokens"]:
            click.echo(json.dumps({
                "class_index": cls["class_index"],
                "class_name": cls["class_name"],
                **tok,
            }))


@main.command()
@click.option("--checkpoint", required=True, type=click.Path())
@click.option("--vocab", required=True, type=click.Path())
@click.option("--words", "words_path", required=True, type=click.Path(),
              help="JSON file mapping class name to its label words.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def similarity(ctx, checkpoint, vocab, words_path, out_path):
    """Prototype-to-manual-verbalizer similarity matrix (rows sum to 1)."""
    body = _call(ctx, "/similarity", {
        "checkpoint_path": checkpoint, "vocab_path": vocab,
        "words_path": words_path, "out_path": out_path,
    })
    _print_json({"class_names": body["class_names"], "matrix": body["matrix"]})


@main.command()
@click.argument("out", type=click.Path())
@click.option("--n-classes", type=int, default=4, show_default=True)
@click.option("--dim", type=int, default=16, show_default=True)
@click.option("--train-per-class", type=int, default=32, show_default=True)
@click.option("--test-per-class", type=int, default=50, show_default=True)
@click.option("--separation", type=float, default=4.0, show_default=True,
              help="Inter-mean distance in noise standard deviations.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--orthogonal/--random-means", "orthogonal_means", default=True,
              help="Place cluster means on orthogonal axes.")
@click.option("--logprobs/--no-logprobs", "with_logprobs", default=True,
              help="Attach synthetic label-word log-probabilities.")
@click.option("--nuisance-dims", type=int, default=0, show_default=True,
              help="Class-independent high-variance coordinates.")
@click.option("--nuisance-scale", type=float, default=4.0, show_default=True)
@click.pass_context
def synth(ctx, out, n_classes, dim, train_per_class, test_per_class,
          separation, seed, orthogonal_means, with_logprobs, nuisance_dims,
          nuisance_scale):
    """Generate a synthetic Gaussian-cluster dataset for desk-scale runs."""
    body = _call(ctx, "/synth", {
        "out_path": out, "n_classes": n_classes, "dim": dim,
        "train_per_class": train_per_class, "test_per_class": test_per_class,
        "separation": separation, "seed": seed,
        "orthogonal_means": orthogonal_means, "with_logprobs": with_logprobs,
        "nuisance_dims": nuisance_dims, "nuisance_scale": nuisance_scale,
    })
    _print_json({"out_path": body["out_path"], "n_records": body["n_records"]})


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
def serve(host, port):
    """Run the service as a standalone HTTP server."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
