"""Sidecar CLI: sidecar-train and sidecar-score.

Exit codes follow the main pipeline's convention: 0 success, 1 I/O or
training failure, 2 validation/usage error.
"""

from __future__ import annotations

import functools
import io
import os
import tempfile

import click

from evalign.corpus import load_cases, load_gold
from evalign.errors import EvalignError

from . import __version__
from .errors import SidecarError
from .model import DEFAULT_BASE_MODEL, TrainConfig, finetune, load_model, save_model
from .pairs import SUPERVISION_MODES, build_training_pairs
from .scoring import emit_scores, write_emitted_scores


def _mapped_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EvalignError as e:
            click.echo(f"error: {e}", err=True)
            raise SystemExit(2) from e
        except SidecarError as e:
            click.echo(f"error: {e}", err=True)
            raise SystemExit(1) from e
        except OSError as e:
            click.echo(f"I/O error: {e}", err=True)
            raise SystemExit(1) from e

    return wrapper


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sidecar-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


@click.command("sidecar-train")
@click.version_option(__version__, prog_name="sidecar-train")
@click.option("--cases", "cases_path", required=True, metavar="XML")
@click.option("--gold", "gold_path", required=True, metavar="JSON")
@click.option("--out-model", "model_path", required=True, metavar="DIR")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--backend", type=click.Choice(["hashed", "minilm"]), default="hashed",
              show_default=True,
              help="hashed: self-contained, deterministic; minilm: fine-tune a "
                   "pretrained MS-MARCO cross-encoder (needs the checkpoint).")
@click.option("--base-model", default=DEFAULT_BASE_MODEL, show_default=True,
              help="Checkpoint for the minilm backend.")
@click.option("--epochs", type=int, default=30, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--null-neg-per-sent", type=int, default=2, show_default=True,
              help="Sampled negatives per empty-citation answer sentence.")
@click.option("--supervision", type=click.Choice(list(SUPERVISION_MODES)),
              default="citations", show_default=True)
@click.option("--quiet", is_flag=True)
@_mapped_errors
def train(cases_path, gold_path, model_path, seed, backend, base_model, epochs, lr,
          batch_size, null_neg_per_sent, supervision, quiet):
    """Build training pairs from annotated cases and fine-tune a pair scorer."""
    cases = load_cases(cases_path)
    golds = load_gold(gold_path)
    pairs = build_training_pairs(
        cases, golds, null_neg_per_sent=null_neg_per_sent, seed=seed, supervision=supervision
    )
    cfg = TrainConfig(
        backend=backend, base_model=base_model, epochs=epochs, lr=lr,
        batch_size=batch_size, seed=seed,
    )
    scorer, metadata = finetune(pairs, cfg)
    metadata.update({"supervision": supervision, "null_neg_per_sent": null_neg_per_sent,
                     "seed": seed, "tool_version": __version__})
    save_model(scorer, model_path, metadata)
    if not quiet:
        n_pos = sum(p.label for p in pairs)
        click.echo(
            f"trained {backend} scorer on {len(pairs)} pairs "
            f"({n_pos} positive) -> {model_path}",
            err=True,
        )
        if "final_loss" in metadata:
            click.echo(
                f"loss {metadata['initial_loss']:.4f} -> {metadata['final_loss']:.4f} "
                f"over {epochs} epoch(s)",
                err=True,
            )


@click.command("sidecar-score")
@click.version_option(__version__, prog_name="sidecar-score")
@click.option("--model", "model_path", required=True, metavar="DIR")
@click.option("--cases", "cases_path", required=True, metavar="XML")
@click.option("--gold", "gold_path", required=True, metavar="JSON")
@click.option("--out-tsv", "out_path", required=True, metavar="TSV")
@click.option("--quiet", is_flag=True)
@_mapped_errors
def score(model_path, cases_path, gold_path, out_path, quiet):
    """Score every (case, sentence) pair and write the evalign score TSV."""
    scorer = load_model(model_path)
    cases = load_cases(cases_path)
    golds = load_gold(gold_path)
    rows = emit_scores(scorer, cases, golds)
    buf = io.StringIO()
    write_emitted_scores(rows, buf)
    _atomic_write_text(out_path, buf.getvalue())
    if not quiet:
        click.echo(f"wrote {len(rows)} score row(s) -> {out_path}", err=True)
