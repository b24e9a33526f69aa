"""Command-line pipeline: parse, score, ensemble, evaluate, calibrate, prompt.

Exit codes are a stable scripting contract: 0 success, 1 I/O failure,
2 validation or usage error.  Output files are written atomically
(temp file + rename), and every prediction/report/score output gets a
``<out>.manifest.json`` sidecar recording the config, input paths, tool
version, and per-stage durations.  Durations aside, outputs depend only
on input bytes and flags.
"""

from __future__ import annotations

import functools
import io
import json
import math
import os
import tempfile
import time
from contextlib import contextmanager

import click

from . import __version__
from .corpus import (
    CaseRecord,
    load_cases,
    load_citations,
    load_gold,
    pair_cases_with_gold,
    render_prompt,
    answer_query_text,
    write_citations,
)
from .ensemble import (
    EnsembleConfig,
    combine_votes,
    config_to_dict,
    decide,
    lexical_only as _lexical_only_cfg,
    load_config_file,
)
from .errors import ParseError, ValidationError
from .lexical import bm25_scores, tfidf_cosine, tokenize
from .metrics import (
    GoldMode,
    calibrate as _calibrate,
    evaluate as _evaluate,
    write_calibration,
    write_report,
)
from .scorefile import (
    ScoreTable,
    external_votes,
    load_score_file,
    load_scores,
    validate_coverage,
    write_score_file,
)


def _mapped_errors(fn):
    """Convert domain errors into the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ParseError, ValidationError) as e:
            click.echo(f"error: {e}", err=True)
            raise SystemExit(2) from e
        except OSError as e:
            click.echo(f"I/O error: {e}", err=True)
            raise SystemExit(1) from e

    return wrapper


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".evalign-", suffix=".tmp")
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


class _Stages:
    """Wall-clock durations per pipeline stage, for the run manifest."""

    def __init__(self) -> None:
        self.durations: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        yield
        self.durations[name] = time.perf_counter() - t0


def _write_manifest(
    out_path: str,
    command: str,
    cfg: EnsembleConfig | None,
    inputs: dict[str, str],
    stages: _Stages,
) -> None:
    manifest = {
        "tool": "evalign",
        "version": __version__,
        "command": command,
        "config": config_to_dict(cfg) if cfg is not None else None,
        "inputs": inputs,
        "outputs": [out_path],
        "durations_s": stages.durations,
    }
    _atomic_write_text(out_path + ".manifest.json", json.dumps(manifest, indent=2) + "\n")


def _info(ctx: click.Context, message: str) -> None:
    if not ctx.obj.get("quiet"):
        click.echo(message, err=True)


def _load_cfg(ctx: click.Context) -> EnsembleConfig:
    path = ctx.obj.get("config_path")
    return load_config_file(path) if path else EnsembleConfig()


@click.group()
@click.version_option(__version__, prog_name="evalign")
@click.option(
    "--config",
    "config_path",
    envvar="EVALIGN_CONFIG",
    default=None,
    metavar="PATH",
    help="Ensemble config JSON (falls back to $EVALIGN_CONFIG, then built-in defaults).",
)
@click.option("--quiet", is_flag=True, help="Suppress informational messages.")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, quiet: bool) -> None:
    """Sentence-level evidence alignment: score, fuse, evaluate, calibrate."""
    ctx.obj = {"config_path": config_path, "quiet": quiet}


@cli.command("parse")
@click.option("--cases", "cases_path", required=True, metavar="XML")
@click.option("--answers", "answers_path", default=None, metavar="JSON")
@click.pass_context
@_mapped_errors
def cmd_parse(ctx: click.Context, cases_path: str, answers_path: str | None) -> None:
    """Validate a case file (and optionally a gold-answer file)."""
    cases = load_cases(cases_path)
    n_sentences = sum(len(c.sentences) for c in cases)
    click.echo(f"{len(cases)} case(s), {n_sentences} sentence(s)")
    if answers_path:
        golds = load_gold(answers_path)
        pair_cases_with_gold(cases, golds)
        click.echo(f"{len(golds)} gold answer(s), all aligned")


@cli.command("score")
@click.option("--method", type=click.Choice(["bm25", "tfidf"]), required=True)
@click.option("--cases", "cases_path", required=True, metavar="XML")
@click.option("--answers", "answers_path", required=True, metavar="JSON")
@click.option("--out", "out_path", required=True, metavar="TSV")
@click.pass_context
@_mapped_errors
def cmd_score(
    ctx: click.Context, method: str, cases_path: str, answers_path: str, out_path: str
) -> None:
    """Write raw (pre-normalization) scores for every (case, sentence) pair."""
    cfg = _load_cfg(ctx)
    stages = _Stages()
    with stages.stage("read_inputs"):
        cases = load_cases(cases_path)
        golds = load_gold(answers_path)
        pairs = pair_cases_with_gold(cases, golds)
    with stages.stage("score"):
        rows: list[tuple[str, int, float]] = []
        for case, gold in pairs:
            query = answer_query_text(gold)
            if method == "bm25":
                raw = bm25_scores(
                    tokenize(query), [tokenize(s.text) for s in case.sentences], cfg.bm25_params
                )
            else:
                raw = tfidf_cosine(query, case)
            rows.extend((case.case_id, sid, raw[sid]) for sid in sorted(raw))
    with stages.stage("write_outputs"):
        buf = io.StringIO()
        write_score_file(rows, buf)
        _atomic_write_text(out_path, buf.getvalue())
    _write_manifest(
        out_path,
        f"score --method {method}",
        cfg,
        {"cases": cases_path, "answers": answers_path},
        stages,
    )
    _info(ctx, f"wrote {len(rows)} {method} score row(s) -> {out_path}")


def _load_validated_table(
    path: str, name: str, cases: list[CaseRecord], require_01: bool = False
) -> ScoreTable:
    # external reranker scores must be in sigmoid space; lexical raw
    # scores are unbounded above
    try:
        if require_01:
            with open(path, encoding="utf-8") as f:
                table = load_scores(f)
        else:
            table = load_score_file(path)
        validate_coverage(table, cases)
    except ValidationError as e:
        raise ValidationError(f"{name} scores ({path}): {e}") from None
    return table


def _vote_records(cases, cfg, bm25_table, tfidf_table, ce_table):
    records = {}
    for case in cases:
        vb = external_votes(bm25_table, case, cfg.tau_bm25)
        vt = external_votes(tfidf_table, case, cfg.tau_tfidf)
        vc = external_votes(ce_table, case, cfg.tau_ce) if ce_table is not None else set()
        records[case.case_id] = combine_votes(vb, vt, vc, cfg, case)
    return records


@cli.command("ensemble")
@click.option("--cases", "cases_path", required=True, metavar="XML")
@click.option("--bm25-scores", "bm25_path", required=True, metavar="TSV")
@click.option("--tfidf-scores", "tfidf_path", required=True, metavar="TSV")
@click.option("--ce-scores", "ce_path", default=None, metavar="TSV")
@click.option("--lexical-only", is_flag=True, help="Run without reranker scores (w_ce=0).")
@click.option("--out", "out_path", required=True, metavar="JSON")
@click.pass_context
@_mapped_errors
def cmd_ensemble(
    ctx: click.Context,
    cases_path: str,
    bm25_path: str,
    tfidf_path: str,
    ce_path: str | None,
    lexical_only: bool,
    out_path: str,
) -> None:
    """Fuse per-method score files into final citation predictions."""
    if ce_path is None and not lexical_only:
        raise click.UsageError("--ce-scores is required unless --lexical-only is set")
    if ce_path is not None and lexical_only:
        raise click.UsageError("--ce-scores and --lexical-only are mutually exclusive")
    cfg = _load_cfg(ctx)
    if lexical_only:
        cfg = _lexical_only_cfg(cfg)
    stages = _Stages()
    with stages.stage("read_inputs"):
        cases = load_cases(cases_path)
        bm25_table = _load_validated_table(bm25_path, "bm25", cases)
        tfidf_table = _load_validated_table(tfidf_path, "tfidf", cases)
        ce_table = _load_validated_table(ce_path, "ce", cases, require_01=True) if ce_path else None
    with stages.stage("decide"):
        records = _vote_records(cases, cfg, bm25_table, tfidf_table, ce_table)
        preds = [decide(records[c.case_id], cfg) for c in cases]
    with stages.stage("write_outputs"):
        buf = io.StringIO()
        write_citations(preds, buf)
        _atomic_write_text(out_path, buf.getvalue())
    inputs = {"cases": cases_path, "bm25_scores": bm25_path, "tfidf_scores": tfidf_path}
    if ce_path:
        inputs["ce_scores"] = ce_path
    _write_manifest(out_path, "ensemble", cfg, inputs, stages)
    n_cited = sum(len(p.cited) for p in preds)
    _info(ctx, f"cited {n_cited} sentence(s) across {len(preds)} case(s) -> {out_path}")


_MODE_CHOICES = [m.value for m in GoldMode]


@cli.command("evaluate")
@click.option("--cases", "cases_path", required=True, metavar="XML")
@click.option("--answers", "answers_path", default=None, metavar="JSON")
@click.option("--pred", "pred_path", required=True, metavar="JSON")
@click.option("--mode", type=click.Choice(_MODE_CHOICES), default=GoldMode.CITATIONS.value)
@click.option("--out", "out_path", required=True, metavar="JSON")
@click.pass_context
@_mapped_errors
def cmd_evaluate(
    ctx: click.Context,
    cases_path: str,
    answers_path: str | None,
    pred_path: str,
    mode: str,
    out_path: str,
) -> None:
    """Score a prediction file: micro/macro precision, recall, F1."""
    gold_mode = GoldMode(mode)
    if gold_mode is GoldMode.CITATIONS and not answers_path:
        raise click.UsageError("--answers is required for --mode citations")
    stages = _Stages()
    with stages.stage("read_inputs"):
        cases = load_cases(cases_path)
        golds = load_gold(answers_path) if answers_path else None
        preds = load_citations(pred_path)
    with stages.stage("evaluate"):
        report = _evaluate(cases, golds, preds, gold_mode)
    with stages.stage("write_outputs"):
        buf = io.StringIO()
        write_report(report, buf)
        _atomic_write_text(out_path, buf.getvalue())
    inputs = {"cases": cases_path, "pred": pred_path}
    if answers_path:
        inputs["answers"] = answers_path
    _write_manifest(out_path, f"evaluate --mode {mode}", None, inputs, stages)
    _info(
        ctx,
        "micro P/R/F1 = {:.2f}/{:.2f}/{:.2f}  macro P/R/F1 = {:.2f}/{:.2f}/{:.2f}".format(
            100 * report.micro_p,
            100 * report.micro_r,
            100 * report.micro_f1,
            100 * report.macro_p,
            100 * report.macro_r,
            100 * report.macro_f1,
        ),
    )


def _parse_grid(spec: str | None, cfg: EnsembleConfig) -> list[float]:
    """Grid "start:stop:step", inclusive; default 0..weight-sum step 0.005."""
    if spec is None:
        start, stop, step = 0.0, cfg.weight_sum, 0.005
    else:
        try:
            start_s, stop_s, step_s = spec.split(":")
            start, stop, step = float(start_s), float(stop_s), float(step_s)
        except ValueError:
            raise click.UsageError(f"--grid must be START:STOP:STEP, got {spec!r}") from None
        if step <= 0 or stop < start:
            raise click.UsageError(f"--grid bounds are not ascending: {spec!r}")
    n = math.floor((stop - start) / step + 1e-9) + 1
    return [start + i * step for i in range(n)]


@cli.command("calibrate")
@click.option("--cases", "cases_path", required=True, metavar="XML")
@click.option("--answers", "answers_path", default=None, metavar="JSON")
@click.option("--bm25-scores", "bm25_path", required=True, metavar="TSV")
@click.option("--tfidf-scores", "tfidf_path", required=True, metavar="TSV")
@click.option("--ce-scores", "ce_path", default=None, metavar="TSV")
@click.option("--lexical-only", is_flag=True)
@click.option("--grid", "grid_spec", default=None, metavar="START:STOP:STEP")
@click.option("--mode", type=click.Choice(_MODE_CHOICES), default=GoldMode.CITATIONS.value)
@click.option("--out", "out_path", required=True, metavar="TSV")
@click.pass_context
@_mapped_errors
def cmd_calibrate(
    ctx: click.Context,
    cases_path: str,
    answers_path: str | None,
    bm25_path: str,
    tfidf_path: str,
    ce_path: str | None,
    lexical_only: bool,
    grid_spec: str | None,
    mode: str,
    out_path: str,
) -> None:
    """Sweep the ensemble threshold and report micro P/R/F1 per grid point."""
    if ce_path is None and not lexical_only:
        raise click.UsageError("--ce-scores is required unless --lexical-only is set")
    gold_mode = GoldMode(mode)
    if gold_mode is GoldMode.CITATIONS and not answers_path:
        raise click.UsageError("--answers is required for --mode citations")
    cfg = _load_cfg(ctx)
    if lexical_only:
        cfg = _lexical_only_cfg(cfg)
    stages = _Stages()
    with stages.stage("read_inputs"):
        cases = load_cases(cases_path)
        golds = load_gold(answers_path) if answers_path else None
        bm25_table = _load_validated_table(bm25_path, "bm25", cases)
        tfidf_table = _load_validated_table(tfidf_path, "tfidf", cases)
        ce_table = _load_validated_table(ce_path, "ce", cases, require_01=True) if ce_path else None
    with stages.stage("sweep"):
        records = _vote_records(cases, cfg, bm25_table, tfidf_table, ce_table)
        grid = _parse_grid(grid_spec, cfg)
        result = _calibrate(cases, golds, cfg, grid, mode=gold_mode, vote_records=records)
    with stages.stage("write_outputs"):
        buf = io.StringIO()
        write_calibration(result, buf)
        _atomic_write_text(out_path, buf.getvalue())
    inputs = {"cases": cases_path, "bm25_scores": bm25_path, "tfidf_scores": tfidf_path}
    if answers_path:
        inputs["answers"] = answers_path
    if ce_path:
        inputs["ce_scores"] = ce_path
    _write_manifest(out_path, "calibrate", cfg, inputs, stages)
    best = result.best_report
    _info(
        ctx,
        "best tau_ens = {:g} (micro P/R/F1 = {:.2f}/{:.2f}/{:.2f}) over {} grid point(s)".format(
            result.best_tau,
            100 * best.micro_p,
            100 * best.micro_r,
            100 * best.micro_f1,
            len(result.points),
        ),
    )


@cli.command("prompt")
@click.option("--cases", "cases_path", required=True, metavar="XML")
@click.option("--case-id", "case_id", required=True)
@click.option("--out", "out_path", default=None, metavar="TXT")
@click.pass_context
@_mapped_errors
def cmd_prompt(ctx: click.Context, cases_path: str, case_id: str, out_path: str | None) -> None:
    """Render the answer-generation prompt for one case."""
    cases = load_cases(cases_path)
    match = [c for c in cases if c.case_id == case_id]
    if not match:
        raise ValidationError(f"no case with id {case_id!r} in {cases_path}")
    text = render_prompt(match[0])
    if out_path:
        _atomic_write_text(out_path, text + "\n")
        _info(ctx, f"wrote prompt for case {case_id} -> {out_path}")
    else:
        click.echo(text)


main = cli

if __name__ == "__main__":
    main()
