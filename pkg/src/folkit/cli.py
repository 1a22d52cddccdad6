"""Command-line entry point orchestrating the pipeline end to end.

Exit codes: 0 on success, 1 on hard errors, 2 on configuration errors
(unknown flags, missing files).  All randomness is seeded from ``--seed``.
Structured logs go to standard error.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from dataclasses import asdict
from functools import wraps
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import click

from . import __version__
from .dataset import build as build_datasets
from .dataset import emit, label_all
from .generate import GenConfig, RetryPolicy, generate, ingest_offline, sampling_plan
from .labeling import classify, cross_check, emit_external
from .lint import lint, tag_failures
from .metrics import (
    RunPredictions,
    format_report,
    majority_vote,
    score_with_buckets,
)
from .prover import Budget, RefutationStatus, format_proof, refute
from .clausify import to_clauses
from .story import (
    FolStory,
    Label,
    NlStory,
    load_corpus,
    normalize_label,
    parse_candidates,
    read_jsonl,
    write_jsonl,
)
from .syntax import ParseError, parse_formula, render

log = logging.getLogger("folkit")


def _budget_options(func):
    @click.option("--max-seconds", type=float, default=5.0, show_default=True,
                  help="Wall-time limit per refutation.")
    @click.option("--max-kept-clauses", type=int, default=20_000, show_default=True,
                  help="Kept-clause limit per refutation.")
    @click.option("--max-iterations", type=int, default=100_000, show_default=True,
                  help="Given-clause iteration limit per refutation.")
    @click.option("--max-term-depth", type=int, default=12, show_default=True,
                  help="Derived clauses nesting terms deeper than this are dropped.")
    @wraps(func)
    def wrapper(*args, max_seconds, max_kept_clauses, max_iterations, max_term_depth, **kwargs):
        budget = Budget(
            max_seconds=max_seconds,
            max_kept_clauses=max_kept_clauses,
            max_iterations=max_iterations,
            max_term_depth=max_term_depth,
        )
        return func(*args, budget=budget, **kwargs)

    return wrapper


def _load_story_file(path: str) -> FolStory:
    """Read a story of FOL formulas from a JSON record or a plain text file.

    JSON records use the corpus interchange fields ``premises_fol`` and
    ``conclusion_fol``.  Text files hold one formula per line (``#`` comments
    allowed); the last line is the conclusion.
    """
    text = Path(path).read_text(encoding="utf-8")
    premises_fol: list[str] = []
    conclusion_fol: str | None = None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(stripped)  # a single (possibly pretty-printed) object
        except json.JSONDecodeError:
            try:
                obj = json.loads(stripped.splitlines()[0])  # first record of a JSONL file
            except json.JSONDecodeError as exc:
                raise click.UsageError(f"{path}: unreadable JSON story: {exc}")
        premises_fol = list(obj.get("premises_fol") or [])
        conclusion_fol = obj.get("conclusion_fol")
        if not premises_fol or not conclusion_fol:
            raise click.UsageError(f"{path}: record lacks premises_fol/conclusion_fol")
    else:
        lines = [l.strip() for l in text.splitlines()]
        lines = [l for l in lines if l and not l.startswith("#")]
        if len(lines) < 2:
            raise click.UsageError(f"{path}: need at least one premise line and a conclusion line")
        premises_fol, conclusion_fol = lines[:-1], lines[-1]
    try:
        premises = tuple(parse_formula(s) for s in premises_fol)
        conclusion = parse_formula(conclusion_fol)
    except ParseError as exc:
        raise click.ClickException(f"{path}: {exc}") from exc
    return FolStory(premises, conclusion, tuple(premises_fol) + (conclusion_fol,))


def _load_fol_corpus(path: str) -> list[tuple[str, FolStory]]:
    """All corpus records that carry complete FOL translations."""
    out: list[tuple[str, FolStory]] = []
    for lineno, obj in read_jsonl(path):
        fols = obj.get("premises_fol")
        conclusion = obj.get("conclusion_fol")
        if not fols or not conclusion:
            continue
        story_id = str(obj.get("id", f"line-{lineno}"))
        try:
            story = FolStory(
                tuple(parse_formula(s) for s in fols),
                parse_formula(conclusion),
                tuple(fols) + (conclusion,),
            )
        except (ParseError, ValueError) as exc:
            log.warning("%s:%d: skipping story with bad FOL: %s", path, lineno, exc)
            continue
        out.append((story_id, story))
    return out


def _load_exemplars(path: str) -> list[tuple[NlStory, FolStory]]:
    exemplars = []
    for story in load_corpus(path):
        if story.gold_fol is None:
            continue
        exemplars.append((story, story.gold_fol))
    return exemplars


@click.group()
@click.version_option(version=__version__, prog_name="folkit")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging to stderr.")
def main(verbose: bool):
    """First-order logic toolkit: parse, prove, label, build datasets, evaluate."""
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command("parse")
@click.argument("formula", required=False)
@click.option("--file", "file_", type=click.Path(exists=True, dir_okay=False),
              help="Read the formula from a file instead of the argument.")
@click.option("--dialect", type=click.Choice(["ascii", "unicode"]), default="ascii",
              show_default=True, help="Output notation.")
def parse_cmd(formula: str | None, file_: str | None, dialect: str):
    """Parse one formula and print its normalized rendering."""
    if formula is None and file_ is None:
        raise click.UsageError("pass a formula or --file")
    text = formula if formula is not None else Path(file_).read_text(encoding="utf-8").strip()
    try:
        parsed = parse_formula(text)
    except ParseError as exc:
        for diag in exc.diagnostics:
            click.echo(f"error at bytes {diag.start}..{diag.end}: {diag.message}", err=True)
        raise SystemExit(1)
    click.echo(render(parsed, dialect))


@main.command("prove")
@click.option("--story", "story_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Story file (JSON record or one formula per line).")
@click.option("--direction", type=click.Choice(["entail", "contradict", "both"]),
              default="both", show_default=True)
@click.option("--trace", is_flag=True, help="Print the derivation when refuted.")
@click.option("--equality-axioms", "equality", is_flag=True,
              help="Add equality axiom clauses for stories using '='.")
@_budget_options
def prove_cmd(story_path: str, direction: str, trace: bool, equality: bool, budget: Budget):
    """Run the refutation search on a story and report the outcome."""
    from .clausify import equality_axioms

    story = _load_story_file(story_path)
    clausified = to_clauses(story)
    extra = equality_axioms(list(story.premises) + [story.conclusion]) if equality else []
    runs = []
    if direction in ("entail", "both"):
        runs.append(
            ("entail", extra + clausified.premise_clauses + clausified.conclusion_clauses_neg)
        )
    if direction in ("contradict", "both"):
        runs.append(
            ("contradict", extra + clausified.premise_clauses + clausified.conclusion_clauses_pos)
        )
    for name, clauses in runs:
        outcome = refute(clauses, budget)
        click.echo(
            f"{name}: {outcome.status.value} "
            f"(iterations={outcome.iterations}, kept={outcome.kept_clause_count}, "
            f"seconds={outcome.elapsed_seconds:.3f})"
        )
        if trace and outcome.status is RefutationStatus.REFUTED:
            click.echo(format_proof(outcome))


@main.command("classify")
@click.option("--story", "story_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Story file (JSON record or one formula per line).")
@click.option("--stats", "show_stats", is_flag=True, help="Also print proof statistics.")
@click.option("--equality-axioms", "equality", is_flag=True,
              help="Add equality axiom clauses for stories using '='.")
@_budget_options
def classify_cmd(story_path: str, show_stats: bool, equality: bool, budget: Budget):
    """Print the logical label of a story."""
    story = _load_story_file(story_path)
    result = classify(story, budget, use_equality_axioms=equality)
    click.echo(result.label.value)
    if result.error_reason is not None:
        click.echo(f"reason: {result.error_reason.value}", err=True)
    if show_stats and result.entail_outcome is not None:
        for name, outcome in (("entail", result.entail_outcome),
                              ("contradict", result.contradict_outcome)):
            click.echo(
                f"{name}: {outcome.status.value} iterations={outcome.iterations} "
                f"kept={outcome.kept_clause_count}",
                err=True,
            )


@main.command("lint")
@click.option("--story", "story_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Story file (JSON record or one formula per line).")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Lint every corpus record that carries FOL.")
@click.option("--edit-distance", type=int, default=2, show_default=True,
              help="Near-duplicate edit distance threshold.")
@click.option("--prefix-suffix", type=int, default=6, show_default=True,
              help="Near-duplicate strict prefix suffix-length threshold.")
@click.option("--json", "as_json", is_flag=True, help="Emit structured records.")
def lint_cmd(story_path, corpus_path, edit_distance, prefix_suffix, as_json):
    """Print consistency diagnostics for a story or a whole corpus."""
    if (story_path is None) == (corpus_path is None):
        raise click.UsageError("pass exactly one of --story or --corpus")
    if story_path is not None:
        targets = [("story", _load_story_file(story_path))]
    else:
        targets = _load_fol_corpus(corpus_path)
    emitted = 0
    for story_id, story in targets:
        diagnostics = lint(story, near_dup_edit_distance=edit_distance,
                           near_dup_suffix=prefix_suffix)
        for diag in diagnostics:
            emitted += 1
            if as_json:
                click.echo(json.dumps({
                    "story_id": story_id,
                    "kind": diag.kind.value,
                    "formula_indices": list(diag.formula_indices),
                    "symbols": list(diag.symbols),
                    "message": diag.message,
                }, sort_keys=True))
            else:
                click.echo(f"{story_id}: {diag}")
    if not emitted and not as_json:
        click.echo("no diagnostics")


@main.command("gen")
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--exemplars", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Corpus file with gold FOL translations used as in-context examples.")
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Candidate records output file.")
@click.option("--endpoint", required=True, help="Chat-completion endpoint URL.")
@click.option("--model", "models", multiple=True, required=True)
@click.option("--temperature", "temperatures", multiple=True, type=float,
              default=(0.25, 0.6), show_default=True)
@click.option("--shots", "shot_counts", multiple=True, type=int, default=(2, 4, 8),
              show_default=True)
@click.option("--samples-per-combination", type=int, default=None)
@click.option("--total-samples", type=int, default=30, show_default=True)
@click.option("--max-in-flight", type=int, default=4, show_default=True)
@click.option("--retries", type=int, default=3, show_default=True)
@click.option("--backoff", type=float, default=0.5, show_default=True)
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None,
              help="Completion cache directory (enables resuming).")
@click.option("--api-key-env", default="FOLKIT_API_KEY", show_default=True)
@click.option("--request-timeout", type=float, default=60.0, show_default=True)
def gen_cmd(corpus, exemplars, out, endpoint, models, temperatures, shot_counts,
            samples_per_combination, total_samples, max_in_flight, retries, backoff,
            cache_dir, api_key_env, request_timeout):
    """Sample candidate FOL translations from a chat-completion endpoint."""
    from .story import candidate_to_record

    config = GenConfig(
        endpoint=endpoint,
        models=tuple(models),
        api_key_env=api_key_env,
        temperatures=tuple(temperatures),
        shot_counts=tuple(shot_counts),
        samples_per_combination=samples_per_combination,
        total_samples=total_samples,
        max_in_flight=max_in_flight,
        retry=RetryPolicy(max_attempts=retries, backoff_base=backoff),
        cache_dir=cache_dir,
        request_timeout=request_timeout,
    )
    stories = load_corpus(corpus)
    exemplar_pairs = _load_exemplars(exemplars)
    plan = sampling_plan(config)
    click.echo(f"{len(stories)} stories x {len(plan)} samples each", err=True)
    records = generate(stories, exemplar_pairs, config)
    write_jsonl(out, (candidate_to_record(r) for r in records if r.raw_completion is not None))
    failures = sum(1 for r in records if r.failure_reason == "network")
    click.echo(f"wrote {len(records) - failures} records to {out} "
               f"({failures} network failure(s))")


@main.command("ingest")
@click.option("--candidates", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write records enriched with parse status.")
def ingest_cmd(candidates: str, corpus: str, out: str | None):
    """Load offline candidate records and attach parse results."""
    from .story import candidate_to_record

    records = ingest_offline(candidates)
    stories = {s.id: s for s in load_corpus(corpus)}
    parse_candidates(records, stories)
    parsed = sum(1 for r in records if r.story is not None)
    click.echo(f"{len(records)} records: {parsed} parsed, {len(records) - parsed} failed")
    if out:
        rows = []
        for record in records:
            row = candidate_to_record(record)
            row["parse_ok"] = record.story is not None
            if record.failure_reason:
                row["failure_reason"] = record.failure_reason
            rows.append(row)
        write_jsonl(out, rows)
        click.echo(f"wrote {out}")


@main.command("build")
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--candidates", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pairing", type=click.Choice(["sampled", "all"]), default="sampled",
              show_default=True)
@click.option("--sft-target", type=int, default=None, help="Cap on emitted SFT instances.")
@click.option("--pref-target", type=int, default=None, help="Cap on emitted preference pairs.")
@click.option("--prompt-shots", type=int, default=0, show_default=True,
              help="Shots in the stored prompts (0 = instruction + query only).")
@click.option("--exemplars", "exemplars_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Exemplar corpus, required when --prompt-shots > 0.")
@click.option("--dialect", type=click.Choice(["ascii", "unicode"]), default="ascii",
              show_default=True, help="Notation for emitted completions.")
@click.option("--workers", type=int, default=os.cpu_count() or 1, show_default="logical cores",
              help="Parallel labeling workers.")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render the label-distribution figure next to the outputs.")
@_budget_options
def build_cmd(corpus, candidates, out_dir, seed, pairing, sft_target, pref_target,
              prompt_shots, exemplars_path, dialect, workers, figures, budget: Budget):
    """Label candidates, filter by gold-label match, and emit datasets."""
    stories = load_corpus(corpus)
    stories_by_id = {s.id: s for s in stories}
    records = ingest_offline(candidates)
    parse_candidates(records, stories_by_id)
    label_all(records, budget, workers=workers)
    exemplar_pairs = _load_exemplars(exemplars_path) if exemplars_path else []
    if prompt_shots > len(exemplar_pairs):
        raise click.UsageError(
            f"--prompt-shots {prompt_shots} needs at least that many exemplars "
            f"(got {len(exemplar_pairs)})"
        )
    result = build_datasets(
        stories, records, seed=seed, sft_target=sft_target, pref_target=pref_target,
        pairing=pairing, prompt_shots=prompt_shots, exemplars=exemplar_pairs,
        dialect=dialect,
    )
    manifest = {
        "seed": seed,
        "pairing": pairing,
        "budget": asdict(budget),
        "sft_target": sft_target,
        "pref_target": pref_target,
        "prompt_shots": prompt_shots,
        "dialect": dialect,
        "corpus": str(corpus),
        "candidates": str(candidates),
        "tool_version": __version__,
    }
    paths = emit(result, out_dir, manifest)
    click.echo(result.stats.format_table())
    histogram = tag_failures(records, {s.id: s.gold_label for s in stories})
    click.echo("failure tags: " + json.dumps(histogram, sort_keys=True))
    if figures:
        from .plots import save_label_distribution_figure

        figure_path = Path(out_dir) / "label_distribution.png"
        save_label_distribution_figure(result.stats.to_dict()["per_label"], figure_path)
        click.echo(f"figure: {figure_path}")
    click.echo(f"wrote {paths['sft']}, {paths['pref']}, {paths['stats']}")


def _read_predictions(path: str, story_ids: list[str]) -> list[RunPredictions]:
    by_run: dict[int, dict[str, Label]] = {}
    for lineno, obj in read_jsonl(path):
        try:
            run = int(obj.get("run", 0))
            story_id = str(obj["story_id"])
            raw = str(obj["label"])
            label = Label.ERROR if raw.strip().casefold() == "error" else normalize_label(raw)
        except (KeyError, ValueError) as exc:
            raise click.UsageError(f"{path}:{lineno}: bad prediction record: {exc}")
        by_run.setdefault(run, {})[story_id] = label
    runs = []
    for run_index in sorted(by_run):
        predictions = by_run[run_index]
        missing = [sid for sid in story_ids if sid not in predictions]
        if missing:
            raise click.UsageError(
                f"{path}: run {run_index} lacks predictions for {len(missing)} stories "
                f"(first: {missing[0]})"
            )
        runs.append(RunPredictions(run_index, tuple(predictions[sid] for sid in story_ids)))
    if not runs:
        raise click.UsageError(f"{path}: no predictions found")
    return runs


@main.command("eval")
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), required=True,
              help="JSONL rows: {story_id, run, label}.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Write report.json, report.txt, and figures here.")
@click.option("--majority", is_flag=True, help="Collapse runs by majority vote first.")
@click.option("--buckets/--no-buckets", default=True, show_default=True,
              help="Also score per context-length bucket.")
def eval_cmd(corpus, predictions, out_dir, majority, buckets):
    """Score predicted labels against the corpus gold labels."""
    stories = load_corpus(corpus)
    story_ids = [s.id for s in stories]
    golds = [s.gold_label for s in stories]
    runs = _read_predictions(predictions, story_ids)
    if majority:
        runs = [majority_vote(runs)]
    counts = [len(s.premises) for s in stories] if buckets else None
    report = score_with_buckets(golds, runs, counts)
    table = format_report(report)
    click.echo(table)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        (out / "report.txt").write_text(table + "\n", encoding="utf-8")
        from .plots import save_bucket_figure, save_rates_figure

        save_rates_figure(report, out / "rates.png")
        bucket_path = save_bucket_figure(report, out / "buckets.png")
        written = ["report.json", "report.txt", "rates.png"]
        if bucket_path is not None:
            written.append("buckets.png")
        click.echo(f"wrote {', '.join(written)} to {out}")


@main.command("stats")
@click.option("--build-dir", type=click.Path(exists=True, file_okay=False), required=True,
              help="Directory produced by the build subcommand.")
@click.option("--figures/--no-figures", default=True, show_default=True)
def stats_cmd(build_dir: str, figures: bool):
    """Print the per-label dataset statistics table for a build."""
    stats_path = Path(build_dir) / "stats.json"
    if not stats_path.exists():
        raise click.UsageError(f"{stats_path} not found")
    payload = json.loads(stats_path.read_text(encoding="utf-8"))
    per_label = payload["per_label"]
    order = [n for n in ("True", "False", "Uncertain", "Total") if n in per_label]
    order += [n for n in per_label if n not in order]
    lines = [f"{'Logical Label':<14} {'corpus':>8} {'sft':>8} {'pref':>8}"]
    for name in order:
        row = per_label[name]
        lines.append(f"{name:<14} {row['corpus']:>8} {row['sft']:>8} {row['pref']:>8}")
    click.echo("\n".join(lines))
    if figures:
        from .plots import save_label_distribution_figure

        figure_path = Path(build_dir) / "label_distribution.png"
        save_label_distribution_figure(per_label, figure_path)
        click.echo(f"figure: {figure_path}")


@main.command("crosscheck")
@click.option("--stories", "stories_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Corpus file with FOL translations.")
@click.option("--binary", default="prover9", show_default=True,
              help="External prover binary.")
@click.option("--workers", type=int, default=4, show_default=True)
@_budget_options
def crosscheck_cmd(stories_path: str, binary: str, workers: int, budget: Budget):
    """Compare internal labels against an external prover."""
    stories = _load_fol_corpus(stories_path)
    report = cross_check(stories, budget, external_binary_path=binary, max_workers=workers)
    click.echo(report.format_table())


@main.command("emit-problem")
@click.option("--story", "story_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
def emit_problem_cmd(story_path: str):
    """Print the external prover problem file for a story."""
    story = _load_story_file(story_path)
    click.echo(emit_external(story), nl=False)


def make_server(host: str, port: int, budget: Budget) -> ThreadingHTTPServer:
    """HTTP server exposing classification at POST /classify."""

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            log.debug("serve: " + fmt, *args)

        def _send(self, code: int, payload: dict):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            if self.path == "/healthz":
                self._send(200, {"status": "ok", "version": __version__})
            else:
                self._send(404, {"error": "unknown path"})

        def do_POST(self):
            if self.path != "/classify":
                self._send(404, {"error": "unknown path"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length) or b"{}")
                premises = payload["premises"]
                conclusion = payload["conclusion"]
                if not isinstance(premises, list) or not premises:
                    raise ValueError("premises must be a non-empty list")
            except (ValueError, KeyError) as exc:
                self._send(400, {"error": f"bad request: {exc}"})
                return
            try:
                story = FolStory(
                    tuple(parse_formula(str(p)) for p in premises),
                    parse_formula(str(conclusion)),
                    tuple(str(p) for p in premises) + (str(conclusion),),
                )
            except ParseError as exc:
                self._send(
                    200,
                    {
                        "label": "Error",
                        "error_reason": "Parse",
                        "diagnostics": [
                            {"start": d.start, "end": d.end, "message": d.message}
                            for d in exc.diagnostics
                        ],
                    },
                )
                return
            result = classify(story, budget)
            diagnostics = [str(d) for d in lint(story)]
            response = {
                "label": result.label.value,
                "error_reason": result.error_reason.value if result.error_reason else None,
                "budget_limited": result.budget_limited,
                "diagnostics": diagnostics,
            }
            for name, outcome in (("entail", result.entail_outcome),
                                  ("contradict", result.contradict_outcome)):
                if outcome is not None:
                    response[name] = {
                        "status": outcome.status.value,
                        "iterations": outcome.iterations,
                        "kept_clauses": outcome.kept_clause_count,
                        "seconds": outcome.elapsed_seconds,
                    }
            self._send(200, response)

    return ThreadingHTTPServer((host, port), Handler)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8421, show_default=True)
@_budget_options
def serve_cmd(host: str, port: int, budget: Budget):
    """Serve classification over HTTP (POST /classify)."""
    server = make_server(host, port, budget)
    click.echo(f"listening on http://{host}:{server.server_address[1]}", err=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


if __name__ == "__main__":
    main()
