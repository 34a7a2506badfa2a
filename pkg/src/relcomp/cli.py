"""Command-line front end.

Subcommands: ``correlate`` (correlation diagnostics), ``train`` (fit the
operator on relation groups), ``eval`` (benchmark a trained or fixed
operator), ``verify`` (Monte Carlo checks of the expected-loss
identities), and ``compose`` (one-off relation vector for a word pair).

Every command accepts ``--config`` (flat ``key=value`` lines or a JSON
config echo; flags override the file) and writes a ``config_echo.json``
with the effective parameters next to its outputs, so a run can be
reproduced byte-for-byte from the echo.  Config keys equal the option
names with dashes replaced by underscores.  Exit codes: 0 success,
2 input error, 3 numerical divergence, 4 verification failure.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import click

from .bilinear import BilinearOperator, compose, load_operator, save_operator
from .embeddings import correlation_report, load_embeddings
from .embeddings import standardize as standardize_embeddings
from .errors import DivergenceError, RelcompError
from .evaluation import (
    eval_bats_holdout,
    eval_maxdiff,
    eval_sat,
    load_sat_questions,
    load_semeval_relations,
    write_reports_json,
    write_reports_tsv,
)
from .training import TrainingConfig, load_relation_groups, train
from .verification import run_verification_manifest, write_manifest

EXIT_INPUT_ERROR = 2
EXIT_DIVERGENCE = 3
EXIT_VERIFICATION_FAILED = 4


@contextmanager
def _cli_errors():
    try:
        yield
    except DivergenceError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DIVERGENCE)
    except (RelcompError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT_ERROR)


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _read_config_file(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RelcompError(f"config file is not valid JSON: {exc}") from None
        doc.pop("command", None)
    else:
        doc = {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise RelcompError(f"config line {number}: expected key=value")
            doc[key.strip()] = value.strip()
    return {
        key.replace("-", "_"): value for key, value in doc.items() if value is not None
    }


def _load_config(ctx, param, value):
    if value:
        try:
            overrides = _read_config_file(value)
        except (RelcompError, OSError) as exc:
            raise click.UsageError(str(exc)) from None
        ctx.default_map = {**(ctx.default_map or {}), **overrides}
    return value


def _config_option(fn):
    return click.option(
        "--config",
        type=click.Path(exists=True, dir_okay=False),
        callback=_load_config,
        is_eager=True,
        expose_value=True,
        envvar="RELCOMP_CONFIG",
        help="key=value or JSON config file; flags override it "
        "(RELCOMP_CONFIG sets the default path).",
    )(fn)


def _require_file(path: str, what: str) -> None:
    if not Path(path).is_file():
        raise RelcompError(f"{what} file does not exist: {path}")


def _require_exists(path: str, what: str) -> None:
    if not Path(path).exists():
        raise RelcompError(f"{what} path does not exist: {path}")


def _ensure_out(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_echo(out: Path, command: str, params: dict) -> None:
    doc = {"command": command}
    doc.update({k: v for k, v in params.items() if k != "config"})
    with open(out / "config_echo.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


@click.group()
@click.version_option(version="0.1.0", prog_name="relcomp")
def main():
    """Relation embeddings composed from word embeddings."""


_format_option = click.option(
    "--format",
    type=click.Choice(["auto", "no-header", "with-header"]),
    default="auto",
    show_default=True,
    help="Embedding text format; auto detects a 'm d' header line.",
)


@main.command()
@_config_option
@click.option("--embeddings", required=True, type=str)
@_format_option
@click.option("--bins", type=int, default=100, show_default=True)
@click.option("--standardize/--no-standardize", default=False, show_default=True,
              help="Standardize dimensions before correlating.")
@click.option("--include-matrix/--no-include-matrix", default=False, show_default=True,
              help="Embed the full correlation matrix in the summary JSON.")
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--out", required=True, type=str)
@click.option("--verbose", "-v", is_flag=True)
@click.pass_context
def correlate(ctx, config, embeddings, format, bins, standardize, include_matrix,
              figures, out, verbose):
    """Cross-dimensional correlation diagnostics for an embedding file."""
    _setup_logging(verbose)
    with _cli_errors():
        _require_file(embeddings, "embeddings")
        out_dir = _ensure_out(out)
        emb = load_embeddings(embeddings, format)
        if standardize:
            emb, _ = standardize_embeddings(emb)
        report = correlation_report(emb, bins=bins)
        report.write_json(out_dir / "correlation_summary.json", include_matrix)
        report.write_histogram_csv(out_dir / "correlation_histogram.csv")
        if figures:
            from . import plots

            plots.render_correlation_histogram(
                report, out_dir / "correlation_histogram.png"
            )
        _write_echo(out_dir, "correlate", ctx.params)
        click.echo(
            f"mean |corr| = {report.mean_abs_offdiag:.6f}, "
            f"sd = {report.sd_offdiag:.6f} ({emb.n_words} words, d={emb.dim})"
        )


@main.command(name="train")
@_config_option
@click.option("--embeddings", required=True, type=str)
@_format_option
@click.option("--groups", required=True, type=str,
              help="Relation-group directory (head<TAB>tail files) or JSONL file.")
@click.option("--epochs", type=int, required=True)
@click.option("--learning-rate", type=float, default=0.01, show_default=True)
@click.option("--lambda-a", type=float, default=0.01, show_default=True,
              help="Frobenius penalty weight on the interaction tensor.")
@click.option("--negatives-per-pair", type=int, default=10, show_default=True)
@click.option("--negative-strategy", type=click.Choice(["uniform", "nearest-in-pool"]),
              default="nearest-in-pool", show_default=True)
@click.option("--candidate-pool", type=int, default=50, show_default=True)
@click.option("--max-positives-per-group", type=int, default=None,
              help="Uniformly subsample within-group pairings beyond this budget.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--init-lo", type=float, default=-1.0, show_default=True)
@click.option("--init-hi", type=float, default=1.0, show_default=True)
@click.option("--adagrad-epsilon", type=float, default=1e-8, show_default=True)
@click.option("--batch-size", type=int, default=64, show_default=True)
@click.option("--standardize/--no-standardize", default=True, show_default=True,
              help="Standardize embeddings first (training expects this; "
              "disabling it is an explicit override).")
@click.option("--full-pq", is_flag=True, default=False,
              help="Fit full P and Q matrices instead of p*I, q*I.")
@click.option("--sat", type=str, default=None,
              help="SAT questions JSONL to score during training.")
@click.option("--semeval", type=str, default=None,
              help="MaxDiff relations JSON to score during training.")
@click.option("--eval-every", type=int, default=10, show_default=True)
@click.option("--timings/--no-timings", default=False, show_default=True,
              help="Write wall-clock seconds into the trace CSV (makes reruns "
              "differ byte-wise).")
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--out", required=True, type=str)
@click.option("--verbose", "-v", is_flag=True)
@click.pass_context
def train_cmd(ctx, config, embeddings, format, groups, epochs, learning_rate,
              lambda_a, negatives_per_pair, negative_strategy, candidate_pool,
              max_positives_per_group, seed, init_lo, init_hi, adagrad_epsilon,
              batch_size, standardize, full_pq, sat, semeval, eval_every,
              timings, figures, out, verbose):
    """Fit the operator on relation groups; writes operator.json + trace.csv."""
    _setup_logging(verbose)
    with _cli_errors():
        _require_file(embeddings, "embeddings")
        _require_exists(groups, "relation-group")
        if sat:
            _require_file(sat, "SAT questions")
        if semeval:
            _require_file(semeval, "MaxDiff relations")
        out_dir = _ensure_out(out)

        emb = load_embeddings(embeddings, format)
        if standardize:
            emb, _ = standardize_embeddings(emb)
        relation_groups = load_relation_groups(groups)
        cfg = TrainingConfig(
            epochs=epochs,
            learning_rate=learning_rate,
            lambda_A=lambda_a,
            negatives_per_pair=negatives_per_pair,
            negative_strategy=negative_strategy,
            candidate_pool=candidate_pool,
            seed=seed,
            init_range=(init_lo, init_hi),
            adagrad_epsilon=adagrad_epsilon,
            batch_size=batch_size,
            max_positives_per_group=max_positives_per_group,
            allow_unstandardized=not standardize,
            full_pq=full_pq,
        )

        hook = None
        if sat or semeval:
            sat_questions = load_sat_questions(sat) if sat else None
            semeval_relations = load_semeval_relations(semeval) if semeval else None

            def hook(op, epoch):
                if eval_every <= 0:
                    return {}
                if epoch % eval_every and epoch != epochs - 1:
                    return {}
                scores = {}
                if sat_questions:
                    scores["sat_acc"] = eval_sat(op, emb, sat_questions).score
                if semeval_relations:
                    scores["maxdiff_acc"] = eval_maxdiff(
                        op, emb, semeval_relations
                    ).score
                return scores

        operator, trace = train(emb, relation_groups, cfg, eval_hook=hook)
        save_operator(operator, out_dir / "operator.json")
        trace.write_csv(out_dir / "trace.csv", include_timings=timings)
        if figures:
            from . import plots

            plots.render_training_curves(trace, out_dir / "training_curves.png")
        _write_echo(out_dir, "train", ctx.params)
        if trace.records:
            last = trace.records[-1]
            click.echo(
                f"trained {epochs} epochs: loss={last.loss:.6f} "
                f"||A||_F={last.frob_A:.6f} p={last.p:.4f} q={last.q:.4f}"
            )
        else:
            click.echo("0 epochs: operator equals its initialization")


@main.command(name="eval")
@_config_option
@click.option("--embeddings", required=True, type=str)
@_format_option
@click.option("--operator", type=str, default=None, help="Trained operator JSON.")
@click.option("--pairdiff", is_flag=True, default=False,
              help="Evaluate the fixed vector-offset operator instead of a file.")
@click.option("--sat", type=str, default=None)
@click.option("--semeval", type=str, default=None)
@click.option("--bats", type=str, default=None,
              help="Relation groups for held-out classification.")
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--oov-policy", type=click.Choice(["skip", "count-wrong"]),
              default="skip", show_default=True)
@click.option("--standardize/--no-standardize", default=False, show_default=True)
@click.option("--include-items/--no-include-items", default=True, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--out", required=True, type=str)
@click.option("--verbose", "-v", is_flag=True)
@click.pass_context
def eval_cmd(ctx, config, embeddings, format, operator, pairdiff, sat, semeval,
             bats, folds, oov_policy, standardize, include_items, seed, figures,
             out, verbose):
    """Score an operator on SAT / MaxDiff / held-out benchmarks."""
    _setup_logging(verbose)
    with _cli_errors():
        if bool(operator) == pairdiff:
            raise RelcompError("give exactly one of --operator or --pairdiff")
        if not (sat or semeval or bats):
            raise RelcompError("give at least one of --sat, --semeval, --bats")
        _require_file(embeddings, "embeddings")
        if operator:
            _require_file(operator, "operator")
        for path, what in ((sat, "SAT questions"), (semeval, "MaxDiff relations")):
            if path:
                _require_file(path, what)
        if bats:
            _require_exists(bats, "relation-group")
        out_dir = _ensure_out(out)

        emb = load_embeddings(embeddings, format)
        if standardize:
            emb, _ = standardize_embeddings(emb)
        op = (
            BilinearOperator.pairdiff(emb.dim) if pairdiff else load_operator(operator)
        )

        reports = []
        if sat:
            reports.append(eval_sat(op, emb, load_sat_questions(sat), oov_policy))
        if semeval:
            reports.append(
                eval_maxdiff(op, emb, load_semeval_relations(semeval), oov_policy)
            )
        if bats:
            reports.append(
                eval_bats_holdout(
                    op, emb, load_relation_groups(bats), k=folds, seed=seed
                )
            )

        write_reports_json(reports, out_dir / "eval_report.json", include_items)
        write_reports_tsv(reports, out_dir / "eval_summary.tsv")
        if figures:
            from . import plots

            plots.render_eval_scores(reports, out_dir / "eval_scores.png")
        _write_echo(out_dir, "eval", ctx.params)
        for report in reports:
            click.echo(
                f"{report.metric}: {report.score:.4f} "
                f"({report.correct}/{report.attempted}, {report.skipped} skipped)"
            )


@main.command()
@_config_option
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--independence-dim", type=int, default=10, show_default=True)
@click.option("--independence-n", type=int, default=50_000, show_default=True)
@click.option("--n-operators", type=int, default=20, show_default=True)
@click.option("--a-scale", type=float, default=1.0, show_default=True)
@click.option("--closed-form-dim", type=int, default=5, show_default=True)
@click.option("--closed-form-n", type=int, default=100_000, show_default=True)
@click.option("--pq-draws", type=int, default=5, show_default=True)
@click.option("--zero-loss-dim", type=int, default=10, show_default=True)
@click.option("--zero-loss-n", type=int, default=50_000, show_default=True)
@click.option("--probe-n", type=int, default=50_000, show_default=True)
@click.option("--threads", type=int, default=None,
              help="Worker threads for Monte Carlo sampling "
              "[default: available parallelism]; estimates do not depend on it.")
@click.option("--strict", is_flag=True, default=False,
              help="Re-run every gating check with a second derived seed.")
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--out", required=True, type=str)
@click.option("--verbose", "-v", is_flag=True)
@click.pass_context
def verify(ctx, config, seed, independence_dim, independence_n, n_operators,
           a_scale, closed_form_dim, closed_form_n, pq_draws, zero_loss_dim,
           zero_loss_n, probe_n, threads, strict, figures, out, verbose):
    """Run the Monte Carlo verification manifest; exit 4 on any failed check."""
    _setup_logging(verbose)
    with _cli_errors():
        out_dir = _ensure_out(out)
        if threads is None:
            threads = os.cpu_count() or 1
        if threads < 1:
            raise RelcompError("threads must be >= 1")
        manifest = run_verification_manifest(
            {
                "seed": seed,
                "independence_dim": independence_dim,
                "independence_n": independence_n,
                "n_operators": n_operators,
                "a_scale": a_scale,
                "closed_form_dim": closed_form_dim,
                "closed_form_n": closed_form_n,
                "pq_draws": pq_draws,
                "zero_loss_dim": zero_loss_dim,
                "zero_loss_n": zero_loss_n,
                "probe_n": probe_n,
            },
            threads=threads,
            strict=strict,
        )
        write_manifest(manifest, out_dir / "verification_manifest.json")
        if figures:
            from . import plots

            plots.render_verification(manifest, out_dir / "verification_estimates.png")
        _write_echo(out_dir, "verify", ctx.params)
        for warning in manifest["warnings"]:
            click.echo(f"warning: {warning}", err=True)
        for entry in manifest["checks"]:
            status = "PASS" if entry["pass"] else "FAIL"
            click.echo(
                f"[{status}] {entry['check']}: estimate={entry['estimate']:.6g} "
                f"se={entry['std_error']:.3g} n={entry['n']}"
            )
        if not manifest["pass"]:
            click.echo("verification FAILED", err=True)
            sys.exit(EXIT_VERIFICATION_FAILED)
        click.echo("verification passed")


@main.command(name="compose")
@_config_option
@click.argument("word_h")
@click.argument("word_t")
@click.option("--embeddings", required=True, type=str)
@_format_option
@click.option("--operator", type=str, default=None)
@click.option("--pairdiff", is_flag=True, default=False)
@click.option("--standardize/--no-standardize", default=False, show_default=True)
@click.option("--out", type=str, default=None,
              help="Also write relation_vector.json and a config echo here.")
@click.option("--verbose", "-v", is_flag=True)
@click.pass_context
def compose_cmd(ctx, config, word_h, word_t, embeddings, format, operator,
                pairdiff, standardize, out, verbose):
    """Print the relation vector for a word pair as JSON."""
    _setup_logging(verbose)
    with _cli_errors():
        if bool(operator) == pairdiff:
            raise RelcompError("give exactly one of --operator or --pairdiff")
        _require_file(embeddings, "embeddings")
        if operator:
            _require_file(operator, "operator")
        emb = load_embeddings(embeddings, format)
        if standardize:
            emb, _ = standardize_embeddings(emb)
        op = (
            BilinearOperator.pairdiff(emb.dim) if pairdiff else load_operator(operator)
        )
        vector = compose(op, emb.lookup(word_h), emb.lookup(word_t))
        doc = {
            "word_h": word_h,
            "word_t": word_t,
            "operator": "pairdiff" if pairdiff else operator,
            "relation_vector": vector.tolist(),
        }
        payload = json.dumps(doc, indent=2, sort_keys=True)
        click.echo(payload)
        if out:
            out_dir = _ensure_out(out)
            (out_dir / "relation_vector.json").write_text(
                payload + "\n", encoding="utf-8"
            )
            _write_echo(out_dir, "compose", ctx.params)


if __name__ == "__main__":
    main()
