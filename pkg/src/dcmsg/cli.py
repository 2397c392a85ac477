"""Command line front end: serve, generate-data, precompute, analyze, replay.

Exit codes: 0 success, 1 usage error, 2 runtime failure."""

from __future__ import annotations

import itertools
import json
import sys
from pathlib import Path

import click

from . import analytics
from .dataset import (
    SyntheticConfig,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .errors import DcmsgError
from .modelspec import (
    DIST_FIXED,
    DIST_LOGNORMAL,
    DIST_NORMAL,
    LC,
    MMNL,
    ModelSpecification,
    validate_spec,
)
from .service import build_engine, create_app, load_config
from .session import GameEngine, replay_journal


@click.group()
def cli():
    """Choice-modelling serious game: service, data tools and analytics."""


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="key = value config file")
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
def serve(config_path, host, port):
    """Run the HTTP service."""
    import uvicorn

    config = load_config(config_path)
    if host:
        config.host = host
    if port:
        config.port = port
    app = create_app(build_engine(config), config)
    uvicorn.run(app, host=config.host, port=config.port)


@cli.command("generate-data")
@click.option("--individuals", default=2430, show_default=True)
@click.option("--tasks", default=4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--missing-rate", default=0.0, show_default=True)
@click.option("--params", default=None,
              help="JSON map of true coefficients, e.g. '{\"b_cost\": -0.01}'")
@click.option("--out", required=True, type=click.Path())
def generate_data(individuals, tasks, seed, missing_rate, params, out):
    """Write a synthetic stated-choice dataset as CSV."""
    true_params = json.loads(params) if params else {"b_cost": -0.01,
                                                     "b_noise": -0.5}
    cfg = SyntheticConfig(n_individuals=individuals, n_tasks=tasks,
                          seed=seed, missing_rate=missing_rate,
                          true_params=true_params)
    save_dataset(generate_synthetic(cfg), out)
    click.echo(f"wrote {out}")


def _enumerate_specs():
    """Every valid MMNL and LC specification over the fixed option grid."""
    for dists in itertools.product((DIST_FIXED, DIST_NORMAL, DIST_LOGNORMAL),
                                   repeat=6):
        n_random = sum(d != DIST_FIXED for d in dists)
        if not 1 <= n_random <= 2:
            continue
        yield ModelSpecification(MMNL, asc=True, dist=dists)
    for n_class in (2, 3):
        for r in range(len(_MEMBERSHIP) + 1):
            for combo in itertools.combinations(range(len(_MEMBERSHIP)), r):
                membership = tuple(int(i in combo) for i in range(len(_MEMBERSHIP)))
                yield ModelSpecification(LC, asc=True, n_class=n_class,
                                         membership=membership)


_MEMBERSHIP = ("Woman", "Age", "Respcity", "Homeowner", "Carowner", "Job")


@cli.command()
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True))
@click.option("--journal-dir", default=None, type=click.Path())
@click.option("--draws", default=250, show_default=True)
@click.option("--limit", default=None, type=int,
              help="stop after this many specifications")
def precompute(dataset_path, journal_dir, draws, limit):
    """Estimate slow specifications up front and fill the repository cache."""
    from .estimation import EstimationOptions

    ds = load_dataset(dataset_path)
    engine = GameEngine({"default": ds},
                        opts=EstimationOptions(draws=draws),
                        journal_dir=journal_dir)
    session = engine.create_session("precompute")
    done = 0
    for spec in _enumerate_specs():
        if validate_spec(spec):
            continue
        mid, res = engine.request_estimation(session, spec)
        done += 1
        click.echo(f"[{done}] family={spec.family} model_id={mid} "
                   f"converged={res.converged} ll={res.ll_final:.2f}")
        if limit and done >= limit:
            break
    click.echo(f"precomputed {done} specifications")


@cli.command()
@click.option("--export", "export_path", required=True,
              type=click.Path(exists=True), help="telemetry CSV export")
@click.option("--models", "models_path", default=None, type=click.Path(exists=True),
              help="per-model metrics CSV (user_id, model_id, status, bic, ...)")
@click.option("--min-support", default=0.7, show_default=True)
@click.option("--max-len", default=6, show_default=True)
@click.option("--rule", default="bic", show_default=True,
              type=click.Choice(["bic", "aic", "ll", "rho2"]))
@click.option("--level", default="phase", show_default=True,
              type=click.Choice(["phase", "action", "family"]))
@click.option("--out", "out_dir", required=True, type=click.Path())
def analyze(export_path, models_path, min_support, max_len, rule, level, out_dir):
    """Workflow analytics over an export: transitions, timelines, patterns
    and, when a models table is given, improvement-group comparisons."""
    import csv as _csv

    rows = analytics.load_telemetry_csv(export_path)
    models = None
    if models_path:
        with open(models_path, newline="", encoding="utf-8") as fh:
            models = list(_csv.DictReader(fh))
    sequences = analytics.build_sequences(rows, models)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    tm = analytics.transition_matrix(sequences, level="phase")
    (out / "transitions.csv").write_text(analytics.transitions_csv(tm))
    allocation = analytics.time_allocation(sequences)
    (out / "timelines.csv").write_text(analytics.timelines_csv(allocation))
    database = [analytics.sequence_symbols(s, level) for s in sequences]
    patterns = analytics.mine_patterns(database, min_support, max_len)
    (out / "patterns.csv").write_text(analytics.patterns_csv(patterns))
    written = ["transitions.csv", "timelines.csv", "patterns.csv"]
    if models is not None:
        groups = analytics.classify_improvement(rows, models, rule)
        comparisons = analytics.group_pattern_comparison(sequences, patterns,
                                                         groups)
        (out / "comparisons.csv").write_text(analytics.comparisons_csv(comparisons))
        written.append("comparisons.csv")
    click.echo(f"wrote {', '.join(written)} to {out}")


@cli.command()
@click.option("--journal", "journal_path", required=True,
              type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True))
@click.option("--draws", default=250, show_default=True)
@click.option("--export", "export_path", default=None, type=click.Path(),
              help="write the rebuilt session's telemetry CSV here")
def replay(journal_path, dataset_path, draws, export_path):
    """Rebuild a session from its append-only journal."""
    from .estimation import EstimationOptions

    engine = GameEngine({"default": load_dataset(dataset_path)},
                        opts=EstimationOptions(draws=draws))
    session = replay_journal(journal_path, engine)
    click.echo(f"replayed session {session.session_id}: "
               f"{len(session.events)} events, "
               f"{len(session.registry)} models, "
               f"registry {engine.registry_fingerprint(session)[:12]}")
    if export_path:
        Path(export_path).write_text(engine.export_csv(session.session_id))
        click.echo(f"wrote {export_path}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 2
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except (DcmsgError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
