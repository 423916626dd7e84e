"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 any other
failure. Log verbosity comes from ``TABRISK_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import logging
import os
import sys

import click

from ..errors import ConfigError, DataError
from . import pipeline
from .config import MODES, load_config

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _setup_logging() -> None:
    level = os.environ.get("TABRISK_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _resolve(config, seed, mode, out):
    cfg = load_config(config)
    return cfg.with_overrides(seed=seed, mode=mode, output_dir=out)


def _guard(fn, *args):
    try:
        fn(*args)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except DataError as exc:
        click.echo(f"data error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except OSError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        logging.getLogger("tabrisk").debug("failure", exc_info=True)
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)


def _common(f):
    f = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")(f)
    f = click.option("--mode", type=click.Choice(MODES), default=None, help="Leakage protocol.")(f)
    f = click.option("--seed", type=click.IntRange(0, (1 << 64) - 1), default=None, help="Overrides the config seed.")(f)
    f = click.option("--config", "config", required=True, type=click.Path(dir_okay=False),
                     help="JSON run configuration.")(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Imbalanced tabular risk modelling: balance, tune, ensemble, explain."""
    _setup_logging()


@cli.command()
@_common
def run(config, seed, mode, out):
    """Full pipeline: tune every family, build the ensemble, write reports."""
    def go():
        cfg = _resolve(config, seed, mode, out)
        pipeline.run_experiment(cfg)
        click.echo(cfg.output_dir)
    _guard(go)


@cli.command("compare-balancers")
@_common
def compare_balancers(config, seed, mode, out):
    """Accuracy/F1 of the ensemble under each oversampling method."""
    def go():
        cfg = _resolve(config, seed, mode, out)
        pipeline.run_balancing_comparison(cfg)
        click.echo(cfg.output_dir)
    _guard(go)


@cli.command()
@_common
def ablate(config, seed, mode, out):
    """Balanced vs unbalanced arms: train/test MSE, MAE and test R2."""
    def go():
        cfg = _resolve(config, seed, mode, out)
        pipeline.run_ablation(cfg)
        click.echo(cfg.output_dir)
    _guard(go)


@cli.command()
@_common
def tune(config, seed, mode, out):
    """Grid search only; writes tune_<family>.csv/json."""
    def go():
        cfg = _resolve(config, seed, mode, out)
        pipeline.tune(cfg)
        click.echo(cfg.output_dir)
    _guard(go)


@cli.command()
@_common
@click.option("--model", "model_path", type=click.Path(dir_okay=False), default=None,
              help="Saved model (default: <out>/model.json).")
@click.option("--data", "data_path", type=click.Path(dir_okay=False), default=None,
              help="CSV to explain (default: the config dataset).")
def explain(config, seed, mode, out, model_path, data_path):
    """Local surrogate explanations for the configured rows."""
    def go():
        cfg = _resolve(config, seed, mode, out)
        mp = model_path or os.path.join(cfg.output_dir, "model.json")
        pipeline.explain_batch(mp, data_path or cfg.dataset_path, cfg)
        click.echo(cfg.output_dir)
    _guard(go)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="tabrisk", standalone_mode=True)
    except SystemExit as exc:
        code = exc.code
        if code not in (None, 0) and not isinstance(code, int):
            code = EXIT_RUNTIME
        # click reports usage errors with status 2, which doubles as our config code
        raise SystemExit(code)
