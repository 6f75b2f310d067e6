"""Command-line interface.

One subcommand per pipeline stage plus ``run`` (everything), ``synth``
(generate a scenario) and ``audit`` (inspect held-out false positives).
Exit codes: 0 success, 1 configuration error, 2 data error, 3 any other
pipeline failure. Set SPIKESHAP_LOG=INFO or DEBUG for progress output on
stderr; SPIKESHAP_BACKEND=numpy forces the uncompiled kernels.
"""

from __future__ import annotations

import logging
import os
import sys

import click

from .config import apply_overrides, dump_config, load_config, validate_config
from .errors import ConfigError, DataError, SpikeShapError
from .pipeline import Paths, STAGES, run_audit, run_pipeline, run_stage
from .synth import Scenario, SynthConfig, generate, write_scenario

log = logging.getLogger("spikeshap")


def _setup_logging() -> None:
    level_name = os.environ.get("SPIKESHAP_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(name)s %(levelname)s %(message)s"
    )


def _effective_config(config_path, overrides) -> dict:
    cfg = load_config(config_path)
    return apply_overrides(cfg, list(overrides))


_config_option = click.option(
    "-c", "--config", "config_path", type=click.Path(), default=None,
    help="YAML config file; defaults apply when omitted.",
)
_set_option = click.option(
    "-s", "--set", "overrides", multiple=True, metavar="KEY=VALUE",
    help="Override a config key, e.g. -s threshold.high=99.5 (repeatable).",
)


@click.group()
def cli():
    """Detect price-spike events and attribute them to market drivers."""


@cli.command()
@_config_option
@_set_option
@click.option("--resume", is_flag=True, help="Skip stages whose outputs are current.")
def run(config_path, overrides, resume):
    """Run the whole pipeline: ingest through report."""
    cfg = _effective_config(config_path, overrides)
    outcome = run_pipeline(cfg, resume=resume)
    for name in STAGES:
        click.echo(f"{name}: {outcome[name]}")
    click.echo(f"report: {Paths(cfg['output']['dir']).report_dir}")


def _stage_command(name: str, needs_input: bool):
    @cli.command(name=name)
    @_config_option
    @_set_option
    def _cmd(config_path, overrides):
        cfg = _effective_config(config_path, overrides)
        validate_config(cfg, require_input=needs_input)
        run_stage(name, cfg, Paths(cfg["output"]["dir"]))
        click.echo(f"{name}: done")

    _cmd.__doc__ = f"Run only the {name} stage."
    return _cmd


_stage_command("ingest", needs_input=True)
_stage_command("detect", needs_input=False)
_stage_command("features", needs_input=False)
_stage_command("train", needs_input=False)
_stage_command("explain", needs_input=False)
_stage_command("cluster", needs_input=False)
_stage_command("report", needs_input=False)


@cli.command()
@_config_option
@_set_option
def audit(config_path, overrides):
    """List held-out normal segments flagged as spikes, with price context."""
    cfg = _effective_config(config_path, overrides)
    validate_config(cfg, require_input=False)
    result = run_audit(cfg, Paths(cfg["output"]["dir"]))
    click.echo(f"false positives: {len(result.rows)}")
    if result.mean_price is not None:
        click.echo(f"mean price over false-positive segments: {result.mean_price:.2f}")
        click.echo(
            f"fraction touching the moderate threshold: {result.frac_above_moderate:.2f}"
        )
    for row in result.rows:
        click.echo(
            f"  {row.segment_id} [{row.start}, {row.end}] mean={row.mean_price:.2f}"
            f" above_moderate={'yes' if row.above_moderate else 'no'}"
        )


@cli.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--days", default=30, show_default=True)
@click.option("--channels-per-category", default=1, show_default=True)
@click.option("--events-per-category", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--compound", is_flag=True, help="Inject two driver categories per event.")
def synth(out_dir, days, channels_per_category, events_per_category, seed, compound):
    """Generate a synthetic scenario with a ground-truth sidecar."""
    scenario = generate(
        SynthConfig(
            days=days,
            channels_per_category=channels_per_category,
            events_per_category=events_per_category,
            seed=seed,
            compound=compound,
        )
    )
    paths = write_scenario(scenario, out_dir)
    click.echo(f"data: {paths['data']}")
    click.echo(f"schema: {paths['schema']}")
    click.echo(f"truth: {paths['truth']}")
    click.echo(
        f"events: {len(scenario.events)}; suggested high percentile: "
        f"{scenario.suggested_high_percentile:.3f}"
    )


@cli.command("show-config")
@_config_option
@_set_option
def show_config(config_path, overrides):
    """Print the effective configuration."""
    cfg = _effective_config(config_path, overrides)
    click.echo(dump_config(cfg), nl=False)


def main(argv=None) -> int:
    _setup_logging()
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        return 1
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except ConfigError as exc:
        log.error("config error: %s", exc)
        click.echo(f"config error: {exc}", err=True)
        return 1
    except DataError as exc:
        log.error("data error: %s", exc)
        click.echo(f"data error: {exc}", err=True)
        return 2
    except FileNotFoundError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except SpikeShapError as exc:
        log.error("pipeline failure: %s", exc)
        click.echo(f"pipeline failure: {exc}", err=True)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        log.error("pipeline failure: %s", exc, exc_info=True)
        click.echo(f"pipeline failure: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
