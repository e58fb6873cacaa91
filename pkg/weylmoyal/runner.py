"""Shared execution path for experiment commands: config, checks, artifacts, exit code."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import click
from flask import current_app

from weylmoyal.errors import ConvergenceError, WeylMoyalError
from weylmoyal.reporting import RunReport, write_csv, write_json
from weylmoyal.settings import get_setting

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NOT_CONVERGED = 3


@dataclass
class Outcome:
    """What a command body produces besides its checks."""
    rows: list = field(default_factory=list)
    fieldnames: list | None = None
    fixtures: dict = field(default_factory=dict)


def _write_artifacts(out_dir: Path, report: RunReport, outcome: Outcome | None) -> None:
    if outcome is not None:
        write_csv(out_dir / 'results.csv', outcome.rows, outcome.fieldnames)
        for name, payload in sorted(outcome.fixtures.items()):
            write_json(out_dir / 'fixtures' / f'{name}.json', payload)
    write_json(out_dir / 'report.json', report.to_json())


def run_experiment(command: str, load, body, fallback_out=None) -> int:
    """Load the config, run ``body(cfg, report)`` and exit with the status code.

    ``body`` returns an :class:`Outcome`; checks are recorded on the report as it goes.
    Configuration problems exit with 2, a non-converged norm estimate with 3 and any
    failed check with 1.
    """
    log = current_app.logger
    report = RunReport(command)
    out_dir = Path(fallback_out or get_setting('OUTPUT_DIR'))
    outcome = None
    try:
        cfg = load()
        report.config = cfg.to_json()
        out_dir = cfg.out_dir
        log.info('%s: seed=%d out=%s', command, cfg.seed, out_dir)
        outcome = body(cfg, report)
        if report.failures:
            report.status, report.exit_code = 'failed', EXIT_CHECK_FAILED
            for check in report.failures:
                log.error('%s: check %s failed (value=%s, tolerance=%s) %s',
                          command, check.name, check.value, check.tolerance, check.detail)
    except ConvergenceError as exc:
        report.status, report.exit_code, report.error = 'not-converged', EXIT_NOT_CONVERGED, str(exc)
        report.summary['bracket'] = {'lower': exc.lower, 'upper': exc.upper, 'iterations': exc.iterations}
        log.error('%s: %s', command, exc)
    except (WeylMoyalError, OSError, json.JSONDecodeError) as exc:
        report.status, report.exit_code, report.error = 'config-error', EXIT_CONFIG_ERROR, str(exc)
        outcome = None
        log.error('%s: %s', command, exc)
    except Exception:
        log.exception('%s: unexpected failure', command)
        raise

    try:
        _write_artifacts(out_dir, report, outcome)
    except OSError as exc:
        log.error('%s: could not write artifacts to %s: %s', command, out_dir, exc)
        if report.exit_code == EXIT_OK:
            report.exit_code = EXIT_CONFIG_ERROR

    click.echo(f'{command}: {report.status} ({len(report.checks) - len(report.failures)}/{len(report.checks)} checks passed)')
    if report.error:
        click.echo(f'error: {report.error}', err=True)
    click.get_current_context().exit(report.exit_code)
    return report.exit_code
