"""Deterministic CSV/JSON artifacts: results.csv, report.json and fixtures/*.json.

No timestamps or host data are written, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from weylmoyal.settings import get_setting


def format_number(value, digits: int | None = None) -> str:
    if digits is None:
        digits = int(get_setting('FLOAT_DIGITS'))
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (complex, np.complexfloating)):
        return f'{value.real:.{digits}g}{value.imag:+.{digits}g}j'
    if isinstance(value, (float, np.floating)):
        return f'{float(value):.{digits}g}'
    return '' if value is None else str(value)


def canonical(obj):
    """Convert numpy and complex values into plain JSON data."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return canonical(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {'re': canonical(float(obj.real)), 'im': canonical(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        if not math.isfinite(obj):
            return str(obj)
        return obj
    if hasattr(obj, 'as_posix'):
        return obj.as_posix()
    return obj


def dumps(obj) -> str:
    return json.dumps(canonical(obj), sort_keys=True, indent=2, ensure_ascii=False) + '\n'


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding='utf-8')
    return path


def write_csv(path, rows: list[dict], fieldnames: list[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = []
        for row in rows:
            for key in row:
                if key not in fieldnames:
                    fieldnames.append(key)
    with path.open('w', encoding='utf-8', newline='') as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_number(row.get(k)) for k in fieldnames})
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding='utf-8'))


@dataclass
class Check:
    name: str
    passed: bool
    value: float | None = None
    tolerance: float | None = None
    detail: str = ''

    def to_json(self) -> dict:
        out = {'name': self.name, 'passed': bool(self.passed)}
        if self.value is not None:
            out['value'] = self.value
        if self.tolerance is not None:
            out['tolerance'] = self.tolerance
        if self.detail:
            out['detail'] = self.detail
        return out


@dataclass
class RunReport:
    command: str
    status: str = 'ok'
    exit_code: int = 0
    checks: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    error: str = ''

    def check(self, name: str, passed: bool, value=None, tolerance=None, detail: str = '') -> bool:
        self.checks.append(Check(name, bool(passed), value, tolerance, detail))
        return bool(passed)

    def at_most(self, name: str, value: float, tolerance: float, detail: str = '') -> bool:
        return self.check(name, value <= tolerance, value, tolerance, detail)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    @property
    def ok(self) -> bool:
        return not self.failures and not self.error

    def to_json(self) -> dict:
        out = {
            'command': self.command,
            'status': self.status,
            'exit_code': self.exit_code,
            'checks_total': len(self.checks),
            'checks_failed': len(self.failures),
            'failures': [c.to_json() for c in self.failures],
            'checks': [c.to_json() for c in self.checks],
            'summary': self.summary,
            'config': self.config,
        }
        if self.error:
            out['error'] = self.error
        return out
