"""
Writers for command results.

JSON documents are single objects with "config", "schema" and "results" keys.
CSV files start with two comment lines carrying the schema and the config,
followed by a header row and one row per record.
Floats are written with enough digits to round-trip exactly.
"""

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel

from sqrt_gaps import numerics_logger
from sqrt_gaps.models import SCHEMA_VERSION, RunConfig

LOGGER = numerics_logger(__name__)

FLOAT_FORMAT = '%.17g'
INDENT = 2

# Fields that change how a run executes, never what it computes
RUNTIME_FIELDS = ('threads', 'out_path', 'debug')


def format_float(value: float) -> str:
    """17 significant digits, with a decimal point kept on integral values."""
    value = float(value)
    if math.isnan(value):
        return 'NaN'
    if math.isinf(value):
        return 'Infinity' if value > 0 else '-Infinity'
    text = FLOAT_FORMAT % value
    if text.lstrip('-').isdigit():
        text += '.0'
    return text


def jsonable(obj: Any) -> Any:
    """Converts models, numpy values and paths to plain JSON types."""
    if isinstance(obj, BaseModel):
        return jsonable(obj.dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def config_dict(cfg: RunConfig) -> dict:
    """The run config with sorted keys, without RUNTIME_FIELDS."""
    return jsonable(dict(sorted(cfg.dict(exclude=set(RUNTIME_FIELDS)).items())))


def dumps(obj: Any, indent: Optional[int] = INDENT, level: int = 0) -> str:
    """
    JSON text of a `jsonable()` value, with floats formatted by `format_float()`.
    Without `indent`, everything is written on a single line.
    """
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, dict):
        parts = [f'{json.dumps(str(k))}: {dumps(v, indent, level + 1)}' for k, v in obj.items()]
        return _join(parts, '{', '}', indent, level)
    if isinstance(obj, list):
        parts = [dumps(v, indent, level + 1) for v in obj]
        return _join(parts, '[', ']', indent, level)
    return json.dumps(obj)


def _join(parts: list[str], opening: str, closing: str, indent: Optional[int], level: int) -> str:
    if not parts:
        return opening + closing
    if indent is None:
        return opening + ', '.join(parts) + closing
    inner = '\n' + ' ' * (indent * (level + 1))
    return opening + inner + (',' + inner).join(parts) + '\n' + ' ' * (indent * level) + closing


def json_document(cfg: RunConfig, results: Any) -> str:
    return dumps({
        'config': config_dict(cfg),
        'schema': SCHEMA_VERSION,
        'results': jsonable(results),
    })


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if value is None:
        return ''
    return str(value)


def csv_document(cfg: RunConfig, rows: list[dict]) -> str:
    buffer = io.StringIO()
    buffer.write(f'# schema: {SCHEMA_VERSION}\n')
    buffer.write(f'# config: {dumps(config_dict(cfg), indent=None)}\n')
    if rows:
        writer = csv.writer(buffer, lineterminator='\n')
        columns = list(rows[0].keys())
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in columns])
    return buffer.getvalue()


def render(cfg: RunConfig, results: Any, rows: Optional[list[dict]] = None) -> str:
    """
    Formats results for the configured output format.
    CSV output uses `rows` when given, and a single row of `results` otherwise.
    """
    if cfg.format == 'json':
        return json_document(cfg, results)
    if rows is None:
        rows = [jsonable(results)]
    return csv_document(cfg, rows)


def write_output(cfg: RunConfig, results: Any, rows: Optional[list[dict]] = None) -> Optional[Path]:
    """
    Writes to `cfg.out_path`, or to stdout when no path is configured.

    Raises:
        OSError: the output file could not be written.
    """
    text = render(cfg, results, rows)
    if cfg.out_path is None:
        sys.stdout.write(text)
        return None
    cfg.out_path.write_text(text)
    LOGGER.debug(f'Wrote {len(text)} characters to {cfg.out_path}')
    return cfg.out_path
