"""
Metrics CSV - one row per gradient step (plus evaluation rows), fixed header,
floats rendered with 9 significant digits, empty cells for unmeasured columns.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from utils.errors import ContractError

logger = logging.getLogger(__name__)

METRICS_COLUMNS = [
    'step', 'env_steps', 'loss_total', 'loss_policy', 'loss_dynamics', 'loss_infonce',
    'loss_recon', 'gnorm_infonce', 'gnorm_dynamics', 'gnorm_recon', 'eval_return',
]
INT_COLUMNS = ('step', 'env_steps')

MetricsRecord = Dict[str, Optional[float]]


def format_value(value) -> str:
    if value is None:
        return ''
    return format(float(value), '.9g')


def format_record(record: MetricsRecord) -> Dict[str, str]:
    unknown = set(record) - set(METRICS_COLUMNS)
    if unknown:
        raise ContractError(f"unknown metrics columns: {', '.join(sorted(unknown))}")
    row = {}
    for column in METRICS_COLUMNS:
        value = record.get(column)
        if column in INT_COLUMNS:
            if value is None:
                raise ContractError(f"metrics column '{column}' is required")
            row[column] = str(int(value))
        else:
            row[column] = format_value(value)
    return row


def write_metrics(path: Union[str, Path], records: Sequence[MetricsRecord]) -> str:
    """Write the header and every record; an empty sequence gives a header-only file."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=METRICS_COLUMNS, lineterminator='\n')
            writer.writeheader()
            writer.writerows(format_record(r) for r in records)
    except OSError as e:
        raise ContractError(f"could not write metrics {path}: {e}") from e
    logger.info(f"Metrics saved to {path} ({len(records)} rows)")
    return str(path)


def _parse_cell(column: str, text: str, line: int):
    if column in INT_COLUMNS:
        try:
            value = int(text)
        except ValueError:
            raise ContractError(f"line {line}: column '{column}' must be an integer, got '{text}'")
        if value < 0:
            raise ContractError(f"line {line}: column '{column}' must be non-negative")
        return value
    if text == '':
        return None
    try:
        value = float(text)
    except ValueError:
        raise ContractError(f"line {line}: column '{column}' is not a number: '{text}'")
    if math.isnan(value):
        raise ContractError(f"line {line}: column '{column}' is NaN")
    return value


def read_metrics(path: Union[str, Path]) -> List[MetricsRecord]:
    """Parse a metrics CSV strictly; any deviation names the offending line."""
    path = Path(path)
    try:
        with open(path, newline='') as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise ContractError(f"could not read metrics {path}: {e}") from e
    if not rows:
        raise ContractError(f"{path}: missing header")
    if rows[0] != METRICS_COLUMNS:
        raise ContractError(f"{path}: unexpected header {rows[0]}; expected {METRICS_COLUMNS}")

    records: List[MetricsRecord] = []
    previous = {'step': -1, 'env_steps': -1}
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(METRICS_COLUMNS):
            raise ContractError(f"{path}: line {line} has {len(row)} fields, expected {len(METRICS_COLUMNS)}")
        record = {c: _parse_cell(c, text, line) for c, text in zip(METRICS_COLUMNS, row)}
        for column in INT_COLUMNS:
            if record[column] < previous[column]:
                raise ContractError(f"{path}: line {line}: '{column}' decreased")
            previous[column] = record[column]
        records.append(record)
    return records
