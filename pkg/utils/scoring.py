"""
Scoring utilities - per-algorithm task mean/median over a benchmark score table,
and a comparison against the summary rows printed alongside it.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Union
import logging

import pandas as pd

from utils.errors import ContractError

logger = logging.getLogger(__name__)

# Summary rows a published table may carry below its tasks
REFERENCE_ROWS = {
    'Task Mean': 'mean',
    'Task Median': 'median',
}
ROUNDING_TOLERANCE = 0.5  # printed summaries are integers


@dataclass
class ScoreTable:
    scores: pd.DataFrame      # index: task, columns: algorithm
    reference: pd.DataFrame   # index: 'mean' / 'median', columns: algorithm (may be empty)

    @property
    def algorithms(self) -> List[str]:
        return list(self.scores.columns)


def load_score_table(path: Union[str, Path]) -> ScoreTable:
    """
    Read a `task,<algo1>,<algo2>,...` CSV. Rows named like the printed summary
    rows are split off as the reference.
    """
    try:
        df = pd.read_csv(path, dtype={'task': str})
    except FileNotFoundError as e:
        raise ContractError(f"score table not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ContractError(f"could not parse score table {path}: {e}") from e

    if 'task' not in df.columns:
        raise ContractError(f"{path}: first column must be 'task', got {list(df.columns)}")
    if len(df.columns) < 2:
        raise ContractError(f"{path}: no algorithm columns")
    df = df.set_index('task')
    df.columns = [str(c).strip() for c in df.columns]

    is_reference = df.index.isin(list(REFERENCE_ROWS))
    reference = df[is_reference].rename(index=REFERENCE_ROWS)
    scores = df[~is_reference]
    logger.debug(f"Loaded {len(scores)} tasks x {len(scores.columns)} algorithms from {path}")
    return ScoreTable(scores=scores, reference=reference)


def _numeric_column(scores: pd.DataFrame, algorithm: str) -> pd.Series:
    values = pd.to_numeric(scores[algorithm], errors='coerce')
    missing = values[values.isna()]
    if len(missing):
        task = missing.index[0]
        raise ContractError(f"missing score for task '{task}', algorithm '{algorithm}'")
    return values.astype('float64')


def aggregate_scores(table: Union[ScoreTable, pd.DataFrame]) -> Dict[str, Dict[str, float]]:
    """
    Mean and median of every algorithm column.

    Args:
        table: ScoreTable or a DataFrame indexed by task

    Returns:
        {algorithm: {'mean': float, 'median': float}}, columns in table order
    """
    scores = table.scores if isinstance(table, ScoreTable) else table
    if scores.empty:
        raise ContractError("score table has no tasks")
    results = {}
    for algorithm in scores.columns:
        values = _numeric_column(scores, algorithm)
        results[algorithm] = {'mean': float(values.mean()), 'median': float(values.median())}
    return results


def compare_reference(table: ScoreTable, aggregates: Dict[str, Dict[str, float]]) -> List[Dict]:
    """
    Cells of the printed summary rows that disagree with recomputation by more
    than integer rounding. An algorithm whose printed mean and median match the
    recomputed median and mean is marked as swapped.
    """
    discrepancies = []
    if table.reference.empty:
        return discrepancies
    for algorithm in table.reference.columns:
        if algorithm not in aggregates:
            continue
        printed = pd.to_numeric(table.reference[algorithm], errors='coerce').to_dict()
        recomputed = aggregates[algorithm]

        def close(a, b):
            return a is not None and not pd.isna(a) and abs(a - b) <= ROUNDING_TOLERANCE

        swapped = (close(printed.get('mean'), recomputed['median'])
                   and close(printed.get('median'), recomputed['mean']))
        for statistic, value in printed.items():
            if close(value, recomputed[statistic]):
                continue
            discrepancies.append({
                'algorithm': algorithm,
                'statistic': statistic,
                'printed': None if pd.isna(value) else float(value),
                'recomputed': recomputed[statistic],
                'swapped': swapped,
            })
    if discrepancies:
        logger.warning(f"{len(discrepancies)} printed summary cell(s) disagree with recomputation")
    return discrepancies


def swapped_algorithms(discrepancies: List[Dict]) -> List[str]:
    seen = []
    for d in discrepancies:
        if d['swapped'] and d['algorithm'] not in seen:
            seen.append(d['algorithm'])
    return seen


def format_aggregates(aggregates: Dict[str, Dict[str, float]]) -> str:
    width = max(len('algorithm'), *(len(a) for a in aggregates))
    lines = [f"{'algorithm':<{width}}  {'mean':>10}  {'median':>10}"]
    for algorithm, stats in aggregates.items():
        lines.append(f"{algorithm:<{width}}  {stats['mean']:>10.2f}  {stats['median']:>10.2f}")
    return '\n'.join(lines)


def format_discrepancies(discrepancies: List[Dict]) -> str:
    if not discrepancies:
        return "Printed summary rows agree with recomputation."
    lines = ["Printed summary rows disagree with recomputation:"]
    for d in discrepancies:
        printed = 'missing' if d['printed'] is None else f"{d['printed']:g}"
        lines.append(f"  {d['algorithm']}: printed {d['statistic']} {printed}, "
                     f"recomputed {d['recomputed']:g}")
    swapped = swapped_algorithms(discrepancies)
    if swapped:
        lines.append(f"  mean and median rows appear swapped for: {', '.join(swapped)}")
    return '\n'.join(lines)
