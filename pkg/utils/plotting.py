"""
Plotting - one SVG line chart of a metrics column against env_steps,
one line per metrics file.
"""

import logging
from pathlib import Path
from typing import Sequence, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd

from utils.errors import ContractError
from utils.metrics import METRICS_COLUMNS

logger = logging.getLogger(__name__)

X_COLUMN = 'env_steps'
SVG_HASH_SALT = 'metrics-plot'


def _load_series(path: Union[str, Path], column: str):
    try:
        df = pd.read_csv(path)
    except FileNotFoundError as e:
        raise ContractError(f"metrics file not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ContractError(f"could not parse metrics file {path}: {e}") from e
    if column not in df.columns or X_COLUMN not in df.columns:
        raise ContractError(f"column '{column}' not in {path}; available: {', '.join(df.columns)}")
    measured = df[[X_COLUMN, column]].dropna()
    if measured.empty:
        logger.warning(f"{path} has no measured values for '{column}'")
    return measured[X_COLUMN].to_numpy(dtype=float), measured[column].to_numpy(dtype=float)


def emit_plot(paths: Sequence[Union[str, Path]], column: str, out_path: Union[str, Path]) -> str:
    """
    Plot `column` against env_steps for each metrics file.

    Args:
        paths: metrics CSV files, one line each (gid series-<i>)
        column: metrics column to plot
        out_path: SVG destination

    Returns:
        The SVG path
    """
    if column not in METRICS_COLUMNS or column == X_COLUMN:
        available = [c for c in METRICS_COLUMNS if c != X_COLUMN]
        raise ContractError(f"unknown column '{column}'; available: {', '.join(available)}")
    if not paths:
        raise ContractError("emit_plot needs at least one metrics file")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({'svg.hashsalt': SVG_HASH_SALT, 'svg.fonttype': 'none'}):
        fig, ax = plt.subplots(figsize=(8, 5))
        try:
            for i, path in enumerate(paths):
                x, y = _load_series(path, column)
                line, = ax.plot(x, y, label=Path(path).parent.name or Path(path).name)
                line.set_gid(f"series-{i}")
            ax.set_xlabel(X_COLUMN)
            ax.set_ylabel(column)
            ax.set_title(f"{column} vs {X_COLUMN}")
            ax.grid(True)
            if len(paths) > 1:
                ax.legend()
            fig.tight_layout()
            fig.savefig(out_path, format='svg', metadata={'Date': None})
        finally:
            plt.close(fig)
    logger.info(f"Saved {out_path}")
    return str(out_path)
