# Utils package: errors, config loading, metrics CSV, score tables, plots
from .errors import ContractError, DomainError, NonFiniteError, ShapeError
from .config import check_keys, load_config
from .metrics import METRICS_COLUMNS, read_metrics, write_metrics
from .scoring import ScoreTable, aggregate_scores, compare_reference, load_score_table

__all__ = [
    'ContractError',
    'DomainError',
    'NonFiniteError',
    'ShapeError',
    'check_keys',
    'load_config',
    'METRICS_COLUMNS',
    'read_metrics',
    'write_metrics',
    'ScoreTable',
    'aggregate_scores',
    'compare_reference',
    'load_score_table',
]
