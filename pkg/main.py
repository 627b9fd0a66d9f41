#!/usr/bin/env python3
"""
Contrastive world-model trainer - Main entry point

Subcommands:
  train      warmup, then alternate collection and gradient steps; writes metrics/checkpoint/plot
  eval       mean-mode return of a checkpoint
  gradcheck  finite-difference suite over every loss
  aggregate  per-algorithm task mean/median of a benchmark score table
  plot       SVG line chart of a metrics column
  baseline   uniform-random policy return

Usage:
    python main.py train --config run.json --seed 0 --out output/seed0
    python main.py eval --checkpoint output/seed0/checkpoint.json --episodes 10 --seed 0
    python main.py gradcheck
    python main.py aggregate --csv data/dmc_scores_1m.csv
    python main.py plot --column eval_return --out returns.svg output/seed*/metrics.csv
    python main.py baseline --env pixel-pointmass --episodes 100 --seed 0
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

from agent.verification import LOSS_NAMES, TOLERANCE, run_gradient_suite
from envs import ENVIRONMENTS, random_policy_return
from training import TrainConfig, evaluate, train
from utils.config import load_config
from utils.errors import ContractError
from utils.plotting import emit_plot
from utils.scoring import (
    aggregate_scores, compare_reference, format_aggregates, format_discrepancies, load_score_table,
)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DEFAULT_SCORE_TABLE = Path(__file__).parent / 'data' / 'dmc_scores_1m.csv'

logger = logging.getLogger(__name__)


def setup_logging(config: dict):
    """Level from config.yaml `logging.level`, overridden by LOG_LEVEL."""
    level_name = os.environ.get('LOG_LEVEL') or config.get('logging', {}).get('level', 'INFO')
    level = getattr(logging, str(level_name).upper(), logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)
    # matplotlib's font manager is chatty at DEBUG
    logging.getLogger('matplotlib').setLevel(max(level, logging.WARNING))


def print_header(title: str):
    print(f"\n{'=' * 60}")
    print(f"  {title}")
    print(f"{'=' * 60}")


def merge_train_config(base: Dict, override: Dict) -> Dict:
    merged = dict(base)
    for key, value in override.items():
        if key == 'hyper' and isinstance(value, dict) and isinstance(merged.get('hyper'), dict):
            merged['hyper'] = {**merged['hyper'], **value}
        else:
            merged[key] = value
    return merged


def build_train_config(args, config: dict) -> TrainConfig:
    settings = config.get('train', {}) or {}
    if args.config:
        loaded = load_config(args.config)
        settings = merge_train_config(settings, loaded.get('train', loaded))
    if args.seed is not None:
        settings['seed'] = args.seed
    if args.out is not None:
        settings['output_dir'] = args.out
    return TrainConfig.from_dict(settings)


# ── Subcommands ──────────────────────────────────────────────────

def cmd_train(args, config: dict) -> int:
    train_config = build_train_config(args, config)
    result = train(train_config)
    print_header(f"TRAINING COMPLETE - {train_config.env_name}")
    print(f"  Env steps:      {result.env_steps}")
    print(f"  Gradient steps: {len(result.breakdowns)}")
    evals = [r['eval_return'] for r in result.records if r.get('eval_return') is not None]
    if evals:
        print(f"  Final return:   {evals[-1]:.3f}")
    for kind, path in result.paths.items():
        print(f"  {kind.capitalize():<15} {path}")
    return 0


def cmd_eval(args, config: dict) -> int:
    value = evaluate(args.checkpoint, args.env, args.episodes, args.seed)
    print(f"mean_return {value:.6f}")
    return 0


def cmd_gradcheck(args, config: dict) -> int:
    errors = run_gradient_suite(seed=args.seed, count=args.configs)
    for name in LOSS_NAMES:
        status = 'ok' if errors[name] < TOLERANCE else 'FAIL'
        print(f"{name:<15} {errors[name]:.3e}  {status}")
    return 0 if all(e < TOLERANCE for e in errors.values()) else 1


def cmd_aggregate(args, config: dict) -> int:
    table = load_score_table(args.csv)
    aggregates = aggregate_scores(table)
    print(format_aggregates(aggregates))
    if not table.reference.empty:
        print()
        print(format_discrepancies(compare_reference(table, aggregates)))
    return 0


def cmd_plot(args, config: dict) -> int:
    print(emit_plot(args.metrics, args.column, args.out))
    return 0


def cmd_baseline(args, config: dict) -> int:
    value = random_policy_return(args.env, args.episodes, args.seed)
    print(f"random_return {value:.6f}")
    return 0


COMMANDS = {
    'train': cmd_train,
    'eval': cmd_eval,
    'gradcheck': cmd_gradcheck,
    'aggregate': cmd_aggregate,
    'plot': cmd_plot,
    'baseline': cmd_baseline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Contrastive world-model trainer')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train', help='Run a training experiment')
    p.add_argument('--config', help='JSON or YAML file with TrainConfig fields')
    p.add_argument('--seed', type=int, help='Override the config seed')
    p.add_argument('--out', help='Override the output directory')

    p = sub.add_parser('eval', help='Evaluate a checkpoint')
    p.add_argument('--checkpoint', required=True, help='checkpoint.json path')
    p.add_argument('--episodes', type=int, default=5, help='Number of episodes')
    p.add_argument('--seed', type=int, default=0, help='Evaluation seed')
    p.add_argument('--env', choices=sorted(ENVIRONMENTS), help='Must match the checkpoint environment')

    p = sub.add_parser('gradcheck', help='Finite-difference check of every loss')
    p.add_argument('--seed', type=int, default=0, help='First configuration seed')
    p.add_argument('--configs', type=int, default=5, help='Number of seeded configurations')

    p = sub.add_parser('aggregate', help='Task mean/median per algorithm')
    p.add_argument('--csv', default=str(DEFAULT_SCORE_TABLE), help='Score table CSV')

    p = sub.add_parser('plot', help='SVG plot of a metrics column')
    p.add_argument('--column', required=True, help='Metrics column to plot')
    p.add_argument('--out', required=True, help='Output SVG path')
    p.add_argument('metrics', nargs='+', help='metrics.csv files')

    p = sub.add_parser('baseline', help='Uniform-random policy return')
    p.add_argument('--env', choices=sorted(ENVIRONMENTS), default='pixel-pointmass')
    p.add_argument('--episodes', type=int, default=100, help='Number of episodes')
    p.add_argument('--seed', type=int, default=0, help='Baseline seed')
    return parser


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand. Exit codes: 0 success, 1 contract failure, 2 usage error."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    try:
        config = load_config()
    except ContractError as e:
        logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
        logger.error(str(e))
        return 1
    setup_logging(config)

    try:
        return COMMANDS[args.command](args, config)
    except ContractError as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


def main():
    return cli_main()


if __name__ == '__main__':
    sys.exit(main())
