"""
Trainer - experience collection, the combined gradient step, and the full
collect/train/evaluate loop that writes metrics and a checkpoint.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from agent.augment import CropSpec, center_crop
from agent.losses import Hyperparams, LossBreakdown, compute_loss_terms, total_loss
from agent.nets import ModelParams, ema_update, encode, policy_act
from envs import EPISODE_LENGTH, action_dim, env_reset, env_step
from training.checkpoint import build_model, save_checkpoint, target_encoder_digest
from training.config import TrainConfig
from training.evaluation import evaluate_params
from training.optimizer import OptimizerState, adaptive_moment_update, init_optimizer
from training.replay import (
    Episode, ReplayBuffer, SequenceBatch, buffer_add, buffer_sample_sequences, episodes_for_steps,
)
from utils.errors import ContractError, NonFiniteError
from utils.metrics import MetricsRecord, write_metrics
from utils.plotting import emit_plot

logger = logging.getLogger(__name__)

COLLECT_MODES = ('warmup', 'policy')


@dataclass
class TrainResult:
    records: List[MetricsRecord]
    breakdowns: List[LossBreakdown]
    params: ModelParams
    optimizer: OptimizerState
    env_steps: int
    paths: Dict[str, str] = field(default_factory=dict)


# ── Experience ───────────────────────────────────────────────────

def collect_experience(env_name: str, params: Optional[ModelParams], steps: int,
                       rng: np.random.Generator, mode: str = 'policy',
                       spec: Optional[CropSpec] = None) -> List[Episode]:
    """
    Roll ceil(steps / 200) complete episodes.

    Args:
        env_name: registered environment
        params: model used to act in 'policy' mode (ignored in 'warmup' mode)
        steps: requested environment steps, rounded up to whole episodes
        rng: drives episode seeds, warmup actions and policy noise
        mode: 'warmup' for uniform random actions, 'policy' for stochastic policy actions
        spec: crop geometry for the encoded center crop

    Returns:
        List of Episodes in collection order
    """
    if steps < 1:
        raise ContractError(f"collect_experience needs steps >= 1, got {steps}")
    if mode not in COLLECT_MODES:
        raise ContractError(f"unknown collection mode '{mode}', expected one of {COLLECT_MODES}")
    if mode == 'policy' and (params is None or spec is None):
        raise ContractError("policy collection needs model parameters and a crop spec")

    dim = action_dim(env_name)
    if mode == 'policy':
        encoder = params.encoder.detached()
        policy = params.policy.detached()

    episodes = []
    for _ in range(episodes_for_steps(steps, EPISODE_LENGTH)):
        seed = int(rng.integers(2 ** 31))
        state, obs = env_reset(env_name, seed)
        observations, actions, rewards = [obs], [], []
        done = False
        while not done:
            if mode == 'warmup':
                action = rng.uniform(-1.0, 1.0, size=dim)
            else:
                z = encode(encoder, center_crop(obs, spec).reshape(-1))
                action = policy_act(policy, z, 'stochastic', rng).numpy()
            state, obs, reward, done = env_step(state, action)
            observations.append(obs)
            actions.append(np.asarray(action, dtype=np.float64))
            rewards.append(reward)
        episodes.append(Episode(
            observations=np.stack(observations),
            actions=np.stack(actions),
            rewards=np.array(rewards, dtype=np.float64),
            seed=seed,
        ))
    logger.debug(f"Collected {len(episodes)} {mode} episode(s) on {env_name}")
    return episodes


# ── Gradient step ────────────────────────────────────────────────

def _encoder_grad_norm(grads, params: ModelParams) -> float:
    total = 0.0
    for _, tensor in params.encoder.parameters():
        grad = grads.array_for(tensor)
        total += float(np.sum(grad * grad))
    return math.sqrt(total)


def check_target_digest(params: ModelParams, expected: str):
    """Debug audit: the target encoder must not change between gradient steps."""
    if target_encoder_digest(params) != expected:
        raise ContractError("target encoder changed between steps")


def train_step(batch: SequenceBatch, params: ModelParams, opt: OptimizerState, hyper: Hyperparams,
               rng: np.random.Generator, spec: CropSpec, lr: float, telemetry: bool = False,
               audit: bool = False) -> Tuple[ModelParams, OptimizerState, LossBreakdown, Optional[Dict[str, float]]]:
    """
    One iteration: losses on the batch, one backward pass, one Adam update of
    every trainable set, then the EMA update of the target encoder.

    Args:
        telemetry: also measure the encoder gradient norm of each weighted loss term
        audit: verify the target encoder is untouched until ema_update

    Returns:
        (params', opt', loss breakdown, gradient norms or None)
    """
    terms = compute_loss_terms(params, batch.observations, batch.actions, batch.rewards, spec, hyper, rng)
    breakdown = total_loss(terms, hyper)
    if not math.isfinite(breakdown.total):
        raise NonFiniteError("non-finite total loss", diagnostics={'breakdown': breakdown})

    grads = terms.total(hyper).backward()
    trainable = params.trainable()
    grad_arrays = [grads.array_for(t) for _, t in trainable]
    for (name, _), g in zip(trainable, grad_arrays):
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient", diagnostics={'parameter': name, 'breakdown': breakdown})

    gnorms = None
    if telemetry:
        gnorms = {name: _encoder_grad_norm(tensor.backward(), params)
                  for name, tensor in terms.weighted(hyper).items()}

    before = target_encoder_digest(params) if audit else None
    new_arrays, new_opt = adaptive_moment_update([t.data for _, t in trainable], grad_arrays, opt, lr)
    updated = params.replace_trainable(new_arrays)
    if audit and target_encoder_digest(updated) != before:
        raise ContractError("target encoder changed outside ema_update")

    target = ema_update(updated.target_encoder, updated.encoder, hyper.momentum)
    return updated.with_target(target), new_opt, breakdown, gnorms


# ── Full run ─────────────────────────────────────────────────────

def _step_record(step: int, env_steps: int, breakdown: LossBreakdown,
                 gnorms: Optional[Dict[str, float]]) -> MetricsRecord:
    gnorms = gnorms or {}
    return {
        'step': step,
        'env_steps': env_steps,
        'loss_total': breakdown.total,
        'loss_policy': breakdown.policy,
        'loss_dynamics': breakdown.dynamics,
        'loss_infonce': breakdown.infonce,
        'loss_recon': breakdown.reconstruction,
        'gnorm_infonce': gnorms.get('infonce'),
        'gnorm_dynamics': gnorms.get('dynamics'),
        'gnorm_recon': gnorms.get('reconstruction'),
        'eval_return': None,
    }


def train(config: TrainConfig) -> TrainResult:
    """
    Warmup collection, then alternate one policy episode with 200 // train_every
    gradient steps until total_env_steps is reached. Evaluates at every multiple
    of eval_interval and once at the end. Writes metrics.csv, checkpoint.json and
    (best effort) returns.svg into config.output_dir.
    """
    out_dir = Path(config.output_dir)
    spec = config.crop_spec()
    init_rng, collect_rng, train_rng = [np.random.default_rng(s)
                                        for s in np.random.SeedSequence(config.seed).spawn(3)]

    params = build_model(config, init_rng)
    opt = init_optimizer([t.data for _, t in params.trainable()])
    buffer = ReplayBuffer(config.buffer_capacity)
    records: List[MetricsRecord] = []
    breakdowns: List[LossBreakdown] = []
    env_steps, step = 0, 0
    eval_mark = 0
    last_eval_at = -1
    audit_digest: Optional[str] = None

    def run_eval():
        nonlocal last_eval_at
        value = evaluate_params(params, config.env_name, config.eval_episodes, config.seed, spec)
        records.append({'step': step, 'env_steps': env_steps, 'eval_return': value})
        last_eval_at = env_steps
        logger.info(f"Eval at {env_steps} env steps: return {value:.3f}")

    logger.info(f"Training on {config.env_name} for {config.total_env_steps} env steps (seed {config.seed})")
    warmup = min(config.warmup_steps, config.total_env_steps)
    if warmup > 0:
        logger.info(f"Warmup: collecting {warmup} random steps")
        for episode in collect_experience(config.env_name, None, warmup, collect_rng, 'warmup'):
            buffer_add(buffer, episode)
            env_steps += len(episode)

    updates_per_episode = max(1, EPISODE_LENGTH // config.train_every)
    while env_steps < config.total_env_steps:
        for episode in collect_experience(config.env_name, params, 1, collect_rng, 'policy', spec):
            buffer_add(buffer, episode)
            env_steps += len(episode)

        for _ in range(updates_per_episode):
            batch = buffer_sample_sequences(buffer, config.batch_size, config.sequence_length, train_rng)
            telemetry = step % config.log_every == 0
            if audit_digest is not None:
                check_target_digest(params, audit_digest)
            try:
                params, opt, breakdown, gnorms = train_step(
                    batch, params, opt, config.hyper, train_rng, spec, config.learning_rate,
                    telemetry=telemetry, audit=config.debug_checks,
                )
            except NonFiniteError as e:
                e.diagnostics['step'] = step + 1
                logger.error(f"Aborting at gradient step {step + 1}: {e}")
                raise
            step += 1
            breakdowns.append(breakdown)
            if config.debug_checks:
                audit_digest = target_encoder_digest(params)
            records.append(_step_record(step, env_steps, breakdown, gnorms))
            logger.debug(f"step {step}: total={breakdown.total:.6f} policy={breakdown.policy:.6f} "
                         f"dynamics={breakdown.dynamics:.6f} infonce={breakdown.infonce:.6f} "
                         f"recon={breakdown.reconstruction:.6f}")

        if env_steps // config.eval_interval > eval_mark:
            eval_mark = env_steps // config.eval_interval
            run_eval()

    if config.total_env_steps > 0 and last_eval_at != env_steps:
        run_eval()

    paths = {
        'metrics': write_metrics(out_dir / 'metrics.csv', records),
        'checkpoint': save_checkpoint(out_dir / 'checkpoint.json', config, params, opt, train_rng),
    }
    if any(r.get('eval_return') is not None for r in records):
        try:
            paths['plot'] = emit_plot([paths['metrics']], 'eval_return', out_dir / 'returns.svg')
        except Exception as e:
            logger.warning(f"Could not write returns plot: {e}")

    logger.info(f"Finished: {step} gradient steps, {env_steps} env steps, output in {out_dir}")
    return TrainResult(records=records, breakdowns=breakdowns, params=params,
                       optimizer=opt, env_steps=env_steps, paths=paths)
