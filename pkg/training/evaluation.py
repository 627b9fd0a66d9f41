"""
Evaluation - mean-mode policy returns on center-cropped observations.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from agent.augment import CropSpec, center_crop
from agent.nets import ModelParams, encode, policy_act
from envs import env_reset, env_step
from training.checkpoint import Checkpoint, load_checkpoint
from utils.errors import ContractError

logger = logging.getLogger(__name__)


def evaluate_params(params: ModelParams, env_name: str, episodes: int, seed: int,
                    spec: CropSpec) -> float:
    """Mean undiscounted return over `episodes` episodes; episode seeds derive from `seed`."""
    if episodes < 1:
        raise ContractError(f"episodes must be >= 1, got {episodes}")
    encoder = params.encoder.detached()
    policy = params.policy.detached()
    rng = np.random.default_rng(seed)
    returns = []
    for _ in range(episodes):
        state, obs = env_reset(env_name, int(rng.integers(2 ** 31)))
        total, done = 0.0, False
        while not done:
            z = encode(encoder, center_crop(obs, spec).reshape(-1))
            action = policy_act(policy, z, 'mean').numpy()
            state, obs, reward, done = env_step(state, action)
            total += reward
        returns.append(total)
    return float(np.mean(returns))


def evaluate(checkpoint: Union[str, Path, Checkpoint], env_name: Optional[str] = None,
             episodes: int = 5, seed: int = 0) -> float:
    """
    Evaluate a checkpoint (a path or a loaded Checkpoint).

    Args:
        checkpoint: checkpoint.json path or Checkpoint
        env_name: must match the checkpoint's environment; defaults to it
        episodes: number of episodes (>= 1)
        seed: evaluation seed

    Returns:
        Mean return
    """
    if isinstance(checkpoint, (str, Path)):
        checkpoint = load_checkpoint(checkpoint)
    if not isinstance(checkpoint, Checkpoint):
        raise ContractError(f"expected a checkpoint path or Checkpoint, got {type(checkpoint).__name__}")
    trained_on = checkpoint.config.env_name
    if env_name is not None and env_name != trained_on:
        raise ContractError(f"checkpoint was trained on '{trained_on}', cannot evaluate on '{env_name}'")

    value = evaluate_params(checkpoint.params, trained_on, episodes, seed, checkpoint.config.crop_spec())
    logger.info(f"Evaluated {trained_on} over {episodes} episode(s) (seed {seed}): {value:.3f}")
    return value
