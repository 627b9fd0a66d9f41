"""
Environment registry - reset/step/render dispatch for the built-in pixel tasks
and the uniform-random baseline.
"""

import logging
from dataclasses import dataclass, replace
from types import ModuleType
from typing import Dict, Tuple

import numpy as np

from envs import pendulum, pointmass
from utils.errors import ContractError, ShapeError

logger = logging.getLogger(__name__)

EPISODE_LENGTH = 200

ENVIRONMENTS: Dict[str, ModuleType] = {
    pendulum.NAME: pendulum,
    pointmass.NAME: pointmass,
}


@dataclass(frozen=True)
class EnvState:
    name: str
    physics: np.ndarray
    step_count: int
    rng: np.random.Generator

    @property
    def done(self) -> bool:
        return self.step_count >= EPISODE_LENGTH


def get_env(name: str) -> ModuleType:
    if name not in ENVIRONMENTS:
        raise ContractError(f"Unknown environment '{name}'. Available: {', '.join(sorted(ENVIRONMENTS))}")
    return ENVIRONMENTS[name]


def action_dim(name: str) -> int:
    return get_env(name).ACTION_DIM


def render_state(state: EnvState) -> np.ndarray:
    """40x40 grayscale observation in [0, 1]."""
    return get_env(state.name).render(state.physics)


def env_reset(name: str, seed: int) -> Tuple[EnvState, np.ndarray]:
    env = get_env(name)
    rng = np.random.default_rng(seed)
    state = EnvState(name=name, physics=env.initial_physics(rng), step_count=0, rng=rng)
    return state, render_state(state)


def env_step(state: EnvState, action) -> Tuple[EnvState, np.ndarray, float, bool]:
    """
    Advance one step of 0.05 s.

    Returns:
        (next state, observation, reward, done). Actions are clamped to [-1, 1].
    """
    env = get_env(state.name)
    if state.done:
        raise ContractError(f"{state.name}: episode finished at step {state.step_count}; reset first")
    action = np.asarray(action, dtype=np.float64).reshape(-1)
    if action.shape != (env.ACTION_DIM,):
        raise ShapeError(f"{state.name}: expected action of dimension {env.ACTION_DIM}, got {action.size}")
    physics, reward = env.step_physics(state.physics, np.clip(action, -1.0, 1.0))
    next_state = replace(state, physics=physics, step_count=state.step_count + 1)
    return next_state, render_state(next_state), float(reward), next_state.done


def random_policy_return(name: str, episodes: int, seed: int) -> float:
    """Mean undiscounted return of uniform random actions over whole episodes."""
    if episodes < 1:
        raise ContractError(f"episodes must be >= 1, got {episodes}")
    dim = action_dim(name)
    rng = np.random.default_rng(seed)
    returns = []
    for _ in range(episodes):
        state, _ = env_reset(name, int(rng.integers(2 ** 31)))
        total, done = 0.0, False
        while not done:
            state, _, reward, done = env_step(state, rng.uniform(-1.0, 1.0, size=dim))
            total += reward
        returns.append(total)
    mean_return = float(np.mean(returns))
    logger.info(f"Random baseline on {name}: {mean_return:.3f} over {episodes} episodes")
    return mean_return
