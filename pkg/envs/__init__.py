# Environments package
from .registry import (
    ENVIRONMENTS, EPISODE_LENGTH, EnvState, action_dim, env_reset, env_step,
    random_policy_return, render_state,
)

__all__ = [
    'ENVIRONMENTS',
    'EPISODE_LENGTH',
    'EnvState',
    'action_dim',
    'env_reset',
    'env_step',
    'random_policy_return',
    'render_state',
]
