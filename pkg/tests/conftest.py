import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from agent.augment import CropSpec
from agent.losses import Hyperparams
from agent.nets import init_model_params
from training.config import TrainConfig

# Mean return of 100 uniform-random episodes with seed 0.
RANDOM_RETURNS = {
    'pixel-pointmass': 135.19733826718925,
    'pixel-pendulum': -78.97201336101041,
}


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_spec():
    return CropSpec(6, 6, 4, 4)


@pytest.fixture
def small_params(small_spec):
    return init_model_params(small_spec.view_dim, action_dim=2, latent_dim=4,
                             hidden_sizes=[8], rng=np.random.default_rng(1))


@pytest.fixture
def small_hyper():
    return Hyperparams(horizon=3)


@pytest.fixture
def small_batch(rng, small_spec):
    """Observations [N, L+1, H, W], actions [N, L, A], rewards [N, L] for N=3, L=2."""
    observations = rng.uniform(0.0, 1.0, size=(3, 3, small_spec.source_height, small_spec.source_width))
    actions = rng.uniform(-1.0, 1.0, size=(3, 2, 2))
    rewards = rng.uniform(0.0, 1.0, size=(3, 2))
    return observations, actions, rewards


def tiny_train_config(tmp_path, **overrides) -> TrainConfig:
    """A run that finishes in seconds: two policy episodes of 10 gradient steps each."""
    settings = dict(
        env_name='pixel-pointmass',
        total_env_steps=600,
        warmup_steps=200,
        train_every=20,
        batch_size=4,
        sequence_length=3,
        eval_interval=400,
        eval_episodes=1,
        latent_dim=4,
        hidden_sizes=[8],
        crop_size=16,
        log_every=2,
        output_dir=str(tmp_path / 'run'),
        hyper={'horizon': 3},
    )
    hyper = overrides.pop('hyper', None)
    settings.update(overrides)
    if hyper:
        settings['hyper'] = {**settings['hyper'], **hyper}
    return TrainConfig.from_dict(settings)


@pytest.fixture
def tiny_config(tmp_path):
    return tiny_train_config(tmp_path)
