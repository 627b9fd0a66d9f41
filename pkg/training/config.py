"""
TrainConfig - every knob of a training run, with desk-scale defaults.
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping

from agent.augment import CropSpec
from agent.losses import Hyperparams
from envs import ENVIRONMENTS
from utils.config import check_keys
from utils.errors import ContractError

IMAGE_SIZE = 40


@dataclass
class TrainConfig:
    env_name: str = 'pixel-pointmass'
    total_env_steps: int = 10_000
    warmup_steps: int = 1_000
    train_every: int = 4
    learning_rate: float = 3e-4
    batch_size: int = 16
    sequence_length: int = 8
    hyper: Hyperparams = field(default_factory=Hyperparams)
    buffer_capacity: int = 200
    eval_interval: int = 2_000
    eval_episodes: int = 5
    seed: int = 0
    output_dir: str = 'output/run'
    latent_dim: int = 32
    hidden_sizes: List[int] = field(default_factory=lambda: [128, 128])
    crop_size: int = 32
    log_every: int = 10
    debug_checks: bool = False

    def __post_init__(self):
        if isinstance(self.hyper, Mapping):
            self.hyper = Hyperparams(**check_keys(Hyperparams, self.hyper, 'hyper'))
        self.hidden_sizes = [int(h) for h in self.hidden_sizes]
        if self.env_name not in ENVIRONMENTS:
            raise ContractError(f"Unknown environment '{self.env_name}'. "
                                f"Available: {', '.join(sorted(ENVIRONMENTS))}")
        if self.total_env_steps < 0 or self.warmup_steps < 0:
            raise ContractError("environment step counts must be non-negative")
        positive = ('train_every', 'batch_size', 'sequence_length', 'buffer_capacity',
                    'eval_interval', 'eval_episodes', 'latent_dim', 'crop_size', 'log_every')
        for name in positive:
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.learning_rate > 0:
            raise ContractError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.crop_size > IMAGE_SIZE:
            raise ContractError(f"crop_size {self.crop_size} exceeds the {IMAGE_SIZE}px observations")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ContractError(f"hidden_sizes must be positive widths, got {self.hidden_sizes}")

    @classmethod
    def from_dict(cls, data: Mapping) -> 'TrainConfig':
        return cls(**check_keys(cls, data, 'train config'))

    def crop_spec(self) -> CropSpec:
        return CropSpec(IMAGE_SIZE, IMAGE_SIZE, self.crop_size, self.crop_size)

    def to_dict(self) -> Dict:
        return asdict(self)
