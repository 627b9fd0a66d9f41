# Training package: replay, optimizer, checkpoints, the training loop and evaluation
from .config import TrainConfig
from .replay import Episode, ReplayBuffer, SequenceBatch, buffer_add, buffer_sample_sequences
from .optimizer import OptimizerState, adaptive_moment_update, init_optimizer
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .evaluation import evaluate, evaluate_params
from .trainer import TrainResult, collect_experience, train, train_step

__all__ = [
    'TrainConfig',
    'Episode',
    'ReplayBuffer',
    'SequenceBatch',
    'buffer_add',
    'buffer_sample_sequences',
    'OptimizerState',
    'adaptive_moment_update',
    'init_optimizer',
    'Checkpoint',
    'load_checkpoint',
    'save_checkpoint',
    'evaluate',
    'evaluate_params',
    'TrainResult',
    'collect_experience',
    'train',
    'train_step',
]
