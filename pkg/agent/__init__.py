# Agent package: networks, augmentation, losses
from .augment import AugmentedBatch, CropSpec, center_crop, center_views, make_pairs, random_crop
from .nets import (
    MLP, ModelParams, decode, ema_update, encode, encode_sequence, init_mlp,
    init_model_params, policy_act, predict_dynamics, predict_reward,
)
from .losses import (
    Hyperparams, LossBreakdown, LossTerms, compute_loss_terms, dynamics_loss,
    infonce_loss, policy_loss, reconstruction_loss, similarity, similarity_matrix,
    total_loss,
)

__all__ = [
    'AugmentedBatch',
    'CropSpec',
    'center_crop',
    'center_views',
    'make_pairs',
    'random_crop',
    'MLP',
    'ModelParams',
    'decode',
    'ema_update',
    'encode',
    'encode_sequence',
    'init_mlp',
    'init_model_params',
    'policy_act',
    'predict_dynamics',
    'predict_reward',
    'Hyperparams',
    'LossBreakdown',
    'LossTerms',
    'compute_loss_terms',
    'dynamics_loss',
    'infonce_loss',
    'policy_loss',
    'reconstruction_loss',
    'similarity',
    'similarity_matrix',
    'total_loss',
]
