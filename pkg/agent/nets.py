"""
Networks - encoder, target encoder, decoder, dynamics, reward, policy and the
bilinear similarity matrix, all as small tanh MLPs on the autodiff Tensor.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from autodiff.tensor import Tensor, as_tensor, concat, sigmoid
from utils.errors import ContractError, ShapeError

logger = logging.getLogger(__name__)

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
# largest float below 1; keeps saturated tanh outputs inside the open interval
ACTION_BOUND = float(np.nextafter(1.0, 0.0))
DEFAULT_HIDDEN = (128, 128)

POLICY_MODES = ('stochastic', 'mean')


@dataclass
class MLP:
    """Dense layers with tanh between them; output either linear or sigmoid."""
    weights: List[Tensor]
    biases: List[Tensor]
    output_activation: str = 'linear'

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def forward(self, x: Tensor) -> Tensor:
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = h.tanh()
        if self.output_activation == 'sigmoid':
            h = sigmoid(h)
        return h

    def parameters(self) -> List[Tuple[str, Tensor]]:
        named = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            named.append((f"w{i}", w))
            named.append((f"b{i}", b))
        return named

    def with_arrays(self, arrays: Sequence[np.ndarray], requires_grad: bool = True) -> 'MLP':
        """Same architecture, new parameter values (ordered as parameters())."""
        arrays = list(arrays)
        if len(arrays) != 2 * len(self.weights):
            raise ContractError(f"expected {2 * len(self.weights)} arrays, got {len(arrays)}")
        for (name, old), new in zip(self.parameters(), arrays):
            if tuple(np.shape(new)) != old.shape:
                raise ShapeError(f"parameter {name}: shape {list(np.shape(new))} != {list(old.shape)}")
        return MLP(
            weights=[Tensor(a, requires_grad=requires_grad) for a in arrays[0::2]],
            biases=[Tensor(a, requires_grad=requires_grad) for a in arrays[1::2]],
            output_activation=self.output_activation,
        )

    def copy(self, requires_grad: bool = True) -> 'MLP':
        return self.with_arrays([t.data for _, t in self.parameters()], requires_grad=requires_grad)

    def detached(self) -> 'MLP':
        """Constant copy: evaluates the same function but receives no gradient."""
        return self.copy(requires_grad=False)


def init_mlp(sizes: Sequence[int], rng: np.random.Generator,
             output_activation: str = 'linear') -> MLP:
    """
    Uniform weights in +/- sqrt(6 / (fan_in + fan_out)), zero biases.

    Args:
        sizes: layer widths including input and output, e.g. [1024, 128, 128, 32]
        rng: seeded generator
        output_activation: 'linear' or 'sigmoid'
    """
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise ContractError(f"invalid layer sizes {list(sizes)}")
    if output_activation not in ('linear', 'sigmoid'):
        raise ContractError(f"unknown output activation '{output_activation}'")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True))
        biases.append(Tensor(np.zeros(fan_out), requires_grad=True))
    return MLP(weights=weights, biases=biases, output_activation=output_activation)


@dataclass
class ModelParams:
    """All parameter sets of the agent."""
    encoder: MLP
    target_encoder: MLP
    decoder: MLP
    dynamics: MLP
    reward: MLP
    policy: MLP
    W: Tensor

    TRAINABLE = ('encoder', 'decoder', 'dynamics', 'reward', 'policy')

    @property
    def latent_dim(self) -> int:
        return self.encoder.out_dim

    @property
    def action_dim(self) -> int:
        return self.policy.out_dim // 2

    @property
    def view_dim(self) -> int:
        return self.encoder.in_dim

    def trainable(self) -> List[Tuple[str, Tensor]]:
        """Gradient-updated parameters in a fixed order (target encoder excluded)."""
        named = []
        for net_name in self.TRAINABLE:
            for name, tensor in getattr(self, net_name).parameters():
                named.append((f"{net_name}.{name}", tensor))
        named.append(('W', self.W))
        return named

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        named = self.trainable()
        for name, tensor in self.target_encoder.parameters():
            named.append((f"target_encoder.{name}", tensor))
        return named

    def replace_trainable(self, arrays: Sequence[np.ndarray]) -> 'ModelParams':
        """New ModelParams with trainable values replaced; the target encoder is shared."""
        arrays = list(arrays)
        expected = len(self.trainable())
        if len(arrays) != expected:
            raise ContractError(f"expected {expected} arrays, got {len(arrays)}")
        nets = {}
        offset = 0
        for net_name in self.TRAINABLE:
            net = getattr(self, net_name)
            count = len(net.parameters())
            nets[net_name] = net.with_arrays(arrays[offset:offset + count])
            offset += count
        if tuple(np.shape(arrays[-1])) != self.W.shape:
            raise ShapeError(f"W: shape {list(np.shape(arrays[-1]))} != {list(self.W.shape)}")
        return ModelParams(target_encoder=self.target_encoder,
                           W=Tensor(arrays[-1], requires_grad=True), **nets)

    def with_target(self, target: MLP) -> 'ModelParams':
        return ModelParams(encoder=self.encoder, target_encoder=target, decoder=self.decoder,
                           dynamics=self.dynamics, reward=self.reward, policy=self.policy, W=self.W)


def init_model_params(view_dim: int, action_dim: int, latent_dim: int,
                      hidden_sizes: Sequence[int], rng: np.random.Generator) -> ModelParams:
    """Seeded construction of every network; target starts as a copy of the encoder, W as identity."""
    hidden = list(hidden_sizes)
    encoder = init_mlp([view_dim] + hidden + [latent_dim], rng)
    decoder = init_mlp([latent_dim] + hidden + [view_dim], rng, output_activation='sigmoid')
    dynamics = init_mlp([latent_dim + action_dim] + hidden + [latent_dim], rng)
    reward = init_mlp([latent_dim + action_dim] + hidden + [1], rng)
    policy = init_mlp([latent_dim] + hidden + [2 * action_dim], rng)
    params = ModelParams(
        encoder=encoder,
        target_encoder=encoder.copy(requires_grad=False),
        decoder=decoder,
        dynamics=dynamics,
        reward=reward,
        policy=policy,
        W=Tensor(np.eye(latent_dim), requires_grad=True),
    )
    total = sum(t.size for _, t in params.trainable())
    logger.debug(f"Initialized model: latent_dim={latent_dim}, action_dim={action_dim}, "
                 f"{total} trainable values")
    return params


def _check_last_dim(op: str, x: Tensor, expected: int):
    if x.ndim == 0 or x.shape[-1] != expected:
        raise ShapeError(f"{op}: expected last dimension {expected}, got shape {list(x.shape)}")


def encode(params: MLP, views: Union[Tensor, np.ndarray]) -> Tensor:
    """Latents for a batch of flattened crops (any leading dims, last dim h*w)."""
    views = as_tensor(views)
    _check_last_dim('encode', views, params.in_dim)
    if views.size and (views.data.min() < 0.0 or views.data.max() > 1.0):
        raise ContractError("encode: view pixels must lie in [0, 1]")
    return params.forward(views)


def encode_sequence(params: MLP, views: np.ndarray) -> Tensor:
    """Encode a time-major block [T, B, h*w] in one pass; returns [T, B, D]."""
    if views.ndim != 3:
        raise ShapeError(f"encode_sequence: expected [T, B, h*w], got {list(views.shape)}")
    return encode(params, views)


def decode(params: MLP, latents: Tensor) -> Tensor:
    """Reconstructions in [0, 1] with the encoder's input width."""
    _check_last_dim('decode', latents, params.in_dim)
    return params.forward(latents)


def _state_action(op: str, params: MLP, z: Tensor, a: Union[Tensor, np.ndarray],
                  latent_dim: int) -> Tensor:
    z, a = as_tensor(z), as_tensor(a)
    _check_last_dim(op, z, latent_dim)
    _check_last_dim(op, a, params.in_dim - latent_dim)
    if z.shape[:-1] != a.shape[:-1]:
        raise ShapeError(f"{op}: latent batch {list(z.shape)} and action batch {list(a.shape)} differ")
    return concat([z, a], axis=-1)


def predict_dynamics(params: MLP, z: Tensor, a: Union[Tensor, np.ndarray]) -> Tensor:
    return params.forward(_state_action('predict_dynamics', params, z, a, params.out_dim))


def predict_reward(params: MLP, z: Tensor, a: Union[Tensor, np.ndarray],
                   latent_dim: Optional[int] = None) -> Tensor:
    latent_dim = latent_dim if latent_dim is not None else as_tensor(z).shape[-1]
    return params.forward(_state_action('predict_reward', params, z, a, latent_dim))


def policy_distribution(params: MLP, z: Tensor) -> Tuple[Tensor, Tensor]:
    """(mean, log_std) of the pre-squash Gaussian; log_std smoothly squashed into [-5, 2]."""
    z = as_tensor(z)
    _check_last_dim('policy_act', z, params.in_dim)
    out = params.forward(z)
    action_dim = params.out_dim // 2
    mean = out.slice(-1, 0, action_dim)
    raw = out.slice(-1, action_dim, 2 * action_dim)
    log_std = (raw.tanh() + 1.0) * (0.5 * (LOG_STD_MAX - LOG_STD_MIN)) + LOG_STD_MIN
    return mean, log_std


def policy_act(params: MLP, z: Tensor, mode: str = 'stochastic',
               rng: Optional[np.random.Generator] = None,
               noise: Optional[np.ndarray] = None) -> Tensor:
    """
    Action in (-1, 1)^A.

    Stochastic mode samples tanh(mean + std * noise) with the noise drawn from rng
    (or passed in), so gradients reach the policy through the sample.
    """
    if mode not in POLICY_MODES:
        raise ContractError(f"unknown policy mode '{mode}', expected one of {POLICY_MODES}")
    mean, log_std = policy_distribution(params, z)
    if mode == 'mean':
        return mean.tanh() * ACTION_BOUND
    if noise is None:
        if rng is None:
            raise ContractError("stochastic policy_act needs an rng or explicit noise")
        noise = rng.standard_normal(mean.shape)
    if tuple(np.shape(noise)) != mean.shape:
        raise ShapeError(f"policy_act: noise shape {list(np.shape(noise))} != {list(mean.shape)}")
    return (mean + log_std.exp() * noise).tanh() * ACTION_BOUND


def ema_update(target: MLP, online: MLP, m: float) -> MLP:
    """Every target value becomes m * target + (1 - m) * online. Online is untouched."""
    if not 0.0 <= m <= 1.0:
        raise ContractError(f"EMA momentum must lie in [0, 1], got {m}")
    target_params = target.parameters()
    online_params = online.parameters()
    if [t.shape for _, t in target_params] != [t.shape for _, t in online_params]:
        raise ShapeError("ema_update: target and online parameters are not shape-congruent")
    arrays = [m * t.data + (1.0 - m) * o.data for (_, t), (_, o) in zip(target_params, online_params)]
    return target.with_arrays(arrays, requires_grad=False)
