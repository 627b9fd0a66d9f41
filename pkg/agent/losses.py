"""
Losses - contrastive, dynamics/reward, reconstruction and imagination policy
objectives, and their weighted combination.

All functions are pure: they read parameters and batches and return Tensors
whose computation record reaches exactly the parameters that should learn
from them.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Union

import numpy as np

from agent.augment import CropSpec, center_views, make_pairs
from agent.nets import (
    MLP, ModelParams, decode, encode, encode_sequence, policy_act,
    predict_dynamics, predict_reward,
)
from autodiff.tensor import Tensor, as_tensor
from utils.errors import ContractError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

SIM_KINDS = ('cosine', 'bilinear')


@dataclass
class Hyperparams:
    lambda1: float = 1.0     # dynamics weight
    lambda2: float = 1.0     # contrastive weight
    lambda3: float = 1.0     # reconstruction weight
    tau: float = 0.1
    gamma: float = 0.99
    horizon: int = 15
    momentum: float = 0.95
    sim_kind: str = 'cosine'

    def __post_init__(self):
        for name in ('lambda1', 'lambda2', 'lambda3'):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ContractError(f"{name} must be a finite non-negative weight, got {value}")
        if not self.tau > 0:
            raise ContractError(f"tau must be positive, got {self.tau}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ContractError(f"gamma must lie in [0, 1], got {self.gamma}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ContractError(f"horizon must be an integer >= 1, got {self.horizon}")
        if not 0.0 <= self.momentum <= 1.0:
            raise ContractError(f"momentum must lie in [0, 1], got {self.momentum}")
        if self.sim_kind not in SIM_KINDS:
            raise ContractError(f"sim_kind must be one of {SIM_KINDS}, got '{self.sim_kind}'")

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class LossBreakdown:
    policy: float
    dynamics: float
    infonce: float
    reconstruction: float
    total: float

    def recombined(self, hyper: Hyperparams) -> float:
        """The weighted sum evaluated in the same order as the training objective."""
        return (self.policy + hyper.lambda1 * self.dynamics
                + hyper.lambda2 * self.infonce + hyper.lambda3 * self.reconstruction)


@dataclass
class LossTerms:
    """The four differentiable components of one training step."""
    policy: Tensor
    dynamics: Tensor
    infonce: Tensor
    reconstruction: Tensor

    def weighted(self, hyper: Hyperparams) -> Dict[str, Tensor]:
        return {
            'dynamics': self.dynamics * hyper.lambda1,
            'infonce': self.infonce * hyper.lambda2,
            'reconstruction': self.reconstruction * hyper.lambda3,
        }

    def total(self, hyper: Hyperparams) -> Tensor:
        weighted = self.weighted(hyper)
        return self.policy + weighted['dynamics'] + weighted['infonce'] + weighted['reconstruction']


# ── Contrastive ──────────────────────────────────────────────────

def _require_w(kind: str, W: Optional[Tensor], dim: int) -> Tensor:
    if W is None:
        raise ContractError(f"{kind} similarity needs the bilinear matrix W")
    if W.shape != (dim, dim):
        raise ShapeError(f"W must be {dim}x{dim}, got {list(W.shape)}")
    return W


def similarity(u: Tensor, v: Tensor, kind: str = 'cosine', W: Optional[Tensor] = None) -> Tensor:
    """cosine: u.v / (|u||v|) in [-1, 1]; bilinear: u^T W v."""
    u, v = as_tensor(u), as_tensor(v)
    if u.ndim != 1 or u.shape != v.shape:
        raise ShapeError(f"similarity: expected equal 1-D latents, got {list(u.shape)} and {list(v.shape)}")
    if kind == 'cosine':
        return (u.l2_normalize() * v.l2_normalize()).sum()
    if kind == 'bilinear':
        return ((u @ _require_w(kind, W, u.shape[0])) * v).sum()
    raise ContractError(f"unknown similarity kind '{kind}', expected one of {SIM_KINDS}")


def similarity_matrix(anchors: Tensor, positives: Tensor, kind: str = 'cosine',
                      W: Optional[Tensor] = None) -> Tensor:
    """[N, N] similarities sim(anchor_i, positive_j); positives act as constants."""
    if anchors.ndim != 2 or anchors.shape != positives.shape:
        raise ShapeError(f"similarity_matrix: expected equal [N, D] batches, got "
                         f"{list(anchors.shape)} and {list(positives.shape)}")
    targets = positives.detach()
    if kind == 'cosine':
        return anchors.l2_normalize() @ Tensor(targets.l2_normalize().data.T)
    if kind == 'bilinear':
        return (anchors @ _require_w(kind, W, anchors.shape[1])) @ Tensor(targets.data.T)
    raise ContractError(f"unknown similarity kind '{kind}', expected one of {SIM_KINDS}")


def infonce_loss(anchor_latents: Tensor, positive_latents: Tensor, hyper: Hyperparams,
                 W: Optional[Tensor] = None) -> Tensor:
    """
    Mean over anchors of -log softmax_j(sim(z_i, z_j+) / tau) at j = i.

    The candidate set for anchor i is all N positives: its own positive plus the
    N - 1 positives of the other observations.
    """
    if hyper.tau <= 0:
        raise ContractError(f"tau must be positive, got {hyper.tau}")
    if anchor_latents.ndim != 2 or anchor_latents.shape[0] < 1:
        raise ContractError(f"infonce_loss needs N >= 1 anchors, got shape {list(anchor_latents.shape)}")
    sims = similarity_matrix(anchor_latents, positive_latents, hyper.sim_kind, W)
    if not np.all(np.isfinite(sims.data)):
        raise NonFiniteError("non-finite similarity in contrastive loss",
                             diagnostics={'sim_kind': hyper.sim_kind})
    logits = sims * (1.0 / hyper.tau)
    n = logits.shape[0]
    # log-sum-exp against the row maximum; the shifted row sum is at least 1
    peak = np.broadcast_to(logits.data.max(axis=-1, keepdims=True), logits.shape).copy()
    shifted = logits - Tensor(peak)
    log_norm = shifted.exp().sum(axis=-1).log()
    matched = (shifted * np.eye(n)).sum(axis=-1)
    return (log_norm - matched).mean()


# ── World model ──────────────────────────────────────────────────

def dynamics_loss(latents: Tensor, actions: np.ndarray, rewards: np.ndarray,
                  dyn: MLP, rew: MLP) -> Tensor:
    """
    Mean over batch and time of |g(z_t, a_t) - z_{t+1}|^2 + (r(z_t, a_t) - r_t)^2.

    Args:
        latents: [T+1, B, D] time-major latents
        actions: [T, B, A]
        rewards: [T, B]
    """
    actions = np.asarray(actions, dtype=np.float64)
    rewards = np.asarray(rewards, dtype=np.float64)
    if latents.ndim != 3 or latents.shape[0] < 2:
        raise ContractError(f"dynamics_loss needs [T+1, B, D] latents with T >= 1, got {list(latents.shape)}")
    steps, batch = latents.shape[0] - 1, latents.shape[1]
    if actions.shape[:2] != (steps, batch) or rewards.shape != (steps, batch):
        raise ContractError(
            f"dynamics_loss: latents {list(latents.shape)}, actions {list(actions.shape)} and "
            f"rewards {list(rewards.shape)} have inconsistent lengths"
        )
    z = latents.slice(0, 0, steps)
    z_next = latents.slice(0, 1, steps + 1)
    latent_error = (predict_dynamics(dyn, z, actions) - z_next).square().sum(axis=-1)
    reward_error = (predict_reward(rew, z, actions) - rewards[..., None]).square().sum(axis=-1)
    return (latent_error + reward_error).mean()


def reconstruction_loss(targets: Union[Tensor, np.ndarray], reconstructions: Tensor) -> Tensor:
    """Mean over the batch of the summed squared pixel error."""
    targets = as_tensor(targets)
    if targets.shape != reconstructions.shape:
        raise ContractError(f"reconstruction_loss: target shape {list(targets.shape)} != "
                            f"reconstruction shape {list(reconstructions.shape)}")
    return (reconstructions - targets).square().sum(axis=-1).mean()


def policy_loss(z0: Tensor, policy: MLP, dyn: MLP, rew: MLP, hyper: Hyperparams,
                rng: np.random.Generator) -> Tensor:
    """
    -sum_{t=1..H} gamma^t r_hat_t averaged over the batch, imagined entirely in latent space.

    Start latents and the world model enter as constants, so only the policy
    receives gradient. Step t acts on the latent reached after t-1 imagined steps.
    """
    if hyper.horizon < 1:
        raise ContractError(f"horizon must be >= 1, got {hyper.horizon}")
    dyn_const, rew_const = dyn.detached(), rew.detached()
    latent_dim = dyn.out_dim
    z = as_tensor(z0).detach()
    discounted = None
    for t in range(1, hyper.horizon + 1):
        action = policy_act(policy, z, 'stochastic', rng)
        reward = predict_reward(rew_const, z, action, latent_dim)
        if not np.all(np.isfinite(reward.data)):
            raise NonFiniteError("non-finite imagined reward", diagnostics={'imagination_step': t})
        term = reward * (hyper.gamma ** t)
        discounted = term if discounted is None else discounted + term
        z = predict_dynamics(dyn_const, z, action)
    return discounted.mean() * -1.0


# ── Combination ──────────────────────────────────────────────────

def total_loss(parts: LossTerms, hyper: Hyperparams) -> LossBreakdown:
    """
    policy + lambda1 * dynamics + lambda2 * infonce + lambda3 * reconstruction.

    Components are echoed unweighted; the total is the value of parts.total(hyper).
    """
    terms = LossTerms(*(as_tensor(getattr(parts, name))
                        for name in ('policy', 'dynamics', 'infonce', 'reconstruction')))
    for name in ('policy', 'dynamics', 'infonce', 'reconstruction'):
        value = getattr(terms, name).item()
        if not math.isfinite(value):
            raise NonFiniteError(f"non-finite {name} loss", diagnostics={'component': name, 'value': value})
    return LossBreakdown(
        policy=terms.policy.item(),
        dynamics=terms.dynamics.item(),
        infonce=terms.infonce.item(),
        reconstruction=terms.reconstruction.item(),
        total=terms.total(hyper).item(),
    )


def compute_loss_terms(params: ModelParams, observations: np.ndarray, actions: np.ndarray,
                       rewards: np.ndarray, spec: CropSpec, hyper: Hyperparams,
                       rng: np.random.Generator) -> LossTerms:
    """
    One pass of the training objective over a sequence batch.

    Args:
        observations: [N, L+1, H, W]
        actions: [N, L, A]
        rewards: [N, L]
        rng: drives crop offsets first, then the imagination noise

    The contrastive pairs come from each sequence's first observation; the
    reconstruction and dynamics paths use center crops of every observation;
    imagination starts from every encoded latent of the batch.
    """
    if observations.ndim != 4:
        raise ShapeError(f"observations must be [N, L+1, H, W], got {list(observations.shape)}")

    pairs = make_pairs(observations[:, 0], spec, rng)
    anchors = encode(params.encoder, pairs.anchors)
    positives = encode(params.target_encoder.detached(), pairs.positives)
    infonce = infonce_loss(anchors, positives, hyper, W=params.W)

    views = np.swapaxes(center_views(observations, spec), 0, 1)    # [L+1, N, h*w]
    latents = encode_sequence(params.encoder, views)
    dynamics = dynamics_loss(latents, np.swapaxes(actions, 0, 1), np.swapaxes(rewards, 0, 1),
                             params.dynamics, params.reward)
    reconstruction = reconstruction_loss(views, decode(params.decoder, latents))
    policy = policy_loss(latents, params.policy, params.dynamics, params.reward, hyper, rng)

    return LossTerms(policy=policy, dynamics=dynamics, infonce=infonce, reconstruction=reconstruction)
