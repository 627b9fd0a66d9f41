"""
Gradient verification suite - finite-difference checks of every loss on small
seeded problems, for both similarity kinds.

Each loss is checked against the parameter sets it is supposed to train.
Stop-gradient inputs (imagination start latents, the world model seen by the
policy, the target encoder) are frozen as constants so the numeric derivative
measures the same function the engine differentiates.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from agent.augment import CropSpec, center_views, make_pairs
from agent.losses import (
    SIM_KINDS, Hyperparams, LossTerms, dynamics_loss, infonce_loss, policy_loss,
    reconstruction_loss,
)
from agent.nets import ModelParams, decode, encode, encode_sequence, init_model_params
from autodiff.gradcheck import DEFAULT_EPS, finite_difference_report
from autodiff.tensor import Tensor

logger = logging.getLogger(__name__)

LOSS_NAMES = ('infonce', 'dynamics', 'reconstruction', 'policy', 'total')
TOLERANCE = 1e-4


@dataclass(frozen=True)
class CheckConfig:
    seed: int
    sim_kind: str = 'cosine'
    source_size: int = 6
    crop_size: int = 4
    latent_dim: int = 4
    hidden: int = 6
    action_dim: int = 1
    batch: int = 3
    length: int = 2
    horizon: int = 3


@dataclass
class CheckProblem:
    config: CheckConfig
    params: ModelParams
    hyper: Hyperparams
    spec: CropSpec
    anchors: np.ndarray
    positives: np.ndarray
    views: np.ndarray       # [L+1, N, h*w]
    actions: np.ndarray     # [L, N, A]
    rewards: np.ndarray     # [L, N]


def check_configs(seed: int = 0, count: int = 5) -> List[CheckConfig]:
    """`count` seeded configurations, each for every similarity kind."""
    configs = []
    for i in range(count):
        for kind in SIM_KINDS:
            configs.append(CheckConfig(seed=seed + i, sim_kind=kind, action_dim=1 + i % 2))
    return configs


def build_problem(config: CheckConfig) -> CheckProblem:
    rng = np.random.default_rng(config.seed)
    spec = CropSpec(config.source_size, config.source_size, config.crop_size, config.crop_size)
    params = init_model_params(spec.view_dim, config.action_dim, config.latent_dim, [config.hidden], rng)
    # identity W gives a symmetric problem; perturb it so every entry matters
    W = params.W.data + 0.1 * rng.standard_normal(params.W.shape)
    params = params.replace_trainable([t.data for _, t in params.trainable()][:-1] + [W])

    observations = rng.uniform(0.0, 1.0, size=(config.batch, config.length + 1,
                                               config.source_size, config.source_size))
    pairs = make_pairs(observations[:, 0], spec, rng)
    return CheckProblem(
        config=config,
        params=params,
        hyper=Hyperparams(horizon=config.horizon, sim_kind=config.sim_kind),
        spec=spec,
        anchors=pairs.anchors,
        positives=pairs.positives,
        views=np.swapaxes(center_views(observations, spec), 0, 1),
        actions=rng.uniform(-1.0, 1.0, size=(config.length, config.batch, config.action_dim)),
        rewards=rng.uniform(0.0, 1.0, size=(config.length, config.batch)),
    )


def _net_params(params: ModelParams, *names: str) -> List[Tensor]:
    tensors = []
    for name in names:
        if name == 'W':
            tensors.append(params.W)
        else:
            tensors.extend(t for _, t in getattr(params, name).parameters())
    return tensors


def loss_functions(problem: CheckProblem) -> Dict[str, Tuple[Callable, List[Tensor]]]:
    """name -> (scalar function, parameters it trains)."""
    p, hyper = problem.params, problem.hyper
    target = p.target_encoder.detached()
    noise_seed = problem.config.seed + 1

    def infonce(_):
        return infonce_loss(encode(p.encoder, problem.anchors), encode(target, problem.positives), hyper, W=p.W)

    def dynamics(_):
        return dynamics_loss(encode_sequence(p.encoder, problem.views), problem.actions,
                             problem.rewards, p.dynamics, p.reward)

    def reconstruction(_):
        return reconstruction_loss(problem.views, decode(p.decoder, encode_sequence(p.encoder, problem.views)))

    # frozen at the unperturbed point
    z0 = Tensor(encode_sequence(p.encoder, problem.views).data)
    dyn_const, rew_const = p.dynamics.detached(), p.reward.detached()

    def policy(_):
        return policy_loss(z0, p.policy, dyn_const, rew_const, hyper, np.random.default_rng(noise_seed))

    def total(_):
        terms = LossTerms(policy=policy(None), dynamics=dynamics(None),
                          infonce=infonce(None), reconstruction=reconstruction(None))
        return terms.total(hyper)

    contrastive = ('encoder', 'W') if hyper.sim_kind == 'bilinear' else ('encoder',)
    return {
        'infonce': (infonce, _net_params(p, *contrastive)),
        'dynamics': (dynamics, _net_params(p, 'encoder', 'dynamics', 'reward')),
        'reconstruction': (reconstruction, _net_params(p, 'encoder', 'decoder')),
        'policy': (policy, _net_params(p, 'policy')),
        'total': (total, [t for _, t in p.trainable()]),
    }


def run_gradient_suite(seed: int = 0, count: int = 5, eps: float = DEFAULT_EPS) -> Dict[str, float]:
    """
    Max relative error per loss over all seeded configurations and similarity kinds.

    Returns:
        {loss name: max relative error}, ordered as LOSS_NAMES
    """
    worst = {name: 0.0 for name in LOSS_NAMES}
    for config in check_configs(seed, count):
        problem = build_problem(config)
        for name, (f, params) in loss_functions(problem).items():
            report = finite_difference_report(f, params, eps)
            error = report['max_relative_error']
            logger.debug(f"seed {config.seed} {config.sim_kind} {name}: {error:.3e}")
            worst[name] = max(worst[name], error)
    for name, error in worst.items():
        level = logging.INFO if error < TOLERANCE else logging.WARNING
        logger.log(level, f"Gradient check {name}: max relative error {error:.3e}")
    return worst
