"""
Checkpoints - one JSON document with config, named parameter payloads,
optimizer moments and the training rng state.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from agent.nets import ModelParams, init_model_params
from envs import action_dim
from training.config import TrainConfig
from training.optimizer import OptimizerState
from utils.errors import ContractError, ShapeError

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'curled-wm-v1'


@dataclass
class Checkpoint:
    config: TrainConfig
    params: ModelParams
    optimizer: OptimizerState
    rng_state: Dict


def build_model(config: TrainConfig, rng: np.random.Generator) -> ModelParams:
    return init_model_params(
        view_dim=config.crop_size * config.crop_size,
        action_dim=action_dim(config.env_name),
        latent_dim=config.latent_dim,
        hidden_sizes=config.hidden_sizes,
        rng=rng,
    )


def _entries(named: Sequence[Tuple[str, np.ndarray]]) -> List[Dict]:
    return [{'name': name, 'shape': list(array.shape), 'data': array.tolist()} for name, array in named]


def _restore(entries: List[Dict], expected: Sequence[Tuple[str, Tuple[int, ...]]], what: str) -> List[np.ndarray]:
    by_name = {}
    for entry in entries:
        try:
            by_name[entry['name']] = (entry['shape'], entry['data'])
        except (KeyError, TypeError) as e:
            raise ContractError(f"malformed {what} entry in checkpoint: {e}") from e
    arrays = []
    for name, shape in expected:
        if name not in by_name:
            raise ContractError(f"checkpoint is missing {what} '{name}'")
        declared, data = by_name[name]
        array = np.array(data, dtype=np.float64)
        if tuple(declared) != tuple(shape) or array.shape != tuple(shape):
            raise ShapeError(f"{what} '{name}': checkpoint shape {declared} != model shape {list(shape)}")
        arrays.append(array)
    return arrays


def checkpoint_document(config: TrainConfig, params: ModelParams, opt: OptimizerState,
                        rng: np.random.Generator) -> Dict:
    trainable_names = [name for name, _ in params.trainable()]
    return {
        'format': CHECKPOINT_FORMAT,
        'config': config.to_dict(),
        'params': _entries([(name, t.data) for name, t in params.named_parameters()]),
        'optimizer': {
            'step': opt.step,
            'first_moments': _entries(list(zip(trainable_names, opt.first_moments))),
            'second_moments': _entries(list(zip(trainable_names, opt.second_moments))),
        },
        'rng': json.dumps(rng.bit_generator.state, sort_keys=True),
    }


def save_checkpoint(path: Union[str, Path], config: TrainConfig, params: ModelParams,
                    opt: OptimizerState, rng: np.random.Generator) -> str:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as f:
            json.dump(checkpoint_document(config, params, opt, rng), f, separators=(',', ':'))
    except OSError as e:
        raise ContractError(f"could not write checkpoint {path}: {e}") from e
    logger.info(f"Checkpoint saved to {path}")
    return str(path)


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    try:
        with open(path) as f:
            document = json.load(f)
    except OSError as e:
        raise ContractError(f"could not read checkpoint {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ContractError(f"checkpoint {path} is not valid JSON: {e}") from e

    if not isinstance(document, dict) or document.get('format') != CHECKPOINT_FORMAT:
        raise ContractError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")

    missing = [key for key in ('config', 'params', 'rng') if key not in document]
    if missing:
        raise ContractError(f"checkpoint {path} is missing {missing}")
    try:
        rng_state = json.loads(document['rng'])
    except (TypeError, json.JSONDecodeError) as e:
        raise ContractError(f"checkpoint {path} has an unreadable rng state: {e}") from e

    config = TrainConfig.from_dict(document['config'])
    template = build_model(config, np.random.default_rng(0))
    named = template.named_parameters()
    arrays = _restore(document['params'], [(n, t.shape) for n, t in named], 'parameter')
    values = dict(zip([n for n, _ in named], arrays))

    trainable_names = [n for n, _ in template.trainable()]
    params = template.replace_trainable([values[n] for n in trainable_names])
    target = template.target_encoder.with_arrays(
        [values[f"target_encoder.{n}"] for n, _ in template.target_encoder.parameters()],
        requires_grad=False,
    )
    params = params.with_target(target)

    shapes = [(n, t.shape) for n, t in template.trainable()]
    opt_doc = document.get('optimizer', {})
    optimizer = OptimizerState(
        first_moments=_restore(opt_doc.get('first_moments', []), shapes, 'first moment'),
        second_moments=_restore(opt_doc.get('second_moments', []), shapes, 'second moment'),
        step=int(opt_doc.get('step', 0)),
    )
    logger.info(f"Loaded checkpoint {path} ({config.env_name}, optimizer step {optimizer.step})")
    return Checkpoint(config=config, params=params, optimizer=optimizer,
                      rng_state=rng_state)


def target_encoder_digest(params: ModelParams) -> str:
    """Digest of the target encoder values, used by the debug audit."""
    digest = hashlib.sha256()
    for _, tensor in params.target_encoder.parameters():
        digest.update(np.ascontiguousarray(tensor.data).tobytes())
    return digest.hexdigest()
