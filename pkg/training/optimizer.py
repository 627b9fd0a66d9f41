"""
Adaptive-moment (Adam) update over a flat list of parameter arrays.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from utils.errors import ShapeError

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


@dataclass
class OptimizerState:
    first_moments: List[np.ndarray]
    second_moments: List[np.ndarray]
    step: int = 0


def init_optimizer(params: Sequence[np.ndarray]) -> OptimizerState:
    return OptimizerState(
        first_moments=[np.zeros_like(p) for p in params],
        second_moments=[np.zeros_like(p) for p in params],
        step=0,
    )


def adaptive_moment_update(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
                           opt: OptimizerState, lr: float) -> Tuple[List[np.ndarray], OptimizerState]:
    """
    One bias-corrected Adam step. Inputs are not modified.

    Returns:
        (new parameter arrays, new optimizer state)
    """
    if not (len(params) == len(grads) == len(opt.first_moments)):
        raise ShapeError(f"optimizer: {len(params)} params, {len(grads)} grads, "
                         f"{len(opt.first_moments)} moment slots")
    step = opt.step + 1
    correction1 = 1.0 - BETA1 ** step
    correction2 = 1.0 - BETA2 ** step
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, opt.first_moments, opt.second_moments):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"optimizer: parameter {list(p.shape)} vs gradient {list(g.shape)}")
        m = BETA1 * m + (1.0 - BETA1) * g
        v = BETA2 * v + (1.0 - BETA2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + EPSILON))
        new_m.append(m)
        new_v.append(v)
    return new_params, OptimizerState(first_moments=new_m, second_moments=new_v, step=step)
