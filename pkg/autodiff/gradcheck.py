"""
Finite-difference oracle for the reverse-mode engine.

Compares analytic gradients against central differences coordinate by
coordinate and reports the worst relative error.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from autodiff.tensor import Tensor, backward
from utils.errors import ContractError, NonFiniteError

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-5
RELATIVE_FLOOR = 1e-12


def _evaluate(f: Callable[[List[Tensor]], Tensor], params: List[Tensor]) -> float:
    out = f(params)
    if out.size != 1:
        raise ContractError(f"gradient check needs a scalar function, got shape {list(out.shape)}")
    return out.item()


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), RELATIVE_FLOOR)


def finite_difference_report(
    f: Callable[[List[Tensor]], Tensor],
    params: Sequence[Tensor],
    eps: float = DEFAULT_EPS,
    analytic_override: Optional[List[np.ndarray]] = None,
    atol: float = 0.0,
) -> Dict:
    """
    Run the full check and return per-parameter details.

    Args:
        f: deterministic function of the parameter list returning a scalar tensor
        params: tensors with requires_grad=True; their data is perturbed in place
            during the check and restored afterwards
        eps: central-difference step
        analytic_override: replaces the engine's gradients (used to test the oracle)
        atol: coordinates whose absolute discrepancy is at most atol count as exact

    Returns:
        Dict with max_relative_error, per_param list of maxima, and the worst coordinate.
    """
    if eps <= 0:
        raise ContractError(f"eps must be positive, got {eps}")
    params = list(params)

    if analytic_override is None:
        grads = backward(f(params))
        analytic = [grads.array_for(p) for p in params]
    else:
        analytic = [np.asarray(a, dtype=np.float64) for a in analytic_override]

    worst = {'param': None, 'index': None, 'error': 0.0}
    per_param = []
    for p_idx, param in enumerate(params):
        flat = param.data.reshape(-1)
        flat_grad = analytic[p_idx].reshape(-1)
        param_max = 0.0
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            try:
                f_plus = _evaluate(f, params)
                flat[i] = original - eps
                f_minus = _evaluate(f, params)
            finally:
                flat[i] = original
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NonFiniteError(
                    "non-finite value during finite differencing",
                    diagnostics={'param': p_idx, 'coordinate': i},
                )
            numeric = (f_plus - f_minus) / (2.0 * eps)
            if abs(float(flat_grad[i]) - numeric) <= atol:
                err = 0.0
            else:
                err = relative_error(float(flat_grad[i]), numeric)
            if err > param_max:
                param_max = err
            if err > worst['error']:
                worst = {'param': p_idx, 'index': i, 'error': err}
        per_param.append(param_max)

    return {
        'max_relative_error': max(per_param) if per_param else 0.0,
        'per_param': per_param,
        'worst': worst,
    }


def finite_difference_check(
    f: Callable[[List[Tensor]], Tensor],
    params: Sequence[Tensor],
    eps: float = DEFAULT_EPS,
    atol: float = 0.0,
) -> float:
    """Max over all coordinates of |analytic - central| / max(|analytic|, |central|, 1e-12)."""
    report = finite_difference_report(f, params, eps, atol=atol)
    logger.debug(f"Gradient check: max relative error {report['max_relative_error']:.3e} "
                 f"(worst {report['worst']})")
    return report['max_relative_error']
