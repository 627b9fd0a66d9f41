# Autodiff package
from .tensor import (
    OP_KINDS, GradientMap, Tensor, as_tensor, backward, concat, forward_op, sigmoid,
)
from .gradcheck import finite_difference_check, finite_difference_report

__all__ = [
    'OP_KINDS',
    'GradientMap',
    'Tensor',
    'as_tensor',
    'backward',
    'concat',
    'forward_op',
    'sigmoid',
    'finite_difference_check',
    'finite_difference_report',
]
