"""
Tensor - dense float64 arrays with reverse-mode automatic differentiation

Every forward operation records its inputs on the output tensor. `backward`
walks that record once in reverse topological order and returns a GradientMap.
The record lives as long as the tensors that reference it, so a training step's
graph is dropped as soon as the step's losses go out of scope.

Broadcasting is restricted to leading axes: one operand's shape must equal the
other's shape or a suffix of it ([B, D] + [D], [B, D] * []).
"""

import logging
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import ContractError, DomainError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

OP_KINDS = (
    'add', 'subtract', 'multiply', 'matmul', 'relu', 'tanh', 'exp', 'log',
    'sum', 'mean', 'square', 'concat', 'slice', 'broadcast', 'softmax',
    'l2_normalize',
)

ArrayLike = Union['Tensor', np.ndarray, float, int, Sequence]


class Tensor:
    """A float64 array that can take part in reverse-mode differentiation."""

    __slots__ = ('data', 'requires_grad', '_parents', '_kind', '_attrs')

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self._parents: Tuple['Tensor', ...] = ()
        self._kind: Optional[str] = None
        self._attrs: Dict = {}

    # ── Introspection ────────────────────────────────────────────
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def node_id(self) -> int:
        return id(self)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> 'Tensor':
        """Constant copy sharing no computation record."""
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        grad = ', requires_grad=True' if self.requires_grad else ''
        return f"Tensor(shape={list(self.shape)}{grad})"

    # ── Operators ────────────────────────────────────────────────
    def __add__(self, other):
        return forward_op('add', [self, as_tensor(other)])

    def __radd__(self, other):
        return forward_op('add', [as_tensor(other), self])

    def __sub__(self, other):
        return forward_op('subtract', [self, as_tensor(other)])

    def __rsub__(self, other):
        return forward_op('subtract', [as_tensor(other), self])

    def __mul__(self, other):
        return forward_op('multiply', [self, as_tensor(other)])

    def __rmul__(self, other):
        return forward_op('multiply', [as_tensor(other), self])

    def __neg__(self):
        return forward_op('multiply', [self, Tensor(-1.0)])

    def __matmul__(self, other):
        return forward_op('matmul', [self, as_tensor(other)])

    def relu(self) -> 'Tensor':
        return forward_op('relu', [self])

    def tanh(self) -> 'Tensor':
        return forward_op('tanh', [self])

    def exp(self) -> 'Tensor':
        return forward_op('exp', [self])

    def log(self) -> 'Tensor':
        return forward_op('log', [self])

    def square(self) -> 'Tensor':
        return forward_op('square', [self])

    def sum(self, axis: Optional[int] = None) -> 'Tensor':
        return forward_op('sum', [self], {'axis': axis})

    def mean(self, axis: Optional[int] = None) -> 'Tensor':
        return forward_op('mean', [self], {'axis': axis})

    def softmax(self) -> 'Tensor':
        return forward_op('softmax', [self])

    def l2_normalize(self) -> 'Tensor':
        return forward_op('l2_normalize', [self])

    def slice(self, axis: int, start: int, stop: int) -> 'Tensor':
        return forward_op('slice', [self], {'axis': axis, 'start': start, 'stop': stop})

    def broadcast_to(self, shape: Sequence[int]) -> 'Tensor':
        return forward_op('broadcast', [self], {'shape': tuple(shape)})

    def backward(self) -> 'GradientMap':
        return backward(self)


def as_tensor(value: ArrayLike) -> Tensor:
    """Wrap plain numbers and arrays as constant tensors."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    return forward_op('concat', [as_tensor(t) for t in tensors], {'axis': axis})


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function composed from tanh: sigmoid(x) = 0.5 * (1 + tanh(x / 2))."""
    return (x * 0.5).tanh() * 0.5 + 0.5


class GradientMap:
    """Gradients keyed by the node_id of the tensor they belong to."""

    def __init__(self):
        self._grads: Dict[int, np.ndarray] = {}
        self._tensors: Dict[int, Tensor] = {}

    def _key(self, key) -> int:
        return key.node_id if isinstance(key, Tensor) else int(key)

    def _accumulate(self, tensor: Tensor, grad: np.ndarray):
        nid = tensor.node_id
        if nid in self._grads:
            self._grads[nid] = self._grads[nid] + grad
        else:
            self._grads[nid] = np.array(grad, dtype=np.float64)
            self._tensors[nid] = tensor

    def __contains__(self, key) -> bool:
        return self._key(key) in self._grads

    def __getitem__(self, key) -> Tensor:
        return Tensor(self._grads[self._key(key)])

    def get(self, key, default=None) -> Optional[Tensor]:
        nid = self._key(key)
        return Tensor(self._grads[nid]) if nid in self._grads else default

    def array_for(self, tensor: Tensor) -> np.ndarray:
        """Gradient as an array; zeros when the tensor was not reached."""
        grad = self._grads.get(tensor.node_id)
        return np.zeros(tensor.shape) if grad is None else grad.copy()

    def __len__(self) -> int:
        return len(self._grads)

    def __iter__(self) -> Iterator[int]:
        return iter(self._grads)

    def items(self):
        return ((nid, Tensor(g)) for nid, g in self._grads.items())


# ── Shape helpers ────────────────────────────────────────────────

def _leading_broadcast_shape(kind: str, a: Tuple[int, ...], b: Tuple[int, ...]) -> Tuple[int, ...]:
    if a == b:
        return a
    if len(a) > len(b) and a[len(a) - len(b):] == b:
        return a
    if len(b) > len(a) and b[len(b) - len(a):] == a:
        return b
    raise ShapeError(f"{kind}: shapes {list(a)} and {list(b)} are not leading-axis broadcastable")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad


def _normalize_axis(kind: str, axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"{kind}: axis {axis} out of range for rank {ndim}")
    return axis % ndim


# ── Forward / backward rules ─────────────────────────────────────
# Each rule takes the input arrays and attrs; forward returns the output array,
# backward returns one gradient (or None) per input.

def _fw_add(xs, attrs):
    _leading_broadcast_shape('add', xs[0].shape, xs[1].shape)
    return xs[0] + xs[1]


def _bw_add(g, xs, out, attrs):
    return [_unbroadcast(g, xs[0].shape), _unbroadcast(g, xs[1].shape)]


def _fw_subtract(xs, attrs):
    _leading_broadcast_shape('subtract', xs[0].shape, xs[1].shape)
    return xs[0] - xs[1]


def _bw_subtract(g, xs, out, attrs):
    return [_unbroadcast(g, xs[0].shape), -_unbroadcast(g, xs[1].shape)]


def _fw_multiply(xs, attrs):
    _leading_broadcast_shape('multiply', xs[0].shape, xs[1].shape)
    return xs[0] * xs[1]


def _bw_multiply(g, xs, out, attrs):
    return [_unbroadcast(g * xs[1], xs[0].shape), _unbroadcast(g * xs[0], xs[1].shape)]


def _fw_matmul(xs, attrs):
    a, b = xs
    if a.ndim < 1 or b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply shapes {list(a.shape)} and {list(b.shape)}")
    return a @ b


def _bw_matmul(g, xs, out, attrs):
    a, b = xs
    grad_a = g @ b.T
    if a.ndim == 1:
        grad_b = np.outer(a, g)
    else:
        grad_b = a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, b.shape[1])
    return [grad_a, grad_b]


def _fw_relu(xs, attrs):
    return np.maximum(xs[0], 0.0)


def _bw_relu(g, xs, out, attrs):
    return [g * (xs[0] > 0.0)]


def _fw_tanh(xs, attrs):
    return np.tanh(xs[0])


def _bw_tanh(g, xs, out, attrs):
    return [g * (1.0 - out * out)]


def _fw_exp(xs, attrs):
    return np.exp(xs[0])


def _bw_exp(g, xs, out, attrs):
    return [g * out]


def _fw_log(xs, attrs):
    x = xs[0]
    if np.any(x <= 0.0):
        bad = np.unravel_index(int(np.argmax(x <= 0.0)), x.shape) if x.ndim else ()
        raise DomainError(f"log: non-positive input at index {list(bad)}")
    return np.log(x)


def _bw_log(g, xs, out, attrs):
    return [g / xs[0]]


def _reduce_axis(kind, x, attrs):
    axis = attrs.get('axis')
    if axis is None:
        return None
    if x.ndim == 0:
        raise ShapeError(f"{kind}: cannot reduce a scalar along axis {axis}")
    return _normalize_axis(kind, axis, x.ndim)


def _fw_sum(xs, attrs):
    return np.sum(xs[0], axis=_reduce_axis('sum', xs[0], attrs))


def _bw_sum(g, xs, out, attrs):
    x = xs[0]
    axis = _reduce_axis('sum', x, attrs)
    if axis is not None:
        g = np.expand_dims(g, axis)
    return [np.broadcast_to(g, x.shape)]


def _fw_mean(xs, attrs):
    x = xs[0]
    if x.size == 0:
        raise ShapeError("mean: empty input")
    return np.mean(x, axis=_reduce_axis('mean', x, attrs))


def _bw_mean(g, xs, out, attrs):
    x = xs[0]
    axis = _reduce_axis('mean', x, attrs)
    count = x.size if axis is None else x.shape[axis]
    if axis is not None:
        g = np.expand_dims(g, axis)
    return [np.broadcast_to(g / count, x.shape)]


def _fw_square(xs, attrs):
    return xs[0] * xs[0]


def _bw_square(g, xs, out, attrs):
    return [2.0 * xs[0] * g]


def _fw_concat(xs, attrs):
    if not xs:
        raise ShapeError("concat: no inputs")
    ndim = xs[0].ndim
    if ndim == 0 or any(x.ndim != ndim for x in xs):
        raise ShapeError(f"concat: incompatible ranks {[list(x.shape) for x in xs]}")
    axis = _normalize_axis('concat', attrs.get('axis', -1), ndim)
    for x in xs[1:]:
        if x.shape[:axis] + x.shape[axis + 1:] != xs[0].shape[:axis] + xs[0].shape[axis + 1:]:
            raise ShapeError(f"concat: shapes {[list(x.shape) for x in xs]} differ off axis {axis}")
    return np.concatenate(xs, axis=axis)


def _bw_concat(g, xs, out, attrs):
    axis = attrs.get('axis', -1) % xs[0].ndim
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return np.split(g, bounds, axis=axis)


def _slice_index(kind, x, attrs):
    if x.ndim == 0:
        raise ShapeError(f"{kind}: cannot slice a scalar")
    axis = _normalize_axis(kind, attrs['axis'], x.ndim)
    start, stop = attrs['start'], attrs['stop']
    if not 0 <= start < stop <= x.shape[axis]:
        raise ShapeError(f"{kind}: range [{start}, {stop}) invalid for extent {x.shape[axis]} on axis {axis}")
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    return tuple(index)


def _fw_slice(xs, attrs):
    return xs[0][_slice_index('slice', xs[0], attrs)].copy()


def _bw_slice(g, xs, out, attrs):
    grad = np.zeros_like(xs[0])
    grad[_slice_index('slice', xs[0], attrs)] = g
    return [grad]


def _fw_broadcast(xs, attrs):
    target = tuple(attrs['shape'])
    x = xs[0]
    if _leading_broadcast_shape('broadcast', x.shape, target) != target:
        raise ShapeError(f"broadcast: cannot broadcast {list(x.shape)} to {list(target)}")
    return np.broadcast_to(x, target).copy()


def _bw_broadcast(g, xs, out, attrs):
    return [_unbroadcast(g, xs[0].shape)]


def _fw_softmax(xs, attrs):
    x = xs[0]
    if x.ndim == 0:
        raise ShapeError("softmax: needs at least one axis")
    shifted = np.exp(x - np.max(x, axis=-1, keepdims=True))
    return shifted / np.sum(shifted, axis=-1, keepdims=True)


def _bw_softmax(g, xs, out, attrs):
    return [out * (g - np.sum(g * out, axis=-1, keepdims=True))]


def _fw_l2_normalize(xs, attrs):
    x = xs[0]
    if x.ndim == 0:
        raise ShapeError("l2_normalize: needs at least one axis")
    norm = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    if np.any(norm == 0.0):
        raise DomainError("l2_normalize: zero vector along the last axis")
    return x / norm


def _bw_l2_normalize(g, xs, out, attrs):
    x = xs[0]
    norm = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    return [(g - out * np.sum(g * out, axis=-1, keepdims=True)) / norm]


_RULES: Dict[str, Tuple[Callable, Callable]] = {
    'add': (_fw_add, _bw_add),
    'subtract': (_fw_subtract, _bw_subtract),
    'multiply': (_fw_multiply, _bw_multiply),
    'matmul': (_fw_matmul, _bw_matmul),
    'relu': (_fw_relu, _bw_relu),
    'tanh': (_fw_tanh, _bw_tanh),
    'exp': (_fw_exp, _bw_exp),
    'log': (_fw_log, _bw_log),
    'sum': (_fw_sum, _bw_sum),
    'mean': (_fw_mean, _bw_mean),
    'square': (_fw_square, _bw_square),
    'concat': (_fw_concat, _bw_concat),
    'slice': (_fw_slice, _bw_slice),
    'broadcast': (_fw_broadcast, _bw_broadcast),
    'softmax': (_fw_softmax, _bw_softmax),
    'l2_normalize': (_fw_l2_normalize, _bw_l2_normalize),
}

_UNARY = {'relu', 'tanh', 'exp', 'log', 'sum', 'mean', 'square', 'slice', 'broadcast',
          'softmax', 'l2_normalize'}
_BINARY = {'add', 'subtract', 'multiply', 'matmul'}


def forward_op(kind: str, inputs: Sequence[Tensor], attrs: Optional[Dict] = None) -> Tensor:
    """
    Apply one operation and record it for backward.

    Args:
        kind: one of OP_KINDS
        inputs: input tensors
        attrs: static attributes (axis, start/stop, target shape)

    Returns:
        The result tensor. It requires grad when any input does.
    """
    if kind not in _RULES:
        raise ContractError(f"Unknown operation '{kind}'. Available: {', '.join(OP_KINDS)}")
    attrs = dict(attrs or {})
    if kind in _UNARY and len(inputs) != 1:
        raise ContractError(f"{kind}: expects 1 input, got {len(inputs)}")
    if kind in _BINARY and len(inputs) != 2:
        raise ContractError(f"{kind}: expects 2 inputs, got {len(inputs)}")

    forward_fn, _ = _RULES[kind]
    arrays = [t.data for t in inputs]
    with np.errstate(over='ignore', invalid='ignore', divide='ignore'):
        data = forward_fn(arrays, attrs)

    if not np.all(np.isfinite(data)) and all(np.all(np.isfinite(a)) for a in arrays):
        raise NonFiniteError(
            f"{kind} produced non-finite values from finite inputs",
            diagnostics={'op': kind, 'shapes': [list(a.shape) for a in arrays]},
        )

    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data, dtype=np.float64)
    out.requires_grad = any(t.requires_grad for t in inputs)
    out._parents = tuple(inputs) if out.requires_grad else ()
    out._kind = kind if out.requires_grad else None
    out._attrs = attrs
    return out


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in visited:
            continue
        visited.add(node.node_id)
        stack.append((node, True))
        for parent in reversed(node._parents):
            if parent.requires_grad and parent.node_id not in visited:
                stack.append((parent, False))
    return order


def backward(scalar: Tensor) -> GradientMap:
    """
    Reverse-mode gradients of a scalar with respect to every requires_grad ancestor.

    Gradients from fan-out are summed. The computation record is left intact, so
    several scalars built on one graph can each be differentiated.
    """
    if scalar.shape not in ((), (1,)):
        raise ContractError(f"backward needs a scalar of shape [] or [1], got {list(scalar.shape)}")
    grads = GradientMap()
    if not scalar.requires_grad:
        return grads

    grads._accumulate(scalar, np.ones(scalar.shape))
    for node in reversed(_topological_order(scalar)):
        if not node._parents:
            continue
        upstream = grads._grads[node.node_id]
        _, backward_fn = _RULES[node._kind]
        parent_grads = backward_fn(upstream, [p.data for p in node._parents], node.data, node._attrs)
        for parent, grad in zip(node._parents, parent_grads):
            if parent.requires_grad and grad is not None:
                grads._accumulate(parent, grad)
    return grads
