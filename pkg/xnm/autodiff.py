"""
Dense tensors with reverse-mode automatic differentiation.

Operations are recorded on the active `Tape` (installed with ``with Tape() as tape:``)
whenever one of their inputs requires a gradient. `backward` replays the tape in
reverse, so every recorded operation's inputs precede it by construction.

Shapes are explicit: elementwise operations accept equal shapes or a 0-d scalar on
one side, and `linear` is the only op that adds a bias row to every row of a matrix.
"""
import contextlib
import contextvars
import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from xnm.errors import GradientError, ShapeError

logger = logging.getLogger(__name__)

_dtype = contextvars.ContextVar("xnm_dtype", default=np.float32)
_active_tape = contextvars.ContextVar("xnm_tape", default=None)

Number = Union[int, float]


@contextlib.contextmanager
def precision(name: str):
    """Create new tensors with another float dtype (gradient checks run in float64)"""
    token = _dtype.set(np.dtype(name).type)
    try:
        yield
    finally:
        _dtype.reset(token)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=_dtype.get(), order="C")
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self.name = name

    @property
    def shape(self) -> List[int]:
        return list(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return divide(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


class _Record:
    __slots__ = ("output", "inputs", "backward", "op")

    def __init__(self, output: Tensor, inputs: Tuple[Tensor, ...], backward: Callable, op: str):
        self.output = output
        self.inputs = inputs
        self.backward = backward
        self.op = op


class Tape:
    """Ordered record of the operations executed while it is active"""

    def __init__(self):
        self.records: List[_Record] = []
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _active_tape.reset(self._token)
        self._token = None
        return False

    def __len__(self) -> int:
        return len(self.records)

    def ops(self) -> List[str]:
        return [record.op for record in self.records]


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, inputs: Tuple[Tensor, ...], backward: Callable, op: str) -> Tensor:
    tape = _active_tape.get()
    requires = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data, dtype=_dtype.get(), order="C")
    out.requires_grad = requires
    out.grad = None
    out.name = None
    if requires:
        tape.records.append(_Record(out, inputs, backward, op))
    return out


def _check_elementwise(a: Tensor, b: Tensor, op: str):
    if a.data.shape != b.data.shape and a.data.ndim != 0 and b.data.ndim != 0:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _reduce_to(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum(), dtype=grad.dtype).reshape(shape)


# --- elementwise -------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "add")

    def backward(g):
        return _reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape)

    return _result(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "sub")

    def backward(g):
        return _reduce_to(g, a.data.shape), _reduce_to(-g, b.data.shape)

    return _result(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_elementwise(a, b, "mul")

    def backward(g):
        return _reduce_to(g * b.data, a.data.shape), _reduce_to(g * a.data, b.data.shape)

    return _result(a.data * b.data, (a, b), backward, "mul")


def divide(a, s) -> Tensor:
    """a / s for a scalar divisor s"""
    a, s = _as_tensor(a), _as_tensor(s)
    if s.data.size != 1:
        raise ShapeError(f"divide: divisor must be a scalar, got shape {s.shape}")
    divisor = s.data.reshape(())

    def backward(g):
        grad_s = -np.sum(g * a.data) / (divisor * divisor)
        return g / divisor, np.asarray(grad_s, dtype=g.dtype).reshape(s.data.shape)

    return _result(a.data / divisor, (a, s), backward, "divide")


def one_minus(a: Tensor) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        return (-g,)

    return _result(1.0 - a.data, (a,), backward, "one_minus")


def minimum(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"minimum: shape mismatch {a.shape} vs {b.shape}")
    # ties split the gradient evenly
    left = (a.data < b.data) + 0.5 * (a.data == b.data)

    def backward(g):
        return g * left, g * (1.0 - left)

    return _result(np.minimum(a.data, b.data), (a, b), backward, "minimum")


def maximum(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"maximum: shape mismatch {a.shape} vs {b.shape}")
    left = (a.data > b.data) + 0.5 * (a.data == b.data)

    def backward(g):
        return g * left, g * (1.0 - left)

    return _result(np.maximum(a.data, b.data), (a, b), backward, "maximum")


def relu(a: Tensor) -> Tensor:
    active = a.data > 0

    def backward(g):
        return (g * active,)

    return _result(np.where(active, a.data, 0.0), (a,), backward, "relu")


def sigmoid(a: Tensor) -> Tensor:
    z = np.exp(-np.abs(a.data))
    out_data = np.where(a.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))

    def backward(g):
        return (g * out_data * (1.0 - out_data),)

    return _result(out_data, (a,), backward, "sigmoid")


def mask(a: Tensor, constant: np.ndarray) -> Tensor:
    """Multiply by a constant array of the same shape (no gradient to the constant)"""
    constant = np.asarray(constant, dtype=a.data.dtype)
    if constant.shape != a.data.shape:
        raise ShapeError(f"mask: shape mismatch {a.shape} vs {list(constant.shape)}")

    def backward(g):
        return (g * constant,)

    return _result(a.data * constant, (a,), backward, "mask")


# --- reductions and normalisers ---------------------------------------------

def sum_all(a: Tensor) -> Tensor:
    def backward(g):
        return (np.full_like(a.data, g.reshape(())),)

    return _result(np.asarray(a.data.sum()), (a,), backward, "sum")


def max_all(a: Tensor) -> Tensor:
    peak = a.data.max()
    winners = (a.data == peak).astype(a.data.dtype)
    winners /= winners.sum()

    def backward(g):
        return (winners * g.reshape(()),)

    return _result(np.asarray(peak), (a,), backward, "max")


def softmax(a: Tensor) -> Tensor:
    if a.data.ndim != 1 or a.data.size < 1:
        raise ShapeError(f"softmax expects a non-empty vector, got shape {a.shape}")
    e = np.exp(a.data - a.data.max())
    out_data = e / e.sum()

    def backward(g):
        return (out_data * (g - np.dot(g, out_data)),)

    return _result(out_data, (a,), backward, "softmax")


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    """Softmax cross-entropy of a logit vector against a class index"""
    if logits.data.ndim != 1:
        raise ShapeError(f"cross_entropy expects a logit vector, got shape {logits.shape}")
    if not 0 <= target < logits.data.size:
        raise ShapeError(f"cross_entropy: target {target} outside {logits.data.size} classes")
    shifted = logits.data - logits.data.max()
    log_norm = np.log(np.exp(shifted).sum())
    probs = np.exp(shifted - log_norm)

    def backward(g):
        grad = probs.copy()
        grad[target] -= 1.0
        return (grad * g.reshape(()),)

    return _result(np.asarray(log_norm - shifted[target]), (logits,), backward, "cross_entropy")


# --- linear algebra ----------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 1-D/2-D operands (vectors act as rows or columns as needed)"""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul supports 1-D and 2-D operands, got {a.shape} and {b.shape}")
    inner_a = a.data.shape[-1]
    inner_b = b.data.shape[0]
    if inner_a != inner_b:
        raise ShapeError(f"matmul: inner dimensions disagree for {a.shape} and {b.shape}")
    a_vec, b_vec = a.data.ndim == 1, b.data.ndim == 1

    def backward(g):
        if a_vec and b_vec:
            return g * b.data, g * a.data
        if a_vec:
            return b.data @ g, np.outer(a.data, g)
        if b_vec:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g

    return _result(a.data @ b.data, (a, b), backward, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x·Wᵀ + b; x is [in] or [n×in], W is [out×in], b is [out]"""
    if weight.data.ndim != 2 or bias.data.shape != (weight.data.shape[0],):
        raise ShapeError(f"linear: bad parameter shapes {weight.shape} / {bias.shape}")
    if x.data.shape[-1] != weight.data.shape[1]:
        raise ShapeError(f"linear: input {x.shape} does not match weight {weight.shape}")
    batched = x.data.ndim == 2

    def backward(g):
        if batched:
            return g @ weight.data, g.T @ x.data, g.sum(axis=0)
        return weight.data.T @ g, np.outer(g, x.data), g

    out_data = x.data @ weight.data.T + bias.data
    return _result(out_data, (x, weight, bias), backward, "linear")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if int(np.prod(shape)) != a.data.size:
        raise ShapeError(f"reshape: cannot view {a.shape} as {list(shape)}")

    def backward(g):
        return (g.reshape(a.data.shape),)

    return _result(a.data.reshape(shape), (a,), backward, "reshape")


def hconcat(parts: Sequence[Tensor]) -> Tensor:
    """Join matrices with equal row counts side by side"""
    parts = tuple(parts)
    rows = {p.data.shape[0] for p in parts if p.data.ndim == 2}
    if len(rows) != 1 or any(p.data.ndim != 2 for p in parts):
        raise ShapeError(f"hconcat expects matrices with equal rows, got {[p.shape for p in parts]}")
    bounds = np.cumsum([p.data.shape[1] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=1))

    return _result(np.concatenate([p.data for p in parts], axis=1), parts, backward, "hconcat")


def stack(rows: Sequence[Tensor]) -> Tensor:
    """Stack equal-length vectors as the rows of a matrix"""
    rows = tuple(rows)
    if len({r.data.shape for r in rows}) != 1 or rows[0].data.ndim != 1:
        raise ShapeError(f"stack expects equal-length vectors, got {[r.shape for r in rows]}")

    def backward(g):
        return tuple(g[i] for i in range(len(rows)))

    return _result(np.stack([r.data for r in rows]), rows, backward, "stack")


# --- gradients ---------------------------------------------------------------

def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into t.grad for every tensor on the tape that requires it"""
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    pending = {id(loss): np.ones_like(loss.data)}
    tensors = {id(loss): loss}
    for record in reversed(tape.records):
        key = id(record.output)
        grad = pending.pop(key, None)
        if grad is None:
            continue
        out = record.output
        out.grad = grad.copy() if out.grad is None else out.grad + grad
        for tensor, input_grad in zip(record.inputs, record.backward(grad)):
            if input_grad is None or not tensor.requires_grad:
                continue
            slot = id(tensor)
            if slot in pending:
                pending[slot] = pending[slot] + input_grad
            else:
                pending[slot] = np.asarray(input_grad, dtype=tensor.data.dtype).reshape(tensor.data.shape)
                tensors[slot] = tensor

    # whatever is left never appeared as an op output: the leaves
    for slot, grad in pending.items():
        leaf = tensors[slot]
        if leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.data)
        leaf.grad += grad


def check_gradients(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    h: float = 1e-3,
    samples: Optional[int] = 8,
    rng: Optional[np.random.Generator] = None,
    atol: float = 1e-6,
) -> float:
    """
    Compare tape gradients with central finite differences.

    ``fn`` must rebuild the scalar loss from the current tensor values. Up to ``samples``
    coordinates per tensor are probed (all of them when None). Returns the worst
    relative error ‖analytic − numeric‖ / max(‖analytic‖ + ‖numeric‖, floor) over tensors,
    with floor = atol · max(1, |loss|): gradients below the floor are compared in
    absolute terms, at the resolution the loss value allows.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for tensor in tensors:
        if not tensor.requires_grad:
            raise GradientError(f"check_gradients: {tensor!r} does not require grad")
        tensor.zero_grad()

    with Tape() as tape:
        loss = fn()
    backward(tape, loss)
    floor = atol * max(1.0, abs(loss.item()))

    worst = 0.0
    for tensor in tensors:
        flat = tensor.data.reshape(-1)
        analytic_flat = tensor.grad.reshape(-1)
        if samples is None or samples >= flat.size:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, size=samples, replace=False)
        analytic = np.empty(len(coords))
        numeric = np.empty(len(coords))
        for n, i in enumerate(coords):
            original = flat[i]
            flat[i] = original + h
            plus = fn().item()
            flat[i] = original - h
            minus = fn().item()
            flat[i] = original
            numeric[n] = (plus - minus) / (2 * h)
            analytic[n] = analytic_flat[i]
        scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), floor)
        error = float(np.linalg.norm(analytic - numeric) / scale)
        if error > worst:
            worst = error
        logger.debug(f"gradient check {tensor!r}: relative error {error:.2e}")
    return worst
