import logging
import math
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from xnm.autodiff import Tensor, linear, precision, relu
from xnm.errors import DataError
from xnm.models import ParameterBlob

logger = logging.getLogger(__name__)


class ParameterStore:
    """Named tensors of one engine: trainable parameters plus fixed constants (e.g. GT Describe blocks)"""

    def __init__(self):
        self.tensors: Dict[str, Tensor] = {}

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self.tensors[name]
        except KeyError:
            raise DataError(f"Unknown parameter '{name}'") from None

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self.tensors.items())

    def add(self, name: str, data, trainable: bool = True) -> Tensor:
        if name in self.tensors:
            raise DataError(f"Parameter '{name}' registered twice")
        t = Tensor(data, requires_grad=trainable, name=name)
        self.tensors[name] = t
        return t

    def uniform(self, name: str, shape: Sequence[int], fan_in: int, rng: np.random.Generator) -> Tensor:
        bound = 1.0 / math.sqrt(fan_in)
        return self.add(name, rng.uniform(-bound, bound, size=tuple(shape)))

    def add_mlp(self, prefix: str, in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator):
        """linear -> ReLU -> linear"""
        self.uniform(f"{prefix}.l1.weight", (hidden, in_dim), in_dim, rng)
        self.uniform(f"{prefix}.l1.bias", (hidden,), in_dim, rng)
        self.uniform(f"{prefix}.l2.weight", (out_dim, hidden), hidden, rng)
        self.uniform(f"{prefix}.l2.bias", (out_dim,), hidden, rng)

    def add_scalar_mlp(self, prefix: str, hidden: int, out_dim: int, span: float, rng: np.random.Generator):
        """MLP over a single value in [0, span]; first-layer hinges start evenly spread over that range"""
        weight = self.uniform(f"{prefix}.l1.weight", (hidden, 1), 1, rng)
        hinges = np.linspace(-0.5, span + 0.5, hidden)
        self.add(f"{prefix}.l1.bias", -weight.data[:, 0] * hinges)
        self.uniform(f"{prefix}.l2.weight", (out_dim, hidden), hidden, rng)
        self.uniform(f"{prefix}.l2.bias", (out_dim,), hidden, rng)

    def mlp(self, prefix: str, x: Tensor) -> Tensor:
        hidden = relu(linear(x, self[f"{prefix}.l1.weight"], self[f"{prefix}.l1.bias"]))
        return linear(hidden, self[f"{prefix}.l2.weight"], self[f"{prefix}.l2.bias"])

    def trainable(self) -> Dict[str, Tensor]:
        return {name: t for name, t in self.tensors.items() if t.requires_grad}

    def count(self) -> int:
        return sum(t.size for t in self.trainable().values())

    def zero_grad(self):
        for t in self.trainable().values():
            t.zero_grad()

    def to_blobs(self) -> Dict[str, ParameterBlob]:
        return {
            name: ParameterBlob(shape=t.shape, data=[float(v) for v in t.data.reshape(-1)])
            for name, t in self.tensors.items()
        }

    def load_blobs(self, blobs: Dict[str, ParameterBlob]):
        """Overwrite registered tensors from checkpoint blobs; names and shapes must match"""
        missing = set(self.tensors) - set(blobs)
        unknown = set(blobs) - set(self.tensors)
        if missing or unknown:
            raise DataError(f"Checkpoint parameters do not match the engine (missing={sorted(missing)}, unknown={sorted(unknown)})")
        for name, blob in blobs.items():
            t = self.tensors[name]
            if list(blob.shape) != t.shape:
                raise DataError(f"Parameter '{name}' has shape {blob.shape}, engine expects {t.shape}")
            t.data = np.asarray(blob.data, dtype=t.data.dtype).reshape(t.data.shape)
            t.zero_grad()

    def astype(self, dtype: str) -> "ParameterStore":
        """Deep copy with every tensor in another precision"""
        copy = ParameterStore()
        with precision(dtype):
            for name, t in self.tensors.items():
                copy.add(name, t.data.copy(), trainable=t.requires_grad)
        return copy

    def set(self, name: str, data, trainable: Optional[bool] = None):
        t = self[name]
        data = np.asarray(data, dtype=t.data.dtype)
        if list(data.shape) != t.shape:
            raise DataError(f"Parameter '{name}' expects shape {t.shape}, got {list(data.shape)}")
        t.data = np.ascontiguousarray(data)
        if trainable is not None:
            t.requires_grad = trainable
        t.grad = np.zeros_like(t.data) if t.requires_grad else None
