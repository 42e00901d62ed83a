"""
The X modules.

Meta modules (AttendNode, AttendEdge, Transfer, And/Or/Not) act on node attentions
a in [0,1]^N and edge attentions W in [0,1]^{N x N}. Composite modules are pure
compositions of them; output modules turn attentions into feature vectors h.
"""
import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from xnm.autodiff import (
    Tensor,
    add,
    divide,
    mask,
    matmul,
    max_all,
    maximum,
    minimum,
    mul,
    one_minus,
    reshape,
    sigmoid,
    softmax,
    stack,
    sum_all,
)
from xnm.errors import DataError, ShapeError, UnknownTokenError
from xnm.graph import GT, SceneGraph
from xnm.params import ParameterStore

logger = logging.getLogger(__name__)

POOL_EPSILON = 1e-12
COMPARE_KINDS = ("eq_int", "greater", "less", "eq_attr")
NUM_ASPECTS = 4


# --- meta modules ------------------------------------------------------------

def transfer(a: Tensor, W: Tensor) -> Tensor:
    """a' = norm(Wᵀa): divide by the maximum only when some entry exceeds 1"""
    if W.shape != [a.size, a.size]:
        raise ShapeError(f"transfer: attention of length {a.size} with edge matrix {W.shape}")
    raw = matmul(a, W)
    peak = max_all(raw)
    if peak.item() > 1.0:
        return divide(raw, peak)
    return raw


def logic_and(a1: Tensor, a2: Tensor) -> Tensor:
    return minimum(a1, a2)


def logic_or(a1: Tensor, a2: Tensor) -> Tensor:
    return maximum(a1, a2)


def logic_not(a: Tensor) -> Tensor:
    return one_minus(a)


def scene_module(graph: SceneGraph) -> Tensor:
    """Placeholder input: every node fully attended"""
    return Tensor(np.ones(graph.n))


def _off_diagonal(n: int) -> np.ndarray:
    return 1.0 - np.eye(n)


# --- attention backends ------------------------------------------------------

class GTSoftmaxAttention:
    """b = softmax(τ·D·q); a_i = Σ_{c∈C_i} b_c and W_ij = Σ_{c∈C_ij} b_c"""
    representation = GT

    def __init__(self, params: ParameterStore, temperature: float = 1.0):
        self.params = params
        self.temperature = temperature

    def label_distribution(self, q: Tensor) -> Tensor:
        D = self.params["D"]
        if q.shape != [D.shape[1]]:
            raise ShapeError(f"query of shape {q.shape} does not match label embeddings {D.shape}")
        logits = matmul(D, q)
        if self.temperature != 1.0:
            logits = mul(logits, self.temperature)
        return softmax(logits)

    def attend_node(self, graph: SceneGraph, q: Tensor) -> Tensor:
        _check_representation(self, graph)
        return matmul(Tensor(graph.node_membership), self.label_distribution(q))

    def attend_edge(self, graph: SceneGraph, q: Tensor) -> Tensor:
        _check_representation(self, graph)
        flat = matmul(Tensor(graph.edge_membership), self.label_distribution(q))
        return mask(reshape(flat, (graph.n, graph.n)), _off_diagonal(graph.n))


class SigmoidAttention:
    """
    a_i = sigmoid(MLP(v_i)ᵀq), W_ij = sigmoid(MLP(e_ij)ᵀq).

    Det graphs use it with their detector-style features; GT graphs can use it too,
    with the label-embedding features fused by the first MLP layer.
    """

    def __init__(self, params: ParameterStore, prefix: str, representation: str):
        self.params = params
        self.prefix = prefix
        self.representation = representation

    def _check_query(self, q: Tensor):
        expected = self.params[f"{self.prefix}.node.l2.weight"].shape[0]
        if q.shape != [expected]:
            raise ShapeError(f"query of shape {q.shape} does not match backend width {expected}")

    def attend_node(self, graph: SceneGraph, q: Tensor) -> Tensor:
        _check_representation(self, graph)
        self._check_query(q)
        projected = self.params.mlp(f"{self.prefix}.node", graph.node_features)
        return sigmoid(matmul(projected, q))

    def attend_edge(self, graph: SceneGraph, q: Tensor) -> Tensor:
        _check_representation(self, graph)
        self._check_query(q)
        n = graph.n
        edges = reshape(graph.edge_features, (n * n, graph.edge_dim))
        projected = self.params.mlp(f"{self.prefix}.edge", edges)
        weights = sigmoid(reshape(matmul(projected, q), (n, n)))
        return mask(weights, _off_diagonal(n))


def _check_representation(backend, graph: SceneGraph):
    if graph.representation != backend.representation:
        raise DataError(f"{type(backend).__name__} expects a {backend.representation} graph, got {graph.representation}")


# --- describe ----------------------------------------------------------------

@dataclass(frozen=True)
class DescribeParams:
    """Aspect projections M_1..M_K (fixed GT block selectors or learned) and the aspect-selector MLP"""
    mode: str
    num_aspects: int = NUM_ASPECTS

    def matrices(self, params: ParameterStore) -> List[Tensor]:
        return [params[f"describe.M.{k}"] for k in range(self.num_aspects)]


def gt_block_matrices(d: int, num_aspects: int = NUM_ASPECTS) -> List[np.ndarray]:
    """M_k = [0 .. I_d .. 0]: picks the k-th d-wide block of a concatenated GT node feature"""
    blocks = []
    for k in range(num_aspects):
        m = np.zeros((d, num_aspects * d))
        m[:, k * d:(k + 1) * d] = np.eye(d)
        blocks.append(m)
    return blocks


# --- module engine -----------------------------------------------------------

class ModuleEngine:
    """Binds parameters and an attention backend; every method is one X module"""

    def __init__(self, params: ParameterStore, backend, describe_params: DescribeParams, temperature: float = 1.0):
        self.params = params
        self.backend = backend
        self.describe_params = describe_params
        self.temperature = temperature

    # meta
    def attend_node(self, graph: SceneGraph, q: Tensor) -> Tensor:
        return self.backend.attend_node(graph, q)

    def attend_edge(self, graph: SceneGraph, q: Tensor) -> Tensor:
        return self.backend.attend_edge(graph, q)

    transfer = staticmethod(transfer)
    logic_and = staticmethod(logic_and)
    logic_or = staticmethod(logic_or)
    logic_not = staticmethod(logic_not)
    scene = staticmethod(scene_module)

    # composite
    def filter(self, a: Tensor, q: Tensor, graph: SceneGraph) -> Tensor:
        return logic_and(a, self.attend_node(graph, q))

    def relate(self, a: Tensor, q: Tensor, graph: SceneGraph) -> Tensor:
        return transfer(a, self.attend_edge(graph, q))

    def same(self, a: Tensor, q: Tensor, graph: SceneGraph) -> Tensor:
        described = self.describe(a, q, graph)
        return self.filter(logic_not(a), described, graph)

    def intersect(self, a1: Tensor, a2: Tensor) -> Tensor:
        return logic_and(a1, a2)

    def union(self, a1: Tensor, a2: Tensor) -> Tensor:
        return logic_or(a1, a2)

    # output
    def exist(self, a: Tensor) -> Tensor:
        return self.params.mlp("exist", reshape(sum_all(a), (1,)))

    def count(self, a: Tensor) -> Tensor:
        return self.params.mlp("count", reshape(sum_all(a), (1,)))

    def pool(self, a: Tensor, graph: SceneGraph) -> Tensor:
        """v̄ = Σ a_i v_i / (Σ a_i + ε)"""
        total = add(sum_all(a), POOL_EPSILON)
        return divide(matmul(a, graph.node_features), total)

    def aspect_weights(self, q: Tensor) -> Tensor:
        logits = self.params.mlp("describe.aspect", q)
        if self.temperature != 1.0:
            logits = mul(logits, self.temperature)
        return softmax(logits)

    def describe(self, a: Tensor, q: Tensor, graph: SceneGraph) -> Tensor:
        """h = Σ_k c_k (M_k v̄), c = softmax(MLP(q))"""
        pooled = self.pool(a, graph)
        matrices = self.describe_params.matrices(self.params)
        if matrices[0].shape[1] != pooled.size:
            raise ShapeError(f"Describe matrices {matrices[0].shape} do not fit node features of width {pooled.size}")
        projections = stack([matmul(m, pooled) for m in matrices])
        return matmul(self.aspect_weights(q), projections)

    def compare(self, h1: Tensor, h2: Tensor, kind: str) -> Tensor:
        if kind not in COMPARE_KINDS:
            raise UnknownTokenError(f"Unknown compare kind '{kind}'")
        return self.params.mlp(f"compare.{kind}", h1 - h2)

    def classify(self, h: Tensor) -> Tensor:
        return self.params.mlp("classifier", h)
