"""
Scene graphs in the two representations.

GT:  nodes are the concatenation of their four attribute-label embeddings (rows of D) in
     the fixed order [color, shape, size, material]; edges carry relation label sets and,
     for uniformity, the sum of their relation-label embeddings.
Det: label-agnostic; nodes are a fixed random projection of the attribute code plus noise,
     edges are coordinate differences.
"""
import functools
import logging
from dataclasses import dataclass
from typing import FrozenSet, List, Optional

import numpy as np

from xnm.autodiff import Tensor, hconcat, matmul, reshape
from xnm.models import CATEGORIES, CorruptionSpec, Scene
from xnm.vocab import Vocabulary
from xnm.world import RelationTable, spatial_relations

logger = logging.getLogger(__name__)

GT = "gt"
DET = "det"


@dataclass(frozen=True)
class SceneGraph:
    n: int
    representation: str
    node_features: Tensor
    edge_features: Tensor
    node_labels: Optional[List[FrozenSet[str]]] = None
    edge_labels: Optional[RelationTable] = None
    # GT label membership: [N x C] for nodes, [N*N x C] for edges
    node_membership: Optional[np.ndarray] = None
    edge_membership: Optional[np.ndarray] = None

    @property
    def node_dim(self) -> int:
        return self.node_features.shape[1]

    @property
    def edge_dim(self) -> int:
        return self.edge_features.shape[2]


def build_gt_graph(scene: Scene, D: Tensor, vocab: Vocabulary) -> SceneGraph:
    """Node features stay on the tape so gradients reach D through Describe"""
    n = len(scene.objects)
    c = vocab.num_labels
    blocks = []
    node_membership = np.zeros((n, c))
    node_labels = []
    for category in CATEGORIES:
        onehot = np.zeros((n, c))
        for obj in scene.objects:
            onehot[obj.id, vocab.label(obj.attribute(category))] = 1.0
        node_membership += onehot
        blocks.append(matmul(Tensor(onehot), D))
    for obj in scene.objects:
        node_labels.append(frozenset(obj.attributes()))

    relations = spatial_relations(scene)
    edge_membership = np.zeros((n * n, c))
    for i in range(n):
        for j in range(n):
            for label in relations[i][j]:
                edge_membership[i * n + j, vocab.label(label)] = 1.0
    d = D.shape[1]
    edge_features = reshape(matmul(Tensor(edge_membership), D), (n, n, d))

    return SceneGraph(
        n=n,
        representation=GT,
        node_features=hconcat(blocks),
        edge_features=edge_features,
        node_labels=node_labels,
        edge_labels=relations,
        node_membership=node_membership,
        edge_membership=edge_membership,
    )


def attribute_code_size(vocab: Vocabulary, joint_code: bool) -> int:
    world = vocab.world
    size = sum(len(world.vocab(c)) for c in CATEGORIES)
    if joint_code:
        size += len(world.colors) * len(world.shapes)
    return size


def attribute_code(obj, vocab: Vocabulary, joint_code: bool) -> np.ndarray:
    """Per-category one-hots, optionally followed by a joint color x shape one-hot"""
    world = vocab.world
    code = np.zeros(attribute_code_size(vocab, joint_code))
    offset = 0
    for category in CATEGORIES:
        values = world.vocab(category)
        code[offset + values.index(obj.attribute(category))] = 1.0
        offset += len(values)
    if joint_code:
        combo = world.colors.index(obj.color) * len(world.shapes) + world.shapes.index(obj.shape)
        code[offset + combo] = 1.0
    return code


@functools.lru_cache(maxsize=32)
def detection_projection(seed: int, feature_dim: int, code_dim: int, active: int) -> np.ndarray:
    """Dataset-wide fixed projection P, scaled so projected codes have unit-variance entries"""
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, 1.0 / np.sqrt(active), size=(feature_dim, code_dim))


def build_det_graph(
    scene: Scene,
    spec: CorruptionSpec,
    vocab: Vocabulary,
    projection_seed: int,
    rng: Optional[np.random.Generator] = None,
    feature_dim: int = 32,
    joint_code: bool = True,
) -> SceneGraph:
    rng = rng if rng is not None else np.random.default_rng(0)
    n = len(scene.objects)
    code_dim = attribute_code_size(vocab, joint_code)
    active = len(CATEGORIES) + (1 if joint_code else 0)
    P = detection_projection(projection_seed, feature_dim, code_dim, active)

    codes = np.stack([attribute_code(o, vocab, joint_code) for o in scene.objects])
    nodes = codes @ P.T
    if spec.feature_noise_sigma > 0:
        nodes = nodes + rng.normal(0.0, spec.feature_noise_sigma, size=nodes.shape)

    pos = np.array([[o.x, o.y] for o in scene.objects])
    if spec.coordinate_jitter_sigma > 0:
        pos = pos + rng.normal(0.0, spec.coordinate_jitter_sigma, size=pos.shape)
    # e_ij = p_j - p_i
    edges = pos[None, :, :] - pos[:, None, :]
    edges[np.arange(n), np.arange(n)] = 0.0

    return SceneGraph(n=n, representation=DET, node_features=Tensor(nodes), edge_features=Tensor(edges))
