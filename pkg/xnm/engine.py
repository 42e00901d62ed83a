import logging
from typing import Optional

import numpy as np

from xnm.autodiff import Tensor, matmul
from xnm.config import settings
from xnm.errors import DataError
from xnm.graph import DET, GT, SceneGraph, build_det_graph, build_gt_graph
from xnm.models import CATEGORIES, MAX_COUNT, CheckpointDocument, EngineConfig, Scene, WorldConfig
from xnm.modules import (
    COMPARE_KINDS,
    NUM_ASPECTS,
    DescribeParams,
    GTSoftmaxAttention,
    ModuleEngine,
    SigmoidAttention,
    gt_block_matrices,
)
from xnm.params import ParameterStore
from xnm.vocab import Vocabulary
from xnm.world import corrupt

logger = logging.getLogger(__name__)


def init_params(config: EngineConfig, vocab: Vocabulary, seed: int = 0) -> ParameterStore:
    """
    Register every tensor the engine needs.

    Matrices are U(±1/√fan_in). D and the query table are lookups (one input per output
    coordinate), so their fan-in is 1. A label token's query row starts as that label's
    row of D.
    """
    rng = np.random.default_rng(seed)
    d = config.dim
    store = ParameterStore()
    query = store.uniform("query", (len(vocab.queries), d), 1, rng)

    if config.setting == GT:
        D = store.uniform("D", (vocab.num_labels, d), 1, rng)
        for label, row in vocab.label_index.items():
            query.data[vocab.query_index[label]] = D.data[row]
        node_dim = NUM_ASPECTS * d
        if config.gt_backend == "sigmoid":
            store.add_mlp("gtsig.node", node_dim, d, d, rng)
            store.add_mlp("gtsig.edge", d, d, d, rng)
    else:
        node_dim = config.det_feature_dim
        store.add_mlp("det.node", node_dim, d, d, rng)
        store.add_mlp("det.edge", config.det_edge_dim, d, d, rng)

    if config.describe_mode == "fixed":
        for k, block in enumerate(gt_block_matrices(d)):
            store.add(f"describe.M.{k}", block, trainable=False)
    else:
        for k in range(NUM_ASPECTS):
            store.uniform(f"describe.M.{k}", (d, node_dim), node_dim, rng)
    store.add_mlp("describe.aspect", d, d, NUM_ASPECTS, rng)

    store.add_scalar_mlp("exist", d, d, MAX_COUNT, rng)
    store.add_scalar_mlp("count", d, d, MAX_COUNT, rng)
    for kind in COMPARE_KINDS:
        store.add_mlp(f"compare.{kind}", d, d, d, rng)
    store.add_mlp("classifier", d, d, len(vocab.answers), rng)
    return store


class Reasoner:
    """One configured engine: vocabularies, parameters, attention backend and graph construction"""

    def __init__(self, config: EngineConfig, seed: int = 0, params: Optional[ParameterStore] = None):
        self.config = config
        self.vocab = Vocabulary(config.world)
        self.params = params if params is not None else init_params(config, self.vocab, seed)
        self.engine = ModuleEngine(
            self.params,
            self._backend(),
            DescribeParams(config.describe_mode),
            temperature=config.temperature,
        )

    def _backend(self):
        if self.config.setting == DET:
            return SigmoidAttention(self.params, "det", DET)
        if self.config.gt_backend == "sigmoid":
            return SigmoidAttention(self.params, "gtsig", GT)
        return GTSoftmaxAttention(self.params, self.config.temperature)

    @classmethod
    def from_checkpoint(cls, checkpoint: CheckpointDocument) -> "Reasoner":
        reasoner = cls(checkpoint.config, seed=checkpoint.meta.seed)
        reasoner.params.load_blobs(checkpoint.params)
        return reasoner

    @classmethod
    def symbolic(cls, world: Optional[WorldConfig] = None) -> "Reasoner":
        """
        Hand-set GT engine whose soft attentions are near-exact set indicators.

        D is the identity over labels, every query row is a label one-hot (a category name
        uses its first label), and the aspect selector routes a category's labels to that
        category's block. A large temperature sharpens both softmaxes.
        """
        world = world if world is not None else WorldConfig()
        vocab = Vocabulary(world)
        c = vocab.num_labels
        config = EngineConfig(
            setting=GT,
            dim=c,
            gt_backend="softmax",
            describe_mode="fixed",
            temperature=settings.symbolic_temperature,
            world=world,
        )
        reasoner = cls(config)
        params = reasoner.params
        params.set("D", np.eye(c), trainable=False)

        queries = np.zeros((len(vocab.queries), c))
        for row, token in enumerate(vocab.queries):
            label = token if token in vocab.label_index else vocab.category_labels(token)[0]
            queries[row, vocab.label(label)] = 1.0
        params.set("query", queries, trainable=False)

        routing = np.zeros((NUM_ASPECTS, c))
        for k, category in enumerate(CATEGORIES):
            for label in vocab.category_labels(category):
                routing[k, vocab.label(label)] = 1.0
        params.set("describe.aspect.l1.weight", np.eye(c), trainable=False)
        params.set("describe.aspect.l1.bias", np.zeros(c), trainable=False)
        params.set("describe.aspect.l2.weight", routing, trainable=False)
        params.set("describe.aspect.l2.bias", np.zeros(NUM_ASPECTS), trainable=False)
        return reasoner

    def query(self, token: str) -> Tensor:
        """Row of the query-embedding table, selected on the tape"""
        try:
            row = self.vocab.query_index[token]
        except KeyError:
            raise DataError(f"No query embedding for token '{token}'") from None
        onehot = np.zeros(len(self.vocab.queries))
        onehot[row] = 1.0
        return matmul(Tensor(onehot), self.params["query"])

    def prepare_scene(self, scene: Scene, rng: Optional[np.random.Generator] = None) -> Scene:
        """Det scenes go through the configured corruption; GT scenes are used as annotated"""
        spec = self.config.corruption
        if self.config.setting == DET and not spec.is_clean:
            rng = rng if rng is not None else np.random.default_rng(0)
            return corrupt(scene, spec, rng)
        return scene

    def graph(self, scene: Scene, rng: Optional[np.random.Generator] = None) -> SceneGraph:
        """
        Scene graph for this engine. GT graphs read the current D, so build them inside
        the tape of the forward pass that should reach D. Det scenes must already be
        corrupted (see prepare_scene); only feature noise is added here.
        """
        if not scene.objects:
            raise DataError("Scene graph needs at least one object")
        if self.config.setting == GT:
            return build_gt_graph(scene, self.params["D"], self.vocab)
        spec = self.config.corruption.model_copy(update={"coordinate_jitter_sigma": 0.0})
        return build_det_graph(
            scene,
            spec,
            self.vocab,
            self.config.projection_seed,
            rng=rng,
            feature_dim=self.config.det_feature_dim,
            joint_code=self.config.joint_code,
        )

    def parameter_count(self) -> int:
        return self.params.count()

    def decode_label(self, h: Tensor, category: str) -> str:
        """Best label of a category for a described feature, scored by D·h"""
        if "D" not in self.params:
            raise DataError("Label decoding needs the GT label embeddings")
        scores = self.params["D"].data @ h.data
        labels = self.vocab.category_labels(category)
        best = max(labels, key=lambda label: scores[self.vocab.label(label)])
        return best
