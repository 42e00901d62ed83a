import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from tqdm import tqdm

from xnm.autodiff import Tape, backward, mul
from xnm.config import settings
from xnm.engine import Reasoner
from xnm.errors import DataError, TrainingDivergedError
from xnm.executor import execute, loss, predict
from xnm.graph import DET, SceneGraph
from xnm.models import FAMILIES, CheckpointDocument, CheckpointMeta, DatasetRecord, EngineConfig, Metrics, Scene
from xnm.optim import AdamState, adam_step
from xnm.parser import parse
from xnm.program import Expr, validate

logger = logging.getLogger(__name__)


@dataclass
class Example:
    scene_id: int
    program: Expr
    answer: int
    family: str


def compile_records(records: Sequence[DatasetRecord], reasoner: Reasoner, scenes: Mapping[int, Scene]) -> List[Example]:
    """Parse, validate and index every record against the engine's vocabularies"""
    if not records:
        raise DataError("Dataset is empty")
    examples = []
    for record in records:
        if record.scene_id not in scenes:
            raise DataError(f"Record refers to unknown scene {record.scene_id}")
        program = validate(parse(record.program), reasoner.vocab)
        examples.append(Example(record.scene_id, program, reasoner.vocab.answer(record.answer), record.family))
    return examples


def det_graphs(reasoner: Reasoner, scenes: Mapping[int, Scene], scene_ids, seed: int) -> Dict[int, SceneGraph]:
    """Det graphs are fixed per scene: corrupted and noised once, in scene-id order"""
    rng = np.random.default_rng(seed)
    graphs = {}
    for scene_id in sorted(set(scene_ids)):
        scene = reasoner.prepare_scene(scenes[scene_id], rng)
        graphs[scene_id] = reasoner.graph(scene, rng)
    return graphs


class Trainer:
    def __init__(self):
        self.settings = settings

    def train(
        self,
        records: Sequence[DatasetRecord],
        scenes: Mapping[int, Scene],
        config: EngineConfig,
        epochs: Optional[int] = None,
        seed: Optional[int] = None,
        fraction: float = 1.0,
        batch_size: Optional[int] = None,
    ) -> CheckpointDocument:
        """
        Mini-batch Adam on per-example forward passes.

        Each example's loss is scaled by 1/B so the accumulated gradient is the batch
        mean. The learning rate drops to the decayed rate after the first epoch.
        """
        seed = self.settings.seed if seed is None else seed
        epochs = self.settings.epochs_for(config.setting) if epochs is None else epochs
        batch_size = batch_size or self.settings.batch_size
        if not 0.0 < fraction <= 1.0:
            raise DataError(f"Training fraction must be in (0, 1], got {fraction}")

        rng = np.random.default_rng(seed)
        reasoner = Reasoner(config, seed=seed)
        examples = compile_records(records, reasoner, scenes)
        if fraction < 1.0:
            keep = max(1, math.ceil(fraction * len(examples)))
            chosen = np.sort(rng.permutation(len(examples))[:keep])
            examples = [examples[i] for i in chosen]

        graphs = {}
        if config.setting == DET:
            graphs = det_graphs(reasoner, scenes, [e.scene_id for e in examples], seed + 1)

        params = reasoner.params.trainable()
        logger.info(
            f"Training {config.setting} engine: {len(examples)} examples, {reasoner.parameter_count()} parameters, "
            f"{epochs} epoch(s), batch {batch_size}"
        )

        state = AdamState(lr=self.settings.learning_rate)
        lr_schedule: List[float] = []
        loss_curve: List[float] = []
        for epoch in range(epochs):
            state.set_lr(self.settings.learning_rate if epoch == 0 else self.settings.decayed_learning_rate)
            lr_schedule.append(state.lr)
            order = rng.permutation(len(examples))
            batches = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]

            for batch in tqdm(batches, desc=f"epoch {epoch + 1}/{epochs}", disable=not self.settings.show_progress):
                total = 0.0
                for i in batch:
                    example = examples[i]
                    with Tape() as tape:
                        graph = graphs.get(example.scene_id) or reasoner.graph(scenes[example.scene_id])
                        logits, _ = execute(example.program, graph, reasoner, record_trace=False)
                        example_loss = loss(logits, example.answer)
                        scaled = mul(example_loss, 1.0 / len(batch))
                    backward(tape, scaled)
                    total += example_loss.item()

                mean_loss = total / len(batch)
                if not math.isfinite(mean_loss):
                    logger.error(f"Loss became {mean_loss} in epoch {epoch + 1}")
                    raise TrainingDivergedError(f"Non-finite loss in epoch {epoch + 1}")
                adam_step(params, state)
                loss_curve.append(mean_loss)

            logger.info(f"Epoch {epoch + 1}/{epochs}: lr={state.lr:g}, last batch loss {loss_curve[-1]:.4f}")

        return CheckpointDocument(
            version=self.settings.checkpoint_version,
            config=config,
            params=reasoner.params.to_blobs(),
            meta=CheckpointMeta(
                epoch=epochs, seed=seed, fraction=fraction, lr_schedule=lr_schedule, loss_curve=loss_curve
            ),
        )

    def evaluate(
        self,
        checkpoint: CheckpointDocument,
        records: Sequence[DatasetRecord],
        scenes: Mapping[int, Scene],
        workers: Optional[int] = None,
    ) -> Metrics:
        """Arg-max accuracy, overall and per family; independent of the worker count"""
        workers = workers or self.settings.eval_workers
        reasoner = Reasoner.from_checkpoint(checkpoint)
        examples = compile_records(records, reasoner, scenes)

        if checkpoint.config.setting == DET:
            graphs = det_graphs(reasoner, scenes, [e.scene_id for e in examples], checkpoint.meta.seed + 2)
        else:
            graphs = {sid: reasoner.graph(scenes[sid]) for sid in sorted({e.scene_id for e in examples})}

        def is_correct(example: Example) -> bool:
            answer = predict(example.program, graphs[example.scene_id], reasoner)
            return reasoner.vocab.answer_index[answer] == example.answer

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(is_correct, examples))
        else:
            outcomes = [is_correct(e) for e in tqdm(examples, desc="eval", disable=not self.settings.show_progress)]

        counts = {f: 0 for f in FAMILIES}
        hits = {f: 0 for f in FAMILIES}
        for example, ok in zip(examples, outcomes):
            counts[example.family] += 1
            hits[example.family] += int(ok)

        correct = sum(hits.values())
        metrics = Metrics(
            overall=correct / len(examples),
            per_family={f: hits[f] / counts[f] for f in FAMILIES if counts[f]},
            family_counts={f: counts[f] for f in FAMILIES if counts[f]},
            correct=correct,
            total=len(examples),
            loss_curve=list(checkpoint.meta.loss_curve),
            parameter_count=reasoner.parameter_count(),
        )
        logger.info(f"Accuracy {metrics.overall:.4f} ({correct}/{len(examples)})")
        return metrics


# Global instance
trainer = Trainer()
