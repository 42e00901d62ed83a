"""
Experiment drivers: dataset generation, GT reasoning, CoGenT transfer, data efficiency
and Det robustness under detector-style corruption.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from xnm.config import settings
from xnm.errors import XNMError
from xnm.generator import generate_split
from xnm.models import CorruptionSpec, DatasetRecord, EngineConfig, Metrics, SceneRecord, WorldConfig
from xnm.storage import dataset_store
from xnm.training import trainer

logger = logging.getLogger(__name__)

ROBUSTNESS_SPECS = {
    "clean": CorruptionSpec(),
    "jitter": CorruptionSpec(coordinate_jitter_sigma=0.1, feature_noise_sigma=0.05),
    "merge": CorruptionSpec(coordinate_jitter_sigma=0.1, feature_noise_sigma=0.05, merge_probability=0.1),
}


@dataclass
class Dataset:
    world: WorldConfig
    scenes: Dict[int, SceneRecord] = field(default_factory=dict)
    splits: Dict[str, List[DatasetRecord]] = field(default_factory=dict)


def engine_config(world: WorldConfig, setting: str = "gt", dim: Optional[int] = None, **overrides) -> EngineConfig:
    """Default engine for a setting: fixed Describe blocks for GT, learned ones for Det"""
    return EngineConfig(
        setting=setting,
        dim=dim or settings.dim,
        describe_mode="fixed" if setting == "gt" else "learned",
        temperature=settings.attention_temperature,
        world=world.model_copy(update={"palette": None}),
        det_feature_dim=settings.det_feature_dim,
        det_edge_dim=settings.det_edge_dim,
        projection_seed=settings.det_projection_seed,
        **overrides,
    )


class ExperimentRunner:
    def build_dataset(self, world: WorldConfig, num_scenes: int, questions_per_scene: int, seed: int) -> Dataset:
        """
        train/val split by scene. CoGenT worlds draw train and val from condition A
        (val is also written as valA) and a held-out valB from condition B.
        """
        rng = np.random.default_rng(seed)
        num_train = max(1, int(round(num_scenes * settings.train_split)))
        num_val = max(1, num_scenes - num_train)
        dataset = Dataset(world=world)

        source = world.with_condition("A") if world.cogent else world
        train = generate_split(source, num_train, questions_per_scene, rng, first_scene_id=0)
        val = generate_split(source, num_val, questions_per_scene, rng, first_scene_id=num_train)
        parts = [train, val]
        dataset.splits["train"] = train.records
        dataset.splits["val"] = val.records
        if world.cogent:
            held_out = generate_split(
                world.with_condition("B"), num_val, questions_per_scene, rng, first_scene_id=num_train + num_val
            )
            parts.append(held_out)
            dataset.splits["valA"] = val.records
            dataset.splits["valB"] = held_out.records

        for part in parts:
            dataset.scenes.update({s.scene_id: s for s in part.scenes})
        logger.info(f"Dataset: {len(dataset.scenes)} scenes, " + ", ".join(f"{k}={len(v)}" for k, v in dataset.splits.items()))
        return dataset

    def generate_dataset(
        self,
        world: WorldConfig,
        out_dir,
        num_scenes: int = 2000,
        questions_per_scene: int = 10,
        seed: Optional[int] = None,
    ) -> Dataset:
        """Build a dataset and write scenes.jsonl, one file per split, and world.json"""
        seed = world.seed if seed is None else seed
        dataset = self.build_dataset(world, num_scenes, questions_per_scene, seed)
        out_dir = Path(out_dir)
        dataset_store.save_world(out_dir, world)
        dataset_store.save_scenes(out_dir, sorted(dataset.scenes.values(), key=lambda s: s.scene_id))
        for name, records in dataset.splits.items():
            dataset_store.save_split(out_dir, name, records)
        return dataset

    def run_gt(
        self,
        dataset: Dataset,
        fraction: float = 1.0,
        epochs: Optional[int] = None,
        seed: Optional[int] = None,
        dim: Optional[int] = None,
        gt_backend: str = "softmax",
    ) -> Metrics:
        config = engine_config(dataset.world, "gt", dim, gt_backend=gt_backend)
        checkpoint = trainer.train(dataset.splits["train"], dataset.scenes, config, epochs=epochs, seed=seed, fraction=fraction)
        return trainer.evaluate(checkpoint, dataset.splits["val"], dataset.scenes)

    def run_cogent(
        self,
        world: WorldConfig,
        setting: str = "gt",
        out_dir=None,
        num_scenes: int = 2000,
        questions_per_scene: int = 10,
        epochs: Optional[int] = None,
        seed: Optional[int] = None,
        dim: Optional[int] = None,
    ) -> Tuple[Metrics, Metrics]:
        """Train on condition A, evaluate on held-out A and on the swapped palette B"""
        seed = world.seed if seed is None else seed
        world = world.model_copy(update={"cogent": True})
        try:
            if out_dir is not None:
                dataset = self.generate_dataset(world, out_dir, num_scenes, questions_per_scene, seed)
            else:
                dataset = self.build_dataset(world, num_scenes, questions_per_scene, seed)
            config = engine_config(world, setting, dim)
            checkpoint = trainer.train(dataset.splits["train"], dataset.scenes, config, epochs=epochs, seed=seed)
            metrics_a = trainer.evaluate(checkpoint, dataset.splits["valA"], dataset.scenes)
            metrics_b = trainer.evaluate(checkpoint, dataset.splits["valB"], dataset.scenes)
        except XNMError as e:
            logger.error(f"CoGenT run ({setting}) failed: {e}")
            raise
        logger.info(f"CoGenT {setting}: A={metrics_a.overall:.4f} B={metrics_b.overall:.4f}")
        return metrics_a, metrics_b

    def run_data_efficiency(
        self,
        dataset: Dataset,
        fractions: Sequence[float] = (0.1, 0.25, 0.5, 1.0),
        epochs: Optional[int] = None,
        seed: Optional[int] = None,
        dim: Optional[int] = None,
    ) -> Dict[float, Metrics]:
        results = {}
        for fraction in fractions:
            results[fraction] = self.run_gt(dataset, fraction=fraction, epochs=epochs, seed=seed, dim=dim)
            logger.info(f"fraction {fraction:g}: accuracy {results[fraction].overall:.4f}")
        return results

    def run_det_robustness(
        self,
        dataset: Dataset,
        specs: Optional[Dict[str, CorruptionSpec]] = None,
        epochs: Optional[int] = None,
        seed: Optional[int] = None,
        dim: Optional[int] = None,
    ) -> Dict[str, Metrics]:
        """Train and evaluate a Det engine once per corruption spec"""
        specs = specs if specs is not None else ROBUSTNESS_SPECS
        results = {}
        for name, spec in specs.items():
            config = engine_config(dataset.world, "det", dim, corruption=spec)
            checkpoint = trainer.train(dataset.splits["train"], dataset.scenes, config, epochs=epochs, seed=seed)
            results[name] = trainer.evaluate(checkpoint, dataset.splits["val"], dataset.scenes)
            logger.info(f"Det [{name}]: accuracy {results[name].overall:.4f}")
        return results


# Global instance
experiment_runner = ExperimentRunner()
