import math

import numpy as np
import pytest

import xnm.training
from xnm.autodiff import mul
from xnm.config import settings
from xnm.engine import Reasoner
from xnm.errors import DataError, TrainingDivergedError
from xnm.executor import loss as cross_entropy_loss
from xnm.generator import generate_split
from xnm.models import FAMILIES, DatasetRecord, EngineConfig, WorldConfig
from xnm.storage import checkpoint_store
from xnm.training import compile_records, trainer


@pytest.fixture(scope="module")
def tiny():
    world = WorldConfig()
    split = generate_split(world, 6, 3, np.random.default_rng(0))
    scenes = {s.scene_id: s for s in split.scenes}
    return world, split.records, scenes


def gt_config(world, **kwargs):
    return EngineConfig(setting="gt", dim=8, world=world, **kwargs)


def test_train_records_schedule_and_losses(tiny):
    world, records, scenes = tiny
    checkpoint = trainer.train(records, scenes, gt_config(world), epochs=2, seed=3, batch_size=4)
    assert checkpoint.meta.lr_schedule == [0.001, 0.0001]
    assert checkpoint.meta.epoch == 2
    assert checkpoint.meta.seed == 3
    assert len(checkpoint.meta.loss_curve) == 2 * math.ceil(len(records) / 4)
    assert all(math.isfinite(v) for v in checkpoint.meta.loss_curve)
    assert set(checkpoint.params) == set(Reasoner(gt_config(world)).params.tensors)


def test_training_moves_parameters(tiny):
    world, records, scenes = tiny
    checkpoint = trainer.train(records, scenes, gt_config(world), epochs=1, seed=3, batch_size=4)
    initial = Reasoner(gt_config(world), seed=3).params
    assert checkpoint.params["classifier.l2.bias"].data != [float(v) for v in initial["classifier.l2.bias"].data]
    # fixed Describe blocks never change
    assert checkpoint.params["describe.M.0"].data == [float(v) for v in initial["describe.M.0"].data.reshape(-1)]


def test_training_is_deterministic(tiny):
    world, records, scenes = tiny
    first = trainer.train(records, scenes, gt_config(world), epochs=1, seed=9, batch_size=5)
    second = trainer.train(records, scenes, gt_config(world), epochs=1, seed=9, batch_size=5)
    assert first.params == second.params
    assert first.meta.loss_curve == second.meta.loss_curve


def test_fraction_trains_on_a_subset(tiny):
    world, records, scenes = tiny
    checkpoint = trainer.train(records, scenes, gt_config(world), epochs=1, seed=1, fraction=0.5, batch_size=3)
    assert len(checkpoint.meta.loss_curve) == math.ceil(math.ceil(0.5 * len(records)) / 3)
    assert checkpoint.meta.fraction == 0.5
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(DataError):
            trainer.train(records, scenes, gt_config(world), epochs=1, fraction=bad)


def test_empty_or_dangling_datasets_are_rejected(tiny):
    world, records, scenes = tiny
    with pytest.raises(DataError):
        trainer.train([], scenes, gt_config(world), epochs=1)
    dangling = [DatasetRecord(scene_id=999, program="count(scene())", family="count", answer="3")]
    with pytest.raises(DataError):
        compile_records(dangling, Reasoner(gt_config(world)), scenes)


def test_divergence_stops_training(tiny, monkeypatch):
    world, records, scenes = tiny
    monkeypatch.setattr(xnm.training, "loss", lambda logits, answer: mul(cross_entropy_loss(logits, answer), float("nan")))
    with pytest.raises(TrainingDivergedError):
        trainer.train(records, scenes, gt_config(world), epochs=1, seed=0, batch_size=4)


def test_det_training_runs(tiny):
    world, records, scenes = tiny
    config = EngineConfig(setting="det", describe_mode="learned", dim=8, det_feature_dim=16, world=world)
    checkpoint = trainer.train(records, scenes, config, epochs=1, seed=0, batch_size=6)
    assert all(math.isfinite(v) for v in checkpoint.meta.loss_curve)
    metrics = trainer.evaluate(checkpoint, records, scenes)
    assert 0.0 <= metrics.overall <= 1.0


def test_evaluate_partitions_by_family(tiny):
    world, records, scenes = tiny
    checkpoint = trainer.train(records, scenes, gt_config(world), epochs=1, seed=2, batch_size=6)
    metrics = trainer.evaluate(checkpoint, records, scenes, workers=1)
    assert metrics.total == len(records)
    assert sum(metrics.family_counts.values()) == metrics.total
    assert set(metrics.per_family) == {r.family for r in records} <= set(FAMILIES)
    assert metrics.overall == pytest.approx(metrics.correct / metrics.total)
    weighted = sum(metrics.per_family[f] * metrics.family_counts[f] for f in metrics.per_family)
    assert weighted == pytest.approx(metrics.correct)
    assert metrics.parameter_count == Reasoner(gt_config(world)).parameter_count()
    assert metrics.loss_curve == checkpoint.meta.loss_curve


def test_evaluation_does_not_depend_on_workers(tiny):
    world, records, scenes = tiny
    checkpoint = trainer.train(records, scenes, gt_config(world), epochs=1, seed=4, batch_size=6)
    assert trainer.evaluate(checkpoint, records, scenes, workers=1) == trainer.evaluate(checkpoint, records, scenes, workers=3)


def test_checkpoint_round_trip(tiny, tmp_path):
    world, records, scenes = tiny
    checkpoint = trainer.train(records, scenes, gt_config(world), epochs=1, seed=6, batch_size=6)
    path = checkpoint_store.save(tmp_path / "model.json", checkpoint)
    loaded = checkpoint_store.load(path)
    assert loaded == checkpoint
    original, restored = Reasoner.from_checkpoint(checkpoint), Reasoner.from_checkpoint(loaded)
    for name, tensor in original.params:
        assert np.array_equal(tensor.data, restored.params[name].data)
    assert trainer.evaluate(loaded, records, scenes) == trainer.evaluate(checkpoint, records, scenes)


@pytest.fixture(scope="module")
def progress_seen_by_module_fixtures():
    return settings.show_progress


def test_progress_bars_are_off_for_module_fixtures(progress_seen_by_module_fixtures):
    assert progress_seen_by_module_fixtures is False
