import os

import numpy as np
import pytest

from xnm.config import settings as xnm_settings
from xnm.models import Scene, SceneObject, WorldConfig
from xnm.vocab import Vocabulary


def pytest_collection_modifyitems(config, items):
    if os.environ.get("XNM_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="acceptance run; set XNM_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True, scope="session")
def no_progress_bars():
    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(xnm_settings, "show_progress", False)
        yield


def make_object(i, color, shape, size="large", material="rubber", x=0.0, y=0.0) -> SceneObject:
    return SceneObject(id=i, color=color, shape=shape, size=size, material=material, x=x, y=y)


@pytest.fixture
def world() -> WorldConfig:
    return WorldConfig()


@pytest.fixture
def vocab(world) -> Vocabulary:
    return Vocabulary(world)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def three_objects() -> Scene:
    """A red metal cube at x=5, a small blue sphere at x=0 and a small red cylinder at x=2"""
    return Scene(objects=[
        make_object(0, "red", "cube", "large", "metal", x=5.0, y=0.0),
        make_object(1, "blue", "sphere", "small", "rubber", x=0.0, y=1.0),
        make_object(2, "red", "cylinder", "small", "rubber", x=2.0, y=-1.0),
    ])
