import logging
from pathlib import Path
from typing import Dict, List, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from xnm.config import settings
from xnm.errors import DataError
from xnm.models import CheckpointDocument, CorruptionSpec, DatasetRecord, Scene, SceneRecord, WorldConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
Model = TypeVar("Model", bound=BaseModel)

SCENES_FILE = "scenes.jsonl"
WORLD_FILE = "world.json"


def _read_model(path: PathLike, model: Type[Model]) -> Model:
    path = Path(path)
    try:
        return model.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"File not found: {path}") from None
    except ValidationError as e:
        logger.error(f"Invalid {model.__name__} in {path}: {e}")
        raise DataError(f"Invalid {model.__name__} in {path}: {e.error_count()} error(s)") from e


def _read_lines(path: PathLike, model: Type[Model]) -> List[Model]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"File not found: {path}")
    items = []
    with path.open(encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                items.append(model.model_validate_json(line))
            except ValidationError as e:
                logger.error(f"{path}:{number}: {e}")
                raise DataError(f"{path}:{number}: invalid {model.__name__}") from e
    return items


def _write_lines(path: PathLike, items: List[BaseModel]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for item in items:
            f.write(item.model_dump_json() + "\n")


class DatasetStore:
    @staticmethod
    def save_scenes(data_dir: PathLike, scenes: List[SceneRecord]) -> Path:
        """Write scenes.jsonl"""
        path = Path(data_dir) / SCENES_FILE
        _write_lines(path, scenes)
        return path

    @staticmethod
    def load_scenes(data_dir: PathLike) -> Dict[int, SceneRecord]:
        """Scenes keyed by scene_id"""
        scenes = {}
        for record in _read_lines(Path(data_dir) / SCENES_FILE, SceneRecord):
            if record.scene_id in scenes:
                raise DataError(f"Duplicate scene_id {record.scene_id} in {data_dir}")
            scenes[record.scene_id] = record
        return scenes

    @staticmethod
    def save_split(data_dir: PathLike, split: str, records: List[DatasetRecord]) -> Path:
        path = Path(data_dir) / f"{split}.jsonl"
        _write_lines(path, records)
        logger.info(f"Wrote {len(records)} records to {path}")
        return path

    @staticmethod
    def load_split(data_dir: PathLike, split: str) -> List[DatasetRecord]:
        return _read_lines(Path(data_dir) / f"{split}.jsonl", DatasetRecord)

    @staticmethod
    def save_world(data_dir: PathLike, world: WorldConfig) -> Path:
        path = Path(data_dir) / WORLD_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(world.model_dump_json(indent=2), encoding="utf-8")
        return path

    @staticmethod
    def load_world(path: PathLike) -> WorldConfig:
        """World config from a file, or from world.json inside a data directory"""
        path = Path(path)
        if path.is_dir():
            path = path / WORLD_FILE
            if not path.exists():
                logger.warning(f"No {WORLD_FILE} in {path.parent}, using the default world")
                return WorldConfig()
        return _read_model(path, WorldConfig)

    @staticmethod
    def load_scene(path: PathLike) -> Scene:
        return _read_model(path, Scene)

    @staticmethod
    def load_corruption(path: PathLike) -> CorruptionSpec:
        return _read_model(path, CorruptionSpec)


class CheckpointStore:
    @staticmethod
    def save(path: PathLike, checkpoint: CheckpointDocument) -> Path:
        """Single JSON document: version, config, params, meta"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(checkpoint.model_dump_json(), encoding="utf-8")
        logger.info(f"Saved checkpoint with {len(checkpoint.params)} tensors to {path}")
        return path

    @staticmethod
    def load(path: PathLike) -> CheckpointDocument:
        checkpoint = _read_model(path, CheckpointDocument)
        if checkpoint.version != settings.checkpoint_version:
            raise DataError(
                f"Checkpoint {path} has format version {checkpoint.version}, expected {settings.checkpoint_version}"
            )
        return checkpoint


# Global instances
dataset_store = DatasetStore()
checkpoint_store = CheckpointStore()
