"""Synthetic mini-CLEVR worlds: scene sampling, spatial relations, and detector-style corruption."""
import logging
from typing import FrozenSet, List, Optional

import numpy as np

from xnm.errors import DataError
from xnm.models import CATEGORIES, CorruptionSpec, Scene, SceneObject, WorldConfig

logger = logging.getLogger(__name__)

MIN_SEPARATION = 1e-3
MAX_PLACEMENT_TRIES = 1000

RelationTable = List[List[FrozenSet[str]]]

MIRROR = {"left": "right", "right": "left", "front": "behind", "behind": "front"}


def _pick(rng: np.random.Generator, values: List[str]) -> str:
    return values[int(rng.integers(len(values)))]


def sample_scene(config: WorldConfig, rng: np.random.Generator) -> Scene:
    """Draw one scene: uniform attributes (under the palette condition) and uniform positions"""
    for category in CATEGORIES:
        if not config.vocab(category):
            raise DataError(f"World config '{config.name}' has an empty {category} vocabulary")

    count = int(rng.integers(config.min_objects, config.max_objects + 1))
    r = config.coordinate_range
    objects: List[SceneObject] = []
    for i in range(count):
        shape = _pick(rng, config.shapes)
        colors = config.allowed_colors(shape)
        if not colors:
            raise DataError(f"Palette leaves no color for shape '{shape}'")
        color = _pick(rng, colors)
        size = _pick(rng, config.sizes)
        material = _pick(rng, config.materials)
        for _ in range(MAX_PLACEMENT_TRIES):
            x, y = (float(v) for v in rng.uniform(-r, r, size=2))
            # per-axis separation keeps every left/right and front/behind relation defined
            if all(abs(x - o.x) >= MIN_SEPARATION and abs(y - o.y) >= MIN_SEPARATION for o in objects):
                break
        else:
            raise DataError(f"Could not place object {i} with separation {MIN_SEPARATION}")
        objects.append(SceneObject(id=i, color=color, shape=shape, size=size, material=material, x=x, y=y))

    return Scene(objects=objects, world=config.name)


def spatial_relations(scene: Scene) -> RelationTable:
    """
    Relation label sets for every ordered pair.

    Label r on (i, j) means "j is r of i": left iff x_j < x_i, right iff x_j > x_i,
    behind iff y_j > y_i, front iff y_j < y_i. Self-pairs carry no labels.
    """
    objects = scene.objects
    table: RelationTable = []
    for a in objects:
        row = []
        for b in objects:
            if a.id == b.id:
                row.append(frozenset())
                continue
            labels = set()
            if b.x < a.x:
                labels.add("left")
            elif b.x > a.x:
                labels.add("right")
            if b.y > a.y:
                labels.add("behind")
            elif b.y < a.y:
                labels.add("front")
            row.append(frozenset(labels))
        table.append(row)
    return table


def check_scene(scene: Scene, config: WorldConfig) -> None:
    """Raise DataError when an attribute value is outside the world's vocabularies"""
    for obj in scene.objects:
        for category in CATEGORIES:
            value = obj.attribute(category)
            if value not in config.vocab(category):
                raise DataError(f"Object {obj.id}: {category} '{value}' not in world '{config.name}'")


def palette_violations(scene: Scene, config: WorldConfig) -> List[SceneObject]:
    return [o for o in scene.objects if o.color not in config.allowed_colors(o.shape)]


def _renumber(objects: List[SceneObject]) -> List[SceneObject]:
    return [o.model_copy(update={"id": i}) for i, o in enumerate(objects)]


def _mergeable_pairs(objects: List[SceneObject], radius: float) -> List[tuple]:
    """Mutual-nearest-neighbour pairs within radius that share all four attribute values"""
    if len(objects) < 2:
        return []
    pos = np.array([[o.x, o.y] for o in objects])
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    np.fill_diagonal(dist, np.inf)
    nearest = dist.argmin(axis=1)
    pairs = []
    for i, j in enumerate(nearest):
        j = int(j)
        if i < j and nearest[j] == i and dist[i, j] <= radius and objects[i].attributes() == objects[j].attributes():
            pairs.append((i, j))
    return pairs


def corrupt(scene: Scene, spec: CorruptionSpec, rng: np.random.Generator) -> Scene:
    """Apply coordinate jitter, then occlusion, then merging of adjacent look-alike objects"""
    objects = list(scene.objects)

    if spec.coordinate_jitter_sigma > 0:
        noise = rng.normal(0.0, spec.coordinate_jitter_sigma, size=(len(objects), 2))
        objects = [
            o.model_copy(update={"x": o.x + float(dx), "y": o.y + float(dy)})
            for o, (dx, dy) in zip(objects, noise)
        ]

    if spec.occlusion_probability > 0:
        keep = rng.random(len(objects)) >= spec.occlusion_probability
        if not keep.any():
            keep[int(rng.integers(len(objects)))] = True
        objects = [o for o, k in zip(objects, keep) if k]

    if spec.merge_probability > 0:
        merged_away = set()
        replacements = {}
        for i, j in _mergeable_pairs(objects, spec.merge_radius):
            if rng.random() < spec.merge_probability:
                a, b = objects[i], objects[j]
                replacements[i] = a.model_copy(update={"x": (a.x + b.x) / 2, "y": (a.y + b.y) / 2})
                merged_away.add(j)
        if merged_away:
            logger.debug(f"Merged {len(merged_away)} object pair(s)")
        objects = [replacements.get(i, o) for i, o in enumerate(objects) if i not in merged_away]

    return Scene(objects=_renumber(objects), world=scene.world)


def sample_scenes(config: WorldConfig, count: int, seed: Optional[int] = None) -> List[Scene]:
    rng = np.random.default_rng(config.seed if seed is None else seed)
    return [sample_scene(config, rng) for _ in range(count)]
