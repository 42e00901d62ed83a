"""Paired (program, answer) generation over scenes, one template per question family."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from xnm.config import settings
from xnm.errors import DataError, IllPosedProgramError, TemplateExhaustedError
from xnm.models import CATEGORIES, FAMILIES, DatasetRecord, Scene, SceneRecord, WorldConfig
from xnm.oracle import evaluate, oracle
from xnm.program import Expr, chain_depth, print_program
from xnm.world import sample_scene

logger = logging.getLogger(__name__)

YES_NO_FAMILIES = ("exist", "compare_numbers", "compare_attribute")


def _scene() -> Expr:
    return Expr("scene")


def _selection(expr: Expr, scene: Scene) -> Optional[frozenset]:
    try:
        return evaluate(expr, scene)[-1]
    except IllPosedProgramError:
        return None


class QuestionGenerator:
    def __init__(self, world: WorldConfig, max_depth: Optional[int] = None, max_rejections: Optional[int] = None):
        self.world = world
        self.max_depth = max_depth if max_depth is not None else settings.max_chain_depth
        self.max_rejections = max_rejections if max_rejections is not None else settings.max_rejections

    def generate(self, scene: Scene, family: str, rng: np.random.Generator) -> Tuple[Expr, str]:
        """Rejection-sample a well-posed program of the family; yes/no families aim at a coin-flip answer"""
        if not scene.objects:
            raise DataError("Cannot generate questions for an empty scene")
        if family not in FAMILIES:
            raise DataError(f"Unknown question family '{family}'")
        target = None
        if family in YES_NO_FAMILIES:
            target = "yes" if rng.random() < 0.5 else "no"

        for _ in range(self.max_rejections):
            program = getattr(self, f"_template_{family}")(scene, rng)
            if program is None or chain_depth(program) > self.max_depth:
                continue
            try:
                answer = oracle(program, scene)
            except IllPosedProgramError:
                continue
            if target is not None and answer != target:
                continue
            return program, answer
        raise TemplateExhaustedError(
            f"No well-posed '{family}' question after {self.max_rejections} tries on a {len(scene.objects)}-object scene"
        )

    # --- templates ---------------------------------------------------------

    def _template_exist(self, scene, rng):
        body = self._select(scene, rng, self.max_depth, branches=1)
        return None if body is None else Expr("exist", None, (body,))

    def _template_count(self, scene, rng):
        body = self._select(scene, rng, self.max_depth, branches=1)
        return None if body is None else Expr("count", None, (body,))

    def _template_compare_numbers(self, scene, rng):
        kind = ("eq_int", "greater", "less")[int(rng.integers(3))]
        left = self._select(scene, rng, self.max_depth, branches=0)
        right = self._select(scene, rng, self.max_depth, branches=0)
        if left is None or right is None:
            return None
        return Expr("compare", kind, (Expr("count", None, (left,)), Expr("count", None, (right,))))

    def _template_query_attribute(self, scene, rng):
        category = CATEGORIES[int(rng.integers(len(CATEGORIES)))]
        anchor = self._singleton(scene, rng, self.max_depth)
        if anchor is None:
            return None
        return Expr("describe", category, (Expr("unique", None, (anchor,)),))

    def _template_compare_attribute(self, scene, rng):
        category = CATEGORIES[int(rng.integers(len(CATEGORIES)))]
        sides = []
        for _ in range(2):
            anchor = self._singleton(scene, rng, self.max_depth)
            if anchor is None:
                return None
            sides.append(Expr("describe", category, (Expr("unique", None, (anchor,)),)))
        return Expr("compare", f"eq_attr:{category}", tuple(sides))

    # --- building blocks ---------------------------------------------------

    def _random_value(self, scene: Scene, rng, category: Optional[str] = None) -> str:
        """Mostly a value present in the scene, sometimes any vocabulary value"""
        if category is None:
            category = CATEGORIES[int(rng.integers(len(CATEGORIES)))]
        if rng.random() < 0.7:
            obj = scene.objects[int(rng.integers(len(scene.objects)))]
            return obj.attribute(category)
        values = self.world.vocab(category)
        return values[int(rng.integers(len(values)))]

    def _filters(self, expr: Expr, scene: Scene, rng, count: int) -> Expr:
        categories = list(rng.permutation(CATEGORIES))[:count]
        for category in categories:
            expr = Expr("filter", self._random_value(scene, rng, category), (expr,))
        return expr

    def _maybe_filter(self, expr: Expr, scene: Scene, rng, budget: int) -> Expr:
        if chain_depth(expr) < budget and rng.random() < 0.5:
            return self._filters(expr, scene, rng, 1)
        return expr

    def _unique(self, scene: Scene, rng, budget: int) -> Optional[Expr]:
        """Filter chain that singles out one random object, or None within the budget"""
        target = scene.objects[int(rng.integers(len(scene.objects)))]
        expr = _scene()
        selected = {o.id for o in scene.objects}
        for category in rng.permutation(CATEGORIES):
            if len(selected) == 1:
                break
            if chain_depth(expr) >= budget:
                return None
            value = target.attribute(str(category))
            narrowed = {i for i in selected if scene.objects[i].attribute(str(category)) == value}
            if narrowed != selected:
                expr = Expr("filter", value, (expr,))
                selected = narrowed
        return expr if selected == {target.id} else None

    def _singleton(self, scene: Scene, rng, budget: int) -> Optional[Expr]:
        if rng.random() < 0.6:
            return self._unique(scene, rng, budget)
        candidate = self._select(scene, rng, budget, branches=0)
        if candidate is None:
            return None
        selection = _selection(candidate, scene)
        return candidate if selection is not None and len(selection) == 1 else None

    def _select(self, scene: Scene, rng, budget: int, branches: int) -> Optional[Expr]:
        """Any attention-valued chain of depth <= budget"""
        options = ["filters"]
        if budget >= 2:
            options += ["relate", "same"]
        if budget >= 2 and branches > 0:
            options.append("setop")
        choice = options[int(rng.integers(len(options)))]

        if choice == "filters":
            return self._filters(_scene(), scene, rng, int(rng.integers(0, min(budget, 2) + 1)))
        if choice == "setop":
            left = self._select(scene, rng, budget - 1, branches=0)
            right = self._select(scene, rng, budget - 1, branches=0)
            if left is None or right is None:
                return None
            op = "intersect" if rng.random() < 0.5 else "union"
            return Expr(op, None, (left, right))

        anchor = self._unique(scene, rng, budget - 1)
        if anchor is None:
            return None
        if choice == "relate":
            relation = self.world.relations[int(rng.integers(len(self.world.relations)))]
            expr = Expr("relate", relation, (Expr("unique", None, (anchor,)),))
        else:
            category = CATEGORIES[int(rng.integers(len(CATEGORIES)))]
            expr = Expr("same", category, (Expr("unique", None, (anchor,)),))
        return self._maybe_filter(expr, scene, rng, budget)


@dataclass
class GeneratedSplit:
    scenes: List[SceneRecord] = field(default_factory=list)
    records: List[DatasetRecord] = field(default_factory=list)


def generate_split(
    world: WorldConfig,
    num_scenes: int,
    questions_per_scene: int,
    rng: np.random.Generator,
    first_scene_id: int = 0,
) -> GeneratedSplit:
    """Scenes plus questions cycling through the five families, so families stay balanced"""
    generator = QuestionGenerator(world)
    split = GeneratedSplit()
    family_counts: Dict[str, int] = {f: 0 for f in FAMILIES}
    slot = 0
    for n in tqdm(range(num_scenes), desc=f"scenes[{world.palette or '-'}]", disable=not settings.show_progress):
        scene_id = first_scene_id + n
        scene = sample_scene(world, rng)
        split.scenes.append(SceneRecord(scene_id=scene_id, **scene.model_dump()))
        for _ in range(questions_per_scene):
            family = FAMILIES[slot % len(FAMILIES)]
            slot += 1
            try:
                program, answer = generator.generate(scene, family, rng)
            except TemplateExhaustedError as e:
                logger.warning(f"Scene {scene_id}: {e}")
                continue
            family_counts[family] += 1
            split.records.append(
                DatasetRecord(scene_id=scene_id, program=print_program(program), family=family, answer=answer)
            )
    logger.info(f"Generated {len(split.records)} questions over {num_scenes} scenes: {family_counts}")
    return split


def scene_from_record(record: SceneRecord) -> Scene:
    return Scene(objects=record.objects, world=record.world)

