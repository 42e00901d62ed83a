from pydantic import BaseModel, Field, field_validator, model_validator
from typing import Dict, List, Literal, Optional

CATEGORIES = ("color", "shape", "size", "material")
RELATIONS = ("left", "right", "front", "behind")
FAMILIES = ("count", "exist", "compare_numbers", "query_attribute", "compare_attribute")
MAX_COUNT = 10

DEFAULT_COLORS = ["gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow"]
DEFAULT_SHAPES = ["cube", "sphere", "cylinder"]
DEFAULT_SIZES = ["large", "small"]
DEFAULT_MATERIALS = ["rubber", "metal"]

# condition A palette; condition B swaps the two shapes' palettes
DEFAULT_PALETTE_A = {
    "cube": ["gray", "blue", "brown", "yellow"],
    "cylinder": ["red", "green", "purple", "cyan"],
}


class SceneObject(BaseModel):
    id: int
    color: str
    shape: str
    size: str
    material: str
    x: float
    y: float

    def attribute(self, category: str) -> str:
        return getattr(self, category)

    def attributes(self) -> tuple:
        return tuple(getattr(self, c) for c in CATEGORIES)

class Scene(BaseModel):
    objects: List[SceneObject]
    world: Optional[str] = None

    @model_validator(mode="after")
    def check_objects(self):
        ids = [o.id for o in self.objects]
        if ids != list(range(len(ids))):
            raise ValueError(f"object ids must be contiguous from 0, got {ids}")
        positions = {(o.x, o.y) for o in self.objects}
        if len(positions) != len(self.objects):
            raise ValueError("two objects share the same (x, y) position")
        return self

class SceneRecord(Scene):
    scene_id: int

class WorldConfig(BaseModel):
    name: str = "mini-clevr"
    colors: List[str] = Field(default_factory=lambda: list(DEFAULT_COLORS))
    shapes: List[str] = Field(default_factory=lambda: list(DEFAULT_SHAPES))
    sizes: List[str] = Field(default_factory=lambda: list(DEFAULT_SIZES))
    materials: List[str] = Field(default_factory=lambda: list(DEFAULT_MATERIALS))
    relations: List[str] = Field(default_factory=lambda: list(RELATIONS))
    min_objects: int = Field(3, ge=1)
    max_objects: int = Field(10, ge=1, le=MAX_COUNT)
    coordinate_range: float = Field(3.0, gt=0)
    # None = unconstrained, "A"/"B" = CoGenT condition
    palette: Optional[Literal["A", "B"]] = None
    palette_a: Dict[str, List[str]] = Field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_PALETTE_A.items()})
    cogent: bool = False
    seed: int = 0

    @field_validator("relations")
    @classmethod
    def fixed_relations(cls, value):
        if sorted(value) != sorted(RELATIONS):
            raise ValueError(f"relation vocabulary is fixed to {list(RELATIONS)}")
        return value

    @model_validator(mode="after")
    def check_ranges(self):
        if self.min_objects > self.max_objects:
            raise ValueError("min_objects exceeds max_objects")
        if len(self.palette_a) == 2:
            first, second = self.palette_a.values()
            if set(first) & set(second):
                raise ValueError("palette A color sets must be disjoint")
        return self

    def vocab(self, category: str) -> List[str]:
        return {"color": self.colors, "shape": self.shapes, "size": self.sizes, "material": self.materials}[category]

    def with_condition(self, palette: Optional[str]) -> "WorldConfig":
        return self.model_copy(update={"palette": palette})

    def allowed_colors(self, shape: str) -> List[str]:
        """Colors a shape may take under the configured palette condition"""
        if self.palette is None or len(self.palette_a) != 2:
            return list(self.colors)
        shapes = list(self.palette_a.keys())
        if shape not in shapes:
            return list(self.colors)
        if self.palette == "B":
            shape = shapes[1] if shape == shapes[0] else shapes[0]
        return [c for c in self.palette_a[shape] if c in self.colors]

class CorruptionSpec(BaseModel):
    coordinate_jitter_sigma: float = Field(0.0, ge=0)
    occlusion_probability: float = Field(0.0, ge=0, le=1)
    merge_probability: float = Field(0.0, ge=0, le=1)
    feature_noise_sigma: float = Field(0.0, ge=0)
    merge_radius: float = Field(1.0, gt=0)

    @property
    def is_clean(self) -> bool:
        return (self.coordinate_jitter_sigma == 0 and self.occlusion_probability == 0
                and self.merge_probability == 0 and self.feature_noise_sigma == 0)

class DatasetRecord(BaseModel):
    scene_id: int
    program: str
    family: Literal["count", "exist", "compare_numbers", "query_attribute", "compare_attribute"]
    answer: str

class EngineConfig(BaseModel):
    setting: Literal["gt", "det"] = "gt"
    dim: int = Field(32, ge=1)
    gt_backend: Literal["softmax", "sigmoid"] = "softmax"
    describe_mode: Literal["fixed", "learned"] = "fixed"
    temperature: float = Field(1.0, gt=0)
    world: WorldConfig = Field(default_factory=WorldConfig)
    det_feature_dim: int = 32
    det_edge_dim: int = 2
    projection_seed: int = 7
    joint_code: bool = True
    corruption: CorruptionSpec = Field(default_factory=CorruptionSpec)

    @model_validator(mode="after")
    def check_describe_mode(self):
        if self.setting == "det" and self.describe_mode == "fixed":
            raise ValueError("fixed Describe matrices require the GT setting")
        return self

class ParameterBlob(BaseModel):
    shape: List[int]
    data: List[float]

class CheckpointMeta(BaseModel):
    epoch: int = 0
    seed: int = 0
    fraction: float = 1.0
    lr_schedule: List[float] = Field(default_factory=list)
    loss_curve: List[float] = Field(default_factory=list)

class CheckpointDocument(BaseModel):
    version: int
    config: EngineConfig
    params: Dict[str, ParameterBlob]
    meta: CheckpointMeta = Field(default_factory=CheckpointMeta)

class Metrics(BaseModel):
    overall: float
    per_family: Dict[str, float]
    family_counts: Dict[str, int]
    correct: int
    total: int
    loss_curve: List[float] = Field(default_factory=list)
    parameter_count: int = 0

class TraceStep(BaseModel):
    module: str
    token: Optional[str] = None
    inputs: List[int]
    kind: Literal["attention", "feature"]
    values: List[float]

class TraceDocument(BaseModel):
    steps: List[TraceStep]
    answer: Optional[str] = None
    logits: Optional[List[float]] = None
