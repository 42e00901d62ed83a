from typing import Dict, List

from xnm.errors import DataError
from xnm.models import CATEGORIES, MAX_COUNT, WorldConfig


class Vocabulary:
    """
    Closed vocabularies derived from a world config.

    labels   -- the C-entry label dictionary behind D (attribute values, then relations)
    queries  -- tokens owning a query-embedding row (every label plus the category names)
    answers  -- yes/no, "0".."10" and every attribute value
    """

    def __init__(self, world: WorldConfig):
        self.world = world
        self.labels: List[str] = []
        self.label_category: Dict[str, str] = {}
        for category in CATEGORIES:
            for value in world.vocab(category):
                self._add_label(value, category)
        for relation in world.relations:
            self._add_label(relation, "relation")
        self.label_index = {label: i for i, label in enumerate(self.labels)}

        self.queries = self.labels + list(CATEGORIES)
        self.query_index = {token: i for i, token in enumerate(self.queries)}

        self.answers = ["yes", "no"] + [str(n) for n in range(MAX_COUNT + 1)]
        for category in CATEGORIES:
            self.answers.extend(world.vocab(category))
        self.answer_index = {answer: i for i, answer in enumerate(self.answers)}

    def _add_label(self, label: str, category: str):
        if label in self.label_category:
            raise DataError(f"Label '{label}' appears in both {self.label_category[label]} and {category}")
        self.labels.append(label)
        self.label_category[label] = category

    @property
    def num_labels(self) -> int:
        return len(self.labels)

    def label(self, name: str) -> int:
        try:
            return self.label_index[name]
        except KeyError:
            raise DataError(f"Unknown label '{name}'") from None

    def category_labels(self, category: str) -> List[str]:
        return [label for label in self.labels if self.label_category[label] == category]

    def is_attribute_value(self, token: str) -> bool:
        return self.label_category.get(token) in CATEGORIES

    def is_relation(self, token: str) -> bool:
        return self.label_category.get(token) == "relation"

    def answer(self, name: str) -> int:
        try:
            return self.answer_index[name]
        except KeyError:
            raise DataError(f"Answer '{name}' is not in the answer vocabulary") from None
