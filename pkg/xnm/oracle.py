"""Exact set-semantics evaluation of programs over ground-truth scenes."""
from typing import Dict, FrozenSet, List, Union

from xnm.errors import IllPosedProgramError, UnknownTokenError
from xnm.models import Scene
from xnm.program import Expr, post_order, split_compare_token
from xnm.world import spatial_relations

Value = Union[FrozenSet[int], bool, int, str]


def _single(selection: FrozenSet[int], node: Expr) -> int:
    if len(selection) != 1:
        raise IllPosedProgramError(f"{node.module} needs exactly one selected object, got {len(selection)}")
    return next(iter(selection))


def evaluate(p: Expr, scene: Scene) -> List[Value]:
    """Value of every node, in execution (post-) order"""
    relations = spatial_relations(scene)
    objects = scene.objects
    everything = frozenset(o.id for o in objects)
    values: Dict[int, Value] = {}
    ordered: List[Value] = []

    for node in post_order(p):
        args = [values[id(c)] for c in node.children]
        m = node.module
        if m == "scene":
            out: Value = everything
        elif m == "filter":
            out = frozenset(i for i in args[0] if node.token in objects[i].attributes())
        elif m == "relate":
            out = frozenset(j for i in args[0] for j in everything if node.token in relations[i][j])
        elif m == "same":
            i = _single(args[0], node)
            value = objects[i].attribute(node.token)
            out = frozenset(j for j in everything if j != i and objects[j].attribute(node.token) == value)
        elif m == "unique":
            _single(args[0], node)
            out = args[0]
        elif m == "intersect":
            out = args[0] & args[1]
        elif m == "union":
            out = args[0] | args[1]
        elif m == "exist":
            out = len(args[0]) > 0
        elif m == "count":
            out = len(args[0])
        elif m == "describe":
            out = objects[_single(args[0], node)].attribute(node.token)
        elif m == "compare":
            kind, _ = split_compare_token(node.token)
            if kind == "eq_int" or kind == "eq_attr":
                out = args[0] == args[1]
            elif kind == "greater":
                out = args[0] > args[1]
            elif kind == "less":
                out = args[0] < args[1]
            else:
                raise UnknownTokenError(f"Unknown compare kind '{kind}'", node.span[0], node.span)
        else:
            raise UnknownTokenError(f"Unknown module '{m}'", node.span[0], node.span)
        values[id(node)] = out
        ordered.append(out)
    return ordered


def to_answer(value: Value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return value
    raise IllPosedProgramError("Program ends in an attention, not an answer")


def oracle(p: Expr, scene: Scene) -> str:
    return to_answer(evaluate(p, scene)[-1])


def is_well_posed(p: Expr, scene: Scene) -> bool:
    try:
        evaluate(p, scene)
    except IllPosedProgramError:
        return False
    return True
