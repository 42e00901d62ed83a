"""
Reasoning programs: typed trees of module applications.

    expr := IDENT ('[' TOKEN ']')? '(' (expr (',' expr)*)? ')'

Every module consumes and produces one of two value kinds, attention or feature;
a well-typed program produces a feature at its root.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from xnm.errors import ArityError, ProgramTypeError, UnknownModuleError, UnknownTokenError
from xnm.models import CATEGORIES
from xnm.vocab import Vocabulary

ATTENTION = "attention"
FEATURE = "feature"

NUMBER_COMPARISONS = ("eq_int", "greater", "less")


@dataclass(frozen=True)
class Signature:
    inputs: Tuple[str, ...]
    output: str
    takes_token: bool


SIGNATURES: Dict[str, Signature] = {
    "scene": Signature((), ATTENTION, False),
    "filter": Signature((ATTENTION,), ATTENTION, True),
    "relate": Signature((ATTENTION,), ATTENTION, True),
    "same": Signature((ATTENTION,), ATTENTION, True),
    "unique": Signature((ATTENTION,), ATTENTION, False),
    "intersect": Signature((ATTENTION, ATTENTION), ATTENTION, False),
    "union": Signature((ATTENTION, ATTENTION), ATTENTION, False),
    "exist": Signature((ATTENTION,), FEATURE, False),
    "count": Signature((ATTENTION,), FEATURE, False),
    "describe": Signature((ATTENTION,), FEATURE, True),
    "compare": Signature((FEATURE, FEATURE), FEATURE, True),
}

CHAIN_MODULES = frozenset({"filter", "relate", "same", "intersect", "union"})


@dataclass(frozen=True)
class Expr:
    module: str
    token: Optional[str] = None
    children: Tuple["Expr", ...] = ()
    span: Tuple[int, int] = field(default=(0, 0), compare=False)

    @property
    def kind(self) -> str:
        return SIGNATURES[self.module].output

    def __str__(self) -> str:
        return print_program(self)


# A program is its root expression.
Program = Expr


def print_program(p: Expr) -> str:
    token = f"[{p.token}]" if p.token is not None else ""
    return f"{p.module}{token}({','.join(print_program(c) for c in p.children)})"


def post_order(p: Expr) -> List[Expr]:
    """Nodes in execution order: children before parents, left to right"""
    nodes: List[Expr] = []

    def visit(node: Expr):
        for child in node.children:
            visit(child)
        nodes.append(node)

    visit(p)
    return nodes


def program_size(p: Expr) -> int:
    return 1 + sum(program_size(c) for c in p.children)


def chain_depth(p: Expr) -> int:
    """Longest root-to-leaf run of filter/relate/same/intersect/union applications"""
    below = max((chain_depth(c) for c in p.children), default=0)
    return below + (1 if p.module in CHAIN_MODULES else 0)


def split_compare_token(token: str) -> Tuple[str, Optional[str]]:
    """'eq_attr:color' -> ('eq_attr', 'color'); 'greater' -> ('greater', None)"""
    kind, _, category = token.partition(":")
    return kind, (category or None)


def check_structure(p: Expr, root: bool = True) -> None:
    """Arity, token presence and value kinds; raises with the offending node's span"""
    signature = SIGNATURES.get(p.module)
    if signature is None:
        raise UnknownModuleError(f"Unknown module '{p.module}'", p.span[0], p.span)
    if signature.takes_token and p.token is None:
        raise ProgramTypeError(f"Module '{p.module}' needs a bracket token", p.span[0], p.span)
    if not signature.takes_token and p.token is not None:
        raise ProgramTypeError(f"Module '{p.module}' takes no bracket token", p.span[0], p.span)
    if len(p.children) != len(signature.inputs):
        raise ArityError(
            f"Module '{p.module}' takes {len(signature.inputs)} argument(s), got {len(p.children)}",
            p.span[0], p.span,
        )
    for child, expected in zip(p.children, signature.inputs):
        check_structure(child, root=False)
        if child.kind != expected:
            raise ProgramTypeError(
                f"Module '{p.module}' expects {expected} input, '{child.module}' produces {child.kind}",
                child.span[0], child.span,
            )
    if root and p.kind != FEATURE:
        raise ProgramTypeError(f"Program must end in a feature module, '{p.module}' produces {p.kind}", p.span[0], p.span)


def _check_tokens(p: Expr, vocab: Vocabulary) -> None:
    for child in p.children:
        _check_tokens(child, vocab)
    token = p.token
    where = (p.span[0], p.span)
    if p.module == "filter" and not vocab.is_attribute_value(token):
        raise UnknownTokenError(f"filter[{token}]: not an attribute value", *where)
    if p.module == "relate" and not vocab.is_relation(token):
        raise UnknownTokenError(f"relate[{token}]: not a relation", *where)
    if p.module in ("same", "describe") and token not in CATEGORIES:
        raise UnknownTokenError(f"{p.module}[{token}]: not an attribute category", *where)
    if p.module == "compare":
        kind, category = split_compare_token(token)
        if kind in NUMBER_COMPARISONS and category is None:
            if any(c.module != "count" for c in p.children):
                raise ProgramTypeError(f"compare[{token}] compares two count(...) results", *where)
        elif kind == "eq_attr" and category in CATEGORIES:
            if any(c.module != "describe" or c.token != category for c in p.children):
                raise ProgramTypeError(f"compare[{token}] compares two describe[{category}](...) results", *where)
        else:
            raise UnknownTokenError(f"compare[{token}]: unknown comparison", *where)


def validate(p: Expr, vocab: Vocabulary) -> Expr:
    """Structural and vocabulary checks; returns the program for chaining"""
    check_structure(p)
    _check_tokens(p, vocab)
    return p
