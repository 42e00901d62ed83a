"""
Program execution over scene graphs.

`execute` runs the soft, differentiable engine and ends in the answer classifier.
`execute_symbolic` is the hard mode used to check the engine against the oracle:
attentions are thresholded at 0.5 after every step and output modules are read out
as exact values instead of going through their MLPs.
"""
import json
import logging
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from xnm.autodiff import Tensor, cross_entropy
from xnm.engine import Reasoner
from xnm.errors import DataError, ProgramTypeError, UnknownTokenError
from xnm.graph import SceneGraph
from xnm.models import TraceDocument, TraceStep
from xnm.program import ATTENTION, FEATURE, Expr, post_order, split_compare_token

logger = logging.getLogger(__name__)

HARD_THRESHOLD = 0.5
TRACE_DECIMALS = 6

Decoded = Union[bool, int, str]


def _apply(node: Expr, args: List[Tensor], graph: SceneGraph, reasoner: Reasoner) -> Tensor:
    engine = reasoner.engine
    m = node.module
    if m == "scene":
        return engine.scene(graph)
    if m == "filter":
        return engine.filter(args[0], reasoner.query(node.token), graph)
    if m == "relate":
        return engine.relate(args[0], reasoner.query(node.token), graph)
    if m == "same":
        return engine.same(args[0], reasoner.query(node.token), graph)
    if m == "unique":
        return args[0]
    if m == "intersect":
        return engine.intersect(args[0], args[1])
    if m == "union":
        return engine.union(args[0], args[1])
    if m == "exist":
        return engine.exist(args[0])
    if m == "count":
        return engine.count(args[0])
    if m == "describe":
        return engine.describe(args[0], reasoner.query(node.token), graph)
    if m == "compare":
        kind, _ = split_compare_token(node.token)
        return engine.compare(args[0], args[1], kind)
    raise UnknownTokenError(f"Unknown module '{m}'", node.span[0], node.span)


def _step(node: Expr, inputs: List[int], values: np.ndarray) -> TraceStep:
    return TraceStep(
        module=node.module,
        token=node.token,
        inputs=inputs,
        kind=node.kind,
        values=[float(v) for v in np.asarray(values).reshape(-1)],
    )


def _check_program(program: Expr, graph: SceneGraph):
    if graph.n == 0:
        raise DataError("Cannot execute on an empty scene graph")
    if program.kind != FEATURE:
        raise ProgramTypeError(f"Program ends in '{program.module}', which produces an attention", program.span[0], program.span)


def execute(
    program: Expr, graph: SceneGraph, reasoner: Reasoner, record_trace: bool = True
) -> Tuple[Tensor, Optional[TraceDocument]]:
    """Post-order evaluation; returns the answer logits and (optionally) a trace of every node"""
    _check_program(program, graph)
    values: Dict[int, Tensor] = {}
    positions: Dict[int, int] = {}
    steps: List[TraceStep] = []

    for node in post_order(program):
        out = _apply(node, [values[id(c)] for c in node.children], graph, reasoner)
        values[id(node)] = out
        if record_trace:
            steps.append(_step(node, [positions[id(c)] for c in node.children], out.data))
            positions[id(node)] = len(steps) - 1

    logits = reasoner.engine.classify(values[id(program)])
    if not record_trace:
        return logits, None
    trace = TraceDocument(
        steps=steps,
        answer=reasoner.vocab.answers[int(np.argmax(logits.data))],
        logits=[float(v) for v in logits.data],
    )
    return logits, trace


def predict(program: Expr, graph: SceneGraph, reasoner: Reasoner) -> str:
    logits, _ = execute(program, graph, reasoner, record_trace=False)
    return reasoner.vocab.answers[int(np.argmax(logits.data))]


def loss(logits: Tensor, answer: int) -> Tensor:
    """Softmax cross-entropy against the answer's vocabulary index"""
    if not 0 <= answer < logits.size:
        raise DataError(f"Answer index {answer} outside {logits.size} logits")
    return cross_entropy(logits, answer)


def _harden(a: Tensor) -> Tensor:
    return Tensor((a.data >= HARD_THRESHOLD).astype(np.float64))


def execute_symbolic(program: Expr, graph: SceneGraph, reasoner: Reasoner) -> Tuple[str, TraceDocument]:
    """Hard-mode execution; answers use the same strings as the oracle"""
    _check_program(program, graph)
    values: Dict[int, Tensor] = {}
    decoded: Dict[int, Decoded] = {}
    positions: Dict[int, int] = {}
    steps: List[TraceStep] = []
    engine = reasoner.engine

    for node in post_order(program):
        args = [values[id(c)] for c in node.children]
        m = node.module
        if node.kind == ATTENTION:
            out = _harden(_apply(node, args, graph, reasoner))
            recorded = out.data
        elif m in ("exist", "count"):
            total = float(args[0].data.sum())
            decoded[id(node)] = total >= HARD_THRESHOLD if m == "exist" else int(round(total))
            out = Tensor(np.array([total]))
            recorded = np.array([float(decoded[id(node)])])
        elif m == "describe":
            out = engine.describe(args[0], reasoner.query(node.token), graph)
            decoded[id(node)] = reasoner.decode_label(out, node.token)
            recorded = out.data
        elif m == "compare":
            kind, _ = split_compare_token(node.token)
            left, right = (decoded[id(c)] for c in node.children)
            if kind in ("eq_int", "eq_attr"):
                result = left == right
            elif kind == "greater":
                result = left > right
            elif kind == "less":
                result = left < right
            else:
                raise UnknownTokenError(f"Unknown compare kind '{kind}'", node.span[0], node.span)
            decoded[id(node)] = result
            out = Tensor(np.array([float(result)]))
            recorded = out.data
        else:
            raise UnknownTokenError(f"Unknown module '{m}'", node.span[0], node.span)
        values[id(node)] = out
        steps.append(_step(node, [positions[id(c)] for c in node.children], recorded))
        positions[id(node)] = len(steps) - 1

    answer = _answer_string(decoded[id(program)])
    return answer, TraceDocument(steps=steps, answer=answer)


def _answer_string(value: Decoded) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    return str(value)


def dump_trace(trace: TraceDocument) -> str:
    """Canonical JSON: compact separators, values rounded to 6 decimals"""
    document = trace.model_dump(exclude_none=True)
    for step in document["steps"]:
        step["values"] = [round(v, TRACE_DECIMALS) for v in step["values"]]
    if "logits" in document:
        document["logits"] = [round(v, TRACE_DECIMALS) for v in document["logits"]]
    return json.dumps(document, separators=(",", ":"))
