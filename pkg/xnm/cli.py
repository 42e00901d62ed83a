import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from xnm.config import settings
from xnm.engine import Reasoner
from xnm.errors import XNMError
from xnm.executor import dump_trace, execute
from xnm.experiments import engine_config, experiment_runner
from xnm.oracle import oracle
from xnm.parser import parse
from xnm.program import validate
from xnm.storage import checkpoint_store, dataset_store
from xnm.training import trainer
from xnm.vocab import Vocabulary
from xnm.world import check_scene

logger = logging.getLogger(__name__)


def cmd_gen(args) -> int:
    world = dataset_store.load_world(args.config)
    experiment_runner.generate_dataset(world, args.out, args.scenes, args.questions_per_scene, args.seed)
    return 0


def cmd_train(args) -> int:
    world = dataset_store.load_world(args.data)
    overrides = {"gt_backend": args.backend}
    if args.corruption:
        overrides["corruption"] = dataset_store.load_corruption(args.corruption)
    config = engine_config(world, args.setting, args.dim, **overrides)
    scenes = dataset_store.load_scenes(args.data)
    records = dataset_store.load_split(args.data, "train")
    checkpoint = trainer.train(records, scenes, config, epochs=args.epochs, seed=args.seed, fraction=args.fraction)
    checkpoint_store.save(args.out, checkpoint)
    return 0


def cmd_eval(args) -> int:
    checkpoint = checkpoint_store.load(args.ckpt)
    scenes = dataset_store.load_scenes(args.data)
    records = dataset_store.load_split(args.data, args.split)
    metrics = trainer.evaluate(checkpoint, records, scenes, workers=args.workers)
    print(metrics.model_dump_json(indent=2))
    return 0


def cmd_run(args) -> int:
    reasoner = Reasoner.from_checkpoint(checkpoint_store.load(args.ckpt))
    scene = dataset_store.load_scene(args.scene)
    check_scene(scene, reasoner.config.world)
    program = validate(parse(args.program), reasoner.vocab)
    rng = np.random.default_rng(reasoner.config.projection_seed)
    graph = reasoner.graph(reasoner.prepare_scene(scene, rng), rng)
    _, trace = execute(program, graph, reasoner)
    if args.trace:
        Path(args.trace).write_text(dump_trace(trace), encoding="utf-8")
    print(trace.answer)
    return 0


def cmd_oracle(args) -> int:
    scene = dataset_store.load_scene(args.scene)
    world = dataset_store.load_world(args.world) if args.world else None
    program = parse(args.program)
    if world is not None:
        check_scene(scene, world)
        validate(program, Vocabulary(world))
    print(oracle(program, scene))
    return 0


def cmd_cogent(args) -> int:
    world = dataset_store.load_world(args.config)
    metrics_a, metrics_b = experiment_runner.run_cogent(
        world,
        setting=args.setting,
        out_dir=args.out,
        num_scenes=args.scenes,
        questions_per_scene=args.questions_per_scene,
        epochs=args.epochs,
        seed=args.seed,
        dim=args.dim,
    )
    print(json.dumps({"A": metrics_a.model_dump(), "B": metrics_b.model_dump()}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xnm", description="Scene-graph reasoning with X neural modules")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate scenes and question/program pairs")
    gen.add_argument("--config", required=True, help="world config JSON")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--scenes", type=int, default=2000)
    gen.add_argument("--questions-per-scene", type=int, default=10)
    gen.add_argument("--seed", type=int, default=None)
    gen.set_defaults(func=cmd_gen)

    train = sub.add_parser("train", help="train an engine on a generated dataset")
    train.add_argument("--data", required=True)
    train.add_argument("--setting", choices=["gt", "det"], required=True)
    train.add_argument("--out", required=True, help="checkpoint path")
    train.add_argument("--fraction", type=float, default=1.0)
    train.add_argument("--epochs", type=int, default=None)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--dim", type=int, default=None)
    train.add_argument("--corruption", default=None, help="corruption spec JSON (Det setting)")
    train.add_argument("--backend", choices=["softmax", "sigmoid"], default="softmax", help="GT attention backend")
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="accuracy of a checkpoint on a split")
    ev.add_argument("--ckpt", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--split", required=True)
    ev.add_argument("--workers", type=int, default=None)
    ev.set_defaults(func=cmd_eval)

    run = sub.add_parser("run", help="answer one program on one scene")
    run.add_argument("--ckpt", required=True)
    run.add_argument("--scene", required=True)
    run.add_argument("--program", required=True)
    run.add_argument("--trace", default=None, help="write the execution trace JSON here")
    run.set_defaults(func=cmd_run)

    orc = sub.add_parser("oracle", help="exact answer by set semantics")
    orc.add_argument("--scene", required=True)
    orc.add_argument("--program", required=True)
    orc.add_argument("--world", default=None, help="world config JSON to validate tokens against")
    orc.set_defaults(func=cmd_oracle)

    cog = sub.add_parser("cogent", help="train on palette A, evaluate on A and B")
    cog.add_argument("--config", required=True)
    cog.add_argument("--out", required=True)
    cog.add_argument("--setting", choices=["gt", "det"], default="gt")
    cog.add_argument("--scenes", type=int, default=2000)
    cog.add_argument("--questions-per-scene", type=int, default=10)
    cog.add_argument("--epochs", type=int, default=None)
    cog.add_argument("--seed", type=int, default=None)
    cog.add_argument("--dim", type=int, default=None)
    cog.set_defaults(func=cmd_cogent)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=settings.log_level.upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except XNMError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
