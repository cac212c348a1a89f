"""Command-line surface: train, plan, bench, and landscape subcommands.

Every command is reproducible from its config file and seed; each output
artifact embeds the effective configuration for provenance. Failures map to
a stable exit-code taxonomy so scripted runs can bucket them:

    2  instruction parse error
    3  grounding error (no match / ambiguous)
    4  goal compilation error
    5  missing asset (scene file, checkpoint)
    6  training aborted
    1  anything else
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import (
    FAMILIES,
    SPLITS,
    BenchmarkRun,
    EpisodeResult,
    gen_episode,
    results_to_csv,
    run_episode,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig
from .data import build_dataset
from .ebm import ConceptKind
from .errors import (
    CheckpointError,
    CompileError,
    GroundingError,
    InstructionParseError,
    ScenergyError,
    TrainingAborted,
)
from .grounding import ground_program
from .landscape import extract_paths, render_ppm, render_svg, sweep
from .parser import parse, program_to_sexpr
from .planner import compile_program, layout_to_dict, plan_goal
from .scene import load_scene
from .training import train_concept

_KIND_NAMES = {kind.value: kind for kind in ConceptKind}

#: concept checkpoints each benchmark family depends on
_FAMILY_KINDS = {
    "spatial-relations": (
        ConceptKind.LEFT_OF, ConceptKind.RIGHT_OF,
        ConceptKind.BEHIND, ConceptKind.IN_FRONT_OF,
    ),
    "comp-one-step": (
        ConceptKind.LEFT_OF, ConceptKind.RIGHT_OF,
        ConceptKind.BEHIND, ConceptKind.IN_FRONT_OF,
    ),
    "comp-group": (
        ConceptKind.LEFT_OF, ConceptKind.RIGHT_OF,
        ConceptKind.BEHIND, ConceptKind.IN_FRONT_OF,
    ),
    "shapes": (ConceptKind.CIRCLE, ConceptKind.LINE, ConceptKind.INSIDE),
}


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.seed is not None:
        overrides = {key: cfg[key] for key in cfg.keys()}
        overrides["seed"] = args.seed
        cfg = RunConfig(overrides)
    return cfg


def _checkpoint_path(directory, kind: ConceptKind) -> Path:
    return Path(directory) / f"{kind.value}.ckpt"


def _load_library(directory, kinds) -> dict:
    library = {}
    for kind in kinds:
        path = _checkpoint_path(directory, kind)
        if not path.is_file():
            raise CheckpointError(f"missing checkpoint for '{kind.value}': {path}")
        library[kind] = load_checkpoint(path)
    return library


def _scene_or_missing(path):
    p = Path(path)
    if not p.is_file():
        raise CheckpointError(f"scene file not found: {p}")
    return load_scene(p.read_bytes())


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    cfg = _load_config(args)
    if args.concept not in _KIND_NAMES:
        print(f"unknown concept '{args.concept}'", file=sys.stderr)
        return 1
    kind = _KIND_NAMES[args.concept]
    train_cfg = cfg.train_config()
    dataset = build_dataset(
        kind, cfg["train.dataset_size"], cfg.geometry(), seed=cfg["seed"]
    )
    out = Path(args.out)
    report_path = out.with_suffix(".report.jsonl")
    try:
        params, report = train_concept(kind, dataset, train_cfg)
    except TrainingAborted as abort:
        rows = abort.args[1] if len(abort.args) > 1 else []
        report_path.write_text(
            "\n".join(
                [json.dumps({"config": cfg.echo(), "aborted": str(abort.args[0])})]
                + [json.dumps(r) for r in rows]
            ),
            encoding="utf-8",
        )
        print(f"training aborted: {abort.args[0]}", file=sys.stderr)
        raise
    save_checkpoint(params, out)
    report_path.write_text(
        json.dumps({"config": cfg.echo()}) + "\n" + report.to_jsonl() + "\n",
        encoding="utf-8",
    )
    final = report.final
    print(
        f"trained {kind.value}: {train_cfg.steps} steps in {report.wall_time:.1f}s, "
        f"cd={final['cd']:+.4f} -> {out}"
    )
    return 0


def _compiled(args):
    """Shared parse -> ground -> compile front half of plan/landscape."""
    scene = _scene_or_missing(args.scene)
    program = parse(args.instruction)
    groundings = ground_program(program, scene)
    expr = compile_program(program, groundings)
    return scene, program, expr


def cmd_plan(args) -> int:
    cfg = _load_config(args)
    scene, program, expr = _compiled(args)
    library = _load_library(args.checkpoints, {t.kind for t in expr.terms})
    layout = plan_goal(
        scene,
        expr,
        library,
        cfg=cfg.infer_sampler(),
        rng=np.random.default_rng(cfg["seed"]),
        tau_move=cfg["planner.tau_move"],
        keep_trajectory=args.render is not None,
    )
    doc = layout_to_dict(layout)
    doc["config"] = cfg.echo()
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if args.dump_program:
        Path(args.dump_program).write_text(
            program_to_sexpr(program) + "\n", encoding="utf-8"
        )
    if args.render:
        paths = extract_paths(scene, expr, layout.trajectory)
        Path(args.render).write_bytes(_svg_with_comment(scene, paths, cfg))
    return 0


def _svg_with_comment(scene, paths, cfg: RunConfig) -> bytes:
    data = render_svg(scene, paths)
    echo = "".join(f"<!-- {k} = {v} -->\n" for k, v in cfg.echo().items())
    head, sep, tail = data.partition(b"?>\n")
    return head + sep + echo.encode("utf-8") + tail


def _ppm_with_comments(data: bytes, cfg: RunConfig) -> bytes:
    comments = "".join(f"# {k} = {v}\n" for k, v in cfg.echo().items())
    return b"P6\n" + comments.encode("ascii") + data[len(b"P6\n"):]


def cmd_landscape(args) -> int:
    cfg = _load_config(args)
    resolution = (
        args.resolution if args.resolution is not None else cfg["landscape.resolution"]
    )
    scene, _program, expr = _compiled(args)
    library = _load_library(args.checkpoints, {t.kind for t in expr.terms})
    grid = sweep(scene, expr, library, args.probe, resolution=resolution)
    Path(args.out).write_bytes(_ppm_with_comments(render_ppm(grid), cfg))
    print(f"swept '{args.probe}' at {grid.resolution}x{grid.resolution} -> {args.out}")
    return 0


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    library = _load_library(args.checkpoints, _FAMILY_KINDS[args.family])
    exec_cfg = replace(cfg.exec_config(), seed=cfg["seed"])
    episodes = args.episodes if args.episodes is not None else cfg["bench.episodes"]
    base = cfg["seed"]
    echo = dict(cfg.echo())
    echo.update(
        {
            "bench.family": args.family,
            "bench.split": args.split,
            "bench.closed_loop": "true" if args.closed_loop else "false",
        }
    )
    run = BenchmarkRun(config=echo)
    failures = 0
    for index in range(episodes):
        seed = base + index
        try:
            episode = gen_episode(
                args.family,
                args.split,
                seed,
                geom=cfg.geometry(),
                distractors=(cfg["bench.distractors_min"], cfg["bench.distractors_max"]),
                clearance=cfg["bench.clearance"],
            )
            result = run_episode(
                episode,
                library,
                closed_loop=args.closed_loop,
                exec_cfg=replace(exec_cfg, seed=exec_cfg.seed + index),
                plan_cfg=cfg.infer_sampler(),
                plan_seed=base,
                geom=cfg.geometry(),
            )
        except ScenergyError as err:
            failures += 1
            print(f"episode {seed} failed: {err}", file=sys.stderr)
            result = EpisodeResult(
                family=args.family, split=args.split, seed=seed,
                tp=0.0, tc=0, actions=0,
                predicted_success=False if args.closed_loop else None,
                oracle_success=False,
            )
        run.results.append(result)
    csv_text = results_to_csv(run)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    else:
        print(csv_text, end="")
    print(
        f"{args.family} {args.split}: episodes={episodes} "
        f"mean_tp={run.mean_tp():.3f} mean_tc={run.mean_tc():.3f} "
        f"failures={failures}",
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenergy",
        description="Energy-based scene rearrangement: train concepts, plan "
        "layouts from instructions, benchmark the pipeline, sweep landscapes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, default=None, help="override config seed")

    train = sub.add_parser("train", parents=[common], help="train one concept EBM")
    train.add_argument("concept", help="concept kind, e.g. leftof, circle")
    train.add_argument("--out", required=True, help="checkpoint output path")
    train.set_defaults(func=cmd_train)

    plan = sub.add_parser(
        "plan", parents=[common], help="instruction -> goal layout JSON"
    )
    plan.add_argument("--scene", required=True, help="scene JSON file")
    plan.add_argument("--instruction", required=True)
    plan.add_argument("--checkpoints", required=True, help="directory of .ckpt files")
    plan.add_argument("--out", help="layout JSON path (default: stdout)")
    plan.add_argument("--dump-program", help="write the parsed program s-expression")
    plan.add_argument("--render", help="write an SVG of the planned trajectories")
    plan.set_defaults(func=cmd_plan)

    bench = sub.add_parser(
        "bench", parents=[common], help="generate, plan, execute, and score episodes"
    )
    bench.add_argument("--family", required=True, choices=FAMILIES)
    bench.add_argument("--split", default="seen", choices=SPLITS)
    bench.add_argument("--episodes", type=int, default=None)
    bench.add_argument("--closed-loop", action="store_true")
    bench.add_argument("--checkpoints", required=True)
    bench.add_argument("--out", help="results CSV path (default: stdout)")
    bench.set_defaults(func=cmd_bench)

    landscape = sub.add_parser(
        "landscape", parents=[common], help="energy sweep heatmap for one entity"
    )
    landscape.add_argument("--scene", required=True)
    landscape.add_argument("--instruction", required=True)
    landscape.add_argument("--probe", required=True, help="entity id to sweep")
    landscape.add_argument("--checkpoints", required=True)
    landscape.add_argument("--out", required=True, help="PPM output path")
    landscape.add_argument("--resolution", type=int, default=None)
    landscape.set_defaults(func=cmd_landscape)
    return parser


_EXIT_CODES = (
    (InstructionParseError, 2),
    (GroundingError, 3),
    (CompileError, 4),
    (CheckpointError, 5),
    (TrainingAborted, 6),
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenergyError as err:
        for klass, code in _EXIT_CODES:
            if isinstance(err, klass):
                print(f"error: {err}", file=sys.stderr)
                return code
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
