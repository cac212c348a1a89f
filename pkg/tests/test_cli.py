"""Command-line surface: subcommands, artifact contents, exit-code taxonomy.

Concept checkpoints for plan/bench/landscape tests use small random weights:
the commands only need loadable parameters of the right shapes, not trained
ones. Training runs use a tiny config so the test stays fast.
"""

import json

import numpy as np
import pytest

from scenergy import cli
from scenergy.checkpoint import load_checkpoint, save_checkpoint
from scenergy.ebm import ConceptKind, EBMParams, param_shapes
from scenergy.errors import CompileError, PlanningError, TrainingAborted
from scenergy.parser import parse, program_to_sexpr
from scenergy.scene import Entity, Scene, save_scene

DIRECTIONALS = (
    ConceptKind.LEFT_OF,
    ConceptKind.RIGHT_OF,
    ConceptKind.BEHIND,
    ConceptKind.IN_FRONT_OF,
)

INSTRUCTION = "put the red cube to the left of the blue bowl"

TRAIN_CONFIG = """
# tiny run so the test finishes quickly
train.steps = 3
train.dataset_size = 16
train.batch = 8
sampler.train_steps = 5
"""


def entity(eid, name, color, center, size=(0.08, 0.08)):
    return Entity(id=eid, name=name, color=color, center=center, size=size)


def small_params(kind, seed=0):
    rng = np.random.default_rng(seed)
    weights = {
        name: rng.normal(0.0, 0.05, shape) for name, shape in param_shapes(kind)
    }
    return EBMParams(kind=kind, weights=weights)


@pytest.fixture(scope="module")
def ckpt_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("ckpts")
    kinds = DIRECTIONALS + (ConceptKind.CIRCLE, ConceptKind.LINE, ConceptKind.INSIDE)
    for i, kind in enumerate(kinds):
        save_checkpoint(small_params(kind, seed=i), d / f"{kind.value}.ckpt")
    return d


@pytest.fixture
def scene_path(tmp_path):
    scene = Scene(
        entities=(
            entity("a", "cube", "red", (0.62, 0.5)),
            entity("b", "bowl", "blue", (0.35, 0.5), size=(0.16, 0.16)),
        )
    )
    path = tmp_path / "scene.json"
    path.write_bytes(save_scene(scene))
    return path


class TestTrain:
    def test_writes_checkpoint_and_report(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(TRAIN_CONFIG)
        out = tmp_path / "leftof.ckpt"
        code = cli.main(
            ["train", "leftof", "--config", str(cfg), "--out", str(out)]
        )
        assert code == 0
        params = load_checkpoint(out)
        assert params.kind is ConceptKind.LEFT_OF

        lines = (tmp_path / "leftof.report.jsonl").read_text().splitlines()
        echo = json.loads(lines[0])["config"]
        assert echo["train.steps"] == "3"
        head = json.loads(lines[1])
        assert head["kind"] == "leftof"
        rows = [json.loads(line) for line in lines[2:]]
        assert len(rows) == 3
        assert all(np.isfinite(row["cd"]) for row in rows)

    def test_unknown_concept(self, tmp_path, capsys):
        code = cli.main(["train", "wiggle", "--out", str(tmp_path / "w.ckpt")])
        assert code == 1
        assert "wiggle" in capsys.readouterr().err

    def test_abort_maps_to_exit_6(self, tmp_path, monkeypatch, capsys):
        def boom(kind, dataset, cfg):
            raise TrainingAborted("energy diverged at step 1", [{"cd": 1.0}])

        monkeypatch.setattr(cli, "train_concept", boom)
        cfg = tmp_path / "run.cfg"
        cfg.write_text(TRAIN_CONFIG)
        out = tmp_path / "leftof.ckpt"
        code = cli.main(
            ["train", "leftof", "--config", str(cfg), "--out", str(out)]
        )
        assert code == 6
        assert not out.exists()
        report = (tmp_path / "leftof.report.jsonl").read_text()
        assert "aborted" in report and "diverged" in report
        assert "diverged" in capsys.readouterr().err


class TestPlan:
    def test_layout_json_with_config_echo(self, tmp_path, scene_path, ckpt_dir):
        out = tmp_path / "layout.json"
        code = cli.main(
            [
                "plan",
                "--scene", str(scene_path),
                "--instruction", INSTRUCTION,
                "--checkpoints", str(ckpt_dir),
                "--out", str(out),
                "--seed", "5",
            ]
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert {e["id"] for e in doc["entities"]} == {"a", "b"}
        assert np.isfinite(doc["energy"])
        assert doc["config"]["seed"] == "5"
        moved = {e["id"]: e["moved"] for e in doc["entities"]}
        assert moved["b"] is False  # referent stays anchored

    def test_stdout_when_no_out(self, scene_path, ckpt_dir, capsys):
        code = cli.main(
            [
                "plan",
                "--scene", str(scene_path),
                "--instruction", INSTRUCTION,
                "--checkpoints", str(ckpt_dir),
            ]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert "entities" in doc and "config" in doc

    def test_dump_program_and_render(self, tmp_path, scene_path, ckpt_dir):
        prog = tmp_path / "program.sexpr"
        svg = tmp_path / "plan.svg"
        code = cli.main(
            [
                "plan",
                "--scene", str(scene_path),
                "--instruction", INSTRUCTION,
                "--checkpoints", str(ckpt_dir),
                "--out", str(tmp_path / "layout.json"),
                "--dump-program", str(prog),
                "--render", str(svg),
            ]
        )
        assert code == 0
        assert prog.read_text() == program_to_sexpr(parse(INSTRUCTION)) + "\n"
        data = svg.read_bytes()
        assert data.startswith(b"<?xml")
        assert b"<!-- seed = 0 -->" in data
        assert b"<polyline" in data  # the moved cube's trajectory

    def test_parse_error_exit_2(self, scene_path, ckpt_dir, capsys):
        code = cli.main(
            [
                "plan",
                "--scene", str(scene_path),
                "--instruction", "hello world",
                "--checkpoints", str(ckpt_dir),
            ]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_grounding_error_exit_3(self, scene_path, ckpt_dir):
        code = cli.main(
            [
                "plan",
                "--scene", str(scene_path),
                "--instruction", "put the green star to the left of the blue bowl",
                "--checkpoints", str(ckpt_dir),
            ]
        )
        assert code == 3

    def test_ambiguity_exit_3(self, tmp_path, ckpt_dir):
        scene = Scene(
            entities=(
                entity("a", "cube", "red", (0.2, 0.2)),
                entity("b", "cube", "red", (0.8, 0.2)),
                entity("c", "bowl", "blue", (0.5, 0.7), size=(0.16, 0.16)),
            )
        )
        path = tmp_path / "twins.json"
        path.write_bytes(save_scene(scene))
        code = cli.main(
            [
                "plan",
                "--scene", str(path),
                "--instruction", INSTRUCTION,
                "--checkpoints", str(ckpt_dir),
            ]
        )
        assert code == 3

    def test_compile_error_exit_4(self, scene_path, ckpt_dir, monkeypatch):
        def boom(program, groundings):
            raise CompileError("no goals")

        monkeypatch.setattr(cli, "compile_program", boom)
        code = cli.main(
            [
                "plan",
                "--scene", str(scene_path),
                "--instruction", INSTRUCTION,
                "--checkpoints", str(ckpt_dir),
            ]
        )
        assert code == 4

    def test_missing_checkpoint_exit_5(self, tmp_path, scene_path, capsys):
        empty = tmp_path / "none"
        empty.mkdir()
        code = cli.main(
            [
                "plan",
                "--scene", str(scene_path),
                "--instruction", INSTRUCTION,
                "--checkpoints", str(empty),
            ]
        )
        assert code == 5
        assert "leftof" in capsys.readouterr().err

    def test_missing_scene_exit_5(self, tmp_path, ckpt_dir):
        code = cli.main(
            [
                "plan",
                "--scene", str(tmp_path / "ghost.json"),
                "--instruction", INSTRUCTION,
                "--checkpoints", str(ckpt_dir),
            ]
        )
        assert code == 5


class TestLandscape:
    def test_ppm_with_config_comments(self, tmp_path, scene_path, ckpt_dir):
        out = tmp_path / "sweep.ppm"
        code = cli.main(
            [
                "landscape",
                "--scene", str(scene_path),
                "--instruction", INSTRUCTION,
                "--probe", "a",
                "--checkpoints", str(ckpt_dir),
                "--out", str(out),
                "--resolution", "8",
            ]
        )
        assert code == 0
        data = out.read_bytes()
        assert data.startswith(b"P6\n# ")
        assert b"# seed = 0\n" in data
        assert b"8 8\n255\n" in data
        pixels = data.split(b"255\n", 1)[1]
        assert len(pixels) == 8 * 8 * 3

    def test_resolution_defaults_from_config(self, tmp_path, scene_path, ckpt_dir):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("landscape.resolution = 4\n")
        out = tmp_path / "sweep.ppm"
        code = cli.main(
            [
                "landscape",
                "--scene", str(scene_path),
                "--instruction", INSTRUCTION,
                "--probe", "a",
                "--checkpoints", str(ckpt_dir),
                "--out", str(out),
                "--config", str(cfg),
            ]
        )
        assert code == 0
        assert b"4 4\n255\n" in out.read_bytes()

    def test_fixed_probe_fails(self, tmp_path, scene_path, ckpt_dir, capsys):
        code = cli.main(
            [
                "landscape",
                "--scene", str(scene_path),
                "--instruction", INSTRUCTION,
                "--probe", "b",
                "--checkpoints", str(ckpt_dir),
                "--out", str(tmp_path / "sweep.ppm"),
            ]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestBench:
    def test_closed_loop_csv(self, tmp_path, ckpt_dir):
        out = tmp_path / "results.csv"
        code = cli.main(
            [
                "bench",
                "--family", "spatial-relations",
                "--episodes", "2",
                "--seed", "9",
                "--closed-loop",
                "--checkpoints", str(ckpt_dir),
                "--out", str(out),
            ]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        echo = [line for line in lines if line.startswith("# ")]
        assert "# bench.family = spatial-relations" in echo
        assert "# bench.closed_loop = true" in echo
        assert "# seed = 9" in echo
        body = [line for line in lines if not line.startswith("# ")]
        assert body[0] == "task,split,seed,tp,tc,actions,predicted_success,oracle_success"
        rows = [line.split(",") for line in body[1:]]
        assert [int(row[2]) for row in rows] == [9, 10]
        assert all(row[6] in ("true", "false") for row in rows)

    def test_open_loop_blank_prediction(self, tmp_path, ckpt_dir, capsys):
        out = tmp_path / "results.csv"
        code = cli.main(
            [
                "bench",
                "--family", "spatial-relations",
                "--episodes", "1",
                "--checkpoints", str(ckpt_dir),
                "--out", str(out),
            ]
        )
        assert code == 0
        body = [
            line for line in out.read_text().splitlines() if not line.startswith("# ")
        ]
        assert body[1].split(",")[6] == ""
        summary = capsys.readouterr().err
        assert "mean_tc" in summary and "episodes=1" in summary

    def test_episode_failure_recorded_and_run_continues(
        self, tmp_path, ckpt_dir, monkeypatch, capsys
    ):
        def boom(*args, **kwargs):
            raise PlanningError("solver wedged")

        monkeypatch.setattr(cli, "run_episode", boom)
        out = tmp_path / "results.csv"
        code = cli.main(
            [
                "bench",
                "--family", "spatial-relations",
                "--episodes", "2",
                "--closed-loop",
                "--checkpoints", str(ckpt_dir),
                "--out", str(out),
            ]
        )
        assert code == 0
        body = [
            line for line in out.read_text().splitlines() if not line.startswith("# ")
        ]
        assert len(body) == 3
        assert all(row.split(",")[7] == "false" for row in body[1:])
        err = capsys.readouterr().err
        assert "solver wedged" in err and "failures=2" in err

    def test_missing_checkpoints_exit_5(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        code = cli.main(
            [
                "bench",
                "--family", "shapes",
                "--episodes", "1",
                "--checkpoints", str(empty),
                "--out", str(tmp_path / "r.csv"),
            ]
        )
        assert code == 5
