"""Run-configuration parsing, defaults, and typed views."""

import pytest

from scenergy.config import DEFAULTS, DEFAULT_CONFIG, RunConfig
from scenergy.errors import ConfigError
from scenergy.langevin import INFER_PRESET, TRAIN_PRESET
from scenergy.metrics import DEFAULT_GEOMETRY
from scenergy.scene import UNIT_WORKSPACE


class TestDefaults:
    def test_presets_match_library_defaults(self):
        cfg = DEFAULT_CONFIG
        assert cfg.train_sampler() == TRAIN_PRESET
        assert cfg.infer_sampler() == INFER_PRESET
        assert cfg.geometry() == DEFAULT_GEOMETRY
        exec_cfg = cfg.exec_config()
        assert exec_cfg.tau_iou == 0.5 and exec_cfg.retries == 2
        train = cfg.train_config()
        assert train.lr == 1e-4 and train.batch == 128 and train.steps == 3000
        assert cfg["planner.tau_move"] == 0.02
        assert cfg["train.dataset_size"] == 5000
        assert cfg["bench.episodes"] == 50

    def test_every_key_round_trips_through_text(self):
        cfg = RunConfig.parse(DEFAULT_CONFIG.to_text())
        assert {k: cfg[k] for k in cfg.keys()} == {
            k: DEFAULT_CONFIG[k] for k in DEFAULT_CONFIG.keys()
        }

    def test_echo_covers_every_key(self):
        echo = DEFAULT_CONFIG.echo()
        assert set(echo) == set(DEFAULTS)
        assert all(isinstance(v, str) for v in echo.values())


class TestParsing:
    def test_overrides_and_comments(self):
        cfg = RunConfig.parse(
            """
            # executor noise for closed-loop runs
            exec.sigma = 0.01
            exec.p_fail = 0.2   # trailing comment
            seed = 7
            train.steps = 200
            """
        )
        assert cfg["exec.sigma"] == 0.01
        assert cfg["exec.p_fail"] == 0.2
        assert cfg["seed"] == 7
        assert cfg.train_config().steps == 200
        assert cfg.exec_config().seed == 7
        # untouched keys keep their defaults
        assert cfg["train.batch"] == 128

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key 'exec.sgima'"):
            RunConfig.parse("exec.sgima = 0.01")

    def test_unknown_key_rejected_in_overrides(self):
        with pytest.raises(ConfigError, match="unknown"):
            RunConfig({"not.a.key": 1})

    def test_bad_int(self):
        with pytest.raises(ConfigError, match="integer"):
            RunConfig.parse("train.steps = 1.5")

    def test_bad_float(self):
        with pytest.raises(ConfigError, match="number"):
            RunConfig.parse("exec.sigma = lots")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            RunConfig.parse("exec.sigma 0.01")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            RunConfig.parse("seed = 1\nseed = 2")

    def test_int_accepted_for_float_key(self):
        cfg = RunConfig.parse("exec.sigma = 0")
        assert cfg["exec.sigma"] == 0.0

    def test_type_mismatch_in_overrides(self):
        with pytest.raises(ConfigError, match="expected int"):
            RunConfig({"train.steps": 1.5})

    def test_unknown_lookup_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            DEFAULT_CONFIG["nope"]

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 3\nexec.tau_iou = 0.4\n")
        cfg = RunConfig.from_file(path)
        assert cfg["seed"] == 3
        assert cfg.exec_config().tau_iou == 0.4

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            RunConfig.from_file(tmp_path / "none.cfg")


class TestTypedViews:
    def test_geometry_override_flows_through(self):
        cfg = RunConfig.parse("geometry.offset_min = 0.05\ngeometry.circle_radius_max = 0.2")
        geom = cfg.geometry()
        assert geom.offset_min == 0.05
        assert geom.circle_radius == (0.08, 0.2)

    def test_sampler_overrides(self):
        cfg = RunConfig.parse(
            "sampler.infer_steps = 120\nsampler.train_noise = 0.01\nseed = 4"
        )
        infer = cfg.infer_sampler()
        assert infer.steps == 120 and infer.seed == 4
        assert infer.clamp == UNIT_WORKSPACE
        assert cfg.infer_sampler(clamp=None).clamp is None
        assert cfg.train_sampler().noise == 0.01

    def test_train_config_override_hook(self):
        cfg = DEFAULT_CONFIG
        assert cfg.train_config(steps=42).steps == 42

    def test_invalid_values_surface_at_view_construction(self):
        cfg = RunConfig.parse("train.buffer_init_prob = 1.5")
        with pytest.raises(ValueError):
            cfg.train_config()
