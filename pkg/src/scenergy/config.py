"""Flat key = value run configuration with typed, documented defaults.

Every tunable that the library exposes — geometric calibration, metric
thresholds, sampler presets, training hyperparameters, executor noise,
benchmark shape, seeds — has exactly one entry here. Config files are plain
text: one ``key = value`` per line, ``#`` starts a comment, unknown keys are
rejected. A config renders back to text (`to_text`) and into the key/value
echo that output artifacts embed for provenance.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError
from .executor import ExecConfig
from .langevin import SamplerConfig, UNIT_WORKSPACE
from .metrics import RelationGeometry
from .training import TrainConfig

#: every known key with its default; the default's type fixes the key's type
DEFAULTS: dict[str, object] = {
    "seed": 0,
    # geometric calibration shared by predicates and data generation
    "geometry.offset_min": 0.06,
    "geometry.offset_max": 0.25,
    "geometry.band": 0.08,
    "geometry.inside_margin": 0.01,
    "geometry.circle_radius_min": 0.08,
    "geometry.circle_radius_max": 0.16,
    "geometry.line_length_min": 0.2,
    "geometry.line_length_max": 0.5,
    "geometry.shape_jitter": 0.004,
    # scoring thresholds
    "metrics.reward_std_full": 0.03,
    "metrics.reward_std_zero": 0.06,
    "metrics.contact_tolerance": 0.005,
    # sampler presets
    "sampler.train_steps": 30,
    "sampler.train_rate": 1.0,
    "sampler.train_noise": 0.005,
    "sampler.train_decay_start": 30,
    "sampler.infer_steps": 50,
    "sampler.infer_rate": 1.0,
    "sampler.infer_noise": 0.005,
    "sampler.infer_decay_start": 30,
    # contrastive-divergence training
    "train.lr": 1e-4,
    "train.batch": 128,
    "train.steps": 3000,
    "train.buffer_init_prob": 0.7,
    "train.kl_weight": 1.0,
    "train.l2_weight": 1.0,
    "train.buffer_capacity": 100000,
    "train.dataset_size": 5000,
    # planning
    "planner.tau_move": 0.02,
    # pick-and-place executor
    "exec.sigma": 0.0,
    "exec.p_fail": 0.0,
    "exec.tau_iou": 0.5,
    "exec.retries": 2,
    # benchmark generation
    "bench.episodes": 50,
    "bench.distractors_min": 2,
    "bench.distractors_max": 5,
    "bench.clearance": 0.01,
    # landscape rendering
    "landscape.resolution": 64,
}


def _parse_value(key: str, raw: str, default: object):
    if isinstance(default, bool):  # unused today, but bool is an int subtype
        if raw not in ("true", "false"):
            raise ConfigError(f"{key}: expected true or false, got '{raw}'")
        return raw == "true"
    if isinstance(default, int):
        try:
            return int(raw, 0)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got '{raw}'")
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got '{raw}'")
    return raw


def _render_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


class RunConfig:
    """Immutable view over the defaults with per-run overrides."""

    def __init__(self, overrides: dict[str, object] | None = None):
        values = dict(DEFAULTS)
        for key, value in (overrides or {}).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key '{key}'")
            expected = type(DEFAULTS[key])
            if expected is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if not isinstance(value, expected) or isinstance(value, bool) != (expected is bool):
                raise ConfigError(
                    f"{key}: expected {expected.__name__}, got {type(value).__name__}"
                )
            values[key] = value
        self._values = values

    def __getitem__(self, key: str):
        try:
            return self._values[key]
        except KeyError:
            raise ConfigError(f"unknown config key '{key}'")

    def keys(self):
        return self._values.keys()

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        overrides: dict[str, object] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {lineno}: expected 'key = value', got '{line.strip()}'")
            key, raw = (part.strip() for part in stripped.split("=", 1))
            if key not in DEFAULTS:
                raise ConfigError(f"line {lineno}: unknown config key '{key}'")
            if key in overrides:
                raise ConfigError(f"line {lineno}: duplicate key '{key}'")
            overrides[key] = _parse_value(key, raw, DEFAULTS[key])
        return cls(overrides)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        return cls.parse(p.read_text(encoding="utf-8"))

    def to_text(self) -> str:
        return "\n".join(
            f"{key} = {_render_value(self._values[key])}" for key in sorted(self._values)
        ) + "\n"

    def echo(self) -> dict[str, str]:
        """Provenance block embedded into output artifacts."""
        return {key: _render_value(self._values[key]) for key in sorted(self._values)}

    # ------------------------------------------------------------------
    # typed views

    def geometry(self) -> RelationGeometry:
        v = self._values
        return RelationGeometry(
            offset_min=v["geometry.offset_min"],
            offset_max=v["geometry.offset_max"],
            band=v["geometry.band"],
            inside_margin=v["geometry.inside_margin"],
            circle_radius=(
                v["geometry.circle_radius_min"], v["geometry.circle_radius_max"]
            ),
            line_length=(
                v["geometry.line_length_min"], v["geometry.line_length_max"]
            ),
            shape_jitter=v["geometry.shape_jitter"],
        )

    def train_sampler(self) -> SamplerConfig:
        v = self._values
        return SamplerConfig(
            steps=v["sampler.train_steps"],
            rate=v["sampler.train_rate"],
            noise=v["sampler.train_noise"],
            decay_start=v["sampler.train_decay_start"],
            clamp=None,
            seed=v["seed"],
        )

    def infer_sampler(self, clamp=UNIT_WORKSPACE) -> SamplerConfig:
        v = self._values
        return SamplerConfig(
            steps=v["sampler.infer_steps"],
            rate=v["sampler.infer_rate"],
            noise=v["sampler.infer_noise"],
            decay_start=v["sampler.infer_decay_start"],
            clamp=clamp,
            seed=v["seed"],
        )

    def train_config(self, **overrides) -> TrainConfig:
        v = self._values
        fields = {
            "lr": v["train.lr"],
            "batch": v["train.batch"],
            "buffer_init_prob": v["train.buffer_init_prob"],
            "kl_weight": v["train.kl_weight"],
            "l2_weight": v["train.l2_weight"],
            "steps": v["train.steps"],
            "buffer_capacity": v["train.buffer_capacity"],
            "seed": v["seed"],
            "sampler": self.train_sampler(),
        }
        fields.update(overrides)
        return TrainConfig(**fields)

    def exec_config(self) -> ExecConfig:
        v = self._values
        return ExecConfig(
            sigma=v["exec.sigma"],
            p_fail=v["exec.p_fail"],
            tau_iou=v["exec.tau_iou"],
            retries=v["exec.retries"],
            seed=v["seed"],
        )


DEFAULT_CONFIG = RunConfig()
