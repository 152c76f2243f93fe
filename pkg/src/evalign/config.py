"""Flat key-value run configuration with a closed key registry.

Files are UTF-8 ``key = value`` lines with ``#`` comments and dotted
sections. Unknown keys are rejected; every run artifact embeds the resolved
configuration verbatim. The environment variable ``REALM_SEED`` overrides
the configured seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from evalign.distill.loss import LossWeights
from evalign.distill.synthetic import SceneSpec
from evalign.distill.train import TrainConfig
from evalign.errors import ConfigError
from evalign.heads.depth import DepthBins
from evalign.heads.train import HeadTrainConfig
from evalign.masking import DropoutSpec, MaskSchedule
from evalign.matching import CameraIntrinsics
from evalign.model.config import StudentConfig, paper_config, toy_config

SEED_ENV_VAR = "REALM_SEED"

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}

# key -> (type tag, default); geometry presets fill the model.* gaps
KEY_REGISTRY: dict[str, tuple[str, object]] = {
    "geometry": ("choice:toy,paper", "toy"),
    "seed": ("int", 0),
    "window.mode": ("str", "time:33"),
    "window.stride": ("int", 1),
    "model.d": ("int", None),
    "model.grid": ("int", None),
    "model.layers": ("int", None),
    "model.heads": ("int", None),
    "model.mlp_ratio": ("float", None),
    "model.lora_rank": ("int", None),
    "model.lora_alpha": ("float", None),
    "model.lora_dropout": ("float", None),
    "model.lora_targets": ("str", None),
    "model.embedder_base": ("int", None),
    "model.bins": ("int", None),
    "model.input_size": ("int", None),
    "model.patch": ("int", None),
    "model.d_proj": ("int", None),
    "mask.schedule": ("str", "10:2,15:4,20:6"),
    "mask.linear": ("str", ""),
    "dropout.rho": ("float", 0.30),
    "dropout.start_epoch": ("int", 8),
    "loss.mse": ("float", 0.1),
    "loss.cos": ("float", 0.3),
    "loss.l1": ("float", 0.6),
    "loss.include_cls": ("bool", True),
    "train.epochs": ("int", 30),
    "train.micro_batch": ("int", 128),
    "train.accumulation": ("int", 4),
    "train.lr": ("float", 1e-3),
    "train.lr_schedule": ("choice:constant,cosine", "constant"),
    "train.weight_decay": ("float", 0.01),
    "train.grad_clip": ("float", 1.0),
    "train.max_steps": ("int", 0),
    "data.samples": ("int", 32),
    "data.subframes": ("int", 12),
    "data.contrast": ("float", 0.15),
    "data.classes": ("int", 4),
    "data.shapes_min": ("int", 2),
    "data.shapes_max": ("int", 3),
    "data.size_min": ("float", 0.14),
    "data.size_max": ("float", 0.26),
    "data.speed_min": ("float", 8.0),
    "data.speed_max": ("float", 28.0),
    "head.epochs": ("int", 100),
    "head.batch": ("int", 0),
    "head.lr": ("float", 0.0),
    "head.max_steps": ("int", 0),
    "head.out_size": ("int", 0),
    "depth.bins": ("int", 256),
    "depth.min": ("float", 1.0),
    "depth.max": ("float", 81.0),
    "tile.size": ("int", 0),
    "infer.hold": ("bool", True),
    "match.min_sim": ("float", 0.0),
    "match.iters": ("int", 2000),
    "match.threshold_px": ("float", 1.0),
    "match.pairs": ("int", 20),
    "match.noise_px": ("float", 0.0),
    "match.rotation_min": ("float", 5.0),
    "match.rotation_max": ("float", 25.0),
    "match.points": ("int", 100),
    "intrinsics.fx": ("float", 320.0),
    "intrinsics.fy": ("float", 320.0),
    "intrinsics.cx": ("float", 224.0),
    "intrinsics.cy": ("float", 224.0),
    "bench.warmup": ("int", 5),
    "bench.iters": ("int", 50),
    "eval.cutoff": ("str", "10,20,30"),
}

_PRESET_MODEL_KEYS = (
    "d", "grid", "layers", "heads", "mlp_ratio", "lora_rank", "lora_alpha",
    "lora_dropout", "embedder_base", "bins", "input_size", "patch", "d_proj",
)


def _convert(key: str, raw: str):
    tag, default = KEY_REGISTRY[key]
    raw = raw.strip()
    if raw == "":
        return default
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "bool":
            low = raw.lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if tag.startswith("choice:"):
            choices = tag.split(":", 1)[1].split(",")
            if raw not in choices:
                raise ValueError(f"must be one of {choices}")
            return raw
        return raw
    except ValueError as err:
        raise ConfigError(f"config key {key}: {err}") from err


@dataclass
class RunConfig:
    """Resolved configuration: registry defaults overlaid with file values."""

    values: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values = {k: default for k, (_, default) in KEY_REGISTRY.items()}
        for lineno, line in enumerate(text.splitlines(), 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            if key not in KEY_REGISTRY:
                raise ConfigError(f"line {lineno}: unknown config key {key!r}")
            values[key] = _convert(key, raw)
        cfg = cls(values)
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            try:
                cfg.values["seed"] = int(env_seed)
            except ValueError as err:
                raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from err
        return cfg

    @classmethod
    def from_file(cls, path: str | Path | None) -> "RunConfig":
        text = Path(path).read_text(encoding="utf-8") if path else ""
        return cls.from_text(text)

    def __getitem__(self, key: str):
        return self.values[key]

    def resolved_text(self) -> str:
        lines = [f"{key} = {_fmt(self.values[key])}" for key in sorted(self.values)]
        return "\n".join(lines) + "\n"

    # --- section builders -------------------------------------------------

    def model_config(self) -> StudentConfig:
        preset = paper_config if self["geometry"] == "paper" else toy_config
        overrides = {}
        for name in _PRESET_MODEL_KEYS:
            value = self[f"model.{name}"]
            if value is not None:
                overrides[name] = value
        targets = self["model.lora_targets"]
        if targets is not None:
            overrides["lora_targets"] = tuple(
                t.strip() for t in targets.split(",") if t.strip()
            )
        return preset(**overrides)

    def window_spec(self):
        return parse_window_flag(self["window.mode"], self["window.stride"])

    def mask_schedule(self) -> MaskSchedule:
        linear = self["mask.linear"]
        if linear:
            params = dict(
                part.split(":", 1) for part in linear.split(",") if ":" in part
            )
            try:
                return MaskSchedule(
                    linear_alpha=float(params["alpha"]),
                    linear_sigma_max=int(params["sigma_max"]),
                )
            except KeyError as err:
                raise ConfigError(f"mask.linear needs alpha and sigma_max: {err}")
        steps = {}
        for part in self["mask.schedule"].split(","):
            part = part.strip()
            if not part:
                continue
            if ":" not in part:
                raise ConfigError(f"mask.schedule entry {part!r} is not epoch:radius")
            epoch, radius = part.split(":", 1)
            steps[int(epoch)] = int(radius)
        return MaskSchedule(steps=steps)

    def dropout_spec(self) -> DropoutSpec:
        return DropoutSpec(
            rho=self["dropout.rho"],
            start_epoch=self["dropout.start_epoch"],
            seed=self["seed"],
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(mse=self["loss.mse"], cos=self["loss.cos"], l1=self["loss.l1"])

    def train_config(self) -> TrainConfig:
        max_steps = self["train.max_steps"]
        return TrainConfig(
            epochs=self["train.epochs"],
            micro_batch=self["train.micro_batch"],
            accumulation=self["train.accumulation"],
            grad_clip_norm=self["train.grad_clip"],
            lr=self["train.lr"],
            lr_schedule=self["train.lr_schedule"],
            weight_decay=self["train.weight_decay"],
            seed=self["seed"],
            max_steps=max_steps if max_steps > 0 else None,
            include_cls=self["loss.include_cls"],
        )

    def scene_spec(self) -> SceneSpec:
        model = self.model_config()
        return SceneSpec(
            height=model.input_size,
            width=model.input_size,
            patch=model.patch,
            subframes=self["data.subframes"],
            contrast=self["data.contrast"],
            n_shapes=(self["data.shapes_min"], self["data.shapes_max"]),
            size_range=(self["data.size_min"], self["data.size_max"]),
            speed_range=(self["data.speed_min"], self["data.speed_max"]),
            classes=self["data.classes"],
        )

    def head_config(self, kind: str) -> HeadTrainConfig:
        return HeadTrainConfig(
            kind=kind,
            epochs=self["head.epochs"],
            batch=self["head.batch"] or None,
            lr=self["head.lr"] or None,
            seed=self["seed"],
            max_steps=self["head.max_steps"] or None,
            out_size=self["head.out_size"] or None,
            classes=self["data.classes"],
            depth_bins=self.depth_bins(),
        )

    def depth_bins(self) -> DepthBins:
        return DepthBins(
            count=self["depth.bins"], d_min=self["depth.min"], d_max=self["depth.max"]
        )

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(
            fx=self["intrinsics.fx"], fy=self["intrinsics.fy"],
            cx=self["intrinsics.cx"], cy=self["intrinsics.cy"],
        )

    def tile_size(self) -> int:
        return self["tile.size"] or self.model_config().input_size

    def cutoffs(self) -> list[float]:
        return [float(v) for v in str(self["eval.cutoff"]).split(",") if v.strip()]


def parse_window_flag(flag: str, stride: int = 1):
    """CLI window syntax: ``count:N`` (events) or ``time:MS`` (milliseconds)."""
    from evalign.events.windows import WindowSpec

    mode, _, value = flag.partition(":")
    if mode == "count":
        try:
            return WindowSpec(mode="count", n=int(value), stride=stride)
        except ValueError as err:
            raise ConfigError(f"bad count window {flag!r}: {err}") from err
    if mode == "time":
        try:
            return WindowSpec(mode="time", dt_us=int(float(value) * 1000), stride=stride)
        except ValueError as err:
            raise ConfigError(f"bad time window {flag!r}: {err}") from err
    raise ConfigError(f"window must be count:N or time:MS, got {flag!r}")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)
