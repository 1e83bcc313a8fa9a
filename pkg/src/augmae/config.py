"""Flat ``key = value`` run configuration shared by every command."""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError, ParseError
from .graph import SbmSpec
from .theory import CertificationConfig
from .training import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of a run. Unknown keys are rejected."""

    seed: int = 0
    # synthetic graph
    sizes: tuple[int, ...] = (50, 50)
    p_intra: float = 0.2
    p_inter: float = 0.02
    feature_dim: int = 16
    feature_noise: float = 0.1
    # model and optimization
    epochs: int = 200
    lr_model: float = 1e-3
    lr_generator: float = 1e-4
    gamma: float = 2.0
    lambda1: float = 1.0
    lambda2: float = 5e-4
    t_uniformity: float = 2.0
    uniformity_pair_cap: int = 4096
    tau: float = 1.0
    mask_ratio: float = 0.5
    alpha0: float = 0.0
    alphaT: float = 1.0
    eta: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float = 5.0
    d_hidden: int = 32
    d_out: int = 16
    enc_layers: int = 2
    dec_layers: int = 1
    gen_hidden: int = 16
    # evaluation
    train_fraction: float = 0.1
    probe_steps: int = 1000
    probe_lr: float = 0.1
    alignment_pair_cap: int = 10_000
    density_bins: int = 36
    kde_bandwidth: float = 0.2
    kde_points: int = 360
    # bound certification
    instances: int = 10_000
    restarts: int = 100
    adversarial_steps: int = 100
    tolerance: float = 1e-9
    trace_tolerance: float = 1e-12
    graph_instances: int = 3

    def __post_init__(self):
        self.sbm_spec()
        self.train_config()
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if min(self.probe_steps, self.alignment_pair_cap, self.density_bins, self.kde_points) < 1:
            raise ConfigError("evaluation counts must be positive")
        if self.kde_bandwidth <= 0 or self.probe_lr <= 0:
            raise ConfigError("kde_bandwidth and probe_lr must be positive")
        if min(self.instances, self.restarts, self.adversarial_steps, self.graph_instances) < 0:
            raise ConfigError("certification counts must be non-negative")

    def sbm_spec(self) -> SbmSpec:
        return SbmSpec(
            sizes=tuple(self.sizes),
            p_intra=self.p_intra,
            p_inter=self.p_inter,
            feature_dim=self.feature_dim,
            feature_noise=self.feature_noise,
            seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def certification(self, poison: bool = False) -> CertificationConfig:
        return CertificationConfig(
            instances=self.instances,
            restarts=self.restarts,
            adversarial_steps=self.adversarial_steps,
            seed=self.seed,
            tolerance=self.tolerance,
            trace_tolerance=self.trace_tolerance,
            poison=poison,
            graph_instances=self.graph_instances,
        )

    def replace(self, **overrides) -> "RunConfig":
        unknown = set(overrides) - set(field_types())
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **overrides)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                text = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}


def field_types() -> dict[str, type]:
    return typing.get_type_hints(RunConfig)


def parse_value(key: str, text: str):
    """Convert ``text`` to the declared type of ``key``."""
    types = field_types()
    if key not in types:
        raise ConfigError(f"unknown config key {key!r}")
    kind = types[key]
    text = text.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return lowered in ("true", "1")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if typing.get_origin(kind) is tuple:
            return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {text!r} as {getattr(kind, '__name__', kind)}") from exc
    return text


def parse_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(source, line_no, f"expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ParseError(source, line_no, f"duplicate key {key!r}")
        try:
            values[key] = parse_value(key, value)
        except ConfigError as exc:
            raise ParseError(source, line_no, str(exc)) from exc
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides``."""
    values = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_text(text, str(path)))
    values.update(overrides or {})
    return RunConfig().replace(**values)
