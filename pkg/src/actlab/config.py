"""Flat key=value run configuration with typed parsing and a typo guard.

Key names mirror the experimental-setup table (s0, s1, mu0, w, w_mid,
I_gp, w_gp, tau, mu_p, p_r, learning_rate, batch_size,
training_iterations) plus dataset/backbone/variant keys.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .schedules import ScheduleConfig

__all__ = ["RunConfig", "ConfigError", "parse_config", "serialize_config"]


class ConfigError(ValueError):
    """Invalid or unknown configuration key/value."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key {key!r}: {message}")


@dataclass
class RunConfig:
    # schedule (experimental-setup table names)
    epsilon: float = 0.002
    T: float = 80.0
    s0: int = 2
    s1: int = 150
    mu0: float = 0.9
    w: float = 0.3
    w_mid: float = 0.3
    rho: float = 7.0
    # optimization
    learning_rate: float = 1e-4
    learning_rate_d: float = -1.0  # < 0 means same as learning_rate
    batch_size: int = 80
    training_iterations: int = 300_000
    I_gp: int = 16
    w_gp: float = 10.0
    # augmentation controller
    tau: float = 0.55
    mu_p: float = 0.93
    p_r: float = 0.05
    aug: bool = False
    # adversarial weighting: "schedule" uses lambda_N(n), "constant" a fixed value
    lambda_mode: str = "schedule"
    lambda_const: float = 0.3
    # model
    backbone: str = "mlp"
    widths: tuple = (64, 64, 64)
    d_widths: tuple = (64, 64, 64)
    activation: str = "silu"
    d_activation: str = "silu"
    d_time_emb: bool = True
    d_residual_downsampling: bool = False
    discriminator_variant: str = "time_cond"
    distance: str = "squared_l2"
    # data
    dataset: str = "gauss8"
    dataset_size: int = 4096
    dataset_path: str = ""
    # run
    seed: int = 0
    output_dir: str = "runs/default"
    checkpoint_every: int = 0  # 0 = only at the end

    def schedule_config(self) -> ScheduleConfig:
        return ScheduleConfig(
            epsilon=self.epsilon, T=self.T, s0=self.s0, s1=self.s1,
            K=self.training_iterations, mu0=self.mu0, w=self.w,
            w_mid=self.w_mid, rho=self.rho,
        )

    @property
    def lr_d(self) -> float:
        return self.learning_rate if self.learning_rate_d < 0 else self.learning_rate_d


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _parse_value(key: str, raw: str, target_type):
    raw = raw.strip()
    try:
        if target_type is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if target_type is tuple:
            return tuple(int(v) for v in raw.replace("(", "").replace(")", "").split(",") if v.strip())
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(key, str(e)) from e


def parse_config(text: str) -> RunConfig:
    """Parse key=value lines; '#' starts a comment; unknown keys rejected."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {lineno} is not key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(key, "unknown key")
        default = _FIELDS[key].default
        target_type = type(default) if default is not None else str
        if key in ("widths", "d_widths"):
            target_type = tuple
        values[key] = _parse_value(key, raw, target_type)
    return RunConfig(**values)


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())
