"""Run configuration: a flat ``key = value`` file (TOML-compatible subset),
environment overrides under ``GRAPH_UNLEARN_``, then command-line flags."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

ENV_PREFIX = "GRAPH_UNLEARN_"


class ConfigError(ValueError):
    """Invalid configuration value or file."""


@dataclass
class RunConfig:
    # data source: a dataset directory, or the synthetic spec below
    dataset: str = ""
    synthetic: bool = True
    synth_nodes: int = 300
    synth_classes: int = 3
    synth_intra: float = 0.05
    synth_inter: float = 0.005
    synth_dim: int = 16
    synth_separation: float = 1.0
    synth_noise: float = 0.5
    synth_train_fraction: float = 0.9
    # model and trainer
    model: str = "sgc"
    k: int = 2
    hidden: int = 16
    reg_lambda: float = 0.05
    train_tol: float = 1e-8
    train_max_iters: int = 2000
    # solver
    solver: str = "auto"
    solver_tol: float = 1e-8
    stoch_iters: int = 1000
    stoch_scale: float = 0.0  # 0 means auto
    stoch_damp: float = 0.01
    # assumption constants and certification targets
    lipschitz: float = 0.25
    strong_convexity: float = 0.05
    loss_bound: float = 3.0
    epsilon: float = 1.0
    delta: float = 0.01
    noise_sigma: float = -1.0  # < 0 means use the calibrated minimum
    # seeds (explicit; nothing is seeded from the clock)
    seed_train: int = 0
    seed_noise: int = 0
    seed_sample: int = 0
    # unlearning request: a JSON file, or a generator spec
    request_file: str = ""
    request_kind: str = "node"  # node | edge | attr_full | attr_partial
    request_ratio: float = 0.05
    attr_dims_ratio: float = 0.5
    # sweep and output controls
    ratios: str = ""
    out_dir: str = "runs"
    checkpoint: str = ""
    with_oracle: bool = True
    timing_reps: int = 5
    retrain_epochs: int = 300

    def validate(self) -> list[str]:
        problems = []
        if not self.synthetic:
            if not self.dataset:
                problems.append("dataset path required when synthetic = false")
            elif not Path(self.dataset).is_dir():
                problems.append(f"dataset directory not found: {self.dataset}")
        if self.request_file and not Path(self.request_file).is_file():
            problems.append(f"request file not found: {self.request_file}")
        if self.model not in ("sgc", "gcn2"):
            problems.append(f"unknown model kind {self.model!r}")
        if self.k < 1:
            problems.append("k must be >= 1")
        if not 0.0 < self.request_ratio <= 1.0:
            problems.append("request_ratio must lie in (0, 1]")
        if not 0.0 < self.attr_dims_ratio <= 1.0:
            problems.append("attr_dims_ratio must lie in (0, 1]")
        if self.request_kind not in ("node", "edge", "attr_full", "attr_partial"):
            problems.append(f"unknown request kind {self.request_kind!r}")
        for r in self.ratio_list():
            if not 0.0 < r <= 1.0:
                problems.append(f"ratio {r} must lie in (0, 1]")
        if self.epsilon <= 0:
            problems.append("epsilon must be positive")
        if not 0 < self.delta < 1:
            problems.append("delta must lie in (0, 1)")
        return problems

    def ratio_list(self) -> list[float]:
        if not self.ratios:
            return []
        try:
            return [float(tok) for tok in self.ratios.split(",") if tok.strip()]
        except ValueError:
            raise ConfigError(f"cannot parse ratios {self.ratios!r}") from None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    ftype = _FIELD_TYPES.get(key)
    if ftype is None:
        raise ConfigError(f"unknown configuration key {key!r}")
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        raw = raw[1:-1]
    if ftype == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if ftype == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if ftype == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return raw


def load_config(path=None, env=None, overrides=None) -> RunConfig:
    """Build a RunConfig from file, environment, and explicit overrides,
    in that order of increasing precedence."""
    cfg = RunConfig()
    if path:
        for lineno, line in enumerate(
                Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in stripped.split("=", 1))
            setattr(cfg, key, _parse_value(key, raw))
    env = os.environ if env is None else env
    for key in _FIELD_TYPES:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            setattr(cfg, key, _parse_value(key, env[env_key]))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown configuration key {key!r}")
        setattr(cfg, key, value)
    return cfg
