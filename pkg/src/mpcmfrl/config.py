"""Experiment configuration and the flat key-value config file format.

Config files are plain text, one ``key = value`` per line, ``#`` comments.
Lists are comma separated. Keys mirror the attribute names below with dots
for grouping (``planner.horizon``, ``agent.kl_delta``, ``dynamics.hidden``).
Relative output directories are resolved under the ``MPCMFRL_OUTPUT_ROOT``
environment variable when it is set.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

from .errors import ConfigError
from .envs import make_env

METHODS = ("mpc-mfrl", "mf-s", "mf-d", "mpc-random", "mpc-cem")
STRATEGIES = ("policy", "uniform", "cem")
TERMINALS = ("value", "zero")

# methods that train policy/value; the rest aggregate data with the planner
POLICY_METHODS = ("mpc-mfrl", "mf-s", "mf-d")
MODEL_METHODS = ("mpc-mfrl", "mpc-random", "mpc-cem")


@dataclass
class ExperimentConfig:
    env: str = "pendulum"
    method: str = "mpc-mfrl"
    label: str = ""                 # display name; defaults to the method
    total_steps: int = 100_000
    eval_period: int = 2_000
    eval_episodes: int = 10
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    out_dir: str = "runs/default"

    planner_n: int = 200
    planner_horizon: int = 10
    planner_top_e: int = 10
    planner_gamma: float = 0.9
    planner_strategy: str = ""      # defaulted per method when empty
    planner_terminal: str = ""      # defaulted per method when empty
    planner_terminal_on_final_state: bool = False

    cem_population: int = 200
    cem_elite_frac: float = 0.1
    cem_iterations: int = 5
    cem_alpha: float = 0.25
    cem_init_std: float | None = None

    agent_gamma: float = 0.9
    agent_lam: float = 0.95
    agent_kl_delta: float = 0.01
    agent_cg_iters: int = 10
    agent_cg_damping: float = 0.1
    agent_value_epochs: int = 10
    agent_value_batch_size: int = 64
    agent_value_lr: float = 1e-3
    agent_episodes_per_iteration: int = 5

    dynamics_hidden: tuple[int, ...] = (64, 64)
    dynamics_epochs: int = 30
    dynamics_batch_size: int = 128
    dynamics_lr: float = 1e-3
    dynamics_max_steps_per_fit: int = 2_000
    dynamics_train_period: int = 0  # 0: follow eval_period
    dynamics_mode: str = "delta"

    policy_hidden: tuple[int, ...] = (32, 32)
    value_hidden: tuple[int, ...] = (32, 32)

    random_fraction: float = 0.2    # share of the budget collected uniformly first
    bootstrap_resamples: int = 1_000
    bootstrap_seed: int = 0
    disable_mfrl_updates: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.label:
            self.label = self.method
        if not self.planner_strategy:
            self.planner_strategy = {"mpc-mfrl": "policy", "mpc-random": "uniform",
                                     "mpc-cem": "cem"}.get(self.method, "policy")
        if not self.planner_terminal:
            self.planner_terminal = "value" if self.method == "mpc-mfrl" else "zero"
        if self.method in ("mpc-random", "mpc-cem") and "planner_top_e" not in self._explicit:
            self.planner_top_e = 1
        if self.planner_strategy not in STRATEGIES:
            raise ConfigError(f"unknown sampling strategy {self.planner_strategy!r}")
        if self.planner_terminal not in TERMINALS:
            raise ConfigError(f"unknown terminal mode {self.planner_terminal!r}")
        self.validate()

    def __new__(cls, *args, **kwargs):
        obj = super().__new__(cls)
        object.__setattr__(obj, "_explicit", frozenset(kwargs))
        return obj

    def validate(self) -> None:
        horizon = make_env(self.env).spec.horizon
        iteration_steps = self.agent_episodes_per_iteration * horizon
        if self.eval_period % horizon != 0:
            raise ConfigError(
                f"eval_period {self.eval_period} is not a whole number of "
                f"{self.env} episodes (length {horizon})")
        if self.eval_period % iteration_steps != 0:
            raise ConfigError(
                f"eval_period {self.eval_period} must be a multiple of the "
                f"iteration size {iteration_steps}")
        if self.total_steps % self.eval_period != 0:
            raise ConfigError("total_steps must be a multiple of eval_period")
        if not 1 <= self.planner_top_e <= self.planner_n:
            raise ConfigError("planner top-E must satisfy 1 <= E <= N")
        if not 0.0 <= self.random_fraction <= 1.0:
            raise ConfigError("random_fraction must be in [0, 1]")

    @property
    def iteration_steps(self) -> int:
        return self.agent_episodes_per_iteration * make_env(self.env).spec.horizon

    @property
    def model_train_period(self) -> int:
        return self.dynamics_train_period or self.eval_period

    def resolved_out_dir(self) -> str:
        root = os.environ.get("MPCMFRL_OUTPUT_ROOT", "")
        if root and not os.path.isabs(self.out_dir):
            return os.path.join(root, self.out_dir)
        return self.out_dir

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)


_KEY_MAP = {
    "env": "env", "method": "method", "label": "label",
    "total_steps": "total_steps", "eval_period": "eval_period",
    "eval_episodes": "eval_episodes", "seeds": "seeds", "out_dir": "out_dir",
    "planner.n": "planner_n", "planner.horizon": "planner_horizon",
    "planner.top_e": "planner_top_e", "planner.gamma": "planner_gamma",
    "planner.strategy": "planner_strategy", "planner.terminal": "planner_terminal",
    "planner.terminal_on_final_state": "planner_terminal_on_final_state",
    "cem.population": "cem_population", "cem.elite_frac": "cem_elite_frac",
    "cem.iterations": "cem_iterations", "cem.alpha": "cem_alpha",
    "cem.init_std": "cem_init_std",
    "agent.gamma": "agent_gamma", "agent.lam": "agent_lam",
    "agent.kl_delta": "agent_kl_delta", "agent.cg_iters": "agent_cg_iters",
    "agent.cg_damping": "agent_cg_damping", "agent.value_epochs": "agent_value_epochs",
    "agent.value_batch_size": "agent_value_batch_size", "agent.value_lr": "agent_value_lr",
    "agent.episodes_per_iteration": "agent_episodes_per_iteration",
    "dynamics.hidden": "dynamics_hidden", "dynamics.epochs": "dynamics_epochs",
    "dynamics.batch_size": "dynamics_batch_size", "dynamics.lr": "dynamics_lr",
    "dynamics.max_steps_per_fit": "dynamics_max_steps_per_fit",
    "dynamics.train_period": "dynamics_train_period", "dynamics.mode": "dynamics_mode",
    "policy.hidden": "policy_hidden", "value.hidden": "value_hidden",
    "random_fraction": "random_fraction",
    "bootstrap.resamples": "bootstrap_resamples", "bootstrap.seed": "bootstrap_seed",
    "disable_mfrl_updates": "disable_mfrl_updates",
}

_FIELD_KEY = {v: k for k, v in _KEY_MAP.items()}


def _parse_value(attr: str, raw: str):
    kind = {f.name: f.type for f in fields(ExperimentConfig)}[attr]
    raw = raw.strip()
    if attr in ("seeds", "dynamics_hidden", "policy_hidden", "value_hidden"):
        return tuple(int(v.strip()) for v in raw.split(",") if v.strip())
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean for {attr}, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if attr == "cem_init_std":
        return None if raw.lower() in ("none", "") else float(raw)
    return raw


def load_config(path: str, **overrides) -> ExperimentConfig:
    """Parse a flat key-value config file; unknown keys are errors."""
    values: dict = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in _KEY_MAP:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            attr = _KEY_MAP[key]
            values[attr] = _parse_value(attr, raw)
    values.update(overrides)
    return ExperimentConfig(**values)


def save_config(config: ExperimentConfig, path: str) -> None:
    with open(path, "w") as f:
        for fld in fields(ExperimentConfig):
            value = getattr(config, fld.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif value is None:
                value = "none"
            f.write(f"{_FIELD_KEY[fld.name]} = {value}\n")
