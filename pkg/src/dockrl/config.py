"""Run configuration: JSON in, validated dataclasses out.

A config file has five sections — dynamics, env, reward, agent, harness —
every field of which maps onto one dataclass field.  Unknown keys are
rejected by name, and a fully resolved copy (defaults filled in) is written
next to every run's outputs for provenance.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .agents import AgentConfig
from .dynamics import HydroParams, Pose2D
from .env import DEFAULT_OBS_SCALING, DockingEnv, EnvConfig
from .reward import DockGeometry, RewardWeights, TerminalRewards


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class DynamicsSection:
    m: float = 60.0
    Iz: float = 8.0
    Xu_dot: float = -12.0
    Yv_dot: float = -36.0
    Nr_dot: float = -2.4
    Xu: float = 15.0
    Yv: float = 40.0
    Nr: float = 10.0
    Xuu: float = 10.0
    Yvv: float = 60.0
    Nrr: float = 15.0
    k_t: float = 40.0
    n_max: float = 1.0
    L1: float = 0.0
    L2: float = 0.5
    L3: float = -0.5
    tau_n: float = 0.3
    u_max: float = 2.0
    v_max: float = 1.0
    r_max: float = 1.0
    dt: float = 0.2


@dataclass
class EnvSection:
    workspace_half_extent: float = 9.0
    spawn_inner: float = 7.0
    spawn_outer: float = 9.0
    max_steps: int = 150
    obs_scaling: tuple = DEFAULT_OBS_SCALING


@dataclass
class RewardSection:
    function: str = "continuous"
    w_d_inside: float = 30.0
    w_d_outside: float = 5.0
    w_th: tuple = (2.0, 5.0, 5.0)
    w_psi: float = 1.3
    w_y: float = 1.2
    swap_distance_weights: bool = False
    triangle_half_angle: float = math.pi / 6
    triangle_length: float = 6.0
    goal_pos_tol: float = 0.5
    goal_yaw_tol: float = 0.3
    goal_x: float = 0.0
    goal_y: float = 0.0
    goal_psi: float = 0.0
    r_goal: float = 10000.0
    r_violation: float = -25000.0


@dataclass
class HarnessSection:
    total_timesteps: int = 100_000
    checkpoint_interval: int = 25_000
    eval_runs: int = 2
    eval_episodes: int = 5
    seed: int = 0
    smoothing_window: int = 20


_SECTION_TYPES = {
    "dynamics": DynamicsSection,
    "env": EnvSection,
    "reward": RewardSection,
    "agent": AgentConfig,
    "harness": HarnessSection,
}

# lr defaults follow the common framework defaults per algorithm
_DEFAULT_LR = {"td3": 1e-3, "sac": 3e-4, "ppo": 3e-4}


@dataclass
class RunConfig:
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    env: EnvSection = field(default_factory=EnvSection)
    reward: RewardSection = field(default_factory=RewardSection)
    agent: AgentConfig = field(default_factory=AgentConfig)
    harness: HarnessSection = field(default_factory=HarnessSection)

    # ---- construction -------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        cfg = cls()
        lr_given = False
        for section_name, section_data in data.items():
            if section_name not in _SECTION_TYPES:
                raise ConfigError(section_name, "unknown config section")
            if not isinstance(section_data, dict):
                raise ConfigError(section_name, "section must be a JSON object")
            section = getattr(cfg, section_name)
            valid = {f.name: f for f in fields(section)}
            for key, value in section_data.items():
                if key not in valid:
                    raise ConfigError(f"{section_name}.{key}", "unknown config key")
                if isinstance(value, list):
                    value = tuple(value)
                setattr(section, key, value)
                if section_name == "agent" and key == "lr":
                    lr_given = True
        if not lr_given:
            cfg.agent.lr = _DEFAULT_LR[cfg.agent.algo] if cfg.agent.algo in _DEFAULT_LR else cfg.agent.lr
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(str(path), "config file not found") from None
        except json.JSONDecodeError as e:
            raise ConfigError(str(path), f"invalid JSON ({e})") from None
        return cls.from_dict(data)

    def apply_override(self, spec: str) -> None:
        """Apply one dotted override, e.g. 'agent.gamma=0.95'."""
        if "=" not in spec:
            raise ConfigError(spec, "override must look like section.key=value")
        dotted, raw = spec.split("=", 1)
        parts = dotted.split(".")
        if len(parts) != 2 or parts[0] not in _SECTION_TYPES:
            raise ConfigError(dotted, "unknown config key")
        section = getattr(self, parts[0])
        if parts[1] not in {f.name for f in fields(section)}:
            raise ConfigError(dotted, "unknown config key")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if isinstance(value, list):
            value = tuple(value)
        setattr(section, parts[1], value)

    def to_dict(self) -> dict:
        out = {}
        for name in _SECTION_TYPES:
            section = dataclasses.asdict(getattr(self, name))
            out[name] = {
                k: (list(v) if isinstance(v, tuple) else v) for k, v in section.items()
            }
        return out

    # ---- validation and builders --------------------------------------

    def validate(self) -> None:
        try:
            self.agent.validate()
        except ValueError as e:
            # AgentConfig messages already carry the dotted key
            raise ConfigError(str(e).split(":")[0], str(e).split(":", 1)[1].strip()) from None
        for name, builder in (
            ("dynamics", self.hydro_params),
            ("env", self.env_config),
            ("reward", self._reward_objects),
        ):
            try:
                built = builder()
                for obj in built if isinstance(built, tuple) else (built,):
                    obj.validate()
            except ConfigError:
                raise
            except (TypeError, ValueError) as e:
                raise ConfigError(name, str(e)) from None
        h = self.harness
        if h.total_timesteps < 0:
            raise ConfigError("harness.total_timesteps", "must be >= 0")
        if h.checkpoint_interval < 1:
            raise ConfigError("harness.checkpoint_interval", "must be >= 1")
        if h.eval_runs < 1 or h.eval_episodes < 1:
            raise ConfigError("harness.eval_runs", "eval_runs and eval_episodes must be >= 1")

    def hydro_params(self) -> HydroParams:
        d = dataclasses.asdict(self.dynamics)
        d.pop("dt")
        return HydroParams(**d)

    def env_config(self) -> EnvConfig:
        e = self.env
        return EnvConfig(
            workspace_half_extent=e.workspace_half_extent,
            spawn_inner=e.spawn_inner,
            spawn_outer=e.spawn_outer,
            max_steps=e.max_steps,
            obs_scaling=tuple(e.obs_scaling),
            dt=self.dynamics.dt,
        )

    def _reward_objects(self):
        r = self.reward
        weights = RewardWeights(
            w_d_inside=r.w_d_inside,
            w_d_outside=r.w_d_outside,
            w_th=tuple(r.w_th),
            w_psi=r.w_psi,
            w_y=r.w_y,
            swap_distance_weights=r.swap_distance_weights,
        )
        geom = DockGeometry(
            goal=Pose2D(r.goal_x, r.goal_y, r.goal_psi),
            triangle_half_angle=r.triangle_half_angle,
            triangle_length=r.triangle_length,
            goal_pos_tol=r.goal_pos_tol,
            goal_yaw_tol=r.goal_yaw_tol,
        )
        terminal = TerminalRewards(r_goal=r.r_goal, r_violation=r.r_violation)
        return weights, geom, terminal

    def build_env(self, rng: np.random.Generator) -> DockingEnv:
        weights, geom, terminal = self._reward_objects()
        return DockingEnv(
            env_cfg=self.env_config(),
            hydro=self.hydro_params(),
            geom=geom,
            weights=weights,
            terminal_rewards=terminal,
            reward_function=self.reward.function,
            rng=rng,
        )
