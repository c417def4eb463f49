"""Episodic docking environment with a 9-dimensional observation.

Observation order is [x, y, psi, u, v, r, n1, n2, n3]; each component is
divided by its configured scaling divisor before being returned.  Rewards
are always computed from the raw (unscaled) state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import reward as rw
from .dynamics import (
    BodyVelocity,
    HydroParams,
    Pose2D,
    ThrusterState,
    step_dynamics,
    wrap_angle,
)
from .reward import DockGeometry, RewardWeights, TerminalKind, TerminalRewards

OBS_DIM = 9
ACT_DIM = 3

DEFAULT_OBS_SCALING = (9.0, 9.0, math.pi, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class AuvState:
    pose: Pose2D
    vel: BodyVelocity
    thr: ThrusterState

    def observation(self) -> np.ndarray:
        """Raw 9-vector [x, y, psi, u, v, r, n1, n2, n3]."""
        p, v, t = self.pose, self.vel, self.thr
        return np.array(
            [p.x, p.y, p.psi, v.u, v.v, v.r, t.n1, t.n2, t.n3], dtype=np.float64
        )


@dataclass(frozen=True)
class EnvConfig:
    workspace_half_extent: float = 9.0
    spawn_inner: float = 7.0
    spawn_outer: float = 9.0
    max_steps: int = 150
    obs_scaling: tuple = DEFAULT_OBS_SCALING
    dt: float = 0.2

    def validate(self) -> None:
        if not 0.0 < self.spawn_inner < self.spawn_outer <= self.workspace_half_extent:
            raise ValueError(
                "EnvConfig: need 0 < spawn_inner < spawn_outer <= workspace_half_extent"
            )
        if self.max_steps < 1:
            raise ValueError("EnvConfig: max_steps must be >= 1")
        if len(self.obs_scaling) != OBS_DIM or any(s <= 0 for s in self.obs_scaling):
            raise ValueError("EnvConfig: obs_scaling needs 9 positive divisors")
        if self.dt <= 0:
            raise ValueError("EnvConfig: dt must be positive")


def sample_initial_state(rng: np.random.Generator, cfg: EnvConfig) -> AuvState:
    """Spawn at rest in the outer band of the workspace with random heading.

    |x| and |y| are drawn independently from [spawn_inner, spawn_outer]
    with independent random signs, so starts land near the workspace edge
    in any of the four quadrants, never near the dock.
    """
    mx = rng.uniform(cfg.spawn_inner, cfg.spawn_outer)
    my = rng.uniform(cfg.spawn_inner, cfg.spawn_outer)
    sx = 1.0 if rng.integers(0, 2) == 1 else -1.0
    sy = 1.0 if rng.integers(0, 2) == 1 else -1.0
    psi = rng.uniform(-math.pi, math.pi)
    return AuvState(
        pose=Pose2D(sx * mx, sy * my, wrap_angle(psi)),
        vel=BodyVelocity(0.0, 0.0, 0.0),
        thr=ThrusterState(0.0, 0.0, 0.0),
    )


def classify_terminal(
    state: AuvState, geom: DockGeometry, cfg: EnvConfig, step_index: int
) -> TerminalKind:
    """Violation beats Goal beats Timeout."""
    p = state.pose
    if abs(p.x) > cfg.workspace_half_extent or abs(p.y) > cfg.workspace_half_extent:
        return TerminalKind.VIOLATION
    pos_err = math.hypot(p.x - geom.goal.x, p.y - geom.goal.y)
    yaw_err = abs(wrap_angle(p.psi - geom.goal.psi))
    if pos_err <= geom.goal_pos_tol and yaw_err <= geom.goal_yaw_tol:
        return TerminalKind.GOAL
    if step_index >= cfg.max_steps:
        return TerminalKind.TIMEOUT
    return TerminalKind.NONE


class EpisodeOver(RuntimeError):
    pass


class DockingEnv:
    """step/reset environment gluing dynamics and reward together."""

    def __init__(
        self,
        env_cfg: EnvConfig = EnvConfig(),
        hydro: HydroParams = HydroParams(),
        geom: DockGeometry = DockGeometry(),
        weights: RewardWeights = RewardWeights(),
        terminal_rewards: TerminalRewards = TerminalRewards(),
        reward_function: str = "continuous",
        rng: np.random.Generator | None = None,
    ):
        env_cfg.validate()
        hydro.validate()
        geom.validate()
        weights.validate()
        terminal_rewards.validate()
        self.cfg = env_cfg
        self.hydro = hydro
        self.geom = geom
        self.weights = weights
        self.terminal_rewards = terminal_rewards
        self.reward_fn = rw.get_reward_function(reward_function)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self._scaling = np.asarray(env_cfg.obs_scaling, dtype=np.float64)
        self.state: AuvState | None = None
        self.step_count = 0
        self._done = True

    def _scaled_obs(self) -> np.ndarray:
        return self.state.observation() / self._scaling

    def reset(self) -> np.ndarray:
        self.state = sample_initial_state(self.rng, self.cfg)
        self.step_count = 0
        self._done = False
        return self._scaled_obs()

    def set_state(self, state: AuvState) -> np.ndarray:
        """Place the vehicle at an explicit state (testing and replay)."""
        self.state = state
        self.step_count = 0
        self._done = False
        return self._scaled_obs()

    def step(self, action) -> tuple[np.ndarray, float, TerminalKind, dict]:
        if self.state is None or self._done:
            raise EpisodeOver("step() called on a finished episode; call reset()")
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (ACT_DIM,):
            raise ValueError(f"action must have shape ({ACT_DIM},), got {action.shape}")
        if not np.all(np.isfinite(action)):
            raise ValueError("action contains non-finite values")
        cmd = ThrusterState(*np.clip(action, -1.0, 1.0))

        pose, vel, thr = step_dynamics(
            self.state.pose, self.state.vel, self.state.thr, cmd, self.hydro, self.cfg.dt
        )
        self.state = AuvState(pose, vel, thr)
        self.step_count += 1

        breakdown = self.reward_fn(pose, thr, self.geom, self.weights)
        outcome = classify_terminal(self.state, self.geom, self.cfg, self.step_count)
        reward = rw.final_reward(breakdown.total, outcome, self.terminal_rewards)
        if outcome is not TerminalKind.NONE:
            self._done = True

        info = {
            "state": self.state,
            "in_triangle": breakdown.inside,
            "reward_distance": breakdown.distance,
            "reward_thruster": breakdown.thruster,
            "reward_alignment": breakdown.alignment,
            "action_applied": (cmd.n1, cmd.n2, cmd.n3),
        }
        return self._scaled_obs(), reward, outcome, info
