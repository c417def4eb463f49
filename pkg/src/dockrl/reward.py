"""Shaped docking reward: distance, thruster utilization, and alignment.

The continuous reward is never positive; it shrinks in magnitude as the
vehicle approaches the dock and only the terminal goal bonus is positive.
Alignment (and the larger distance weight) activates only inside a
triangular approach region in front of the dock opening.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .dynamics import Pose2D, ThrusterState, wrap_angle


class TerminalKind(enum.Enum):
    NONE = "none"
    GOAL = "goal"
    VIOLATION = "violation"
    TIMEOUT = "timeout"

    @property
    def is_terminal(self) -> bool:
        """True for outcomes that end the episode in the environment sense.

        TIMEOUT is truncation: the episode stops but agents still bootstrap
        the value of the final state.
        """
        return self in (TerminalKind.GOAL, TerminalKind.VIOLATION)


@dataclass(frozen=True)
class RewardWeights:
    """Weights of the continuous reward components.

    Defaults: distance weight 30 inside the docking triangle / 5 outside,
    thruster weights (2, 5, 5), yaw weight 1.3, cross-track weight 1.2.
    ``swap_distance_weights`` exchanges the inside/outside distance weights
    (the published table and prose disagree on which side is larger).
    """

    w_d_inside: float = 30.0
    w_d_outside: float = 5.0
    w_th: tuple[float, float, float] = (2.0, 5.0, 5.0)
    w_psi: float = 1.3
    w_y: float = 1.2
    swap_distance_weights: bool = False

    def distance_weight(self, inside: bool) -> float:
        if self.swap_distance_weights:
            inside = not inside
        return self.w_d_inside if inside else self.w_d_outside

    def validate(self) -> None:
        vals = (self.w_d_inside, self.w_d_outside, self.w_psi, self.w_y, *self.w_th)
        if any(w < 0 for w in vals):
            raise ValueError("RewardWeights: all weights must be >= 0")


@dataclass(frozen=True)
class DockGeometry:
    """Dock pose plus the triangular approach region and goal tolerances.

    The triangle has its apex at the goal position and opens along the dock
    heading ``goal.psi`` (+x by default).
    """

    goal: Pose2D = Pose2D(0.0, 0.0, 0.0)
    triangle_half_angle: float = math.pi / 6
    triangle_length: float = 6.0
    goal_pos_tol: float = 0.5
    goal_yaw_tol: float = 0.3

    def validate(self) -> None:
        if not 0.0 < self.triangle_half_angle < math.pi / 2:
            raise ValueError("DockGeometry: triangle_half_angle must be in (0, pi/2)")
        if self.triangle_length <= 0:
            raise ValueError("DockGeometry: triangle_length must be positive")
        if self.goal_pos_tol <= 0 or self.goal_yaw_tol <= 0:
            raise ValueError("DockGeometry: goal tolerances must be positive")


@dataclass(frozen=True)
class TerminalRewards:
    r_goal: float = 10000.0
    r_violation: float = -25000.0

    def validate(self) -> None:
        if not self.r_goal > 0 > self.r_violation:
            raise ValueError("TerminalRewards: need r_goal > 0 > r_violation")


def in_docking_triangle(pose: Pose2D, geom: DockGeometry) -> bool:
    """Whether the position lies in the closed approach triangle."""
    dx = pose.x - geom.goal.x
    dy = pose.y - geom.goal.y
    c = math.cos(geom.goal.psi)
    s = math.sin(geom.goal.psi)
    # coordinates in the dock frame (axis along the opening direction)
    ax = c * dx + s * dy
    ay = -s * dx + c * dy
    if ax < 0.0 or ax > geom.triangle_length:
        return False
    return abs(ay) <= ax * math.tan(geom.triangle_half_angle)


def distance_reward(pose: Pose2D, geom: DockGeometry, w: RewardWeights, inside: bool) -> float:
    d = math.hypot(pose.x - geom.goal.x, pose.y - geom.goal.y)
    return -w.distance_weight(inside) * d


def thruster_reward(thr: ThrusterState, w: RewardWeights) -> float:
    return -(
        w.w_th[0] * abs(thr.n1) + w.w_th[1] * abs(thr.n2) + w.w_th[2] * abs(thr.n3)
    )


def alignment_reward(pose: Pose2D, geom: DockGeometry, w: RewardWeights, inside: bool) -> float:
    if not inside:
        return 0.0
    dpsi = wrap_angle(pose.psi - geom.goal.psi)
    return -w.w_psi * abs(dpsi) - w.w_y * abs(pose.y - geom.goal.y)


@dataclass(frozen=True)
class RewardBreakdown:
    distance: float
    thruster: float
    alignment: float
    inside: bool

    @property
    def total(self) -> float:
        return self.distance + self.thruster + self.alignment


def continuous_reward(
    pose: Pose2D, thr: ThrusterState, geom: DockGeometry, w: RewardWeights
) -> RewardBreakdown:
    """Sum of the three shaped components; one triangle test feeds both the
    distance-weight choice and the alignment branch."""
    inside = in_docking_triangle(pose, geom)
    return RewardBreakdown(
        distance=distance_reward(pose, geom, w, inside),
        thruster=thruster_reward(thr, w),
        alignment=alignment_reward(pose, geom, w, inside),
        inside=inside,
    )


def final_reward(cont: float, outcome: TerminalKind, tr: TerminalRewards) -> float:
    """Terminal bonus/penalty on top of the continuous reward.

    Goal adds the bonus to the continuous part, a workspace violation
    replaces it entirely, and non-terminal steps (including timeout
    truncation) pass the continuous reward through.
    """
    if outcome is TerminalKind.GOAL:
        return tr.r_goal + cont
    if outcome is TerminalKind.VIOLATION:
        return tr.r_violation
    return cont


# Seam for alternative shaped rewards (selected by config string). Only the
# default is shipped; externally defined baselines can register here.
REWARD_FUNCTIONS = {
    "continuous": continuous_reward,
}


def get_reward_function(name: str):
    try:
        return REWARD_FUNCTIONS[name]
    except KeyError:
        raise ValueError(
            f"unknown reward function {name!r}; known: {sorted(REWARD_FUNCTIONS)}"
        ) from None
