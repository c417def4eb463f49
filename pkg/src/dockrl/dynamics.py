"""Planar (surge, sway, yaw) rigid-body model of a torpedo-class AUV.

The vehicle carries one surge thruster on the centerline and two lateral
thrusters at opposite moment arms, so equal lateral commands produce pure
sway and opposing commands produce pure yaw.  All functions here are pure:
they take value objects and return new ones, which is what makes trajectory
replay bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


class SimulationDiverged(RuntimeError):
    """Raised when the integrator produces a non-finite state."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    if not math.isfinite(a):
        raise ValueError(f"wrap_angle: non-finite angle {a!r}")
    return (a + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class Pose2D:
    """NED-frame planar pose: north x [m], east y [m], yaw psi [rad]."""

    x: float
    y: float
    psi: float


@dataclass(frozen=True)
class BodyVelocity:
    """Body-frame velocities: surge u [m/s], sway v [m/s], yaw rate r [rad/s]."""

    u: float
    v: float
    r: float


@dataclass(frozen=True)
class ThrusterState:
    """Normalized thruster speeds in [-1, 1]; 1.0 equals n_max rad/s."""

    n1: float
    n2: float
    n3: float

    def clamped(self) -> "ThrusterState":
        return ThrusterState(
            min(1.0, max(-1.0, self.n1)),
            min(1.0, max(-1.0, self.n2)),
            min(1.0, max(-1.0, self.n3)),
        )


@dataclass(frozen=True)
class HydroParams:
    """Mass, added mass (SNAME negative convention), damping and actuation.

    The exact coefficients of the target vehicle are not public; these
    defaults describe a plausible ~60 kg torpedo-class AUV with a maximum
    surge thrust of 40 N (terminal surge speed ~1.4 m/s).  Everything is
    overridable from the run config.
    """

    m: float = 60.0
    Iz: float = 8.0
    Xu_dot: float = -12.0   # 20% of m
    Yv_dot: float = -36.0   # 60% of m
    Nr_dot: float = -2.4    # 30% of Iz
    Xu: float = 15.0
    Yv: float = 40.0
    Nr: float = 10.0
    Xuu: float = 10.0
    Yvv: float = 60.0
    Nrr: float = 15.0
    k_t: float = 40.0       # N per unit n*|n| at n_max
    n_max: float = 1.0
    L1: float = 0.0         # surge thruster is on the centerline
    L2: float = 0.5
    L3: float = -0.5
    tau_n: float = 0.3
    u_max: float = 2.0
    v_max: float = 1.0
    r_max: float = 1.0

    def validate(self) -> None:
        if self.m <= 0 or self.Iz <= 0:
            raise ValueError("HydroParams: m and Iz must be positive")
        if self.tau_n <= 0:
            raise ValueError("HydroParams: tau_n must be positive")
        for name in ("Xu", "Yv", "Nr", "Xuu", "Yvv", "Nrr"):
            if getattr(self, name) < 0:
                raise ValueError(f"HydroParams: damping coefficient {name} must be >= 0")


def allocate(thr: ThrusterState, params: HydroParams) -> tuple[float, float, float]:
    """Map thruster speeds to the body wrench (X [N], Y [N], N [N*m]).

    Quadratic propeller law F = k_t * n * |n| * n_max^2, sign-correct in
    reverse.  With L3 = -L2, same-sign lateral commands give pure sway and
    opposite-sign commands give pure yaw.
    """
    scale = params.k_t * params.n_max**2
    s1 = thr.n1 * abs(thr.n1)
    s2 = thr.n2 * abs(thr.n2)
    s3 = thr.n3 * abs(thr.n3)
    X = scale * s1
    Y = scale * (s2 + s3)
    N = scale * (params.L2 * s2 + params.L3 * s3)
    return X, Y, N


def step_dynamics(
    pose: Pose2D,
    vel: BodyVelocity,
    thr: ThrusterState,
    cmd: ThrusterState,
    params: HydroParams,
    dt: float,
) -> tuple[Pose2D, BodyVelocity, ThrusterState]:
    """Advance the vehicle one step of size dt with semi-implicit Euler.

    Order of operations: first-order thruster lag toward cmd, rigid-body
    velocity update (added mass + Coriolis + linear/quadratic damping),
    then pose integration with the *new* body velocity.
    """
    if dt <= 0:
        raise ValueError("step_dynamics: dt must be positive")

    g = dt / params.tau_n
    thr_new = ThrusterState(
        thr.n1 + g * (cmd.n1 - thr.n1),
        thr.n2 + g * (cmd.n2 - thr.n2),
        thr.n3 + g * (cmd.n3 - thr.n3),
    ).clamped()

    X, Y, N = allocate(thr_new, params)

    m11 = params.m - params.Xu_dot
    m22 = params.m - params.Yv_dot
    m33 = params.Iz - params.Nr_dot

    u, v, r = vel.u, vel.v, vel.r

    # Coriolis/centripetal from rigid-body + added mass
    Xc = -m22 * v * r
    Yc = m11 * u * r
    Nc = (m22 - m11) * u * v

    Xd = (params.Xu + params.Xuu * abs(u)) * u
    Yd = (params.Yv + params.Yvv * abs(v)) * v
    Nd = (params.Nr + params.Nrr * abs(r)) * r

    u_new = u + dt * (X - Xc - Xd) / m11
    v_new = v + dt * (Y - Yc - Yd) / m22
    r_new = r + dt * (N - Nc - Nd) / m33

    u_new = min(params.u_max, max(-params.u_max, u_new))
    v_new = min(params.v_max, max(-params.v_max, v_new))
    r_new = min(params.r_max, max(-params.r_max, r_new))

    cpsi = math.cos(pose.psi)
    spsi = math.sin(pose.psi)
    x_new = pose.x + dt * (u_new * cpsi - v_new * spsi)
    y_new = pose.y + dt * (u_new * spsi + v_new * cpsi)
    psi_new = wrap_angle(pose.psi + dt * r_new)

    pose_new = Pose2D(x_new, y_new, psi_new)
    vel_new = BodyVelocity(u_new, v_new, r_new)

    if not all(
        math.isfinite(val)
        for val in (x_new, y_new, psi_new, u_new, v_new, r_new)
    ):
        raise SimulationDiverged(
            "step_dynamics produced a non-finite state", state=(pose_new, vel_new, thr_new)
        )
    return pose_new, vel_new, thr_new
