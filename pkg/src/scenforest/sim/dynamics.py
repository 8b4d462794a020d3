"""Longitudinal control laws and the kinematic one-track vehicle model.

Acceleration profiles follow the Gompertz sigmoid a_m * exp(-b * exp(-c*u)):
near-zero response at u = 0 (mass inertia), a roughly linear mid section,
and saturation at the ability limit a_m. Followers respond to the gap ahead
and superimpose a constant-deceleration braking term sized to null the
closing speed before the gap collapses. Lane leaders regulate toward their
target speed unless the gap to the traffic ahead exceeds d_il_max, in which
case they close up to keep the scene dense.
"""

from __future__ import annotations

import math

from .config import (
    GRAVITY,
    MAX_STEER,
    WHEELBASE,
    BehaviorProfile,
    RoadConfig,
    VehicleState,
)

__all__ = [
    "gompertz_follower_accel",
    "gompertz_leader_accel",
    "braking_decel",
    "regulate_speed",
    "follower_accel",
    "lateral_control",
    "one_track_step",
    "lateral_accel",
]

BRAKE_MIN_GAP = 2.0   # m, distance "close to zero" where full braking must hold
BRAKE_EPS = 0.1       # m, guards the stopping-distance denominator
BRAKE_ENGAGE = 1.5    # m/s^2, required deceleration above which the drive command drops
BRAKE_NEAR = 4.0      # m, range over which speed matching ramps in above the minimum gap
BRAKE_MATCH = 4.0     # 1/s, near-range speed-matching gain
AY_LIMIT = 0.4 * GRAVITY       # one-track validity bound
AY_CTRL_LIMIT = 0.35 * GRAVITY  # steering commands keep a margin below it


def _gompertz(u: float, profile: BehaviorProfile) -> float:
    return profile.a_m * math.exp(-profile.b * math.exp(-profile.c * u))


def gompertz_follower_accel(d_fl: float, profile: BehaviorProfile) -> float:
    """Commanded free-flow component for a follower at gap d_fl (>= 0)."""
    return _gompertz(d_fl, profile)


def gompertz_leader_accel(v_l: float, d_il: float, profile: BehaviorProfile, road: RoadConfig) -> float:
    """Leader acceleration: gap argument when d_il exceeds d_il_max
    (strictly), velocity argument otherwise. Both branches share the
    Gompertz form, so equal arguments give equal outputs."""
    if d_il > road.d_il_max:
        return _gompertz(d_il, profile)
    return _gompertz(v_l, profile)


def braking_decel(d_fl: float, v_f: float, v_l: float, profile: BehaviorProfile) -> float:
    """Constant-deceleration braking term (<= 0) for a closing follower.

    Sized so the closing speed is eliminated within the remaining gap;
    saturates at the full deceleration ability when the gap is near zero.
    The quadratic sizing alone decays the closing speed only hyperbolically
    once the denominator saturates (log-unbounded creep through the minimum
    gap), so a speed-matching term ramps in over the last stretch and kills
    residual closing exponentially.
    """
    closing = max(v_f - v_l, 0.0)
    needed = closing * closing / (2.0 * max(d_fl - BRAKE_MIN_GAP, BRAKE_EPS))
    ramp = min(max(1.0 - (d_fl - BRAKE_MIN_GAP) / BRAKE_NEAR, 0.0), 1.0)
    needed += BRAKE_MATCH * closing * ramp
    return -min(profile.a_dec_max, needed)


def regulate_speed(v: float, v_target: float, profile: BehaviorProfile, road: RoadConfig) -> float:
    """Signed Gompertz regulation toward the target speed."""
    dv = v_target - v
    mag = gompertz_leader_accel(abs(dv), 0.0, profile, road)
    return math.copysign(mag, dv) if dv != 0.0 else 0.0


def follower_accel(d_fl: float, v_f: float, v_l: float, profile: BehaviorProfile, road: RoadConfig) -> float:
    """Full follower command: gap response capped by speed regulation, plus
    braking, saturated to [-a_dec_max, a_m].

    The drive part drops to at most zero once the required deceleration
    passes the engage level; otherwise the positive Gompertz term would eat
    into the braking budget and the stopping-distance sizing could never
    hold. Gentle approaches keep a positive net command on purpose: gaps
    are allowed to shrink below a comfortable headway.
    """
    a_gap = gompertz_follower_accel(max(d_fl, 0.0), profile)
    a_reg = regulate_speed(v_f, profile.v_target, profile, road)
    drive = min(a_gap, a_reg)
    brake = braking_decel(d_fl, v_f, v_l, profile)
    if -brake >= BRAKE_ENGAGE:
        drive = min(drive, 0.0)
    return min(max(drive + brake, -profile.a_dec_max), profile.a_m)


def lateral_control(state: VehicleState, target_lane_center: float, v: float) -> float:
    """P-control on predicted distance and orientation errors.

    The pose is previewed over a speed-dependent look-ahead horizon at the
    current speed and heading, steering assumed back to neutral (carrying
    the held steering angle through the whole preview couples the command
    to itself with loop gain ~ v*T/L >> 1 and chatters at the clamp). The
    command is k_d(v) * e_d + k_psi * e_psi, errors measured desired minus
    predicted; the heading-rate preview term makes the closed loop
    overdamped across the simulated speed range. Positive steering turns
    left (+y), so a vehicle left of its target gets a negative command.
    Commands are clamped so the implied lateral acceleration stays inside
    the one-track validity envelope.
    """
    horizon = min(max(0.5 + 0.05 * v, 0.5), 2.0)
    y_pred = state.y + v * math.sin(state.psi) * horizon
    psi_pred = state.psi
    e_d = target_lane_center - y_pred
    e_psi = -psi_pred
    k_d = 0.4 / max(v, 5.0)
    delta_cmd = k_d * e_d + 1.0 * e_psi
    limit = min(MAX_STEER, math.atan(AY_CTRL_LIMIT * WHEELBASE / max(v, 1.0) ** 2))
    return min(max(delta_cmd, -limit), limit)


def lateral_accel(v: float, delta: float) -> float:
    """Lateral acceleration implied by speed and steering on the one-track model."""
    return v * v * math.tan(delta) / WHEELBASE


def one_track_step(state: VehicleState, delta_cmd: float, a_cmd: float, dt: float):
    """Kinematic one-track (bicycle) update over one timestep.

    Returns (new state, ay_exceeded flag). The flag marks steps whose
    implied lateral acceleration leaves the model's ~0.4 g validity range.
    The stored acceleration is the realized value, which differs from the
    command only when the speed floors at zero.
    """
    x = state.x + state.v * math.cos(state.psi) * dt
    y = state.y + state.v * math.sin(state.psi) * dt
    psi = state.psi + state.v / WHEELBASE * math.tan(delta_cmd) * dt
    v = max(0.0, state.v + a_cmd * dt)
    new = VehicleState(
        x=x,
        y=y,
        v=v,
        a=(v - state.v) / dt,
        psi=psi,
        delta=delta_cmd,
        lane=state.lane,
    )
    return new, abs(lateral_accel(state.v, delta_cmd)) > AY_LIMIT
