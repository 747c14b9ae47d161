"""Cascaded PD control of one plate axis.

The outer loop turns ball position error into a desired plate angle, the
inner loop turns plate angle error into motor voltage. Both loops run on
every sensor message the controller receives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .plant import ANGLE_LIMIT, saturate_angle


@dataclass(frozen=True)
class PdGains:
    kp: float
    kd: float

    def __post_init__(self):
        if not (math.isfinite(self.kp) and math.isfinite(self.kd)):
            raise ValueError(f"PD gains must be finite, got kp={self.kp!r} kd={self.kd!r}")


@dataclass(frozen=True)
class ControllerState:
    prev_error_outer: float = 0.0
    prev_error_inner: float = 0.0
    last_update_time: float = math.nan  # nan until the first update
    commanded_u: float = 0.0

    @property
    def started(self) -> bool:
        return not math.isnan(self.last_update_time)


def pd_step(gains: PdGains, error: float, prev_error: float, dt: float) -> float:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    return gains.kp * error + gains.kd * (error - prev_error) / dt


def cascade_step(
    cs: ControllerState,
    ref_pos: float,
    meas_pos: float,
    meas_angle: float,
    gains_outer: PdGains,
    gains_inner: PdGains,
    dt: float,
    angle_limit: float = ANGLE_LIMIT,
    now: float | None = None,
) -> tuple[float, float, ControllerState]:
    """One controller update; returns ``(u, desired_angle, new_state)``.

    The ball stage has negative gain (a positive tilt accelerates the ball
    toward negative positions), so the outer loop output is negated to keep
    positive gains stabilizing. On the first update the previous errors are
    taken equal to the current ones, which suppresses the derivative kick.
    """
    started = cs.started
    e_out = ref_pos - meas_pos
    prev_out = cs.prev_error_outer if started else e_out
    desired = saturate_angle(-pd_step(gains_outer, e_out, prev_out, dt), angle_limit)
    e_in = desired - meas_angle
    prev_in = cs.prev_error_inner if started else e_in
    u = pd_step(gains_inner, e_in, prev_in, dt)
    t = now if now is not None else (cs.last_update_time + dt if started else 0.0)
    return u, desired, ControllerState(e_out, e_in, t, u)
