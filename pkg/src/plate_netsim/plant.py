"""Linearized ball-on-plate dynamics, one independent subsystem per plate axis.

Each axis is the cascade of a motor/plate stage, ``1 / (16 s (b1 s + b0))``
from motor voltage to plate angle, and a ball-rolling stage, ``-7 / s^2``
from plate angle to ball position. Both stages advance on the same time
grid; the ball stage sees the plate angle held at its start-of-step value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ANGLE_MAP = 1.0 / 16.0  # plate angle per motor shaft angle
BALL_GAIN = 7.0  # magnitude of the angle -> ball acceleration gain
ANGLE_LIMIT = math.radians(32.0)
BLOWUP_BOUND = 1e6


class DivergenceError(RuntimeError):
    """Raised when a state component leaves the blow-up bound or goes non-finite."""


@dataclass(frozen=True)
class MotorCoefficients:
    b1: float = 0.01176
    b0: float = 0.58823

    def __post_init__(self):
        for name in ("b1", "b0"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"motor coefficient {name} must be finite and > 0, got {v!r}")

    @property
    def pole(self) -> float:
        """Motor pole ``a = b0 / b1`` of the stage rewritten as ``K / (s (s + a))``."""
        return self.b0 / self.b1

    @property
    def gain(self) -> float:
        """Stage gain ``K = 1 / (16 b1)``."""
        return ANGLE_MAP / self.b1


@dataclass(frozen=True)
class AxisState:
    ball_pos: float = 0.0
    ball_vel: float = 0.0
    plate_angle: float = 0.0
    plate_rate: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.ball_pos, self.ball_vel, self.plate_angle, self.plate_rate)


@dataclass(frozen=True)
class PlantState:
    x_axis: AxisState
    y_axis: AxisState
    time: float = 0.0


@dataclass(frozen=True)
class AxisDiscretization:
    """Exact zero-order-hold step coefficients for one axis.

    One step maps ``(pos, vel, angle, rate)`` and a held voltage ``u`` to::

        rate'  = rate_decay * rate + rate_from_u * u
        angle' = angle + angle_from_rate * rate + angle_from_u * u
        vel'   = vel + vel_from_angle * angle
        pos'   = pos + dt * vel + pos_from_angle * angle
    """

    dt: float
    rate_decay: float
    rate_from_u: float
    angle_from_rate: float
    angle_from_u: float
    vel_from_angle: float
    pos_from_angle: float


def _phi1(x: float) -> float:
    # (1 - exp(-x)) / x
    if abs(x) < 1e-8:
        return 1.0 - x / 2.0
    return -math.expm1(-x) / x


def _phi2(x: float) -> float:
    # (x - 1 + exp(-x)) / x^2, series near zero avoids cancellation
    if abs(x) < 1e-3:
        return 0.5 - x / 6.0 + x * x / 24.0 - x**3 / 120.0
    return (x + math.expm1(-x)) / (x * x)


def build_discretization(coeffs: MotorCoefficients, dt: float) -> AxisDiscretization:
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be finite and > 0, got {dt!r}")
    a, k = coeffs.pole, coeffs.gain
    if not (math.isfinite(a) and math.isfinite(k)):
        raise ValueError("motor coefficients produce a non-finite pole or gain")
    x = a * dt
    return AxisDiscretization(
        dt=dt,
        rate_decay=math.exp(-x),
        rate_from_u=k * dt * _phi1(x),
        angle_from_rate=dt * _phi1(x),
        angle_from_u=k * dt * dt * _phi2(x),
        vel_from_angle=-BALL_GAIN * dt,
        pos_from_angle=-0.5 * BALL_GAIN * dt * dt,
    )


def saturate_angle(angle: float, limit: float = ANGLE_LIMIT) -> float:
    if limit <= 0:
        raise ValueError("angle limit must be > 0")
    if angle > limit:
        return limit
    if angle < -limit:
        return -limit
    return angle


def step_axis(
    state: AxisState,
    u: float,
    disc: AxisDiscretization,
    angle_limit: float | None = ANGLE_LIMIT,
    blowup: float = BLOWUP_BOUND,
) -> AxisState:
    """Advance one axis by ``disc.dt`` with ``u`` held over the step.

    ``angle_limit=None`` disables saturation (the model is then purely linear).
    """
    pos, vel, angle, rate = state.as_tuple()
    new_rate = disc.rate_decay * rate + disc.rate_from_u * u
    new_angle = angle + disc.angle_from_rate * rate + disc.angle_from_u * u
    new_vel = vel + disc.vel_from_angle * angle
    new_pos = pos + disc.dt * vel + disc.pos_from_angle * angle
    if angle_limit is not None:
        new_angle = saturate_angle(new_angle, angle_limit)
    out = AxisState(new_pos, new_vel, new_angle, new_rate)
    check_bounded(out.as_tuple(), blowup)
    return out


def check_bounded(values, bound: float = BLOWUP_BOUND) -> None:
    for v in values:
        if not abs(v) <= bound:  # also catches nan
            raise DivergenceError(f"plant state component {v!r} exceeds blow-up bound {bound:g}")


class BallPlate:
    """Mutable two-axis plant used inside the event loop.

    Holds the actuator's zero-order-hold voltages and steps both axes on an
    integer step grid. Arithmetic matches :func:`step_axis` term for term,
    so the two paths agree bit for bit.
    """

    def __init__(self, disc: AxisDiscretization, state: PlantState | None = None,
                 angle_limit: float = ANGLE_LIMIT, blowup: float = BLOWUP_BOUND,
                 u: tuple[float, float] = (0.0, 0.0)):
        self.disc = disc
        self.angle_limit = angle_limit
        self.blowup = blowup
        state = state or PlantState(AxisState(), AxisState())
        self.x = list(state.x_axis.as_tuple())
        self.y = list(state.y_axis.as_tuple())
        self.steps = 0
        self.t0 = state.time
        self.u_x, self.u_y = u

    @property
    def time(self) -> float:
        return self.t0 + self.steps * self.disc.dt

    def state(self) -> PlantState:
        return PlantState(AxisState(*self.x), AxisState(*self.y), self.time)

    def advance(self, n: int) -> None:
        """Take ``n`` steps with the currently held voltages."""
        if n <= 0:
            return
        d = self.disc
        dt, rd, ru, ar, au, va, pa = (d.dt, d.rate_decay, d.rate_from_u, d.angle_from_rate,
                                      d.angle_from_u, d.vel_from_angle, d.pos_from_angle)
        lim = self.angle_limit
        for axis, u in ((self.x, self.u_x), (self.y, self.u_y)):
            pos, vel, ang, rate = axis
            for _ in range(n):
                new_rate = rd * rate + ru * u
                new_ang = ang + ar * rate + au * u
                vel, pos = vel + va * ang, pos + dt * vel + pa * ang
                if new_ang > lim:
                    new_ang = lim
                elif new_ang < -lim:
                    new_ang = -lim
                ang, rate = new_ang, new_rate
            axis[:] = (pos, vel, ang, rate)
            check_bounded(axis, self.blowup)
        self.steps += n
