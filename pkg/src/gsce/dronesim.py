"""Kinematic quadcopter in a world NED frame.

X points north (forward at yaw 0), Y east (right), Z down. Yaw is in
degrees, clockwise-positive seen from above, kept in (-180, 180].

Every skill is applied instantly. Movement and rotation commands issued
while airborne append a :class:`StateTransition` to the log; takeoff and
land only change the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

DEFAULT_TAKEOFF_ALTITUDE_M = 1.5


class SimulatorError(RuntimeError):
    """A skill was called in a state where it is not allowed."""


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class DroneState:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    yaw: float = 0.0
    airborne: bool = False


@dataclass(frozen=True)
class StateTransition:
    dx: float
    dy: float
    dz: float
    dyaw: float

    def as_list(self) -> list[float]:
        return [self.dx, self.dy, self.dz, self.dyaw]

    @classmethod
    def from_seq(cls, values) -> StateTransition:
        dx, dy, dz, dyaw = (float(v) for v in values)
        return cls(dx, dy, dz, dyaw)


def _require_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise SimulatorError(f"non-finite argument: {v!r}")


def normalize_yaw(deg: float) -> float:
    """Wrap an angle in degrees into (-180, 180]."""
    if not math.isfinite(deg):
        raise ValueError(f"cannot normalize non-finite yaw {deg!r}")
    r = math.fmod(deg, 360.0)
    if r <= -180.0:
        r += 360.0
    elif r > 180.0:
        r -= 360.0
    return r + 0.0  # drop negative zero


def _sincos_deg(deg: float) -> tuple[float, float]:
    # exact values on the quadrant axes so that 90 degree turns stay clean
    q, rem = divmod(deg, 90.0)
    if rem == 0.0:
        return [(0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0)][int(q) % 4]
    rad = math.radians(deg)
    return math.sin(rad), math.cos(rad)


def body_to_world(dxb: float, dyb: float, dzb: float, yaw: float) -> tuple[float, float, float]:
    """Rotate a body-frame displacement into the world frame at ``yaw`` degrees."""
    for v in (dxb, dyb, dzb, yaw):
        if not math.isfinite(v):
            raise ValueError(f"non-finite input {v!r}")
    s, c = _sincos_deg(yaw)
    return (dxb * c - dyb * s + 0.0, dxb * s + dyb * c + 0.0, dzb + 0.0)


@dataclass
class Simulator:
    """One drone, one run. Not safe to drive from several threads at once."""

    takeoff_altitude_m: float = DEFAULT_TAKEOFF_ALTITUDE_M
    state: DroneState = field(default_factory=DroneState)
    log: list[StateTransition] = field(default_factory=list)

    def reset(self) -> DroneState:
        self.state = DroneState()
        self.log = []
        return self.state

    def _require_airborne(self, skill: str) -> None:
        if not self.state.airborne:
            raise SimulatorError(f"{skill}() requires the drone to be airborne")

    def takeoff(self) -> None:
        if self.state.airborne:
            raise SimulatorError("takeoff() called while already airborne")
        s = self.state
        self.state = DroneState(s.x, s.y, -self.takeoff_altitude_m, s.yaw, True)

    def land(self) -> None:
        self._require_airborne("land")
        s = self.state
        self.state = DroneState(s.x, s.y, 0.0, s.yaw, False)

    def fly_to(self, x: float, y: float, z: float, speed: float | None = None) -> None:
        self._require_airborne("fly_to")
        _require_finite(x, y, z)
        s = self.state
        self.log.append(StateTransition(x - s.x, y - s.y, z - s.z, 0.0))
        self.state = DroneState(x, y, z, s.yaw, True)

    def set_yaw(self, deg: float) -> None:
        self._require_airborne("set_yaw")
        _require_finite(deg)
        s = self.state
        target = normalize_yaw(deg)
        self.log.append(StateTransition(0.0, 0.0, 0.0, normalize_yaw(target - s.yaw)))
        self.state = DroneState(s.x, s.y, s.z, target, True)

    def get_yaw(self) -> float:
        return self.state.yaw

    def get_drone_position(self) -> Vec3:
        s = self.state
        return Vec3(s.x, s.y, s.z)
