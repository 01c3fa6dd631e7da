"""Car parking task: drive a rectangular car into a garage without hitting a wall.

Layout (meters): the driving area is ``[x0, x1] x [yG, y1]``; the garage is
``[x0, xG] x [y0, yG]`` directly below its left end, open along
``y = yG`` between ``x0`` and ``xG``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .boxes import CAR_QUANTIZER, Quantizer
from .common import FAILURE, NONE, SUCCESS, EpisodeFinished, StepOutcome

STRAIGHT, LEFT, RIGHT = 0, 1, 2
ACTIONS = (STRAIGHT, LEFT, RIGHT)
ACTION_NAMES = ("straight", "left", "right")

TWO_PI = 2.0 * math.pi


class CarState(NamedTuple):
    x: float
    y: float
    theta: float


INITIAL_STATE = CarState(6.15, 10.47, 3.7)


@dataclass(frozen=True)
class CarGeometry:
    width: float = 2.0
    length: float = 4.0
    x0: float = -1.5
    xg: float = 1.5
    x1: float = 8.5
    y0: float = -3.0
    yg: float = 3.0
    y1: float = 13.0
    velocity: float = 1.0
    tau: float = 0.5
    turn_radius: float = 5.0

    def radius(self, action: int) -> float:
        # left turns use a negative radius
        return (0.0, -self.turn_radius, self.turn_radius)[action]

    def walls(self) -> tuple[tuple[tuple[float, float], tuple[float, float]], ...]:
        x0, xg, x1, y0, yg, y1 = self.x0, self.xg, self.x1, self.y0, self.yg, self.y1
        return (
            ((x0, y0), (x0, y1)),  # left side of garage and driving area
            ((x0, y1), (x1, y1)),  # top
            ((x1, y1), (x1, yg)),  # right
            ((x1, yg), (xg, yg)),  # driving-area floor right of the garage mouth
            ((xg, yg), (xg, y0)),  # garage right wall
            ((xg, y0), (x0, y0)),  # garage back wall
        )


DEFAULT_GEOMETRY = CarGeometry()


def car_move(state: CarState, action: int, geometry: CarGeometry = DEFAULT_GEOMETRY) -> CarState:
    x, y, th = state
    r = geometry.radius(action)
    tau, v = geometry.tau, geometry.velocity
    if r != 0.0:
        th2 = th + tau * v / r
        return CarState(
            x - r * math.sin(th) + r * math.sin(th2),
            y + r * math.cos(th) - r * math.cos(th2),
            th2,
        )
    return CarState(x + tau * v * math.cos(th), y + tau * v * math.sin(th), th)


def car_corners(state: CarState, geometry: CarGeometry = DEFAULT_GEOMETRY) -> list[tuple[float, float]]:
    """Corners of the car rectangle in order around its perimeter."""
    x, y, th = state
    c, s = math.cos(th), math.sin(th)
    hl, hw = geometry.length / 2.0, geometry.width / 2.0
    out = []
    for dl, dw in ((hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)):
        out.append((x + dl * c - dw * s, y + dl * s + dw * c))
    return out


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _on_segment(p, q, r) -> bool:
    return min(p[0], r[0]) <= q[0] <= max(p[0], r[0]) and min(p[1], r[1]) <= q[1] <= max(p[1], r[1])


def segments_intersect(p1, p2, q1, q2) -> bool:
    """True when the closed segments p1-p2 and q1-q2 share a point."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _on_segment(q1, p1, q2):
        return True
    if d2 == 0 and _on_segment(q1, p2, q2):
        return True
    if d3 == 0 and _on_segment(p1, q1, p2):
        return True
    if d4 == 0 and _on_segment(p1, q2, p2):
        return True
    return False


def car_is_failure(state: CarState, geometry: CarGeometry = DEFAULT_GEOMETRY) -> bool:
    corners = car_corners(state, geometry)
    sides = [(corners[i], corners[(i + 1) % 4]) for i in range(4)]
    for a, b in geometry.walls():
        for p, q in sides:
            if segments_intersect(p, q, a, b):
                return True
    return False


def car_is_success(state: CarState, geometry: CarGeometry = DEFAULT_GEOMETRY) -> bool:
    g = geometry
    return all(g.x0 < cx < g.xg and g.y0 < cy < g.yg for cx, cy in car_corners(state, geometry))


def car_step(state: CarState, action: int, geometry: CarGeometry = DEFAULT_GEOMETRY) -> StepOutcome:
    """Move the car one time step, then test for a crash and then for parking."""
    nxt = car_move(state, action, geometry)
    if car_is_failure(nxt, geometry):
        return StepOutcome(nxt, -1.0, FAILURE)
    if car_is_success(nxt, geometry):
        return StepOutcome(nxt, 1.0, SUCCESS)
    return StepOutcome(nxt, 0.0, NONE)


def car_region(state: CarState, quantizer: Quantizer = CAR_QUANTIZER) -> int:
    # heading is wrapped to [0, 2*pi) before binning
    return quantizer.quantize((state.x, state.y, state.theta % TWO_PI))


class CarParking:
    """Episodic wrapper around :func:`car_step` with a per-episode step cap.

    Hitting the cap ends the episode as a failure that carries reward 0.
    """

    n_actions = 3
    n_regions = CAR_QUANTIZER.n_regions
    name = "car_parking"

    def __init__(self, geometry: CarGeometry = DEFAULT_GEOMETRY, step_cap: int = 1000):
        self.geometry = geometry
        self.step_cap = step_cap
        self.state = INITIAL_STATE
        self.steps = 0
        self.finished = False

    def reset(self) -> CarState:
        self.state = INITIAL_STATE
        self.steps = 0
        self.finished = False
        return self.state

    def region(self, state: CarState) -> int:
        return car_region(state)

    def step(self, action: int) -> StepOutcome:
        if self.finished:
            raise EpisodeFinished("call reset() before stepping again")
        out = car_step(self.state, action, self.geometry)
        self.state = out.next_state
        self.steps += 1
        if not out.done and self.steps >= self.step_cap:
            out = StepOutcome(out.next_state, 0.0, FAILURE)
        self.finished = out.done
        return out
