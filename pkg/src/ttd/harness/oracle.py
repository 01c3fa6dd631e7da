"""Breadth-first shortest-path search for the car parking task.

The search is layer-synchronous and vectorized over each frontier with numpy.
It re-derives the car kinematics and the wall/garage tests on arrays, so it is
an independent route to the scalar simulator in ``environments.car``; the
path it finds is replayed through that simulator before it is reported.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..environments.car import (
    ACTIONS,
    DEFAULT_GEOMETRY,
    INITIAL_STATE,
    CarGeometry,
    CarState,
    car_step,
)
from ..environments.common import SUCCESS


@dataclass
class ShortestPathResult:
    depth: int | None  # None when no success within max_depth
    path: list[int]
    layer_sizes: list[int] = field(default_factory=list)
    expanded: int = 0
    seconds: float = 0.0
    replay_ok: bool = False


def _move(x, y, th, action: int, g: CarGeometry):
    r = g.radius(action)
    if r == 0.0:
        return x + g.tau * g.velocity * np.cos(th), y + g.tau * g.velocity * np.sin(th), th
    th2 = th + g.tau * g.velocity / r
    return x - r * np.sin(th) + r * np.sin(th2), y + r * np.cos(th) - r * np.cos(th2), th2


def _corners(x, y, th, g: CarGeometry):
    c, s = np.cos(th), np.sin(th)
    hl, hw = g.length / 2.0, g.width / 2.0
    return [(x + dl * c - dw * s, y + dl * s + dw * c)
            for dl, dw in ((hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw))]


def _cross(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _hits_wall(corners, g: CarGeometry) -> np.ndarray:
    hit = np.zeros(corners[0][0].shape, dtype=bool)
    for (wx1, wy1), (wx2, wy2) in g.walls():
        for i in range(4):
            px, py = corners[i]
            qx, qy = corners[(i + 1) % 4]
            d1 = _cross(wx1, wy1, wx2, wy2, px, py)
            d2 = _cross(wx1, wy1, wx2, wy2, qx, qy)
            d3 = _cross(px, py, qx, qy, wx1, wy1)
            d4 = _cross(px, py, qx, qy, wx2, wy2)
            # closed-segment test; the collinear-touching case has measure zero
            # here and is folded into the <= comparisons
            hit |= (d1 * d2 <= 0) & (d3 * d4 <= 0)
    return hit


def _inside_garage(corners, g: CarGeometry) -> np.ndarray:
    ok = np.ones(corners[0][0].shape, dtype=bool)
    for cx, cy in corners:
        ok &= (cx > g.x0) & (cx < g.xg) & (cy > g.y0) & (cy < g.yg)
    return ok


def _heading_fits(theta: float, g: CarGeometry) -> bool:
    # the car's x-extent must fit between the garage side walls
    return g.length * abs(math.cos(theta)) + g.width * abs(math.sin(theta)) < g.xg - g.x0


def _lower_bound(x, y, k, fit_offsets: np.ndarray, half_extents: tuple[float, float],
                 g: CarGeometry) -> np.ndarray:
    """Admissible bound on the steps still needed to park.

    A parked car has one of the headings in ``fit_offsets``, so its centre is
    at least the smallest half-extent over those headings inside each garage
    wall; each step moves the centre by at most ``v * tau``; the heading only
    changes on turns.
    """
    hx, hy = half_extents
    zero = np.zeros_like(x)
    dx = np.maximum.reduce([g.x0 + hx - x, zero, x - (g.xg - hx)])
    dy = np.maximum.reduce([g.y0 + hy - y, zero, y - (g.yg - hy)])
    by_dist = np.ceil(np.hypot(dx, dy) / (g.velocity * g.tau) - 1e-9)
    by_heading = np.abs(k[:, None] - fit_offsets[None, :]).min(axis=1)
    return np.maximum(by_dist, by_heading)


def _min_half_extents(thetas, g: CarGeometry) -> tuple[float, float]:
    hl, hw = g.length / 2.0, g.width / 2.0
    hx = min(hl * abs(math.cos(t)) + hw * abs(math.sin(t)) for t in thetas)
    hy = min(hl * abs(math.sin(t)) + hw * abs(math.cos(t)) for t in thetas)
    return hx, hy


def shortest_parking_path(
    max_depth: int = 21,
    start: CarState = INITIAL_STATE,
    geometry: CarGeometry = DEFAULT_GEOMETRY,
    resolution: float = 1e-6,
) -> ShortestPathResult:
    """Find the shallowest action sequence that parks the car, up to ``max_depth``.

    Poses are hashed on a ``resolution`` grid and nodes whose lower bound
    exceeds the remaining depth are pruned; neither can hide a shallower
    success.
    """
    t0 = time.perf_counter()
    g = geometry
    turn = g.tau * g.velocity / g.turn_radius
    span = int(math.ceil(2 * math.pi / turn)) + max_depth + 2
    fit_offsets = np.array([j for j in range(-span, span + 1) if _heading_fits(start.theta + j * turn, g)])
    half_extents = _min_half_extents([start.theta + j * turn for j in fit_offsets], g)

    x = np.array([start.x])
    y = np.array([start.y])
    th = np.array([start.theta])
    k = np.array([0])
    parents: list[tuple[np.ndarray, np.ndarray]] = []  # per layer: (parent index, action)
    result = ShortestPathResult(None, [])

    for depth in range(1, max_depth + 1):
        cand = []
        for a in ACTIONS:
            nx, ny, nth = _move(x, y, th, a, g)
            corners = _corners(nx, ny, nth, g)
            crashed = _hits_wall(corners, g)
            parked = ~crashed & _inside_garage(corners, g)
            result.expanded += len(x)
            if parked.any():
                idx = int(np.flatnonzero(parked)[0])
                path = [a]
                for par, act in reversed(parents):
                    path.append(int(act[idx]))
                    idx = int(par[idx])
                result.depth = depth
                result.path = path[::-1]
                result.layer_sizes.append(len(x))
                result.seconds = time.perf_counter() - t0
                result.replay_ok = _replay(result.path, start, g)
                return result
            nk = k + (1 if a == 2 else -1 if a == 1 else 0)
            live = ~crashed
            live &= depth + _lower_bound(nx, ny, nk, fit_offsets, half_extents, g) <= max_depth
            src = np.flatnonzero(live)
            cand.append((nx[src], ny[src], nth[src], nk[src], src, np.full(len(src), a)))
        x, y, th, k, par, act = (np.concatenate(col) for col in zip(*cand))
        keys = np.stack([np.round(x / resolution), np.round(y / resolution), np.round(th / resolution)], axis=1)
        _, first = np.unique(keys, axis=0, return_index=True)
        first.sort()
        x, y, th, k, par, act = x[first], y[first], th[first], k[first], par[first], act[first]
        parents.append((par, act))
        result.layer_sizes.append(len(x))
        if len(x) == 0:
            break
    result.seconds = time.perf_counter() - t0
    return result


def _replay(path: list[int], start: CarState, g: CarGeometry) -> bool:
    state = start
    for i, a in enumerate(path):
        out = car_step(state, a, g)
        if out.done:
            return out.terminal == SUCCESS and i == len(path) - 1
        state = out.next_state
    return False
