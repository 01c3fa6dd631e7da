"""Cart-pole balancing simulated with explicit Euler integration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .boxes import CARTPOLE_QUANTIZER
from .common import FAILURE, NONE, EpisodeFinished, StepOutcome

PUSH_LEFT, PUSH_RIGHT = 0, 1


class CartPoleState(NamedTuple):
    x: float = 0.0
    x_dot: float = 0.0
    theta: float = 0.0
    theta_dot: float = 0.0


@dataclass(frozen=True)
class CartPoleParams:
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    half_length: float = 0.5
    cart_friction: float = 0.0005
    pole_friction: float = 0.000002
    force: float = 10.0
    tau: float = 0.02
    theta_limit: float = 0.21
    x_limit: float = 2.4


DEFAULT_PARAMS = CartPoleParams()


def _sgn(v: float) -> float:
    return (v > 0) - (v < 0)


def cartpole_derivatives(state: CartPoleState, force: float,
                         params: CartPoleParams = DEFAULT_PARAMS) -> tuple[float, float]:
    """Return ``(x_ddot, theta_ddot)``; theta_ddot is solved first and fed into x_ddot."""
    p = params
    _, x_dot, th, th_dot = state
    total = p.cart_mass + p.pole_mass
    sin_t, cos_t = math.sin(th), math.cos(th)
    fric_c = p.cart_friction * _sgn(x_dot)
    inner = (-force - p.pole_mass * p.half_length * th_dot * th_dot * sin_t + fric_c) / total
    num = p.gravity * sin_t + cos_t * inner - p.pole_friction * th_dot / (p.pole_mass * p.half_length)
    den = p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total)
    th_acc = num / den
    x_acc = (force + p.pole_mass * p.half_length * (th_dot * th_dot * sin_t - th_acc * cos_t) - fric_c) / total
    return x_acc, th_acc


def cartpole_failed(state: CartPoleState, params: CartPoleParams = DEFAULT_PARAMS) -> bool:
    return abs(state.theta) > params.theta_limit or abs(state.x) > params.x_limit


def cartpole_step(state: CartPoleState, action: int, params: CartPoleParams = DEFAULT_PARAMS) -> StepOutcome:
    force = params.force if action == PUSH_RIGHT else -params.force
    x_acc, th_acc = cartpole_derivatives(state, force, params)
    tau = params.tau
    nxt = CartPoleState(
        state.x + tau * state.x_dot,
        state.x_dot + tau * x_acc,
        state.theta + tau * state.theta_dot,
        state.theta_dot + tau * th_acc,
    )
    if cartpole_failed(nxt, params):
        return StepOutcome(nxt, -1.0, FAILURE)
    return StepOutcome(nxt, 0.0, NONE)


def mechanical_energy(state: CartPoleState, params: CartPoleParams = DEFAULT_PARAMS) -> float:
    """Kinetic plus potential energy of cart and uniform rod (pivot at height 0)."""
    p = params
    mc, mp, l = p.cart_mass, p.pole_mass, p.half_length
    _, xd, th, thd = state
    # rod centre velocity
    vx = xd + l * thd * math.cos(th)
    vy = -l * thd * math.sin(th)
    kinetic = 0.5 * mc * xd * xd + 0.5 * mp * (vx * vx + vy * vy) + 0.5 * (mp * l * l / 3.0) * thd * thd
    potential = mp * p.gravity * l * math.cos(th)
    return kinetic + potential


class CartPole:
    n_actions = 2
    n_regions = CARTPOLE_QUANTIZER.n_regions
    name = "cart_pole"

    def __init__(self, params: CartPoleParams = DEFAULT_PARAMS):
        self.params = params
        self.state = CartPoleState()
        self.finished = False

    def reset(self) -> CartPoleState:
        self.state = CartPoleState()
        self.finished = False
        return self.state

    def region(self, state: CartPoleState) -> int:
        return CARTPOLE_QUANTIZER.quantize(state)

    def step(self, action: int) -> StepOutcome:
        if self.finished:
            raise EpisodeFinished("call reset() before stepping again")
        out = cartpole_step(self.state, action, self.params)
        self.state = out.next_state
        self.finished = out.done
        return out
