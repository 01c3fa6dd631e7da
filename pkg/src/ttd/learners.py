"""Tabular functions, Boltzmann action selection and TTD-based learners."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .td_core import (
    ConfigError,
    ExperienceBuffer,
    ExperienceRecord,
    IncrementalReturnState,
    TdConfig,
    backward_returns,
    incremental_step,
    resync,
    stable_resync_period,
    ttd_return_iterative,
)

ALGORITHMS = ("ahc", "q_learning", "advantage_updating")


class ArityMismatch(TypeError):
    pass


class EmptyActionSet(ValueError):
    pass


class DegenerateAlpha(ZeroDivisionError):
    pass


class TabularFunction:
    """Look-up table over states or state-action pairs.

    Entries that were never written read as ``initial_value``.
    """

    def __init__(self, arity: str = "state", n_actions: Optional[int] = None, initial_value: float = 0.0):
        if arity not in ("state", "state_action"):
            raise ValueError(f"unknown arity {arity!r}")
        if arity == "state_action" and not n_actions:
            raise ValueError("state_action tables need n_actions")
        self.arity = arity
        self.n_actions = n_actions
        self.initial_value = float(initial_value)
        self.table: dict = {}

    def _key(self, key):
        if self.arity == "state":
            if isinstance(key, tuple):
                raise ArityMismatch(f"state table indexed with {key!r}")
            return key
        if not (isinstance(key, tuple) and len(key) == 2):
            raise ArityMismatch(f"state_action table indexed with {key!r}")
        return key

    def __getitem__(self, key) -> float:
        return self.table.get(self._key(key), self.initial_value)

    def __call__(self, state, action=None) -> float:
        key = state if action is None else (state, action)
        return self[key]

    def update(self, key, delta: float, eta: float) -> None:
        key = self._key(key)
        self.table[key] = self.table.get(key, self.initial_value) + eta * delta

    def row(self, state) -> list[float]:
        if self.arity != "state_action":
            raise ArityMismatch("row() needs a state_action table")
        get = self.table.get
        iv = self.initial_value
        return [get((state, a), iv) for a in range(self.n_actions)]

    def max(self, state) -> float:
        return max(self.row(state))

    def argmax(self, state) -> int:
        # ties go to the lowest action id
        row = self.row(state)
        return row.index(max(row))

    def to_text(self) -> str:
        lines = []
        for key in sorted(self.table):
            k = f"{key[0]},{key[1]}" if isinstance(key, tuple) else f"{key}"
            lines.append(f"{k} {self.table[key]!r}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, arity: str = "state", n_actions=None, initial_value=0.0):
        fn = cls(arity, n_actions, initial_value)
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            key_s, val_s = line.split()
            parts = [int(p) for p in key_s.split(",")]
            key = parts[0] if len(parts) == 1 else tuple(parts)
            fn.table[fn._key(key)] = float(val_s)
        return fn


def update_function(fn: TabularFunction, key, delta: float, eta: float) -> None:
    if eta < 0:
        raise ValueError("learning rate must be non-negative")
    fn.update(key, delta, eta)


@dataclass(frozen=True)
class PolicySample:
    action: int
    probabilities: tuple


def boltzmann_probabilities(merits: Sequence[float], temperature: float) -> list[float]:
    if len(merits) == 0:
        raise EmptyActionSet("no actions to choose from")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    top = max(merits)
    w = [math.exp((q - top) / temperature) for q in merits]
    total = sum(w)
    return [x / total for x in w]


def boltzmann_select(merits: Sequence[float], temperature: float, rng: np.random.Generator) -> PolicySample:
    probs = boltzmann_probabilities(merits, temperature)
    u = rng.random()
    acc = 0.0
    action = len(probs) - 1
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            action = i
            break
    return PolicySample(action, tuple(probs))


@dataclass(frozen=True)
class LearnerConfig:
    algorithm: str = "ahc"
    alpha: float = 0.25
    beta: float = 0.25
    temperature: float = 0.02
    td: TdConfig = field(default_factory=TdConfig)
    # Watkins-style cut of lambda after exploratory actions (iterative engine only)
    adaptive_lambda: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("learning rates must be non-negative")
        if self.algorithm == "advantage_updating" and self.alpha == 0:
            raise DegenerateAlpha("advantage updating divides by alpha")
        if self.adaptive_lambda and self.td.engine == "incremental":
            raise ConfigError("adaptive lambda is only supported by the iterative engine")


def ahc_learn(V: TabularFunction, f: TabularFunction, oldest: ExperienceRecord, z: float,
              config: LearnerConfig) -> None:
    x, a = oldest.state, oldest.action
    v = V[x]
    V.update(x, z - v, config.alpha)
    f.update((x, a), z - v, config.beta)


def q_learn(Q: TabularFunction, oldest: ExperienceRecord, z: float, config: LearnerConfig) -> None:
    key = (oldest.state, oldest.action)
    Q.update(key, z - Q[key], config.alpha)


def advantage_learn(A: TabularFunction, V: TabularFunction, oldest: ExperienceRecord, z: float,
                    config: LearnerConfig) -> None:
    """Simplified advantage updating step (no normalizing updates, unit time step)."""
    if config.alpha == 0:
        raise DegenerateAlpha("advantage updating divides by alpha")
    x, a = oldest.state, oldest.action
    a_max = A.max(x)
    A.update((x, a), a_max - A[(x, a)] + z - V[x], config.alpha)
    new_max = A.max(x)
    V.update(x, (new_max - a_max) / config.alpha, config.beta)


class Session:
    """One learning agent: tables, experience buffer and the TTD procedure.

    Drive it with :meth:`act` then either :meth:`observe` (the episode goes
    on) or :meth:`terminate` (the episode ended with a final reward).
    """

    def __init__(self, config: LearnerConfig, n_actions: int, rng: np.random.Generator | int | None = None):
        self.config = config
        self.n_actions = n_actions
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        algo = config.algorithm
        if algo == "ahc":
            self.V = TabularFunction("state")
            self.f = TabularFunction("state_action", n_actions)
        elif algo == "q_learning":
            self.Q = TabularFunction("state_action", n_actions)
        else:
            self.V = TabularFunction("state")
            self.A = TabularFunction("state_action", n_actions)
        td = config.td
        self.buffer = ExperienceBuffer(td.m)
        self.inc_state: Optional[IncrementalReturnState] = None
        self.resync_period = td.resync_period
        if td.engine == "incremental":
            self.resync_period = min(td.resync_period, stable_resync_period(td.gamma_lambda))
        self._since_sync = 0
        self._pending: Optional[tuple[int, int, bool]] = None
        self.update_count = 0

    # -- algorithm wiring ---------------------------------------------------
    def merits(self, state) -> list[float]:
        algo = self.config.algorithm
        if algo == "ahc":
            return self.f.row(state)
        if algo == "q_learning":
            return self.Q.row(state)
        return self.A.row(state)

    def bootstrap(self, state) -> float:
        if self.config.algorithm == "q_learning":
            return self.Q.max(state)
        return self.V[state]

    def learn(self, record: ExperienceRecord, z: float) -> None:
        algo = self.config.algorithm
        if algo == "ahc":
            ahc_learn(self.V, self.f, record, z, self.config)
        elif algo == "q_learning":
            q_learn(self.Q, record, z, self.config)
        else:
            advantage_learn(self.A, self.V, record, z, self.config)
        self.update_count += 1

    def tables(self) -> dict[str, TabularFunction]:
        names = {"ahc": ("V", "f"), "q_learning": ("Q",), "advantage_updating": ("V", "A")}
        return {n: getattr(self, n) for n in names[self.config.algorithm]}

    # -- the procedure ------------------------------------------------------
    def act(self, state, rng: Optional[np.random.Generator] = None) -> int:
        merits = self.merits(state)
        sample = boltzmann_select(merits, self.config.temperature, rng or self.rng)
        non_policy = merits[sample.action] < max(merits)
        self._pending = (state, sample.action, non_policy)
        return sample.action

    def _push(self, reward: float, stored_utility: float) -> Optional[ExperienceRecord]:
        if self._pending is None:
            raise RuntimeError("act() must be called before reporting a transition")
        state, action, non_policy = self._pending
        self._pending = None
        evicted = self.buffer.push(ExperienceRecord(state, action, float(reward), float(stored_utility)))
        if self.config.adaptive_lambda and non_policy and len(self.buffer) > 1:
            # an exploratory action makes the return beyond the previous step off-policy
            self.buffer[1].lambda_override = 0.0
        return evicted

    def observe(self, reward: float, next_state) -> None:
        """Record a non-terminal transition and learn for the oldest step if the buffer is full."""
        evicted = self._push(reward, self.bootstrap(next_state))
        if not self.buffer.full:
            return
        td = self.config.td
        if td.engine == "incremental":
            if evicted is None or self.inc_state is None or self._since_sync >= self.resync_period:
                self.inc_state = resync(self.buffer, td)
                self._since_sync = 0
            else:
                new = self.buffer.newest
                self.inc_state = incremental_step(
                    self.inc_state, evicted.reward, evicted.stored_utility,
                    new.reward, new.stored_utility, td,
                )
                self._since_sync += 1
            z = self.inc_state.value
        else:
            z = ttd_return_iterative(self.buffer, td)
        self.learn(self.buffer.oldest, z)

    def terminate(self, final_reward: float) -> int:
        """Close the episode: store the final step and flush every pending update.

        Returns the number of learning updates performed by the flush.
        """
        self._push(final_reward, 0.0)
        return self.flush()

    def flush(self) -> int:
        """Learn for every real record left in the buffer, oldest first, then empty it."""
        buf = self.buffer
        if len(buf) == 0:
            return 0
        buf.newest.stored_utility = 0.0
        records = list(buf)
        zs = backward_returns(records, self.config.td.gamma, self.config.td.lam)
        for k in range(len(records) - 1, -1, -1):
            self.learn(records[k], zs[k])
        buf.clear()
        self.inc_state = None
        self._since_sync = 0
        return len(records)


def learner_step(session: Session, observation, rng: Optional[np.random.Generator] = None) -> int:
    return session.act(observation, rng)


def reset_operation(session: Session, final_reward: float) -> int:
    """End-of-episode flush for ``session``.

    If an action is still pending, the final step is stored with
    ``final_reward`` first; otherwise the newest record is taken as the final
    step already.
    """
    if session._pending is not None:
        return session.terminate(final_reward)
    return session.flush()
