"""Return and error computations for truncated temporal differences.

The experience buffer is indexed newest-first: ``buffer[0]`` is the step just
taken and ``buffer[m - 1]`` is the oldest step, the one whose utility is
updated on the current tick.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

ENGINES = ("iterative", "incremental")


class TdError(Exception):
    """Base class for errors raised by the TD core."""


class ConfigError(TdError, ValueError):
    pass


class BufferNotFull(TdError):
    pass


class DegenerateDiscount(TdError):
    """gamma * lambda is too small for the incremental recurrences."""


class DomainError(TdError, ValueError):
    pass


class InsufficientLog(TdError):
    pass


@dataclass(frozen=True)
class TdConfig:
    gamma: float = 0.95
    lam: float = 0.9
    m: int = 25
    engine: str = "iterative"
    resync_period: int = 1000
    min_discount: float = 1e-6

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"m must be a positive integer, got {self.m}")
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.resync_period < 1:
            raise ConfigError("resync_period must be >= 1")
        if self.engine == "incremental" and self.gamma * self.lam <= self.min_discount:
            raise DegenerateDiscount(
                f"incremental engine needs gamma*lambda > {self.min_discount}, "
                f"got {self.gamma * self.lam}"
            )

    @property
    def gamma_lambda(self) -> float:
        return self.gamma * self.lam


@dataclass
class ExperienceRecord:
    state: int
    action: int
    reward: float
    # U(x_{t+1}) as read when this record was the newest; never refreshed.
    stored_utility: float = 0.0
    lambda_override: Optional[float] = None


class ExperienceBuffer:
    """Sliding window over the last ``capacity`` steps, newest at index 0."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._records: deque[ExperienceRecord] = deque()

    def push(self, record: ExperienceRecord) -> Optional[ExperienceRecord]:
        """Insert ``record`` as the newest entry; return the evicted oldest, if any."""
        evicted = None
        if len(self._records) == self.capacity:
            evicted = self._records.pop()
        self._records.appendleft(record)
        return evicted

    def clear(self) -> None:
        self._records.clear()

    @property
    def full(self) -> bool:
        return len(self._records) == self.capacity

    @property
    def newest(self) -> ExperienceRecord:
        return self._records[0]

    @property
    def oldest(self) -> ExperienceRecord:
        return self._records[-1]

    def __len__(self) -> int:
        return len(self._records)

    def __getitem__(self, k: int) -> ExperienceRecord:
        return self._records[k]

    def __iter__(self) -> Iterator[ExperienceRecord]:
        return iter(self._records)

    @classmethod
    def from_records(cls, records: Iterable[ExperienceRecord], capacity: Optional[int] = None):
        """Build a buffer from records given newest-first."""
        records = list(records)
        buf = cls(capacity or len(records))
        for rec in reversed(records):
            buf.push(rec)
        return buf


@dataclass
class IncrementalReturnState:
    s_acc: float = 0.0
    t_acc: float = 0.0
    w_term: float = 0.0

    @property
    def value(self) -> float:
        return self.s_acc + self.t_acc + self.w_term


def td0_error(reward: float, utility_next: float, utility_current: float, gamma: float) -> float:
    return reward + gamma * utility_next - utility_current


def backward_returns(records: Sequence[ExperienceRecord], gamma: float, lam: float) -> list[float]:
    """Run the one-step return recursion from the newest record back to the oldest.

    ``records`` is newest-first. Element k of the result is the truncated
    return for record k using only records ``k, k-1, ..., 0``; the newest
    step bootstraps on its stored utility with lambda = 0.
    """
    out = []
    z = 0.0
    for k, rec in enumerate(records):
        if k == 0:
            z = rec.reward + gamma * rec.stored_utility
        else:
            lk = lam if rec.lambda_override is None else rec.lambda_override
            z = rec.reward + gamma * (lk * z + (1.0 - lk) * rec.stored_utility)
        out.append(z)
    return out


def ttd_return_iterative(buffer: ExperienceBuffer, config: TdConfig) -> float:
    """TTD(lambda, m) return for the oldest buffered step."""
    if len(buffer) < config.m:
        raise BufferNotFull(f"buffer holds {len(buffer)} of {config.m} records")
    gamma, lam = config.gamma, config.lam
    it = iter(buffer)
    first = next(it)
    z = first.reward + gamma * first.stored_utility
    for k, rec in enumerate(it, start=1):
        if k >= config.m:
            break
        lk = lam if rec.lambda_override is None else rec.lambda_override
        z = rec.reward + gamma * (lk * z + (1.0 - lk) * rec.stored_utility)
    return z


def _check_discount(config: TdConfig) -> float:
    gl = config.gamma_lambda
    if gl <= config.min_discount:
        raise DegenerateDiscount(
            f"gamma*lambda = {gl} <= {config.min_discount}; use the iterative engine"
        )
    return gl


def incremental_step(
    state: IncrementalReturnState,
    departing_reward: float,
    departing_utility: float,
    arriving_reward: float,
    arriving_utility: float,
    config: TdConfig,
) -> IncrementalReturnState:
    """Slide the (S, T, W) accumulators forward by one step in constant time.

    ``departing_*`` belong to the record leaving the window (the previous
    oldest), ``arriving_*`` to the record just inserted as newest.
    """
    gl = _check_discount(config)
    gamma, lam, m = config.gamma, config.lam, config.m
    s_acc = (state.s_acc - departing_reward + gl**m * arriving_reward) / gl
    t_acc = (state.t_acc - gamma * (1.0 - lam) * departing_utility + (1.0 - lam) * state.w_term) / gl
    w_term = gl ** (m - 1) * gamma * arriving_utility
    return IncrementalReturnState(s_acc, t_acc, w_term)


def resync(buffer: ExperienceBuffer, config: TdConfig) -> IncrementalReturnState:
    """Recompute the incremental accumulators from their defining sums."""
    m = config.m
    if len(buffer) < m:
        raise BufferNotFull(f"buffer holds {len(buffer)} of {m} records")
    gamma, lam = config.gamma, config.lam
    gl = gamma * lam
    # oldest-first walk so the discount exponent equals the offset from the oldest step
    oldest_first = [buffer[m - 1 - k] for k in range(m)]
    s_acc = 0.0
    t_acc = 0.0
    for k, rec in enumerate(oldest_first):
        s_acc += gl**k * rec.reward
        if k < m - 1:
            t_acc += gl**k * gamma * (1.0 - lam) * rec.stored_utility
    w_term = gl ** (m - 1) * gamma * oldest_first[-1].stored_utility
    return IncrementalReturnState(s_acc, t_acc, w_term)


def stable_resync_period(gamma_lambda: float, tolerance: float = 1e-10, eps: float = 2.0**-52) -> int:
    """Longest resync period keeping incremental drift below ``tolerance``.

    Rounding error is amplified by ``1 / gamma_lambda`` per step, so the drift
    after n steps is roughly ``eps * gamma_lambda**-n`` (a 16x safety margin is
    folded into ``eps``).
    """
    if not 0.0 < gamma_lambda <= 1.0:
        raise DomainError(f"gamma_lambda must be in (0, 1], got {gamma_lambda}")
    if gamma_lambda == 1.0:
        return 10**9
    n = math.log(tolerance / (16 * eps)) / -math.log(gamma_lambda)
    return max(1, int(n))


@dataclass
class TraceTable:
    values: dict = field(default_factory=dict)

    def __getitem__(self, state) -> float:
        return self.values.get(state, 0.0)

    def items(self):
        return self.values.items()

    def clear(self) -> None:
        self.values.clear()


def trace_update(traces: TraceTable, visited_state, config: TdConfig) -> TraceTable:
    gl = config.gamma_lambda
    vals = traces.values
    if gl == 0.0:
        vals.clear()
    else:
        for s in vals:
            vals[s] *= gl
    vals[visited_state] = vals.get(visited_state, 0.0) + 1.0
    return traces


def traces_learning_step(utilities, traces: TraceTable, td0_err: float, learning_rate: float) -> None:
    """Apply one eligibility-trace update: every traced state moves by lr * err * e_x."""
    if td0_err == 0.0:
        return
    for s, e in traces.items():
        if e != 0.0:
            utilities.update(s, td0_err * e, learning_rate)


# --- episode logs and diagnostics -------------------------------------------

LOG_FIELDS = ("step", "state", "action", "reward", "utility_before", "utility_after", "utility_next")


@dataclass
class LogRow:
    step: int
    state: int
    action: int
    reward: float
    utility_before: float  # U_t(x_t)
    utility_after: float  # U_{t+1}(x_t)
    utility_next: float  # U_t(x_{t+1}); 0 on the terminal step


@dataclass
class EpisodeLog:
    rows: list[LogRow] = field(default_factory=list)

    def append(self, state, action, reward, utility_before, utility_after, utility_next) -> None:
        self.rows.append(
            LogRow(len(self.rows), state, action, reward, utility_before, utility_after, utility_next)
        )

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, t: int) -> LogRow:
        return self.rows[t]

    def to_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_FIELDS)
        for r in self.rows:
            w.writerow([r.step, r.state, r.action, repr(r.reward), repr(r.utility_before),
                        repr(r.utility_after), repr(r.utility_next)])
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "EpisodeLog":
        reader = csv.DictReader(io.StringIO(text))
        rows = []
        for d in reader:
            rows.append(LogRow(
                int(d["step"]), int(d["state"]), int(d["action"]), float(d["reward"]),
                float(d["utility_before"]), float(d["utility_after"]), float(d["utility_next"]),
            ))
        return cls(rows)


def td_lambda_return_offline(trajectory: EpisodeLog, t: int, config: TdConfig) -> float:
    """TD(lambda) return from step ``t`` of a finished episode, frozen utilities.

    The successor of the final step is terminal, so its utility is taken as 0.
    """
    n = len(trajectory)
    if not 0 <= t < n:
        raise IndexError(f"step {t} outside trajectory of length {n}")
    gamma, lam = config.gamma, config.lam
    z = 0.0
    for k in range(n - 1, t - 1, -1):
        row = trajectory[k]
        u_next = 0.0 if k == n - 1 else row.utility_next
        z = row.reward + gamma * (lam * z + (1.0 - lam) * u_next)
    return z


def discrepancy_term(trajectory: EpisodeLog, t: int, horizon: int, config: TdConfig) -> float:
    """Finite-horizon online/batch discrepancy D_t for an online run log.

    Sums ``(gamma*lambda)**k * (U_{t+k-1}(x_{t+k}) - U_{t+k}(x_{t+k}))`` for
    k = 1..horizon: the successor utility as read one step earlier minus the
    same state's utility when it is actually visited.
    """
    if horizon < 1:
        raise DomainError("horizon must be positive")
    if t < 0 or t + horizon >= len(trajectory):
        raise InsufficientLog(
            f"need steps up to {t + horizon}, log has {len(trajectory)}"
        )
    gl = config.gamma_lambda
    total = 0.0
    for k in range(1, horizon + 1):
        earlier = trajectory[t + k - 1].utility_next
        at_visit = trajectory[t + k].utility_before
        total += gl**k * (earlier - at_visit)
    return total


def choose_m(gamma_lambda: float, ratio: float = 0.1) -> int:
    """Smallest m with ``gamma_lambda**m < ratio * gamma_lambda``."""
    if not 0.0 < gamma_lambda < 1.0:
        raise DomainError(f"gamma_lambda must be in (0, 1), got {gamma_lambda}")
    if not 0.0 < ratio < 1.0:
        raise DomainError(f"ratio must be in (0, 1), got {ratio}")
    bound = ratio * gamma_lambda
    m = 1
    p = gamma_lambda
    while p >= bound:
        m += 1
        p = gamma_lambda**m
    return m
