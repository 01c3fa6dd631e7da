"""Multi-seed experiment runner and learning-curve metrics."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..environments.car import CarParking
from ..environments.cartpole import CartPole
from ..environments.common import SUCCESS
from ..learners import LearnerConfig, Session
from ..td_core import ConfigError

log = logging.getLogger(__name__)

ENVIRONMENTS = ("car_parking", "cart_pole")
RUN_FIELDS = ("episode", "duration", "total_reward", "avg_reward_per_step", "padded")


class NothingToPad(ValueError):
    pass


def make_environment(name: str, episode_step_cap: Optional[int] = None):
    if name == "car_parking":
        return CarParking(step_cap=episode_step_cap or 1000)
    if name == "cart_pole":
        return CartPole()
    raise ConfigError(f"unknown environment {name!r}; expected one of {ENVIRONMENTS}")


@dataclass
class ExperimentSpec:
    environment: str
    learner: LearnerConfig
    episodes: int
    seeds: list[int]
    step_cap_total: Optional[int] = None
    metric_window: int = 5
    episode_step_cap: Optional[int] = None

    @property
    def runs(self) -> int:
        return len(self.seeds)

    def validate(self) -> None:
        if self.environment not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.environment!r}")
        if self.episodes < 1:
            raise ConfigError("episodes must be positive")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.metric_window < 1:
            raise ConfigError("metric_window must be positive")
        if self.step_cap_total is not None and self.step_cap_total < 1:
            raise ConfigError("step_cap_total must be positive")


@dataclass
class RunMetrics:
    seed: int
    durations: list[int] = field(default_factory=list)
    total_rewards: list[float] = field(default_factory=list)
    outcomes: list[str] = field(default_factory=list)
    padded: list[bool] = field(default_factory=list)
    # set when the total step cap cut an episode short
    interrupted_duration: Optional[int] = None
    total_steps: int = 0

    def record(self, duration: int, total_reward: float, outcome: str, padded: bool = False) -> None:
        self.durations.append(duration)
        self.total_rewards.append(total_reward)
        self.outcomes.append(outcome)
        self.padded.append(padded)

    def __len__(self) -> int:
        return len(self.durations)

    @property
    def avg_reward_per_step(self) -> list[float]:
        return [r / d if d else 0.0 for r, d in zip(self.total_rewards, self.durations)]

    def rolling_reward_per_step(self, window: int = 5) -> list[float]:
        """Reward per step pooled over the previous ``window`` episodes (fewer at the start)."""
        out = []
        for i in range(len(self)):
            lo = max(0, i - window + 1)
            steps = sum(self.durations[lo:i + 1])
            out.append(sum(self.total_rewards[lo:i + 1]) / steps if steps else 0.0)
        return out

    def rolling_duration(self, window: int = 5) -> list[float]:
        out = []
        for i in range(len(self)):
            lo = max(0, i - window + 1)
            out.append(float(np.mean(self.durations[lo:i + 1])))
        return out

    def first_success(self) -> Optional[int]:
        for i, o in enumerate(self.outcomes):
            if o == SUCCESS:
                return i
        return None

    def to_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RUN_FIELDS)
            for i, (d, r, a, p) in enumerate(zip(self.durations, self.total_rewards,
                                                  self.avg_reward_per_step, self.padded)):
                w.writerow([i, d, repr(float(r)), repr(float(a)), int(p)])


def pad_fictitious_episodes(run: RunMetrics, target_episodes: int) -> RunMetrics:
    """Fill a run cut short by the total step cap up to ``target_episodes``.

    The interrupted episode and every later one get the longer of the
    interrupted duration and the last complete episode's duration; with no
    complete episode the interrupted duration is used.
    """
    if run.interrupted_duration is None:
        raise NothingToPad(f"run with seed {run.seed} completed normally")
    interrupted = run.interrupted_duration
    if run.durations and interrupted < run.durations[-1]:
        fill = run.durations[-1]
    else:
        fill = interrupted
    while len(run) < target_episodes:
        run.record(fill, 0.0, "padded", padded=True)
    return run


def run_single(spec: ExperimentSpec, seed: int) -> RunMetrics:
    env = make_environment(spec.environment, spec.episode_step_cap)
    session = Session(spec.learner, env.n_actions, np.random.default_rng(seed))
    run = RunMetrics(seed)
    cap = spec.step_cap_total
    for _ in range(spec.episodes):
        x = env.region(env.reset())
        steps = 0
        total = 0.0
        while True:
            a = session.act(x)
            out = env.step(a)
            steps += 1
            run.total_steps += 1
            total += out.reward
            if out.done:
                session.terminate(out.reward)
                run.record(steps, total, out.terminal)
                break
            x = env.region(out.next_state)
            session.observe(out.reward, x)
            if cap is not None and run.total_steps >= cap:
                run.interrupted_duration = steps
                break
        if run.interrupted_duration is not None:
            break
    if run.interrupted_duration is not None and len(run) < spec.episodes:
        pad_fictitious_episodes(run, spec.episodes)
    return run


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    runs: list[RunMetrics]

    def mean_curve(self, values: str = "avg_reward_per_step") -> np.ndarray:
        """Pointwise mean across runs of a per-episode series."""
        w = self.spec.metric_window
        series = []
        for r in self.runs:
            if values == "avg_reward_per_step":
                series.append(r.avg_reward_per_step)
            elif values == "duration":
                series.append(r.durations)
            elif values == "total_reward":
                series.append(r.total_rewards)
            elif values == "rolling_reward_per_step":
                series.append(r.rolling_reward_per_step(w))
            elif values == "rolling_duration":
                series.append(r.rolling_duration(w))
            else:
                raise ValueError(f"unknown series {values!r}")
        return np.mean(np.asarray(series, dtype=float), axis=0)

    def first_success_episodes(self) -> list[Optional[int]]:
        return [r.first_success() for r in self.runs]

    def mean_first_success(self) -> float:
        """Mean first-success episode; runs that never succeed count as ``episodes``."""
        vals = [fs if fs is not None else self.spec.episodes for fs in self.first_success_episodes()]
        return float(np.mean(vals))

    def write(self, out_dir: Path) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for r in self.runs:
            p = out_dir / f"run_seed{r.seed}.csv"
            r.to_csv(p)
            written.append(p)
        agg = out_dir / "aggregate.csv"
        cols = {
            "mean_duration": self.mean_curve("duration"),
            "mean_total_reward": self.mean_curve("total_reward"),
            "mean_avg_reward_per_step": self.mean_curve("avg_reward_per_step"),
            "mean_window_reward_per_step": self.mean_curve("rolling_reward_per_step"),
            "mean_window_duration": self.mean_curve("rolling_duration"),
        }
        with open(agg, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["episode", *cols])
            for i in range(len(next(iter(cols.values())))):
                w.writerow([i, *(repr(float(c[i])) for c in cols.values())])
        written.append(agg)
        summary = out_dir / "summary.txt"
        lines = [
            f"environment = {self.spec.environment}",
            f"runs = {len(self.runs)}",
            f"episodes = {self.spec.episodes}",
            f"mean_first_success = {self.mean_first_success()!r}",
            f"truncated_runs = {sum(r.interrupted_duration is not None for r in self.runs)}",
            f"max_duration = {max(max(r.durations) for r in self.runs)}",
            f"final_window_mean_duration = {float(self.mean_curve('rolling_duration')[-1])!r}",
            f"final_window_reward_per_step = {float(self.mean_curve('rolling_reward_per_step')[-1])!r}",
        ]
        summary.write_text("\n".join(lines) + "\n")
        written.append(summary)
        return written


def run_experiment(spec: ExperimentSpec, progress: bool = False) -> ExperimentResult:
    """Run every seed in order and collect per-run metrics."""
    spec.validate()
    runs = []
    for i, seed in enumerate(spec.seeds):
        run = run_single(spec, seed)
        if progress:
            log.info("run %d/%d seed=%d episodes=%d steps=%d", i + 1, spec.runs, seed, len(run), run.total_steps)
        runs.append(run)
    return ExperimentResult(spec, runs)
