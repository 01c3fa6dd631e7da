"""Randomized self-checks of the TD core against direct evaluations of its sums.

Every check compares a production code path with a term-by-term evaluation
written independently here, so the report is meaningful on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..learners import TabularFunction
from ..td_core import (
    EpisodeLog,
    ExperienceBuffer,
    ExperienceRecord,
    TdConfig,
    TraceTable,
    incremental_step,
    resync,
    stable_resync_period,
    td0_error,
    td_lambda_return_offline,
    trace_update,
    traces_learning_step,
    ttd_return_iterative,
)


def relative_deviation(a: float, b: float) -> float:
    # relative to |b| once it exceeds 1, absolute below that
    return abs(a - b) / max(abs(b), 1.0)


def closed_form_ttd_return(rewards, utilities, gamma: float, lam: float) -> float:
    """TTD(lambda, m) return as the explicit weighted sum, inputs oldest-first."""
    m = len(rewards)
    gl = gamma * lam
    z = 0.0
    for k in range(m):
        z += gl**k * (rewards[k] + gamma * (1.0 - lam) * utilities[k])
    return z + gl**m * utilities[m - 1]


def buffer_from_oldest_first(rewards, utilities, states=None) -> ExperienceBuffer:
    m = len(rewards)
    states = states if states is not None else [0] * m
    buf = ExperienceBuffer(m)
    for s, r, u in zip(states, rewards, utilities):
        buf.push(ExperienceRecord(int(s), 0, float(r), float(u)))
    return buf


@dataclass
class FrozenTrajectory:
    states: list[int]
    rewards: list[float]
    U: dict  # frozen utility per state; the terminal successor has utility 0

    def successor_utility(self, t: int) -> float:
        return 0.0 if t + 1 >= len(self.states) else self.U[self.states[t + 1]]

    def log(self) -> EpisodeLog:
        lg = EpisodeLog()
        for t, (s, r) in enumerate(zip(self.states, self.rewards)):
            u = self.U[s]
            lg.append(s, 0, r, u, u, self.successor_utility(t))
        return lg


def random_trajectory(rng: np.random.Generator, max_len: int = 50, max_states: int = 10) -> FrozenTrajectory:
    n_states = int(rng.integers(1, max_states + 1))
    length = int(rng.integers(1, max_len + 1))
    states = [int(s) for s in rng.integers(0, n_states, size=length)]
    rewards = [float(r) for r in rng.uniform(-1, 1, size=length)]
    U = {s: float(rng.uniform(-2, 2)) for s in range(n_states)}
    return FrozenTrajectory(states, rewards, U)


def td0_errors(traj: FrozenTrajectory, gamma: float) -> list[float]:
    return [td0_error(r, traj.successor_utility(t), traj.U[s], gamma)
            for t, (s, r) in enumerate(zip(traj.states, traj.rewards))]


def lambda_error_attribution(traj: FrozenTrajectory, gamma: float, lam: float) -> dict:
    """Per-state sums of TD(lambda) errors, each credited to the state visited at its step."""
    d0 = td0_errors(traj, gamma)
    gl = gamma * lam
    L = len(d0)
    totals: dict = {}
    for t in range(L):
        err = sum(gl**k * d0[t + k] for k in range(L - t))
        totals[traj.states[t]] = totals.get(traj.states[t], 0.0) + err
    return totals


def traces_batch_totals(traj: FrozenTrajectory, config: TdConfig) -> dict:
    """Accumulate eligibility-trace updates over the trajectory without applying them."""
    d0 = td0_errors(traj, config.gamma)
    traces = TraceTable()
    totals = TabularFunction("state")
    for s, err in zip(traj.states, d0):
        trace_update(traces, s, config)
        traces_learning_step(totals, traces, err, 1.0)
    return dict(totals.table)


def ttd_return_window(traj: FrozenTrajectory, t: int, m: int, config: TdConfig) -> float:
    """z^{lambda,m}_t on a frozen trajectory; windows past the end stop at the terminal state."""
    end = min(t + m, len(traj.states))
    rewards = traj.rewards[t:end]
    utils = [traj.successor_utility(k) for k in range(t, end)]
    buf = buffer_from_oldest_first(rewards, utils, traj.states[t:end])
    cfg = TdConfig(gamma=config.gamma, lam=config.lam, m=len(rewards))
    return ttd_return_iterative(buf, cfg)


@dataclass
class CheckResult:
    name: str
    tolerance: float
    max_deviation: float = 0.0
    cases: int = 0
    failures: int = 0

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def add(self, deviation: float, limit: float | None = None) -> None:
        limit = self.tolerance if limit is None else limit
        self.cases += 1
        if not deviation <= limit:  # also catches nan
            self.failures += 1
        if deviation > self.max_deviation or deviation != deviation:
            self.max_deviation = deviation


@dataclass
class EquivalenceReport:
    trials: int
    seed: int
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [f"equivalence report: trials={self.trials} seed={self.seed}"]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            out.append(f"{status} {c.name}: cases={c.cases} max_dev={c.max_deviation:.3e} tol={c.tolerance:g}")
        out.append("OK" if self.passed else "FAILED")
        return out


def check_incremental(rng: np.random.Generator, steps: int, result: CheckResult,
                      gamma_lambda: float | None = None, m: int | None = None,
                      resync_period: int | None = None) -> None:
    """Drive the incremental accumulators along a random stream and compare every step."""
    if gamma_lambda is None:
        gamma_lambda = float(rng.uniform(0.3, 0.99))
    if m is None:
        m = int(rng.integers(2, 201))
    gamma = float(rng.uniform(max(gamma_lambda, 0.5), 1.0)) if gamma_lambda < 1 else 1.0
    gamma = max(gamma, gamma_lambda)
    lam = gamma_lambda / gamma
    cfg = TdConfig(gamma=gamma, lam=lam, m=m, engine="incremental")
    period = resync_period or stable_resync_period(cfg.gamma_lambda)
    buf = ExperienceBuffer(m)
    for _ in range(m):
        buf.push(ExperienceRecord(0, 0, float(rng.normal()), float(rng.normal())))
    state = resync(buf, cfg)
    since = 0
    worst = 0.0
    for _ in range(steps):
        rec = ExperienceRecord(0, 0, float(rng.normal()), float(rng.normal()))
        gone = buf.push(rec)
        if since + 1 >= period:
            state = resync(buf, cfg)
            since = 0
        else:
            state = incremental_step(state, gone.reward, gone.stored_utility, rec.reward, rec.stored_utility, cfg)
            since += 1
        dev = relative_deviation(state.value, ttd_return_iterative(buf, cfg))
        if not dev <= worst:
            worst = dev
    result.add(worst)


def equivalence_report(trials: int = 1000, seed: int = 0, stream_steps: int = 200) -> EquivalenceReport:
    """Run the TD-core invariant suite on ``trials`` random cases."""
    rng = np.random.default_rng(seed)
    report = EquivalenceReport(trials, seed)
    closed = CheckResult("recursion_vs_closed_form", 1e-12)
    incr = CheckResult("incremental_vs_iterative", 1e-9)
    batch = CheckResult("traces_batch_vs_lambda_attribution", 1e-9)
    bound = CheckResult("truncation_bound_ratio", 1.0)
    traces_cf = CheckResult("trace_closed_form", 1e-12)
    offline = CheckResult("offline_return_vs_full_window", 1e-12)
    if trials > 0:
        report.checks = [closed, incr, batch, bound, traces_cf, offline]
    for _ in range(trials):
        # closed form vs backward recursion
        m = int(rng.integers(1, 60))
        gamma, lam = float(rng.uniform(0, 1)), float(rng.uniform(0, 1))
        rewards = rng.normal(size=m).tolist()
        utils = rng.normal(size=m).tolist()
        buf = buffer_from_oldest_first(rewards, utils)
        z = ttd_return_iterative(buf, TdConfig(gamma=gamma, lam=lam, m=m))
        closed.add(relative_deviation(z, closed_form_ttd_return(rewards, utils, gamma, lam)))

        check_incremental(rng, stream_steps, incr)

        traj = random_trajectory(rng)
        gamma = float(rng.uniform(0.5, 0.99))
        lam = float(rng.uniform(0, 1))
        cfg = TdConfig(gamma=gamma, lam=lam, m=1)
        got = traces_batch_totals(traj, cfg)
        want = lambda_error_attribution(traj, gamma, lam)
        batch.add(max(relative_deviation(got.get(s, 0.0), v) for s, v in want.items()))

        gl = gamma * lam
        r_max = max(abs(r) for r in traj.rewards)
        u_max = max(abs(u) for u in traj.U.values())
        lg = traj.log()
        for mm in (1, 5, 25):
            limit = gl**mm * (r_max / (1 - gl) + u_max * (1 + gamma))
            for t in range(len(traj.states)):
                gap = abs(td_lambda_return_offline(lg, t, cfg) - ttd_return_window(traj, t, mm, cfg))
                # gap as a fraction of the bound, with rounding slack
                bound.add(gap / (limit + 1e-12 * (1 + r_max + u_max) * len(traj.states)))
        for t in range(len(traj.states)):
            full = ttd_return_window(traj, t, len(traj.states) - t, cfg)
            offline.add(relative_deviation(td_lambda_return_offline(lg, t, cfg), full))

        traces = TraceTable()
        for s in traj.states:
            trace_update(traces, s, cfg)
        T = len(traj.states) - 1
        for x in set(traj.states):
            cf = sum(gl ** (T - k) for k, s in enumerate(traj.states) if s == x)
            traces_cf.add(relative_deviation(traces[x], cf))
    return report
