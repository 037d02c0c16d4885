"""Monte Carlo estimate of the game payoff under threshold strategies.

Within a regime the state is advanced with exact log-normal steps; a switch
happens at the first grid time at which the post-step state enters a
switching region (no Brownian-bridge correction). Running profit is
integrated with the trapezoid rule and costs are discounted at switch times.
Every path draws its normals from its own stream keyed by ``(seed, path)``,
so results do not depend on how paths are split across workers.

``simulate_passage`` is the single-regime counterpart used to check the
first-passage functionals; it does apply the bridge correction.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from switching_game.closedform import Solution
from switching_game.exceptions import SwitchingGameError
from switching_game.model import PAIRS, GameSpec, Player
from switching_game.strategy import Rule, RuleKind, ThresholdStrategy, strategy_from_solution

__all__ = [
    "Estimate",
    "PassageSample",
    "ProbeResult",
    "Rule",
    "RuleKind",
    "SimConfig",
    "ThresholdStrategy",
    "cost_bound_check",
    "dominance_probe",
    "dt_convergence",
    "moment_check",
    "simulate_passage",
    "simulate_payoff",
    "trace_paths",
]

logger = logging.getLogger(__name__)

MAX_TRACES = 100
SCAN_BLOCK = 1024
MIN_DISCOUNTED_HORIZON = 20.0


class SimConfig(BaseModel):
    """Simulation settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    paths: int = Field(10_000, ge=2, description="Number of simulated paths.")
    dt: float = Field(1e-3, gt=0.0, description="Time step.")
    horizon: float | None = Field(
        None, gt=0.0, description="Truncation horizon T; default max(20/r, 50)."
    )
    seed: int = Field(0, ge=0, lt=2**64, description="Root seed of the per-path streams.")
    antithetic: bool = Field(False, description="Pair every path with its mirrored normals.")
    workers: int = Field(1, ge=1, description="Worker processes.")
    chunk: int = Field(256, ge=1, description="Paths per work unit.")
    substeps: int = Field(
        1, ge=1, description="Fine normals summed into each step; couples runs at dt and dt/substeps."
    )

    @model_validator(mode="after")
    def _even_paths(self) -> SimConfig:
        if self.antithetic and self.paths % 2:
            raise ValueError("antithetic sampling needs an even number of paths")
        return self

    def resolved_horizon(self, discount: float) -> float:
        """Horizon in force for a given discount rate."""
        horizon = self.horizon if self.horizon is not None else max(20.0 / discount, 50.0)
        if discount * horizon < MIN_DISCOUNTED_HORIZON:
            raise SwitchingGameError(
                f"discount*horizon = {discount * horizon:.3g} < {MIN_DISCOUNTED_HORIZON:g}; "
                "truncation bias would not be negligible"
            )
        return horizon

    def steps(self, discount: float) -> int:
        """Number of time steps up to the horizon."""
        return max(1, round(self.resolved_horizon(discount) / self.dt))


class Estimate(BaseModel):
    """Sample mean with its standard error."""

    model_config = ConfigDict(frozen=True)

    mean: float
    std_error: float
    paths: int

    def within(self, target: float, n_se: float = 3.0) -> bool:
        """Whether ``target`` lies within ``n_se`` standard errors."""
        return abs(self.mean - target) <= n_se * self.std_error


@dataclass(frozen=True)
class _PathOutcome:
    payoff: float
    paid: float
    received: float
    trace: pd.DataFrame | None = None


def _normals(
    seed: int, path: int, antithetic: bool, n_steps: int, substeps: int = 1
) -> npt.NDArray[np.float64]:
    key, sign = (path // 2, -1.0 if path % 2 else 1.0) if antithetic else (path, 1.0)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, key])))
    draws = sign * rng.standard_normal(n_steps * substeps)
    if substeps == 1:
        return draws
    return draws.reshape(n_steps, substeps).sum(axis=1) / math.sqrt(substeps)


def _simulate_path(
    spec: GameSpec,
    strategy: ThresholdStrategy,
    start: tuple[int, int],
    normals: npt.NDArray[np.float64],
    dt: float,
    record: bool = False,
) -> _PathOutcome:
    r, gamma = spec.discount, spec.gamma
    n_steps = normals.size
    discount = np.exp(-r * dt * np.arange(n_steps + 1))
    walk = np.concatenate(([0.0], np.cumsum(normals)))
    sqrt_dt = math.sqrt(dt)
    step_drift = {p: (spec.b(*p) - 0.5 * spec.sigma(*p) ** 2) * dt for p in PAIRS}
    step_vol = {p: spec.sigma(*p) * sqrt_dt for p in PAIRS}

    x = spec.x0
    i, j, paid, received = strategy.act(spec, *start, x)
    profit = 0.0
    k = 0
    traces: list[pd.DataFrame] = []
    while k < n_steps:
        lo, hi = strategy.continuation(i, j)
        drift, vol = step_drift[(i, j)], step_vol[(i, j)]
        origin, log_origin = k, math.log(x)
        crossed = False
        while k < n_steps and not crossed:
            idx = np.arange(k, min(k + SCAN_BLOCK, n_steps) + 1)
            xs = np.exp(log_origin + drift * (idx - origin) + vol * (walk[idx] - walk[origin]))
            hits = (xs[1:] >= hi) | (xs[1:] <= lo)
            crossed = bool(hits.any())
            end = int(np.argmax(hits)) + 1 if crossed else xs.size - 1
            running = discount[k : k + end + 1] * xs[: end + 1] ** gamma
            increments = 0.5 * dt * (running[:-1] + running[1:])
            if record:
                # windows after the first repeat the previous window's last point
                first = 0 if k == origin else 1
                cumulative = profit - paid + received + np.concatenate(([0.0], np.cumsum(increments)))
                traces.append(
                    pd.DataFrame(
                        {
                            "t": dt * idx[first : end + 1],
                            "X": xs[first : end + 1],
                            "regime_i": i,
                            "regime_j": j,
                            "cumulative_payoff": cumulative[first:],
                        }
                    )
                )
            profit += float(np.sum(increments))
            k += end
            x = float(xs[end])
        if not crossed:
            break
        action = strategy.act(spec, i, j, x)
        i, j = action.i, action.j
        paid += discount[k] * action.paid
        received += discount[k] * action.received
    trace = pd.concat(traces, ignore_index=True) if record else None
    return _PathOutcome(profit - paid + received, paid, received, trace)


def _run_chunk(
    spec: GameSpec,
    strategy: ThresholdStrategy,
    start: tuple[int, int],
    config: SimConfig,
    paths: range,
) -> npt.NDArray[np.float64]:
    n_steps = config.steps(spec.discount)
    out = np.empty((len(paths), 3))
    for row, path in enumerate(paths):
        normals = _normals(config.seed, path, config.antithetic, n_steps, config.substeps)
        outcome = _simulate_path(spec, strategy, start, normals, config.dt)
        out[row] = outcome.payoff, outcome.paid, outcome.received
    logger.debug("Simulated paths %d-%d", paths.start, paths.stop - 1)
    return out


def _run_paths(
    spec: GameSpec, strategy: ThresholdStrategy, start: tuple[int, int], config: SimConfig
) -> npt.NDArray[np.float64]:
    chunks = [
        range(lo, min(lo + config.chunk, config.paths)) for lo in range(0, config.paths, config.chunk)
    ]
    if config.workers == 1:
        parts = [_run_chunk(spec, strategy, start, config, chunk) for chunk in chunks]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(
                pool.map(
                    _run_chunk,
                    [spec] * len(chunks),
                    [strategy] * len(chunks),
                    [start] * len(chunks),
                    [config] * len(chunks),
                    chunks,
                )
            )
    return np.concatenate(parts)


def _estimate(samples: npt.NDArray[np.float64], antithetic: bool) -> Estimate:
    if antithetic:
        samples = 0.5 * (samples[0::2] + samples[1::2])
    n = samples.size
    return Estimate(
        mean=float(np.mean(samples)),
        std_error=float(np.std(samples, ddof=1) / math.sqrt(n)),
        paths=n,
    )


def simulate_payoff(
    spec: GameSpec,
    strategy: ThresholdStrategy,
    config: SimConfig | None = None,
    start: tuple[int, int] = (1, 1),
) -> Estimate:
    """Estimate the payoff of ``strategy`` from ``(start, x0)``."""
    config = config or SimConfig()
    samples = _run_paths(spec, strategy, start, config)[:, 0]
    estimate = _estimate(samples, config.antithetic)
    logger.info(
        "Simulated %d paths from regime %s: %.8g ± %.2g",
        config.paths,
        start,
        estimate.mean,
        estimate.std_error,
    )
    return estimate


class CostBounds(BaseModel):
    """Extremes of the per-path discounted cost sums and their bounds."""

    model_config = ConfigDict(frozen=True)

    worst_gain_max: float = Field(..., description="Largest -sum e^{-rt} c over paths.")
    bound_max: float = Field(..., description="max_k -c(i0, k), k ranging over both regimes.")
    worst_gain_min: float = Field(..., description="Smallest sum e^{-rt} chi over paths.")
    bound_min: float = Field(..., description="min_l chi(j0, l), l ranging over both regimes.")

    @property
    def ok(self) -> bool:
        """Whether both bounds hold on every path."""
        return self.worst_gain_max <= self.bound_max + 1e-12 and self.worst_gain_min >= self.bound_min - 1e-12


def cost_bound_check(
    spec: GameSpec,
    strategy: ThresholdStrategy,
    config: SimConfig | None = None,
    start: tuple[int, int] = (1, 1),
) -> CostBounds:
    """Check the discounted switching-cost bounds on every simulated path."""
    config = config or SimConfig()
    out = _run_paths(spec, strategy, start, config)
    i0, j0 = start
    return CostBounds(
        worst_gain_max=float(np.max(-out[:, 1])),
        bound_max=max(0.0, -spec.c(i0, 3 - i0)),
        worst_gain_min=float(np.min(out[:, 2])),
        bound_min=min(0.0, spec.chi(j0, 3 - j0)),
    )


def trace_paths(
    spec: GameSpec,
    strategy: ThresholdStrategy,
    config: SimConfig | None = None,
    start: tuple[int, int] = (1, 1),
    count: int = 10,
) -> pd.DataFrame:
    """Per-step traces ``t, X, regime_i, regime_j, cumulative_payoff`` of the first paths."""
    config = config or SimConfig()
    if count > MAX_TRACES:
        logger.warning("Trace dump capped at %d paths (requested %d)", MAX_TRACES, count)
    count = min(count, MAX_TRACES, config.paths)
    n_steps = config.steps(spec.discount)
    frames = []
    for path in range(count):
        normals = _normals(config.seed, path, config.antithetic, n_steps, config.substeps)
        trace = _simulate_path(spec, strategy, start, normals, config.dt, record=True).trace
        assert trace is not None
        frames.append(trace.assign(path=path))
    frame = pd.concat(frames, ignore_index=True)
    return frame[["path", "t", "X", "regime_i", "regime_j", "cumulative_payoff"]]


class MomentCheck(BaseModel):
    """Sample mean of X_t against the growth bound e^{rho t} (1 + x0)."""

    model_config = ConfigDict(frozen=True)

    t: float
    mean: float
    std_error: float
    bound: float

    @property
    def ok(self) -> bool:
        """Whether the bound holds up to three standard errors."""
        return self.mean <= self.bound + 3.0 * self.std_error


def moment_check(
    spec: GameSpec,
    strategy: ThresholdStrategy,
    config: SimConfig | None = None,
    start: tuple[int, int] = (1, 1),
    times: tuple[float, ...] = (1.0, 5.0),
) -> list[MomentCheck]:
    """Compare simulated first moments of the state with the growth estimate."""
    config = config or SimConfig()
    n_steps = config.steps(spec.discount)
    indices = [min(n_steps, round(t / config.dt)) for t in times]
    samples = np.empty((config.paths, len(times)))
    for path in range(config.paths):
        normals = _normals(config.seed, path, config.antithetic, n_steps, config.substeps)
        trace = _simulate_path(spec, strategy, start, normals, config.dt, record=True).trace
        assert trace is not None
        # segments share their end points; keep the post-switch copy
        xs = trace.drop_duplicates(subset="t", keep="last")["X"].to_numpy()
        samples[path] = xs[indices]
    rho = max(spec.b(*p) for p in PAIRS)
    return [
        MomentCheck(
            t=t,
            mean=float(np.mean(samples[:, n])),
            std_error=float(np.std(samples[:, n], ddof=1) / math.sqrt(config.paths)),
            bound=math.exp(rho * t) * (1.0 + spec.x0),
        )
        for n, t in enumerate(times)
    ]


def dt_convergence(
    spec: GameSpec,
    strategy: ThresholdStrategy,
    config: SimConfig | None = None,
    start: tuple[int, int] = (1, 1),
) -> tuple[Estimate, Estimate]:
    """Estimates at ``dt`` and ``dt / 2`` driven by the same Brownian paths.

    The coarse run sums pairs of the fine run's normals, so the difference of
    the two means reflects discretisation rather than sampling noise.
    """
    config = config or SimConfig()
    coarse = simulate_payoff(
        spec, strategy, config.model_copy(update={"substeps": 2 * config.substeps}), start
    )
    fine = simulate_payoff(spec, strategy, config.model_copy(update={"dt": config.dt / 2}), start)
    return coarse, fine


class ProbeResult(BaseModel):
    """One deviation of one player from the equilibrium strategy."""

    model_config = ConfigDict(frozen=True)

    player: Player | None
    deviation: str
    estimate: float
    std_error: float
    value: float
    ok: bool


def dominance_probe(
    spec: GameSpec,
    solution: Solution,
    config: SimConfig | None = None,
    perturbations: tuple[float, ...] = (0.9, 1.1),
    start: tuple[int, int] = (1, 1),
) -> list[ProbeResult]:
    """Check that no unilateral threshold deviation pays off beyond three standard errors.

    Player I deviating must not raise the payoff above ``v`` and player II
    deviating must not push it below ``v``. A player without thresholds
    deviates by swapping "never" and "always switch" in its starting regime.
    """
    config = config or SimConfig()
    strategy = strategy_from_solution(solution)
    value = float(solution.value(*start, spec.x0))
    baseline = simulate_payoff(spec, strategy, config, start)
    results = [
        ProbeResult(
            player=None,
            deviation="none",
            estimate=baseline.mean,
            std_error=baseline.std_error,
            value=value,
            ok=baseline.within(value),
        )
    ]
    for player in (Player.MAX, Player.MIN):
        if strategy.has_thresholds(player):
            deviations = {f"x{factor:g}": strategy.scaled(player, factor) for factor in perturbations}
        else:
            own = start[0] if player is Player.MAX else start[1]
            deviations = {"flip": strategy.flipped(player, own)}
        for label, deviated in deviations.items():
            est = simulate_payoff(spec, deviated, config, start)
            slack = 3.0 * est.std_error
            ok = est.mean <= value + slack if player is Player.MAX else est.mean >= value - slack
            if not ok:
                logger.warning("Deviation %s of %s improves on the value", label, player.value)
            results.append(
                ProbeResult(
                    player=player,
                    deviation=label,
                    estimate=est.mean,
                    std_error=est.std_error,
                    value=value,
                    ok=ok,
                )
            )
    return results


@dataclass(frozen=True)
class PassageSample:
    """Per-path outcome of a run up to the first exit from ``(lo, hi)``.

    ``discount`` is ``exp(-r tau)`` (zero on paths that never exit before the
    horizon), ``upper`` flags exits through ``hi`` and ``profit`` is the
    discounted running profit collected before the exit.
    """

    discount: npt.NDArray[np.float64]
    upper: npt.NDArray[np.bool_]
    profit: npt.NDArray[np.float64]

    def estimate(self, samples: npt.NDArray[np.float64]) -> Estimate:
        """Mean and standard error of a per-path quantity."""
        return _estimate(np.asarray(samples, dtype=float), antithetic=False)


def simulate_passage(
    spec: GameSpec,
    i: int,
    j: int,
    x: float,
    lo: float,
    hi: float,
    config: SimConfig | None = None,
    stream: int = 0,
) -> PassageSample:
    """Simulate regime ``(i, j)`` from ``x`` until it leaves ``(lo, hi)``.

    ``lo = 0`` and ``hi = inf`` are never reached. Crossings between grid
    times are detected with the Brownian-bridge probability, so the
    estimates converge at the rate of the exit-time interpolation. Paths are
    advanced together from one generator keyed by ``(seed, stream)``.
    """
    config = config or SimConfig()
    if not lo < x < hi:
        raise SwitchingGameError(f"start x={x} must lie strictly inside ({lo}, {hi})")
    r, gamma, dt = spec.discount, spec.gamma, config.dt
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, stream])))
    log_lo = math.log(lo) if lo > 0.0 else -math.inf
    log_hi = math.log(hi) if math.isfinite(hi) else math.inf
    drift = (spec.b(i, j) - 0.5 * spec.sigma(i, j) ** 2) * dt
    vol = spec.sigma(i, j) * math.sqrt(dt)
    var = vol * vol

    n = config.paths
    y = np.full(n, math.log(x))
    alive = np.ones(n, dtype=bool)
    discount = np.zeros(n)
    upper = np.zeros(n, dtype=bool)
    profit = np.zeros(n)
    n_steps = config.steps(r)
    for k in range(n_steps):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        y0 = y[idx]
        y1 = y0 + drift + vol * rng.standard_normal(idx.size)
        u = rng.random(idx.size)
        over, under = y1 >= log_hi, y1 <= log_lo
        with np.errstate(invalid="ignore", over="ignore"):
            p_hi = np.where(over, 1.0, np.exp(-2.0 * (log_hi - y0) * (log_hi - y1) / var))
            p_lo = np.where(under, 1.0, np.exp(-2.0 * (y0 - log_lo) * (y1 - log_lo) / var))
        p_hi = np.where(under, 0.0, np.nan_to_num(p_hi))
        p_lo = np.where(over, 0.0, np.nan_to_num(p_lo))
        exit_hi = u < p_hi
        exit_lo = ~exit_hi & (u < p_hi + p_lo)
        out = exit_hi | exit_lo

        t0 = k * dt
        run0 = math.exp(-r * t0) * np.exp(gamma * y0)
        stay = ~out
        run1 = math.exp(-r * (t0 + dt)) * np.exp(gamma * y1[stay])
        profit[idx[stay]] += 0.5 * dt * (run0[stay] + run1)
        y[idx[stay]] = y1[stay]

        if out.any():
            level = np.where(exit_hi[out], log_hi, log_lo)
            step = y1[out] - y0[out]
            crossed = over[out] | under[out]
            # linear in log when the end point is past the barrier, midpoint for bridge-only exits
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(crossed, (level - y0[out]) / step, 0.5)
            frac = np.clip(frac, 0.0, 1.0)
            t_exit = t0 + frac * dt
            weight = np.exp(-r * t_exit)
            profit[idx[out]] += 0.5 * frac * dt * (run0[out] + weight * np.exp(gamma * level))
            discount[idx[out]] = weight
            upper[idx[out]] = exit_hi[out]
            alive[idx[out]] = False
    logger.debug(
        "Passage of regime (%d, %d) from %.4g out of (%.4g, %.4g): %d of %d paths exited",
        i,
        j,
        x,
        lo,
        hi,
        int(np.count_nonzero(~alive)),
        n,
    )
    return PassageSample(discount=discount, upper=upper, profit=profit)
