"""Test the Monte Carlo payoff estimator."""

import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from switching_game import montecarlo
from switching_game.classify import CostCondition, OrderCase
from switching_game.closedform import solve
from switching_game.exceptions import SwitchingGameError
from switching_game.model import GameSpec, derive
from switching_game.montecarlo import (
    SimConfig,
    ThresholdStrategy,
    _normals,
    _run_paths,
    _simulate_path,
    cost_bound_check,
    dominance_probe,
    dt_convergence,
    moment_check,
    simulate_payoff,
    trace_paths,
)
from switching_game.strategy import Rule, RuleKind, strategy_from_solution
from tests.conftest import cell_spec

FAST = SimConfig(paths=2000, dt=1e-2, horizon=20.0, seed=3)
NEVER = ThresholdStrategy.per_regime(max_rules={}, min_rules={})


def test_never_switching_matches_no_switch_value(eq_b1: GameSpec) -> None:
    estimate = simulate_payoff(eq_b1, NEVER, FAST)
    assert estimate.within(derive(eq_b1, 1, 1).K * eq_b1.x0**0.5)


def test_deterministic_limit(eq_b1: GameSpec) -> None:
    spec = eq_b1.model_copy(update={"vol": ((1e-8, 1e-8), (1e-8, 1e-8)), "x0": 4.0})
    estimate = simulate_payoff(spec, NEVER, SimConfig(paths=4, dt=1e-2, horizon=40.0))
    assert estimate.mean == pytest.approx(2.0, rel=1e-4)


def test_immediate_switches() -> None:
    spec = cell_spec(OrderCase.EQ, CostCondition.B4)
    strategy = strategy_from_solution(solve(spec))
    estimate = simulate_payoff(spec, strategy, FAST)
    expected = derive(spec, 1, 1).K - spec.c(1, 2) + spec.chi(1, 2)
    assert estimate.within(expected)


def test_single_threshold_value(row_lt_b1: GameSpec) -> None:
    solution = solve(row_lt_b1)
    estimate = simulate_payoff(row_lt_b1, strategy_from_solution(solution), FAST)
    assert estimate.within(float(solution.value(1, 1, row_lt_b1.x0)))


def test_reproducible_across_workers(row_gt_b2: GameSpec) -> None:
    strategy = strategy_from_solution(solve(row_gt_b2))
    config = SimConfig(paths=200, dt=1e-2, horizon=20.0, seed=9, chunk=50)
    serial = _run_paths(row_gt_b2, strategy, (1, 1), config)
    parallel = _run_paths(row_gt_b2, strategy, (1, 1), config.model_copy(update={"workers": 2}))
    assert np.array_equal(serial, parallel)
    assert np.array_equal(serial, _run_paths(row_gt_b2, strategy, (1, 1), config))


def test_antithetic_pairs(eq_b1: GameSpec) -> None:
    config = FAST.model_copy(update={"antithetic": True})
    estimate = simulate_payoff(eq_b1, NEVER, config)
    assert estimate.paths == FAST.paths // 2
    assert estimate.within(derive(eq_b1, 1, 1).K)
    with pytest.raises(ValidationError, match="even"):
        SimConfig(paths=3, antithetic=True)


def test_short_horizon_rejected(eq_b1: GameSpec) -> None:
    with pytest.raises(SwitchingGameError, match="truncation"):
        simulate_payoff(eq_b1, NEVER, SimConfig(paths=2, dt=1e-2, horizon=5.0))


@pytest.mark.parametrize(
    ("case", "condition"),
    [(OrderCase.ROW_GT, CostCondition.B2), (OrderCase.EQ, CostCondition.B4)],
)
def test_discounted_cost_bounds(case: OrderCase, condition: CostCondition) -> None:
    spec = cell_spec(case, condition)
    bounds = cost_bound_check(spec, strategy_from_solution(solve(spec)), FAST.model_copy(update={"paths": 300}))
    assert bounds.ok


def test_moment_estimate(row_gt_b2: GameSpec) -> None:
    strategy = strategy_from_solution(solve(row_gt_b2))
    checks = moment_check(row_gt_b2, strategy, FAST.model_copy(update={"paths": 500}))
    assert [check.t for check in checks] == [1.0, 5.0]
    assert all(check.ok for check in checks)


def test_traces(row_lt_b1: GameSpec) -> None:
    strategy = strategy_from_solution(solve(row_lt_b1))
    frame = trace_paths(row_lt_b1, strategy, FAST, count=500)
    assert list(frame.columns) == ["path", "t", "X", "regime_i", "regime_j", "cumulative_payoff"]
    assert frame["path"].nunique() == 100
    first = frame[frame["path"] == 0]
    assert first["t"].iloc[0] == 0.0
    assert first["X"].iloc[0] == row_lt_b1.x0


def test_halving_dt(eq_b1: GameSpec, row_lt_b1: GameSpec) -> None:
    coarse, fine = dt_convergence(eq_b1, NEVER, FAST)
    assert abs(coarse.mean - fine.mean) < min(coarse.std_error, fine.std_error)
    strategy = strategy_from_solution(solve(row_lt_b1))
    coarse, fine = dt_convergence(row_lt_b1, strategy, FAST.model_copy(update={"paths": 500}))
    assert abs(coarse.mean - fine.mean) < min(coarse.std_error, fine.std_error)


def test_coarse_steps_sum_fine_normals() -> None:
    fine = _normals(4, 7, False, 10)
    coarse = _normals(4, 7, False, 5, substeps=2)
    assert coarse == pytest.approx((fine[0::2] + fine[1::2]) / np.sqrt(2.0), rel=1e-15)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["row_lt_b1", "row_gt_b2"])
def test_halving_dt_fine_grid(name: str, request: pytest.FixtureRequest) -> None:
    spec = request.getfixturevalue(name)
    strategy = strategy_from_solution(solve(spec))
    config = SimConfig(paths=10_000, dt=1e-3, horizon=20.0, seed=11, workers=4)
    coarse, fine = dt_convergence(spec, strategy, config)
    assert abs(coarse.mean - fine.mean) < min(coarse.std_error, fine.std_error)


def test_no_profitable_deviation(row_lt_b1: GameSpec) -> None:
    results = dominance_probe(row_lt_b1, solve(row_lt_b1), FAST)
    deviations = [result for result in results if result.player is not None]
    assert {result.deviation for result in deviations} == {"x0.9", "x1.1", "flip"}
    assert all(result.ok for result in deviations)


def test_rule_continuation_with_always() -> None:
    strategy = ThresholdStrategy.per_regime(max_rules={1: Rule(kind=RuleKind.ALWAYS)}, min_rules={})
    assert strategy.continuation(1, 1) == (0.0, 0.0)


@pytest.mark.parametrize("x0", ["below", "between", "above"])
def test_two_threshold_value(row_gt_b2: GameSpec, x0: str) -> None:
    solution = solve(row_gt_b2)
    x_a, x_b = solution.finite_thresholds()[0], solution.finite_thresholds()[-1]
    x, start = {"below": (0.5 * x_a, (1, 1)), "between": (np.sqrt(x_a * x_b), (1, 1)), "above": (2.0 * x_b, (2, 1))}[x0]
    spec = row_gt_b2.model_copy(update={"x0": float(x)})
    estimate = simulate_payoff(spec, strategy_from_solution(solution), FAST, start)
    assert estimate.within(float(solution.value(*start, x)))


def test_no_profitable_deviation_two_thresholds(row_gt_b2: GameSpec) -> None:
    results = dominance_probe(row_gt_b2, solve(row_gt_b2), FAST)
    deviations = [result for result in results if result.player is not None]
    assert {result.deviation for result in deviations} == {"x0.9", "x1.1", "flip"}
    assert all(result.ok for result in deviations)


def _stepwise_payoff(
    spec: GameSpec, strategy: ThresholdStrategy, start: tuple[int, int], normals: np.ndarray, dt: float
) -> float:
    r, gamma = spec.discount, spec.gamma
    x = spec.x0
    i, j, paid, received = strategy.act(spec, *start, x)
    profit = 0.0
    for k, z in enumerate(normals):
        sigma = spec.sigma(i, j)
        step = x * math.exp((spec.b(i, j) - 0.5 * sigma**2) * dt + sigma * math.sqrt(dt) * z)
        profit += 0.5 * dt * (math.exp(-r * k * dt) * x**gamma + math.exp(-r * (k + 1) * dt) * step**gamma)
        x = step
        lo, hi = strategy.continuation(i, j)
        if x >= hi or x <= lo:
            action = strategy.act(spec, i, j, x)
            i, j = action.i, action.j
            paid += math.exp(-r * (k + 1) * dt) * action.paid
            received += math.exp(-r * (k + 1) * dt) * action.received
    return profit - paid + received


def test_path_matches_stepwise_loop(row_gt_b2: GameSpec, monkeypatch: pytest.MonkeyPatch) -> None:
    strategy = strategy_from_solution(solve(row_gt_b2))
    dt = 1e-2
    payoffs = []
    for path in range(5):
        normals = _normals(2, path, False, 2000)
        expected = _stepwise_payoff(row_gt_b2, strategy, (1, 1), normals, dt)
        payoff = _simulate_path(row_gt_b2, strategy, (1, 1), normals, dt).payoff
        assert payoff == pytest.approx(expected, rel=1e-9)
        payoffs.append(payoff)
    monkeypatch.setattr(montecarlo, "SCAN_BLOCK", 7)
    for path, payoff in enumerate(payoffs):
        normals = _normals(2, path, False, 2000)
        assert _simulate_path(row_gt_b2, strategy, (1, 1), normals, dt).payoff == pytest.approx(payoff, rel=1e-12)


def test_traces_do_not_depend_on_scan_block(row_gt_b2: GameSpec, monkeypatch: pytest.MonkeyPatch) -> None:
    strategy = strategy_from_solution(solve(row_gt_b2))
    reference = trace_paths(row_gt_b2, strategy, FAST, count=3)
    monkeypatch.setattr(montecarlo, "SCAN_BLOCK", 5)
    pd.testing.assert_frame_equal(trace_paths(row_gt_b2, strategy, FAST, count=3), reference, rtol=1e-12)
    steps = reference[reference["path"] == 0]["t"].diff().dropna()
    assert (steps >= 0.0).all()
