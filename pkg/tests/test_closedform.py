"""Test the explicit solutions."""

import numpy as np
import pytest

from switching_game.classify import CostCondition, OrderCase
from switching_game.closedform import (
    RegionKind,
    Solution,
    build,
    closed_form_guess,
    lambda_residual,
    linear_growth_constant,
    solve,
    solve_lambda,
    solve_single_threshold,
    solve_two_threshold,
    two_threshold_residuals,
)
from switching_game.exceptions import ClassificationError, ThresholdSolveError
from switching_game.model import PAIRS, GameSpec, Player, characteristic_roots, derive
from tests.conftest import CELLS, cell_spec

XS = np.geomspace(0.01, 100.0, 57)


def test_eq_b1_never_switches(eq_b1: GameSpec) -> None:
    solution = solve(eq_b1)
    k = derive(eq_b1, 1, 1).K
    for i, j in PAIRS:
        assert np.allclose(solution.value(i, j, XS), k * XS**0.5, rtol=1e-14)
        assert solution.region(Player.MAX, i, j).kind is RegionKind.EMPTY
        assert solution.region(Player.MIN, i, j).kind is RegionKind.EMPTY


def test_eq_b4_constant_shifts() -> None:
    spec = cell_spec(OrderCase.EQ, CostCondition.B4)
    solution = solve(spec)
    v_hat = derive(spec, 1, 1).K * XS**0.5
    c12, chi12 = spec.c(1, 2), spec.chi(1, 2)
    assert np.allclose(solution.value(1, 1, XS), v_hat - c12 + chi12, rtol=1e-13)
    assert np.allclose(solution.value(1, 2, XS), v_hat - c12, rtol=1e-13)
    assert np.allclose(solution.value(2, 1, XS), v_hat + chi12, rtol=1e-13)
    assert np.allclose(solution.value(2, 2, XS), v_hat, rtol=1e-13)
    assert solution.region(Player.MAX, 1, 1).kind is RegionKind.ALL
    assert solution.region(Player.MIN, 2, 1).kind is RegionKind.ALL


def test_single_threshold_hand_value() -> None:
    x_star, coef = solve_single_threshold(0.2, 0.3, 2.0, 0.5, 0.15)
    assert x_star == pytest.approx(4.0, rel=1e-14)
    # value matching and smooth fit at x*
    assert 0.2 * 2.0 + coef * 16.0 == pytest.approx(0.3 * 2.0 - 0.15, rel=1e-13)
    assert 0.2 * 0.25 + 2 * coef * 4.0 == pytest.approx(0.3 * 0.25, rel=1e-13)


def test_single_threshold_vanishes_with_cost() -> None:
    thresholds = [solve_single_threshold(0.2, 0.3, 2.0, 0.5, c)[0] for c in (1e-2, 1e-4, 1e-6)]
    assert thresholds == sorted(thresholds, reverse=True)
    assert thresholds[-1] < 1e-8
    with pytest.raises(ThresholdSolveError):
        solve_single_threshold(0.2, 0.3, 2.0, 0.5, 0.0)


def test_row_lt_b1_threshold() -> None:
    spec = GameSpec(
        drift=((0.0, 0.0), (0.05, 0.05)),
        vol=((1.0, 1.0), (1.0, 1.0)),
        discount=1.0,
        gamma=0.5,
        cost_max=((0.0, 0.2), (0.3, 0.0)),
        cost_min=((0.0, 0.2), (0.3, 0.0)),
    )
    solution = solve(spec)
    assert solution.case is OrderCase.ROW_LT
    k11, k21 = derive(spec, 1, 1).K, derive(spec, 2, 1).K
    m = derive(spec, 1, 1).m_plus
    x_star = solution.thresholds["x_star"]
    assert (k21 - k11) * x_star**0.5 == pytest.approx(m * 0.2 / (m - 0.5), rel=1e-12)
    assert solution.region(Player.MAX, 1, 1).kind is RegionKind.ABOVE
    pv = solution.pv(1, 1)
    for order in (0, 1):
        left, right = pv.one_sided(x_star, order)
        assert abs(left - right) < 1e-10


def test_lambda_equation_random() -> None:
    rng = np.random.default_rng(11)
    for _ in range(200):
        gamma = rng.uniform(0.2, 0.8)
        r = rng.uniform(0.5, 1.5)
        m_plus, _ = characteristic_roots(rng.uniform(-0.2, 0.2), rng.uniform(0.5, 1.5), r)
        _, m_minus = characteristic_roots(rng.uniform(-0.2, 0.2), rng.uniform(0.5, 1.5), r)
        c21 = rng.uniform(0.1, 1.0)
        c12 = -c21 * rng.uniform(0.05, 0.95)
        lam = solve_lambda(m_plus, m_minus, gamma, c12, c21)
        assert 0.0 < lam < (-c12 / c21) ** (1.0 / m_plus)
        assert abs(lambda_residual(lam, m_plus, m_minus, gamma, c12, c21)) < 1e-12


def test_lambda_needs_negative_cost() -> None:
    with pytest.raises(ThresholdSolveError):
        solve_lambda(2.0, -1.0, 0.5, 0.1, 0.3)


@pytest.mark.parametrize(
    ("case", "condition"),
    [
        (OrderCase.ROW_GT, CostCondition.B2),
        (OrderCase.ROW_GT, CostCondition.B4),
        (OrderCase.COL_LT, CostCondition.B3),
        (OrderCase.COL_LT, CostCondition.B4),
    ],
)
def test_two_threshold_cells(case: OrderCase, condition: CostCondition) -> None:
    spec = cell_spec(case, condition)
    result = solve_two_threshold(spec, case, condition)
    assert 0.0 < result.x_A < result.x_B
    assert result.lam == pytest.approx(result.x_A / result.x_B)
    solution = build(spec, case, condition)
    assert solution.thresholds["x_A"] == pytest.approx(result.x_A, rel=1e-12)
    assert solution.thresholds["x_B"] == pytest.approx(result.x_B, rel=1e-12)


def test_two_threshold_closed_form_agrees(row_gt_b2: GameSpec) -> None:
    d1, d2 = derive(row_gt_b2, 1, 2), derive(row_gt_b2, 2, 2)
    args = (d1.K, d2.K, d1.m_minus, d2.m_plus, 0.5, -0.1, 0.3)
    guess = closed_form_guess(*args)
    assert np.max(np.abs(two_threshold_residuals(guess, *args))) < 1e-9
    result = solve_two_threshold(row_gt_b2, OrderCase.ROW_GT, CostCondition.B2)
    assert result.x_A == pytest.approx(guess.x_A, rel=1e-6)
    assert result.x_B == pytest.approx(guess.x_B, rel=1e-6)


def test_two_threshold_wrong_cell(row_lt_b1: GameSpec) -> None:
    with pytest.raises(ClassificationError):
        solve_two_threshold(row_lt_b1, OrderCase.ROW_LT, CostCondition.B1)


def test_build_rejects_wrong_cell(row_lt_b1: GameSpec) -> None:
    with pytest.raises(ClassificationError, match="requested cell"):
        build(row_lt_b1, OrderCase.EQ, CostCondition.B1)


@pytest.mark.parametrize(("case", "condition"), CELLS)
def test_smooth_fit_and_growth(case: OrderCase, condition: CostCondition) -> None:
    solution = solve(cell_spec(case, condition))
    for pv in solution.values.values():
        for bp in pv.breakpoints:
            for order in (0, 1):
                left, right = pv.one_sided(bp, order)
                assert abs(left - right) <= 1e-9 * max(1.0, abs(right))
    constant = linear_growth_constant(solution)
    for x in (1e3, 1e6):
        for i, j in PAIRS:
            assert abs(solution.value(i, j, x)) <= constant * (1 + x)


def test_solution_round_trip(row_gt_b2: GameSpec) -> None:
    solution = solve(row_gt_b2)
    restored = Solution.from_dict(solution.to_dict())
    assert restored == solution
