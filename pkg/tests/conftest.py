"""Shared game specifications."""

from collections.abc import Callable

import numpy as np
import pytest

from switching_game.classify import CostCondition, OrderCase
from switching_game.model import GameSpec

# Groups of regimes sharing a no-switch coefficient get the same drift.
DRIFTS = {
    OrderCase.EQ: ((0.0, 0.0), (0.0, 0.0)),
    OrderCase.ROW_LT: ((0.0, 0.0), (0.3, 0.3)),
    OrderCase.ROW_GT: ((0.3, 0.3), (0.0, 0.0)),
    OrderCase.COL_LT: ((0.0, 0.3), (0.0, 0.3)),
    OrderCase.COL_GT: ((0.3, 0.0), (0.3, 0.0)),
}

# (c12, c21), (chi12, chi21)
COSTS = {
    CostCondition.B1: ((0.2, 0.3), (0.2, 0.3)),
    CostCondition.B2: ((-0.1, 0.3), (0.2, 0.3)),
    CostCondition.B3: ((0.2, 0.3), (-0.1, 0.3)),
    CostCondition.B4: ((-0.1, 0.3), (-0.1, 0.3)),
}

CELLS = [(case, condition) for case in OrderCase for condition in CostCondition]


def cell_spec(case: OrderCase, condition: CostCondition, x0: float = 1.0) -> GameSpec:
    """A game in the given cell with r = 1, sigma = 1 and gamma = 1/2."""
    (c12, c21), (chi12, chi21) = COSTS[condition]
    return GameSpec(
        drift=DRIFTS[case],
        vol=((1.0, 1.0), (1.0, 1.0)),
        discount=1.0,
        gamma=0.5,
        cost_max=((0.0, c12), (c21, 0.0)),
        cost_min=((0.0, chi12), (chi21, 0.0)),
        x0=x0,
    )


@pytest.fixture
def make_cell() -> Callable[..., GameSpec]:
    """Build the fixture game of a cell."""
    return cell_spec


@pytest.fixture
def random_cell_spec() -> Callable[[OrderCase, CostCondition, np.random.Generator], GameSpec]:
    """Draw a random valid game in a cell."""

    def draw(case: OrderCase, condition: CostCondition, rng: np.random.Generator) -> GameSpec:
        r = rng.uniform(0.6, 1.5)
        sigma = rng.uniform(0.6, 1.2)
        low = rng.uniform(-0.2, 0.05)
        high = low + rng.uniform(0.15, 0.3)
        pattern = np.array(DRIFTS[case]) > 0.0
        drift = np.where(pattern, high, low)
        c21, chi21 = rng.uniform(0.2, 0.6, size=2)
        c12 = rng.uniform(0.1, 0.5) if condition in (CostCondition.B1, CostCondition.B3) else -c21 * rng.uniform(0.1, 0.7)
        chi12 = rng.uniform(0.1, 0.5) if condition in (CostCondition.B1, CostCondition.B2) else -chi21 * rng.uniform(0.1, 0.7)
        return GameSpec(
            drift=(tuple(drift[0]), tuple(drift[1])),
            vol=((sigma, sigma), (sigma, sigma)),
            discount=r,
            gamma=rng.uniform(0.35, 0.65),
            cost_max=((0.0, c12), (c21, 0.0)),
            cost_min=((0.0, chi12), (chi21, 0.0)),
            x0=rng.uniform(0.5, 2.0),
        )

    return draw


@pytest.fixture
def eq_b1() -> GameSpec:
    """No regime changes the no-switch value and every cost is positive."""
    return cell_spec(OrderCase.EQ, CostCondition.B1)


@pytest.fixture
def row_lt_b1() -> GameSpec:
    """Player I has a single upper threshold, player II never switches."""
    return cell_spec(OrderCase.ROW_LT, CostCondition.B1)


@pytest.fixture
def row_gt_b2() -> GameSpec:
    """Player I switches on both sides with a negative 1->2 cost."""
    return cell_spec(OrderCase.ROW_GT, CostCondition.B2)
