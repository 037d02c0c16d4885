"""Dispatch a game to one of the twenty explicitly solved cells."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from enum import Enum
from itertools import combinations

from switching_game.exceptions import ClassificationError
from switching_game.model import PAIRS, GameSpec, RegimeDerived, derive_all, validate

logger = logging.getLogger(__name__)

K_RTOL = 1e-9
AMBIGUOUS_RTOL = 1e-6

RELABELING_RECIPE = """\
Cost patterns outside B1-B4 can often be brought into the table by renaming
one player's regimes: swap rows 1 and 2 of `drift` and `vol` (player I) or
columns 1 and 2 (player II), and swap the off-diagonal entries of that
player's cost matrix. Solve the relabeled game and swap the value columns back.
"""


class CostCondition(str, Enum):
    """Sign pattern of the four switching costs."""

    B1 = "B1"
    B2 = "B2"
    B3 = "B3"
    B4 = "B4"


class OrderCase(str, Enum):
    """Ordering of the four no-switch coefficients K_ij."""

    EQ = "EQ"
    ROW_LT = "ROW_LT"
    ROW_GT = "ROW_GT"
    COL_LT = "COL_LT"
    COL_GT = "COL_GT"


def _relative_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def classify_costs(spec: GameSpec) -> CostCondition:
    """Return the cost condition of ``spec``.

    Examples
    --------
    >>> spec = GameSpec(
    ...     drift=((0, 0), (0, 0)), vol=((1, 1), (1, 1)), discount=1, gamma=0.5,
    ...     cost_max=((0, -0.5), (1, 0)), cost_min=((0, 1), (1, 0)))
    >>> classify_costs(spec).value
    'B2'
    """
    c12, c21 = spec.c(1, 2), spec.c(2, 1)
    chi12, chi21 = spec.chi(1, 2), spec.chi(2, 1)
    supported = (
        c21 > 0.0
        and chi21 > 0.0
        and c12 != 0.0
        and chi12 != 0.0
        and c12 + c21 > 0.0
        and chi12 + chi21 > 0.0
    )
    if not supported:
        raise ClassificationError(
            f"unsupported cost pattern (c12, c21, chi12, chi21) = ({c12}, {c21}, {chi12}, {chi21})"
        )
    match (c12 < 0.0, chi12 < 0.0):
        case (False, False):
            return CostCondition.B1
        case (True, False):
            return CostCondition.B2
        case (False, True):
            return CostCondition.B3
        case _:
            return CostCondition.B4


def classify_order(derived: Mapping[tuple[int, int], RegimeDerived]) -> OrderCase:
    """Return the K-ordering case of four derived regimes.

    Regime pairs grouped by equal K must also share their characteristic roots.
    """
    k = {pair: derived[pair].K for pair in PAIRS}
    for a, b in combinations(PAIRS, 2):
        gap = _relative_gap(k[a], k[b])
        if K_RTOL < gap <= AMBIGUOUS_RTOL:
            raise ClassificationError(
                f"ambiguous K ordering: K{a[0]}{a[1]}={k[a]!r} and K{b[0]}{b[1]}={k[b]!r} "
                f"differ by {gap:.2e} relative"
            )

    def same(a: tuple[int, int], b: tuple[int, int]) -> bool:
        return _relative_gap(k[a], k[b]) <= K_RTOL

    rows_equal = same((1, 1), (1, 2)) and same((2, 1), (2, 2))
    cols_equal = same((1, 1), (2, 1)) and same((1, 2), (2, 2))
    if rows_equal and cols_equal:
        case, groups = OrderCase.EQ, [PAIRS]
    elif rows_equal:
        case = OrderCase.ROW_LT if k[(1, 1)] < k[(2, 1)] else OrderCase.ROW_GT
        groups = [((1, 1), (1, 2)), ((2, 1), (2, 2))]
    elif cols_equal:
        case = OrderCase.COL_LT if k[(1, 1)] < k[(1, 2)] else OrderCase.COL_GT
        groups = [((1, 1), (2, 1)), ((1, 2), (2, 2))]
    else:
        ks = ", ".join(f"K{i}{j}={k[(i, j)]:.12g}" for i, j in PAIRS)
        raise ClassificationError(f"uncovered K ordering: {ks}")

    for group in groups:
        for a, b in combinations(group, 2):
            if (
                _relative_gap(derived[a].m_plus, derived[b].m_plus) > K_RTOL
                or _relative_gap(derived[a].m_minus, derived[b].m_minus) > K_RTOL
            ):
                raise ClassificationError(
                    f"grouped regimes differ in characteristic roots: ({a[0]},{a[1]}) and "
                    f"({b[0]},{b[1]}) share K but not m+/m-"
                )
    return case


def classify(spec: GameSpec) -> tuple[OrderCase, CostCondition]:
    """Validate ``spec`` and return its (order case, cost condition) cell."""
    validate(spec).raise_for_violations()
    condition = classify_costs(spec)
    case = classify_order(derive_all(spec))
    logger.info("Classified game as %s/%s", case.value, condition.value)
    return case, condition
