"""Comparative statics: re-solve the game while one switching cost varies."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from switching_game.closedform import solve
from switching_game.exceptions import SwitchingGameError
from switching_game.model import GameSpec, no_switch_value

logger = logging.getLogger(__name__)

THRESHOLD_KEYS = ("x_star", "x_A", "x_B", "lambda")


class SweepRow(BaseModel):
    """Solution summary at one cost value."""

    model_config = ConfigDict(frozen=True)

    cost: float = Field(..., description="Value of the swept cost.")
    case: str = Field("", description="K ordering case, empty when the solve failed.")
    condition: str = Field("", description="Cost sign pattern, empty when the solve failed.")
    x_star: float = math.nan
    x_A: float = math.nan
    x_B: float = math.nan
    lam: float = Field(math.nan, alias="lambda")
    v11: float = Field(math.nan, description="v_11(x0).")
    option_value: float = Field(math.nan, description="v_11(x0) minus the no-switch value.")
    error: str = Field("", description="Why the solve failed, if it did.")


def sweep_cost(spec: GameSpec, name: str, values: Iterable[float]) -> list[SweepRow]:
    """Solve ``spec`` with cost ``name`` (``c12``, ``c21``, ``chi12``, ``chi21``) set to each value.

    Values for which the game is invalid or falls outside the covered cells
    produce a row carrying the error message.
    """
    rows = []
    for value in values:
        varied = spec.with_cost(name, float(value))
        try:
            solution = solve(varied)
        except SwitchingGameError as error:
            logger.warning("%s=%g: %s", name, value, error)
            rows.append(SweepRow(cost=value, error=str(error)))
            continue
        v11 = float(solution.value(1, 1, varied.x0))
        rows.append(
            SweepRow.model_validate(
                {
                    "cost": value,
                    "case": solution.case.value,
                    "condition": solution.condition.value,
                    **{key: solution.thresholds[key] for key in THRESHOLD_KEYS if key in solution.thresholds},
                    "v11": v11,
                    "option_value": v11 - no_switch_value(varied, 1, 1, varied.x0),
                }
            )
        )
    logger.info("Swept %s over %d values", name, len(rows))
    return rows


def to_frame(rows: list[SweepRow]) -> pd.DataFrame:
    """Rows as a data frame with the ``sweep.csv`` columns."""
    return pd.DataFrame([row.model_dump(by_alias=True) for row in rows])
