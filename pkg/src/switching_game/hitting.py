"""First-passage functionals and the threshold-search value of the game.

For a geometric Brownian motion with roots ``m+ > 1`` and ``m- < 0`` the
Laplace transform of the hitting time of ``a`` from ``x`` is ``(x/a)^m+`` when
``a > x`` and ``(x/a)^m-`` when ``a < x``. Discounted profit collected before a
hitting time follows from the no-switch value ``K x^g`` through the resolvent
identity ``F = K x^g - E[e^{-r tau}] K a^g``.

A threshold strategy is valued by writing the payoff at each barrier level as
an unknown, linking the unknowns through these functionals and solving the
resulting linear system.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import numpy.typing as npt
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from switching_game.artifacts import write_csv
from switching_game.exceptions import HittingError, SwitchingGameError
from switching_game.model import PAIRS, GameSpec, derive
from switching_game.strategy import Rule, ThresholdStrategy

logger = logging.getLogger(__name__)

__all__ = [
    "PassageFunctionals",
    "RegionTuple",
    "SearchGrids",
    "SearchResult",
    "j22_fixed_point",
    "j_values",
    "laplace_exit",
    "laplace_hit",
    "laplace_two_stage",
    "profit_until",
    "strategy_values",
    "threshold_search",
    "write_surface",
]

Pair = tuple[int, int]


def _is_barrier(level: float) -> bool:
    return level == 0.0 or math.isinf(level)


class PassageFunctionals(BaseModel):
    """Hitting-time functionals of one regime's diffusion.

    Barriers at ``0`` or ``inf`` are never reached, so their discount factor
    is zero and the profit functional is the whole no-switch value.
    """

    model_config = ConfigDict(frozen=True)

    m_plus: float = Field(..., description="Positive characteristic root.")
    m_minus: float = Field(..., description="Negative characteristic root.")
    K: float = Field(..., description="No-switch value coefficient.")
    gamma: float = Field(..., description="Profit exponent.")

    @classmethod
    def for_regime(cls, spec: GameSpec, i: int, j: int) -> PassageFunctionals:
        """Functionals of the diffusion in joint regime ``(i, j)``."""
        derived = derive(spec, i, j)
        return cls(m_plus=derived.m_plus, m_minus=derived.m_minus, K=derived.K, gamma=spec.gamma)

    def no_switch(self, x: float) -> float:
        """``K x^g``."""
        return self.K * x**self.gamma

    def r_hit(self, x: float, a: float) -> float:
        """``E[exp(-r tau_a)]`` started at ``x``."""
        if x <= 0.0 or math.isinf(x):
            raise HittingError(f"start must be positive and finite, got x={x}")
        if a < 0.0:
            raise HittingError(f"barrier must be non-negative, got a={a}")
        if _is_barrier(a):
            return 0.0
        if a == x:
            return 1.0
        return (x / a) ** (self.m_plus if a > x else self.m_minus)

    def r_two_stage(self, x: float, a: float, b: float) -> float:
        """Discount until ``a`` is hit and then ``b``."""
        return self.r_hit(x, a) * self.r_hit(a, b) if not _is_barrier(a) else 0.0

    def r_exit(self, x: float, a: float, b: float) -> float:
        """Discount until ``a`` is hit, on the event that ``a`` comes before ``b``."""
        lo, hi = min(a, b), max(a, b)
        if not lo <= x <= hi:
            raise HittingError(f"x={x} lies outside the barriers [{lo}, {hi}]")
        if _is_barrier(a):
            return 0.0
        if _is_barrier(b):
            return self.r_hit(x, a)
        # f(y) = (y/b)^m+ - (y/b)^m- vanishes at b; ratios keep powers bounded
        def f(y: float) -> float:
            return (y / b) ** self.m_plus - (y / b) ** self.m_minus

        return f(x) / f(a)

    def f_hit(self, x: float, a: float) -> float:
        """Discounted profit collected before ``a`` is hit."""
        weight = self.r_hit(x, a)
        return self.no_switch(x) - (weight * self.no_switch(a) if weight else 0.0)

    def f_two_stage(self, x: float, a: float, b: float) -> float:
        """Discounted profit collected after hitting ``a`` and before hitting ``b``."""
        if _is_barrier(a):
            return 0.0
        return self.r_hit(x, a) * self.f_hit(a, b)

    def f_exit(self, x: float, a: float, b: float) -> float:
        """Discounted profit collected before the first exit through ``a`` or ``b``."""
        total = self.no_switch(x)
        for near, far in ((a, b), (b, a)):
            weight = self.r_exit(x, near, far)
            if weight:
                total -= weight * self.no_switch(near)
        return total


def laplace_hit(spec: GameSpec, i: int, j: int, x: float, a: float) -> float:
    """Laplace transform of the hitting time of ``a`` from ``x`` in regime ``(i, j)``.

    Examples
    --------
    >>> spec = GameSpec(
    ...     drift=((0, 0), (0, 0)), vol=((1, 1), (1, 1)), discount=0.5, gamma=0.5,
    ...     cost_max=((0, 1), (1, 0)), cost_min=((0, 1), (1, 0)))
    >>> round(laplace_hit(spec, 1, 1, 1.0, 2.0), 4)
    0.3258
    """
    return PassageFunctionals.for_regime(spec, i, j).r_hit(x, a)


def laplace_two_stage(spec: GameSpec, i: int, j: int, x: float, a: float, b: float) -> float:
    """Laplace transform of the time to hit ``a`` and then ``b``."""
    return PassageFunctionals.for_regime(spec, i, j).r_two_stage(x, a, b)


def laplace_exit(spec: GameSpec, i: int, j: int, x: float, a: float, b: float) -> float:
    """Discount at hitting ``a`` before ``b``; ``x`` must lie between them."""
    return PassageFunctionals.for_regime(spec, i, j).r_exit(x, a, b)


def profit_until(
    spec: GameSpec,
    i: int,
    j: int,
    x: float,
    a: float,
    b: float | None = None,
    mode: Literal["exit", "two_stage"] = "exit",
) -> float:
    """Expected discounted profit up to a passage time.

    With one barrier the horizon is the hitting time of ``a``. With two it is
    the first exit through ``a`` or ``b`` (``mode="exit"``) or the time to hit
    ``a`` and then ``b`` (``mode="two_stage"``).
    """
    functionals = PassageFunctionals.for_regime(spec, i, j)
    if b is None:
        return functionals.f_hit(x, a)
    if mode == "two_stage":
        return functionals.f_two_stage(x, a, b)
    return functionals.f_exit(x, a, b)


def _functionals(spec: GameSpec, pin: Pair | None) -> dict[Pair, PassageFunctionals]:
    if pin is not None:
        pinned = PassageFunctionals.for_regime(spec, *pin)
        return dict.fromkeys(PAIRS, pinned)
    return {pair: PassageFunctionals.for_regime(spec, *pair) for pair in PAIRS}


@dataclass
class _Row:
    """Linear expression ``constant + sum(weights[k] * U[k])``."""

    constant: float = 0.0
    weights: dict[tuple[Pair, int], float] = field(default_factory=dict)


def _payoff_row(
    spec: GameSpec,
    strategy: ThresholdStrategy,
    functionals: dict[Pair, PassageFunctionals],
    levels: list[float],
    state: Pair,
    y: float,
) -> _Row:
    action = strategy.act(spec, *state, y)
    post = (action.i, action.j)
    lo, hi = strategy.continuation(*post)
    passage = functionals[post]
    row = _Row(constant=-action.paid + action.received + passage.f_exit(y, lo, hi))
    for near, far in ((lo, hi), (hi, lo)):
        if _is_barrier(near):
            continue
        weight = passage.r_exit(y, near, far)
        if weight:
            key = (post, levels.index(near))
            row.weights[key] = row.weights.get(key, 0.0) + weight
    return row


def strategy_values(
    spec: GameSpec,
    strategy: ThresholdStrategy,
    x: float,
    pin: Pair | None = None,
) -> dict[Pair, float]:
    """Payoff of ``strategy`` from ``x`` for each starting joint regime.

    ``pin`` uses one regime's diffusion for every segment instead of the
    diffusion of the regime in force.
    """
    if x <= 0.0:
        raise HittingError(f"state must be positive, got x={x}")
    functionals = _functionals(spec, pin)
    levels = strategy.levels()
    unknowns = list(itertools.product(PAIRS, range(len(levels))))
    index = {key: n for n, key in enumerate(unknowns)}
    try:
        rows = {
            key: _payoff_row(spec, strategy, functionals, levels, key[0], levels[key[1]])
            for key in unknowns
        }
        at_x = {state: _payoff_row(spec, strategy, functionals, levels, state, x) for state in PAIRS}
    except SwitchingGameError as error:
        if isinstance(error, HittingError):
            raise
        raise HittingError(f"strategy cannot be valued: {error}") from error

    solved = np.zeros(len(unknowns))
    if unknowns:
        matrix = np.eye(len(unknowns))
        rhs = np.empty(len(unknowns))
        for key, row in rows.items():
            n = index[key]
            rhs[n] = row.constant
            for other_key, weight in row.weights.items():
                matrix[n, index[other_key]] -= weight
        try:
            solved = np.linalg.solve(matrix, rhs)
        except np.linalg.LinAlgError as error:
            raise HittingError(f"barrier system is singular for levels {levels}") from error
        logger.debug("Solved barrier system with %d unknowns", len(unknowns))

    return {
        state: row.constant
        + sum(weight * solved[index[key]] for key, weight in row.weights.items())
        for state, row in at_x.items()
    }


def _ordered(y21: float, x12_prime: float, x12: float) -> bool:
    active = [t for t in (y21, x12_prime, x12) if t > 0.0 and not math.isinf(t)]
    return all(lo < hi for lo, hi in itertools.pairwise(active))


class RegionTuple(BaseModel):
    """Thresholds of the three-threshold region shape.

    Player I leaves regime 1 at or above ``x12`` and leaves regime 2 at or
    below ``y21``; player II leaves regime 1 at or above ``x12_prime`` and stays
    in regime 2. ``y21 = 0`` and ``inf`` for the others mean "never".
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    y21: float = Field(..., ge=0.0, description="Player I switches 2->1 at or below this level.")
    x12_prime: float = Field(..., gt=0.0, description="Player II switches 1->2 at or above.")
    x12: float = Field(..., gt=0.0, description="Player I switches 1->2 at or above this level.")

    @model_validator(mode="after")
    def _check_order(self) -> RegionTuple:
        if math.isinf(self.y21):
            raise ValueError("y21 must be finite")
        if not _ordered(self.y21, self.x12_prime, self.x12):
            raise ValueError(
                f"active thresholds must satisfy y21 < x12' < x12, got "
                f"({self.y21}, {self.x12_prime}, {self.x12})"
            )
        return self

    def strategy(self) -> ThresholdStrategy:
        """The threshold strategy these regions induce."""
        return ThresholdStrategy.per_regime(
            max_rules={1: Rule.above(self.x12), 2: Rule.below(self.y21)},
            min_rules={1: Rule.above(self.x12_prime)},
        )


def j_values(
    spec: GameSpec, x: float, regions: RegionTuple, pin: Pair | None = None
) -> dict[Pair, float]:
    """``J_11 .. J_22`` at ``x`` for the strategy induced by ``regions``."""
    return strategy_values(spec, regions.strategy(), x, pin)


def j22_fixed_point(spec: GameSpec, regions: RegionTuple, pin: Pair | None = None) -> float:
    """``J_22(x12)`` from the renewal cycle ``x12 -> y21 -> x12``.

    From regime ``(2, 2)`` at ``x12`` player I waits for ``y21``, pays ``c21``,
    waits in ``(1, 2)`` for ``x12`` and pays ``c12``; the cycle repeats, so the
    value is a geometric series.
    """
    if math.isinf(regions.x12):
        raise HittingError("the renewal cycle needs a finite x12")
    functionals = _functionals(spec, pin)
    x12, y21 = regions.x12, regions.y21
    in22, in12 = functionals[(2, 2)], functionals[(1, 2)]
    r_down = in22.r_hit(x12, y21)
    r_cycle = r_down * (in12.r_hit(y21, x12) if y21 > 0.0 else 0.0)
    denominator = 1.0 - r_cycle
    if denominator <= 0.0:
        raise HittingError(f"renewal denominator 1 - R2 = {denominator} is not positive")
    numerator = in22.f_hit(x12, y21)
    if y21 > 0.0:
        numerator += r_down * (-spec.c(2, 1) + in12.f_hit(y21, x12)) - r_cycle * spec.c(1, 2)
    return numerator / denominator


class SearchGrids(BaseModel):
    """Candidate levels for each threshold."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    y21: tuple[float, ...] = Field(..., description="Candidates for y21; 0 means never.")
    x12_prime: tuple[float, ...] = Field(..., description="Candidates for x12'; inf means never.")
    x12: tuple[float, ...] = Field(..., description="Candidates for x12; inf means never.")

    @classmethod
    def geometric(
        cls, lo: float, hi: float, num: int = 64, never: bool = True
    ) -> SearchGrids:
        """Log-spaced candidates on ``[lo, hi]`` for every threshold, plus the "never" levels."""
        levels = tuple(float(v) for v in np.geomspace(lo, hi, num))
        return cls(
            y21=((0.0,) if never else ()) + levels,
            x12_prime=levels + ((math.inf,) if never else ()),
            x12=levels + ((math.inf,) if never else ()),
        )

    @property
    def shape(self) -> tuple[int, int, int]:
        """Size of the value tensor."""
        return len(self.y21), len(self.x12_prime), len(self.x12)


@dataclass(frozen=True)
class SearchResult:
    """Outcome of the nested min-max search."""

    best: RegionTuple
    value: float
    maxmin: float
    gap: float
    grids: SearchGrids
    values: npt.NDArray[np.float64]

    def to_frame(self) -> pd.DataFrame:
        """Feasible grid points with their value."""
        y, xp, xx = np.meshgrid(
            self.grids.y21, self.grids.x12_prime, self.grids.x12, indexing="ij"
        )
        frame = pd.DataFrame(
            {
                "y21": y.ravel(),
                "x12_prime": xp.ravel(),
                "x12": xx.ravel(),
                "value": self.values.ravel(),
            }
        )
        return frame.dropna(subset=["value"]).reset_index(drop=True)

    def best_frame(self) -> pd.DataFrame:
        """One row with the selected thresholds and the value."""
        return pd.DataFrame(
            [
                {
                    "y21": self.best.y21,
                    "x12_prime": self.best.x12_prime,
                    "x12": self.best.x12,
                    "value": self.value,
                    "maxmin": self.maxmin,
                    "gap": self.gap,
                }
            ]
        )


def _search_slice(
    spec: GameSpec,
    x: float,
    grids: SearchGrids,
    x12_prime: float,
    regime: Pair,
    pin: Pair | None,
) -> npt.NDArray[np.float64]:
    out = np.full((len(grids.y21), len(grids.x12)), np.nan)
    for a, y21 in enumerate(grids.y21):
        for c, x12 in enumerate(grids.x12):
            try:
                regions = RegionTuple(y21=y21, x12_prime=x12_prime, x12=x12)
            except ValidationError:
                continue
            out[a, c] = j_values(spec, x, regions, pin)[regime]
    return out


def threshold_search(
    spec: GameSpec,
    x: float,
    grids: SearchGrids,
    regime: Pair = (1, 1),
    workers: int = 1,
    pin: Pair | None = None,
) -> SearchResult:
    """Minimise over ``x12'`` the maximum over ``(y21, x12)`` of ``J_regime(x)``.

    The max-min over the same grids is computed as well; ``gap`` is their
    distance. Infeasible tuples are skipped.
    """
    if 0 in grids.shape:
        raise HittingError(f"search grid is empty, shape {grids.shape}")
    outer = list(grids.x12_prime)
    n = len(outer)
    args = ([spec] * n, [x] * n, [grids] * n, outer, [regime] * n, [pin] * n)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            slices = list(pool.map(_search_slice, *args))
    else:
        slices = list(map(_search_slice, *args))
    values = np.stack(slices, axis=1)
    feasible = ~np.isnan(values)
    if not feasible.any():
        raise HittingError("no search grid point satisfies the threshold ordering")

    # inner max over (y21, x12) for each x12'
    inner_max = np.where(feasible, values, -np.inf).max(axis=(0, 2))
    inner_max[~feasible.any(axis=(0, 2))] = np.inf
    b = int(np.argmin(inner_max))
    a, c = np.unravel_index(np.nanargmax(values[:, b, :]), values[:, b, :].shape)
    minmax = float(inner_max[b])

    # inner min over x12' for each (y21, x12)
    inner_min = np.where(feasible, values, np.inf).min(axis=1)
    inner_min[~feasible.any(axis=1)] = -np.inf
    maxmin = float(inner_min.max())

    best = RegionTuple(y21=grids.y21[int(a)], x12_prime=grids.x12_prime[b], x12=grids.x12[int(c)])
    result = SearchResult(
        best=best,
        value=minmax,
        maxmin=maxmin,
        gap=abs(minmax - maxmin),
        grids=grids,
        values=values,
    )
    logger.info(
        "Best thresholds y21=%g x12'=%g x12=%g, value %.8g, min-max gap %.3g",
        best.y21,
        best.x12_prime,
        best.x12,
        minmax,
        result.gap,
    )
    return result


def write_surface(path: Path, result: SearchResult) -> Path:
    """Write ``y21, x12_prime, x12, value`` for every feasible grid point."""
    return write_csv(result.to_frame(), path)
