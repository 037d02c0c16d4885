"""Explicit value functions, thresholds and switching regions.

Every covered cell is assembled from a one-player switching problem: the
player whose regime changes the no-switch coefficient K controls the
thresholds, while the other player either never switches (positive 1->2 cost)
or switches 1->2 immediately (negative 1->2 cost), which shifts its regime-1
values by a constant. Player II minimises, so its one-player problem is
solved as the maximisation of ``-v`` with profit coefficients ``-K``.

In one-player terms with profit coefficients ``P1, P2`` and costs ``c12, c21``:

* ``P1 == P2``: never switch when ``c12 > 0``, otherwise switch 1->2 at once.
* ``P1 < P2``: regime 1 switches to 2 above ``x*`` when ``c12 > 0``, at once otherwise.
* ``P1 > P2``: regime 2 switches to 1 above ``x*`` when ``c12 > 0``; when
  ``c12 < 0`` regime 1 switches to 2 on ``(0, x_A]`` and regime 2 back to 1 on
  ``[x_B, inf)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import brentq, root

from switching_game.classify import (
    K_RTOL,
    CostCondition,
    OrderCase,
    classify,
    classify_costs,
    classify_order,
)
from switching_game.exceptions import ClassificationError, ThresholdSolveError
from switching_game.model import PAIRS, GameSpec, Player, RegimeDerived, derive_all

logger = logging.getLogger(__name__)

LAMBDA_SCAN_POINTS = 1024
LAMBDA_SHRINK = 1e-9
ROOT_XTOL = 1e-15
SMOOTH_FIT_TOL = 1e-9

ArrayLike = float | npt.NDArray[np.float64]


def _falling(exponent: float, order: int) -> float:
    factor = 1.0
    for k in range(order):
        factor *= exponent - k
    return factor


class Piece(BaseModel):
    """One analytic piece ``coef_gamma x^g + A x^m+ + B x^m- + constant`` on ``[lo, hi)``."""

    model_config = ConfigDict(frozen=True)

    lo: float = Field(0.0, ge=0.0)
    hi: float | None = Field(None, description="Upper end, None for infinity.")
    coef_gamma: float = 0.0
    coef_mplus: float = 0.0
    coef_mminus: float = 0.0
    m_plus_used: float = 0.0
    m_minus_used: float = 0.0
    constant: float = 0.0

    def evaluate(
        self, x: npt.NDArray[np.float64], gamma: float, order: int = 0
    ) -> npt.NDArray[np.float64]:
        """Return the ``order``-th derivative of the piece at ``x``."""
        out = np.zeros_like(x)
        for coef, exponent in (
            (self.coef_gamma, gamma),
            (self.coef_mplus, self.m_plus_used),
            (self.coef_mminus, self.m_minus_used),
        ):
            if coef:
                out += coef * _falling(exponent, order) * x ** (exponent - order)
        if order == 0 and self.constant:
            out += self.constant
        return out

    def scaled(self, sign: float) -> Piece:
        """Multiply every coefficient, including the constant, by ``sign``."""
        return self.model_copy(
            update={
                "coef_gamma": sign * self.coef_gamma,
                "coef_mplus": sign * self.coef_mplus,
                "coef_mminus": sign * self.coef_mminus,
                "constant": sign * self.constant,
            }
        )


class PiecewiseValue(BaseModel):
    """A value function made of contiguous analytic pieces covering (0, inf).

    At a breakpoint the piece starting there is used.
    """

    model_config = ConfigDict(frozen=True)

    gamma: float
    pieces: tuple[Piece, ...]

    @model_validator(mode="after")
    def _check_partition(self) -> PiecewiseValue:
        if not self.pieces:
            raise ValueError("a piecewise value needs at least one piece")
        if self.pieces[0].lo != 0.0:
            raise ValueError(f"first piece must start at 0, got {self.pieces[0].lo}")
        if self.pieces[-1].hi is not None:
            raise ValueError(f"last piece must extend to infinity, got {self.pieces[-1].hi}")
        for left, right in zip(self.pieces, self.pieces[1:], strict=False):
            if left.hi is None or left.hi != right.lo or not left.lo < left.hi:
                raise ValueError(f"pieces are not contiguous at {left.hi} / {right.lo}")
        return self

    @property
    def breakpoints(self) -> list[float]:
        """Interior breakpoints in increasing order."""
        return [piece.lo for piece in self.pieces[1:]]

    def _evaluate(self, x: ArrayLike, order: int) -> ArrayLike:
        xs = np.asarray(x, dtype=float)
        flat = np.atleast_1d(xs)
        out = np.empty_like(flat)
        los = np.array([piece.lo for piece in self.pieces])
        index = np.searchsorted(los, flat, side="right") - 1
        for k, piece in enumerate(self.pieces):
            mask = index == k
            if mask.any():
                out[mask] = piece.evaluate(flat[mask], self.gamma, order)
        if xs.ndim == 0:
            return float(out[0])
        return out.reshape(xs.shape)

    def value(self, x: ArrayLike) -> ArrayLike:
        """Evaluate the function."""
        return self._evaluate(x, 0)

    def derivative(self, x: ArrayLike) -> ArrayLike:
        """Evaluate the first derivative."""
        return self._evaluate(x, 1)

    def second_derivative(self, x: ArrayLike) -> ArrayLike:
        """Evaluate the second derivative."""
        return self._evaluate(x, 2)

    def one_sided(self, x: float, order: int = 0) -> tuple[float, float]:
        """Left and right limits of the ``order``-th derivative at a breakpoint."""
        los = [piece.lo for piece in self.pieces]
        k = los.index(x)
        arr = np.array([x])
        return (
            float(self.pieces[k - 1].evaluate(arr, self.gamma, order)[0]),
            float(self.pieces[k].evaluate(arr, self.gamma, order)[0]),
        )

    def scaled(self, sign: float) -> PiecewiseValue:
        """Return ``sign * self``."""
        return PiecewiseValue(
            gamma=self.gamma, pieces=tuple(piece.scaled(sign) for piece in self.pieces)
        )

    def shifted(self, amount: float) -> PiecewiseValue:
        """Return ``self + amount``."""
        return PiecewiseValue(
            gamma=self.gamma,
            pieces=tuple(
                piece.model_copy(update={"constant": piece.constant + amount})
                for piece in self.pieces
            ),
        )


class RegionKind(str, Enum):
    """Shape of a switching region."""

    EMPTY = "empty"
    BELOW = "below"
    ABOVE = "above"
    ALL = "all"


class Region(BaseModel):
    """A switching region: empty, ``(0, t]``, ``[t, inf)`` or ``(0, inf)``."""

    model_config = ConfigDict(frozen=True)

    kind: RegionKind = RegionKind.EMPTY
    threshold: float | None = None

    @model_validator(mode="after")
    def _check_threshold(self) -> Region:
        bounded = self.kind in (RegionKind.BELOW, RegionKind.ABOVE)
        if bounded and (self.threshold is None or self.threshold <= 0.0):
            raise ValueError(f"{self.kind.value} region needs a positive threshold")
        if not bounded and self.threshold is not None:
            raise ValueError(f"{self.kind.value} region takes no threshold")
        return self

    def contains(self, x: float) -> bool:
        """Whether switching is prescribed at ``x``."""
        match self.kind:
            case RegionKind.EMPTY:
                return False
            case RegionKind.ALL:
                return True
            case RegionKind.BELOW:
                return x <= self.threshold  # type: ignore[operator]
            case _:
                return x >= self.threshold  # type: ignore[operator]

    def describe(self) -> str:
        """Interval notation."""
        match self.kind:
            case RegionKind.EMPTY:
                return "empty"
            case RegionKind.ALL:
                return "(0, inf)"
            case RegionKind.BELOW:
                return f"(0, {self.threshold:.10g}]"
            case _:
                return f"[{self.threshold:.10g}, inf)"


EMPTY = Region()
ALL = Region(kind=RegionKind.ALL)


def _key(i: int, j: int) -> str:
    return f"{i}{j}"


class Solution(BaseModel):
    """The four value functions of a game with its regions and thresholds."""

    model_config = ConfigDict(frozen=True)

    spec: GameSpec
    case: OrderCase
    condition: CostCondition
    values: dict[str, PiecewiseValue] = Field(..., description="Keyed by joint regime, e.g. '12'.")
    regions_max: dict[str, Region] = Field(..., description="Player I switching regions.")
    regions_min: dict[str, Region] = Field(..., description="Player II switching regions.")
    thresholds: dict[str, float] = Field(default_factory=dict)

    def pv(self, i: int, j: int) -> PiecewiseValue:
        """Value function of joint regime ``(i, j)``."""
        return self.values[_key(i, j)]

    def value(self, i: int, j: int, x: ArrayLike) -> ArrayLike:
        """Evaluate v_ij."""
        return self.pv(i, j).value(x)

    def derivative(self, i: int, j: int, x: ArrayLike) -> ArrayLike:
        """Evaluate v_ij'."""
        return self.pv(i, j).derivative(x)

    def region(self, player: Player, i: int, j: int) -> Region:
        """Switching region of ``player`` in joint regime ``(i, j)``."""
        regions = self.regions_max if player is Player.MAX else self.regions_min
        return regions[_key(i, j)]

    def finite_thresholds(self) -> list[float]:
        """Thresholds that are positions on the state axis (lambda excluded)."""
        return sorted(v for k, v in self.thresholds.items() if k != "lambda")

    def to_dict(self) -> dict[str, Any]:
        """JSON-compatible representation."""
        return self.model_dump(mode="json")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Solution:
        """Inverse of `to_dict`."""
        return cls.model_validate(data)


def solve_single_threshold(
    k_lo: float, k_hi: float, m_plus: float, gamma: float, cost: float
) -> tuple[float, float]:
    """Return ``(x_star, A)`` for a single upper switching threshold.

    The continuation value is ``k_lo x^g + A x^m+`` below ``x_star`` and the
    switched value ``k_hi x^g - cost`` above; value matching and smooth fit
    give ``(k_hi - k_lo) x*^g = m+ cost / (m+ - g)`` and
    ``A = (k_hi - k_lo) (g / m+) x*^(g - m+)``.

    Examples
    --------
    >>> round(solve_single_threshold(0.2, 0.3, 2.0, 0.5, 0.15)[0], 12)
    4.0
    """
    if cost <= 0.0:
        raise ThresholdSolveError(f"single threshold needs a positive cost, got {cost}")
    spread = k_hi - k_lo
    if spread <= 0.0:
        raise ThresholdSolveError(f"single threshold needs k_hi > k_lo, got {k_hi} ≤ {k_lo}")
    x_star = (m_plus * cost / ((m_plus - gamma) * spread)) ** (1.0 / gamma)
    coef = spread * (gamma / m_plus) * x_star ** (gamma - m_plus)
    logger.debug("Single threshold x*=%.12g A=%.12g", x_star, coef)
    return x_star, coef


def lambda_residual(
    y: ArrayLike, m_plus: float, m_minus: float, gamma: float, c12: float, c21: float
) -> ArrayLike:
    """Normalised left-hand side of the threshold-ratio equation.

    ``y = x_A / x_B``; ``m_plus`` belongs to the regime switched into below
    ``x_A`` and ``m_minus`` to the regime left there. The equation is
    multiplied by ``y^(g - m-)`` so that it stays finite as ``y -> 0``.
    """
    m, n, g = m_plus, m_minus, gamma
    first = m * (g - n) * (1.0 - y ** (m - g)) * (c21 * y**g + c12 * y ** (g - n))
    second = n * (m - g) * (y ** (g - n) - 1.0) * (c21 * y**m + c12)
    scale = m * (g - n) * c21 + abs(n) * (m - g) * abs(c12)
    return (first + second) / scale


def solve_lambda(m_plus: float, m_minus: float, gamma: float, c12: float, c21: float) -> float:
    """Solve the threshold-ratio equation for ``lambda = x_A / x_B``.

    The equation has the trivial root 1; the admissible root lies below
    ``(-c12/c21)^(1/m+) < 1``, where the residual changes sign from negative
    to positive. The bracket is scanned at 1024 points and the smallest sign
    change is refined with Brent's method.
    """
    if not c12 < 0.0 < c21 or c12 + c21 <= 0.0:
        raise ThresholdSolveError(
            f"ratio equation needs c12 < 0 < c21 and c12 + c21 > 0, got c12={c12}, c21={c21}"
        )
    upper = (-c12 / c21) ** (1.0 / m_plus)
    lo, hi = upper * LAMBDA_SHRINK, upper * (1.0 - LAMBDA_SHRINK)
    grid = np.geomspace(lo, hi, LAMBDA_SCAN_POINTS)
    values = lambda_residual(grid, m_plus, m_minus, gamma, c12, c21)
    signs = np.sign(values)
    changes = np.flatnonzero(signs[:-1] * signs[1:] <= 0.0)
    if changes.size == 0:
        raise ThresholdSolveError(f"no root found for the threshold ratio in ({lo:.6g}, {hi:.6g})")
    if changes.size > 1:
        logger.warning(
            "Threshold-ratio equation has %d sign changes in (%.6g, %.6g); using the smallest root",
            changes.size,
            lo,
            hi,
        )
    k = int(changes[0])
    if values[k] == 0.0:
        return float(grid[k])
    lam = brentq(
        lambda_residual,
        grid[k],
        grid[k + 1],
        args=(m_plus, m_minus, gamma, c12, c21),
        xtol=ROOT_XTOL,
        maxiter=200,
    )
    logger.debug("Threshold ratio lambda=%.15g in (%.6g, %.6g)", lam, lo, hi)
    return float(lam)


@dataclass(frozen=True)
class TwoThreshold:
    """Free boundaries of a two-threshold one-player problem.

    ``a`` multiplies ``x^m+`` in the regime entered below ``x_A`` and ``b``
    multiplies ``x^m-`` in the regime left there.
    """

    x_A: float
    x_B: float
    a: float
    b: float
    lam: float


def closed_form_guess(
    p1: float, p2: float, m_minus: float, m_plus: float, gamma: float, c12: float, c21: float
) -> TwoThreshold:
    """Closed-form free boundaries from the ratio equation, before refinement."""
    n, m, g = m_minus, m_plus, gamma
    lam = solve_lambda(m, n, g, c12, c21)
    scaled = m * (c21 + c12 * lam ** (-n)) / ((m - g) * (1.0 - lam ** (g - n)))
    x_b = (scaled / (p1 - p2)) ** (1.0 / g)
    a_scaled = (n * c21 - scaled * (n - g)) / (m - n)
    b_scaled = (m * c21 - scaled * (m - g)) / (m - n)
    return TwoThreshold(
        x_A=lam * x_b, x_B=x_b, a=a_scaled * x_b ** (-m), b=b_scaled * x_b ** (-n), lam=lam
    )


def _coefficients(
    x_a: float, x_b: float, p1: float, p2: float, n: float, m: float, g: float, c12: float, c21: float
) -> tuple[float, float]:
    # value matching at both boundaries, in units of x_B
    y = x_a / x_b
    spread = (p1 - p2) * x_b**g
    matrix = np.array([[-1.0, 1.0], [-(y**m), y**n]])
    rhs = np.array([c21 - spread, -c12 - spread * y**g])
    a_scaled, b_scaled = np.linalg.solve(matrix, rhs)
    return float(a_scaled), float(b_scaled)


def two_threshold_residuals(
    sol: TwoThreshold, p1: float, p2: float, m_minus: float, m_plus: float, gamma: float,
    c12: float, c21: float,
) -> npt.NDArray[np.float64]:
    """Residuals of value matching and smooth fit at ``x_A`` and ``x_B``."""
    n, m, g = m_minus, m_plus, gamma
    residuals = []
    for x, target in ((sol.x_A, -c12), (sol.x_B, c21)):
        diff = (p1 - p2) * x**g + sol.b * x**n - sol.a * x**m
        slope = g * (p1 - p2) * x**g + n * sol.b * x**n - m * sol.a * x**m
        residuals += [diff - target, slope]
    return np.array(residuals) / c21


def solve_two_threshold_core(
    p1: float, p2: float, m_minus: float, m_plus: float, gamma: float, c12: float, c21: float
) -> TwoThreshold:
    """Solve the four smooth-fit equations, starting from the closed form."""
    n, m, g = m_minus, m_plus, gamma
    guess = closed_form_guess(p1, p2, n, m, g, c12, c21)

    def derivative_mismatch(z: npt.NDArray[np.float64]) -> list[float]:
        x_a, x_b = np.exp(z)
        y = x_a / x_b
        spread = (p1 - p2) * x_b**g
        a_scaled, b_scaled = _coefficients(x_a, x_b, p1, p2, n, m, g, c12, c21)
        return [
            (g * spread * y**g + n * b_scaled * y**n - m * a_scaled * y**m) / c21,
            (g * spread + n * b_scaled - m * a_scaled) / c21,
        ]

    start = np.log([guess.x_A, guess.x_B])
    result = root(derivative_mismatch, start, method="hybr", options={"xtol": 1e-14})
    x_a, x_b = (float(v) for v in np.exp(result.x))
    if not result.success or not 0.0 < x_a < x_b:
        raise ThresholdSolveError(
            f"smooth-fit system did not converge ({result.message}); "
            f"closed-form initial guess x_A={guess.x_A:.12g}, x_B={guess.x_B:.12g}"
        )
    a_scaled, b_scaled = _coefficients(x_a, x_b, p1, p2, n, m, g, c12, c21)
    refined = TwoThreshold(
        x_A=x_a, x_B=x_b, a=a_scaled * x_b ** (-m), b=b_scaled * x_b ** (-n), lam=x_a / x_b
    )
    worst = float(np.max(np.abs(two_threshold_residuals(refined, p1, p2, n, m, g, c12, c21))))
    if worst > SMOOTH_FIT_TOL:
        raise ThresholdSolveError(
            f"smooth-fit residual {worst:.3e} above {SMOOTH_FIT_TOL:g}; "
            f"closed-form initial guess x_A={guess.x_A:.12g}, x_B={guess.x_B:.12g}"
        )
    logger.debug(
        "Two thresholds x_A=%.12g x_B=%.12g (guess %.12g, %.12g)",
        x_a,
        x_b,
        guess.x_A,
        guess.x_B,
    )
    return refined


@dataclass(frozen=True)
class _OnePlayer:
    home: PiecewiseValue
    away: PiecewiseValue
    region_home: Region
    region_away: Region
    thresholds: dict[str, float]


def _solve_one_player(
    p1: float,
    p2: float,
    d1: RegimeDerived,
    d2: RegimeDerived,
    gamma: float,
    c12: float,
    c21: float,
) -> _OnePlayer:
    def piece(lo: float, hi: float | None, d: RegimeDerived, **coefs: float) -> Piece:
        return Piece(lo=lo, hi=hi, m_plus_used=d.m_plus, m_minus_used=d.m_minus, **coefs)

    def single(*pieces: Piece) -> PiecewiseValue:
        return PiecewiseValue(gamma=gamma, pieces=pieces)

    stay1 = single(piece(0.0, None, d1, coef_gamma=p1))
    stay2 = single(piece(0.0, None, d2, coef_gamma=p2))
    equal = abs(p1 - p2) <= K_RTOL * max(abs(p1), abs(p2))

    if c12 < 0.0 and (equal or p1 < p2):
        return _OnePlayer(stay2.shifted(-c12), stay2, ALL, EMPTY, {})
    if equal:
        return _OnePlayer(stay1, stay2, EMPTY, EMPTY, {})
    if p1 < p2:
        x_star, coef = solve_single_threshold(p1, p2, d1.m_plus, gamma, c12)
        home = single(
            piece(0.0, x_star, d1, coef_gamma=p1, coef_mplus=coef),
            piece(x_star, None, d2, coef_gamma=p2, constant=-c12),
        )
        return _OnePlayer(
            home, stay2, Region(kind=RegionKind.ABOVE, threshold=x_star), EMPTY, {"x_star": x_star}
        )
    if c12 > 0.0:
        x_star, coef = solve_single_threshold(p2, p1, d2.m_plus, gamma, c21)
        away = single(
            piece(0.0, x_star, d2, coef_gamma=p2, coef_mplus=coef),
            piece(x_star, None, d1, coef_gamma=p1, constant=-c21),
        )
        return _OnePlayer(
            stay1, away, EMPTY, Region(kind=RegionKind.ABOVE, threshold=x_star), {"x_star": x_star}
        )
    sol = solve_two_threshold_core(p1, p2, d1.m_minus, d2.m_plus, gamma, c12, c21)
    continue_away = dict(coef_gamma=p2, coef_mplus=sol.a)
    continue_home = dict(coef_gamma=p1, coef_mminus=sol.b)
    mixed = dict(m_plus_used=d2.m_plus, m_minus_used=d1.m_minus)
    home = single(
        Piece(lo=0.0, hi=sol.x_A, constant=-c12, **continue_away, **mixed),
        Piece(lo=sol.x_A, hi=None, **continue_home, **mixed),
    )
    away = single(
        Piece(lo=0.0, hi=sol.x_B, **continue_away, **mixed),
        Piece(lo=sol.x_B, hi=None, constant=-c21, **continue_home, **mixed),
    )
    return _OnePlayer(
        home,
        away,
        Region(kind=RegionKind.BELOW, threshold=sol.x_A),
        Region(kind=RegionKind.ABOVE, threshold=sol.x_B),
        {"x_A": sol.x_A, "x_B": sol.x_B, "lambda": sol.lam},
    )


def _check_cell(spec: GameSpec, case: OrderCase, condition: CostCondition) -> None:
    actual = (classify_order(derive_all(spec)), classify_costs(spec))
    if actual != (case, condition):
        raise ClassificationError(
            f"requested cell {case.value}/{condition.value} but the game is "
            f"{actual[0].value}/{actual[1].value}"
        )


def build(spec: GameSpec, case: OrderCase, condition: CostCondition) -> Solution:
    """Build the explicit solution of a classified game."""
    _check_cell(spec, case, condition)
    derived = derive_all(spec)
    gamma = spec.gamma
    values: dict[str, PiecewiseValue] = {}
    regions_max: dict[str, Region] = {}
    regions_min: dict[str, Region] = {}
    thresholds: dict[str, float] = {}

    if case in (OrderCase.EQ, OrderCase.ROW_LT, OrderCase.ROW_GT):
        chi12 = spec.chi(1, 2)
        for j in (1, 2) if chi12 > 0.0 else (2,):
            one = _solve_one_player(
                derived[(1, j)].K,
                derived[(2, j)].K,
                derived[(1, j)],
                derived[(2, j)],
                gamma,
                spec.c(1, 2),
                spec.c(2, 1),
            )
            values[_key(1, j)], values[_key(2, j)] = one.home, one.away
            regions_max[_key(1, j)], regions_max[_key(2, j)] = one.region_home, one.region_away
            regions_min[_key(1, j)] = regions_min[_key(2, j)] = EMPTY
            thresholds = one.thresholds
        if chi12 < 0.0:
            for i in (1, 2):
                values[_key(i, 1)] = values[_key(i, 2)].shifted(chi12)
                regions_max[_key(i, 1)] = regions_max[_key(i, 2)]
                regions_min[_key(i, 1)] = ALL
    else:
        c12 = spec.c(1, 2)
        for i in (1, 2) if c12 > 0.0 else (2,):
            one = _solve_one_player(
                -derived[(i, 1)].K,
                -derived[(i, 2)].K,
                derived[(i, 1)],
                derived[(i, 2)],
                gamma,
                spec.chi(1, 2),
                spec.chi(2, 1),
            )
            values[_key(i, 1)], values[_key(i, 2)] = one.home.scaled(-1.0), one.away.scaled(-1.0)
            regions_min[_key(i, 1)], regions_min[_key(i, 2)] = one.region_home, one.region_away
            regions_max[_key(i, 1)] = regions_max[_key(i, 2)] = EMPTY
            thresholds = one.thresholds
        if c12 < 0.0:
            for j in (1, 2):
                values[_key(1, j)] = values[_key(2, j)].shifted(-c12)
                regions_min[_key(1, j)] = regions_min[_key(2, j)]
                regions_max[_key(1, j)] = ALL

    logger.info(
        "Built %s/%s solution with thresholds %s",
        case.value,
        condition.value,
        {k: round(v, 10) for k, v in thresholds.items()} or "none",
    )
    return Solution(
        spec=spec,
        case=case,
        condition=condition,
        values={_key(*pair): values[_key(*pair)] for pair in PAIRS},
        regions_max={_key(*pair): regions_max[_key(*pair)] for pair in PAIRS},
        regions_min={_key(*pair): regions_min[_key(*pair)] for pair in PAIRS},
        thresholds=thresholds,
    )


def solve(spec: GameSpec) -> Solution:
    """Classify ``spec`` and build its solution."""
    return build(spec, *classify(spec))


TWO_THRESHOLD_CELLS = {
    (OrderCase.ROW_GT, CostCondition.B2),
    (OrderCase.ROW_GT, CostCondition.B4),
    (OrderCase.COL_LT, CostCondition.B3),
    (OrderCase.COL_LT, CostCondition.B4),
}


@dataclass(frozen=True)
class TwoThresholdSolution:
    """Free boundaries of a two-threshold cell in value-function terms.

    ``A`` multiplies ``x^m-`` in the switching player's regime 1 and ``B``
    multiplies ``x^m+`` in its regime 2; both change sign for player II.
    """

    x_A: float
    x_B: float
    A: float
    B: float
    lam: float


def solve_two_threshold(
    spec: GameSpec, case: OrderCase, condition: CostCondition
) -> TwoThresholdSolution:
    """Solve the smooth-fit system of a two-threshold cell."""
    if (case, condition) not in TWO_THRESHOLD_CELLS:
        raise ClassificationError(f"{case.value}/{condition.value} has no two-threshold solution")
    _check_cell(spec, case, condition)
    derived = derive_all(spec)
    if case is OrderCase.ROW_GT:
        d1, d2, sign = derived[(1, 2)], derived[(2, 2)], 1.0
        c12, c21 = spec.c(1, 2), spec.c(2, 1)
    else:
        d1, d2, sign = derived[(2, 1)], derived[(2, 2)], -1.0
        c12, c21 = spec.chi(1, 2), spec.chi(2, 1)
    sol = solve_two_threshold_core(
        sign * d1.K, sign * d2.K, d1.m_minus, d2.m_plus, spec.gamma, c12, c21
    )
    return TwoThresholdSolution(
        x_A=sol.x_A, x_B=sol.x_B, A=sign * sol.b, B=sign * sol.a, lam=sol.lam
    )


def linear_growth_constant(solution: Solution) -> float:
    """A constant C with ``|v_ij(x)| <= C (1 + x)`` for the built solution.

    ``x^m+`` terms only live on bounded pieces and ``x^m-`` terms only on
    pieces bounded away from 0, so each is bounded by its value at that edge.
    """
    spec = solution.spec
    k_max = max(d.K for d in derive_all(spec).values())
    costs = abs(spec.c(1, 2)) + abs(spec.c(2, 1)) + abs(spec.chi(1, 2)) + abs(spec.chi(2, 1))
    option = 0.0
    for pv in solution.values.values():
        for piece in pv.pieces:
            if piece.coef_mplus and piece.hi is not None:
                option = max(option, abs(piece.coef_mplus) * piece.hi**piece.m_plus_used)
            if piece.coef_mminus and piece.lo > 0.0:
                option = max(option, abs(piece.coef_mminus) * piece.lo**piece.m_minus_used)
    return k_max + costs + option
