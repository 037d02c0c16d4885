"""Pointwise check of the Isaacs quasi-variational inequalities.

For each joint regime the generator residual ``G = r v - L v - x^g`` and the
obstacle gaps ``v - M[v]`` (player I) and ``v - N[v]`` (player II) are
evaluated on a grid. A point is certified by one of three conditions:

* ``A1``: ``G = 0``, ``v - M >= 0``, ``v - N <= 0`` (nobody switches),
* ``A2``: ``G >= 0``, ``v - M = 0``, ``v - N <= 0`` (player I switches),
* ``A3``: ``v - N = 0`` and ``min(G, v - M) <= 0`` (player II switches).

Both the max-min and the min-max composite expressions are evaluated. The
residual tolerance is absolute, in the units of the value functions, and
applies to the composite residuals, to their max-min/min-max gap and to the
tags. Smooth-fit jumps are measured relative to ``max(1, |v|)``.
"""

from __future__ import annotations

import logging
from enum import Enum
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from switching_game.artifacts import write_csv
from switching_game.closedform import ArrayLike, PiecewiseValue, Solution
from switching_game.exceptions import BreakpointError
from switching_game.model import PAIRS, GameSpec, other

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
JUMP_TOL = 1e-9
BREAKPOINT_RTOL = 1e-12


class Tag(str, Enum):
    """Which condition certifies a grid point."""

    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    VIOLATION = "violation"


class GridSpec(BaseModel):
    """Verification grid settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    points: int = Field(400, ge=2, description="Number of log-spaced points.")
    decades: float = Field(1.0, gt=0.0, description="Decades covered beyond the extreme thresholds.")
    lo: float = Field(0.01, gt=0.0, description="Lower end when the solution has no threshold.")
    hi: float = Field(100.0, gt=0.0, description="Upper end when the solution has no threshold.")
    offset: float = Field(1e-7, gt=0.0, description="Relative offset around breakpoints.")
    tolerance: float = Field(RESIDUAL_TOL, gt=0.0, description="Residual tolerance.")


def _breakpoints(solution: Solution) -> list[float]:
    points = {bp for pv in solution.values.values() for bp in pv.breakpoints}
    return sorted(points)


def make_grid(solution: Solution, grid: GridSpec | None = None) -> npt.NDArray[np.float64]:
    """Log-spaced grid around the thresholds, with points just either side of breakpoints."""
    grid = grid or GridSpec()
    thresholds = solution.finite_thresholds()
    if thresholds:
        lo = thresholds[0] / 10.0**grid.decades
        hi = thresholds[-1] * 10.0**grid.decades
    else:
        lo, hi = grid.lo, grid.hi
    xs = np.geomspace(lo, hi, grid.points)
    breakpoints = _breakpoints(solution)
    if breakpoints:
        bps = np.array(breakpoints)
        near = np.min(np.abs(xs[:, None] / bps[None, :] - 1.0), axis=1) <= grid.offset
        xs = np.concatenate([xs[~near], bps * (1.0 - grid.offset), bps * (1.0 + grid.offset)])
    return np.sort(xs)


def _generator(
    spec: GameSpec, i: int, j: int, pv: PiecewiseValue, x: ArrayLike
) -> ArrayLike:
    sigma, b = spec.sigma(i, j), spec.b(i, j)
    return 0.5 * sigma * sigma * x * x * pv.second_derivative(x) + b * x * pv.derivative(x)


def apply_generator(spec: GameSpec, i: int, j: int, pv: PiecewiseValue, x: float) -> float:
    """Return ``L_ij v (x) = sigma^2 x^2 v''/2 + b x v'`` using analytic derivatives.

    Examples
    --------
    >>> from switching_game.closedform import Piece
    >>> spec = GameSpec(
    ...     drift=((0.1, 0.1), (0.1, 0.1)), vol=((1, 1), (1, 1)), discount=1, gamma=0.5,
    ...     cost_max=((0, 1), (1, 0)), cost_min=((0, 1), (1, 0)))
    >>> flat = PiecewiseValue(gamma=0.5, pieces=(Piece(constant=3.0),))
    >>> apply_generator(spec, 1, 1, flat, 2.0)
    0.0
    """
    if x <= 0.0:
        raise BreakpointError(f"generator needs x > 0, got {x}")
    for bp in pv.breakpoints:
        if abs(x - bp) <= BREAKPOINT_RTOL * bp:
            raise BreakpointError(f"x={x!r} is within 1e-12 of breakpoint {bp!r}; offset it")
    return float(_generator(spec, i, j, pv, x))


def generator_residual(
    spec: GameSpec, i: int, j: int, pv: PiecewiseValue, x: ArrayLike
) -> ArrayLike:
    """Return ``r v - L v - x^g``."""
    return spec.discount * pv.value(x) - _generator(spec, i, j, pv, x) - np.asarray(x) ** spec.gamma


def intervention_max(solution: Solution, i: int, j: int, x: ArrayLike) -> ArrayLike:
    """Player I's best switch: ``M_ij[v](x) = v_kj(x) - c_ik`` with ``k != i``."""
    k = other(i)
    return solution.value(k, j, x) - solution.spec.c(i, k)


def intervention_min(solution: Solution, i: int, j: int, x: ArrayLike) -> ArrayLike:
    """Player II's best switch: ``N_ij[v](x) = v_il(x) + chi_jl`` with ``l != j``."""
    l = other(j)  # noqa: E741
    return solution.value(i, l, x) + solution.spec.chi(j, l)


class BreakpointJump(BaseModel):
    """Relative value and derivative jumps of one value function at one breakpoint."""

    model_config = ConfigDict(frozen=True)

    i: int
    j: int
    x: float
    value_jump: float
    derivative_jump: float


def smooth_fit_check(solution: Solution) -> list[BreakpointJump]:
    """Measure continuity and C1 pasting at every interior breakpoint."""
    jumps = []
    for i, j in PAIRS:
        pv = solution.pv(i, j)
        for bp in pv.breakpoints:
            v_left, v_right = pv.one_sided(bp, 0)
            d_left, d_right = pv.one_sided(bp, 1)
            jumps.append(
                BreakpointJump(
                    i=i,
                    j=j,
                    x=bp,
                    value_jump=abs(v_left - v_right) / max(1.0, abs(v_right)),
                    derivative_jump=abs(d_left - d_right) / max(1.0, abs(d_right)),
                )
            )
    return jumps


class QviRow(BaseModel):
    """Residuals of one joint regime at one grid point."""

    model_config = ConfigDict(frozen=True)

    x: float
    i: int
    j: int
    G: float
    v_minus_M: float
    v_minus_N: float
    tag: Tag


class QviReport(BaseModel):
    """Outcome of a verification run."""

    model_config = ConfigDict(frozen=True)

    grid: tuple[float, ...]
    rows: tuple[QviRow, ...]
    worst_residual: float
    worst_gap: float
    jumps: tuple[BreakpointJump, ...]
    tolerance: float = RESIDUAL_TOL

    @property
    def worst_jump(self) -> float:
        """Largest relative value or derivative jump."""
        return max(
            (max(jump.value_jump, jump.derivative_jump) for jump in self.jumps), default=0.0
        )

    @property
    def violations(self) -> list[QviRow]:
        """Rows that no condition certifies."""
        return [row for row in self.rows if row.tag is Tag.VIOLATION]

    @property
    def passed(self) -> bool:
        """Whether residuals, the max-min/min-max gap, tags and smooth fit are all within tolerance."""
        return (
            self.worst_residual <= self.tolerance
            and self.worst_gap <= self.tolerance
            and self.worst_jump <= JUMP_TOL
            and not self.violations
        )

    def tags(self, i: int, j: int) -> list[tuple[float, Tag]]:
        """``(x, tag)`` pairs of one joint regime."""
        return [(row.x, row.tag) for row in self.rows if (row.i, row.j) == (i, j)]

    def to_frame(self) -> pd.DataFrame:
        """Rows as a data frame with the CSV column names."""
        return pd.DataFrame(
            {
                "x": [row.x for row in self.rows],
                "regime_i": [row.i for row in self.rows],
                "regime_j": [row.j for row in self.rows],
                "G": [row.G for row in self.rows],
                "v_minus_M": [row.v_minus_M for row in self.rows],
                "v_minus_N": [row.v_minus_N for row in self.rows],
                "tag": [row.tag.value for row in self.rows],
            }
        )

    def write_csv(self, path: Path) -> Path:
        """Write the report as CSV."""
        return write_csv(self.to_frame(), path)


def _tag(g: float, vm: float, vn: float, tol: float) -> Tag:
    if abs(g) <= tol and vm >= -tol and vn <= tol:
        return Tag.A1
    if g >= -tol and abs(vm) <= tol and vn <= tol:
        return Tag.A2
    if abs(vn) <= tol and min(g, vm) <= tol:
        return Tag.A3
    return Tag.VIOLATION


def verify(spec: GameSpec, solution: Solution, grid: GridSpec | None = None) -> QviReport:
    """Evaluate both composite QVI systems on a grid and tag every point."""
    grid = grid or GridSpec()
    xs = make_grid(solution, grid)
    rows: list[QviRow] = []
    worst_residual = 0.0
    worst_gap = 0.0
    for i, j in PAIRS:
        pv = solution.pv(i, j)
        v = pv.value(xs)
        g = generator_residual(spec, i, j, pv, xs)
        vm = v - intervention_max(solution, i, j, xs)
        vn = v - intervention_min(solution, i, j, xs)
        upper = np.maximum(np.minimum(g, vm), vn)
        lower = np.minimum(np.maximum(g, vn), vm)
        worst_residual = max(worst_residual, float(np.max(np.abs(upper))), float(np.max(np.abs(lower))))
        worst_gap = max(worst_gap, float(np.max(np.abs(upper - lower))))
        for x, gk, vmk, vnk in zip(xs, g, vm, vn, strict=True):
            tag = _tag(float(gk), float(vmk), float(vnk), grid.tolerance)
            rows.append(
                QviRow(x=float(x), i=i, j=j, G=float(gk), v_minus_M=float(vmk), v_minus_N=float(vnk), tag=tag)
            )
    report = QviReport(
        grid=tuple(float(x) for x in xs),
        rows=tuple(rows),
        worst_residual=worst_residual,
        worst_gap=worst_gap,
        jumps=tuple(smooth_fit_check(solution)),
        tolerance=grid.tolerance,
    )
    if report.passed:
        logger.info("QVI verification passed, worst residual %.3e", worst_residual)
    else:
        logger.warning(
            "QVI verification failed: worst residual %.3e, worst gap %.3e, worst jump %.3e, %d untagged points",
            worst_residual,
            worst_gap,
            report.worst_jump,
            len(report.violations),
        )
    return report
