"""Game specification, standing-assumption checks and per-regime constants.

The state follows a geometric Brownian motion whose drift ``b_ij`` and
volatility ``sigma_ij`` depend on the joint regime ``(i, j)``; player I (the
maximiser) controls ``i`` and pays ``c_ik`` to switch, player II (the minimiser)
controls ``j`` and its cost ``chi_jl`` is added to the payoff. Regimes are
numbered 1 and 2 everywhere in the public API.
"""

from __future__ import annotations

import logging
import math
from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator

from switching_game.exceptions import SpecValidationError, SwitchingGameError

logger = logging.getLogger(__name__)

REGIMES: tuple[int, int] = (1, 2)
PAIRS: tuple[tuple[int, int], ...] = ((1, 1), (1, 2), (2, 1), (2, 2))

Matrix = tuple[tuple[float, float], tuple[float, float]]

COST_NAMES: dict[str, str] = {
    "c12": "cost_max",
    "c21": "cost_max",
    "chi12": "cost_min",
    "chi21": "cost_min",
}


class Player(str, Enum):
    """The two players: MAX (player I, pays c) and MIN (player II, adds chi)."""

    MAX = "max"
    MIN = "min"


def other(regime: int) -> int:
    """Return the regime a player switches to from ``regime``."""
    return 3 - regime


class GameSpec(BaseModel):
    """A complete problem instance."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    drift: Matrix = Field(..., description="Growth rate b_ij indexed by joint regime (i, j).")
    vol: Matrix = Field(..., description="Volatility sigma_ij indexed by joint regime (i, j).")
    discount: float = Field(..., description="Discount rate r.")
    gamma: float = Field(..., description="Profit exponent, the running profit is x**gamma.")
    cost_max: Matrix = Field(
        ..., description="Player I switching costs c_ik; the diagonal must be zero."
    )
    cost_min: Matrix = Field(
        ..., description="Player II switching costs chi_jl; the diagonal must be zero."
    )
    x0: float = Field(1.0, description="Initial state.")

    @field_validator("cost_max", "cost_min")
    @classmethod
    def _zero_diagonal(cls, value: Matrix) -> Matrix:
        if value[0][0] != 0.0 or value[1][1] != 0.0:
            raise ValueError("diagonal entries must be 0 (staying in a regime is free)")
        return value

    def b(self, i: int, j: int) -> float:
        """Drift of joint regime ``(i, j)``."""
        return self.drift[i - 1][j - 1]

    def sigma(self, i: int, j: int) -> float:
        """Volatility of joint regime ``(i, j)``."""
        return self.vol[i - 1][j - 1]

    def c(self, i: int, k: int) -> float:
        """Cost paid by player I to switch from ``i`` to ``k``."""
        return self.cost_max[i - 1][k - 1]

    def chi(self, j: int, l: int) -> float:  # noqa: E741
        """Cost added to the payoff when player II switches from ``j`` to ``l``."""
        return self.cost_min[j - 1][l - 1]

    def with_cost(self, name: str, value: float) -> GameSpec:
        """Return a copy with one off-diagonal cost replaced, e.g. ``name="c12"``."""
        if name not in COST_NAMES:
            raise SwitchingGameError(
                f"unknown cost name {name!r}, expected one of {', '.join(COST_NAMES)}"
            )
        field = COST_NAMES[name]
        row, col = int(name[-2]) - 1, int(name[-1]) - 1
        matrix = [list(r) for r in getattr(self, field)]
        matrix[row][col] = value
        return self.model_copy(update={field: (tuple(matrix[0]), tuple(matrix[1]))})


class RegimeDerived(BaseModel):
    """Characteristic roots and no-switch coefficient of one joint regime."""

    model_config = ConfigDict(frozen=True)

    m_plus: float = Field(..., description="Positive root, greater than 1.")
    m_minus: float = Field(..., description="Negative root.")
    K: float = Field(..., description="No-switch value coefficient, V = K x**gamma.")


class Violation(BaseModel):
    """One violated standing assumption."""

    model_config = ConfigDict(frozen=True)

    label: str
    message: str

    def __str__(self) -> str:
        return f"{self.label}: {self.message}"


class ValidationReport(BaseModel):
    """Every violated assumption of a spec; empty when the spec is valid."""

    model_config = ConfigDict(frozen=True)

    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        """Whether no assumption is violated."""
        return not self.violations

    def raise_for_violations(self) -> None:
        """Raise `SpecValidationError` listing the violations, if any."""
        if self.violations:
            joined = "; ".join(str(v) for v in self.violations)
            raise SpecValidationError(f"invalid game specification: {joined}", report=self)


def k_denominator(spec: GameSpec, i: int, j: int) -> float:
    """Return r - b gamma + sigma**2 gamma (1 - gamma) / 2 for regime ``(i, j)``."""
    g = spec.gamma
    sigma = spec.sigma(i, j)
    return spec.discount - spec.b(i, j) * g + 0.5 * sigma * sigma * g * (1.0 - g)


def validate(spec: GameSpec) -> ValidationReport:
    """Check the standing assumptions and report every violation.

    With two regimes per player the triangular condition on costs is vacuous,
    so only the no-arbitrage sums are checked.

    Examples
    --------
    >>> spec = GameSpec(
    ...     drift=((0, 0), (0, 0)), vol=((1, 1), (1, 1)), discount=1, gamma=0.5,
    ...     cost_max=((0, -1), (0.5, 0)), cost_min=((0, 1), (1, 0)))
    >>> [str(v) for v in validate(spec).violations]
    ['H3: c12+c21 ≤ 0']
    """
    violations: list[Violation] = []
    if not 0.0 < spec.gamma < 1.0:
        violations.append(Violation(label="gamma-range", message="gamma out of (0,1)"))
    if spec.discount <= 0.0:
        violations.append(Violation(label="H1", message=f"discount {spec.discount} ≤ 0"))
    if spec.x0 <= 0.0:
        violations.append(Violation(label="H1", message=f"x0 {spec.x0} ≤ 0"))
    for i, j in PAIRS:
        if spec.sigma(i, j) <= 0.0:
            violations.append(
                Violation(label="H1", message=f"sigma{i}{j} = {spec.sigma(i, j)} ≤ 0")
            )
    if spec.c(1, 2) + spec.c(2, 1) <= 0.0:
        violations.append(Violation(label="H3", message="c12+c21 ≤ 0"))
    if spec.chi(1, 2) + spec.chi(2, 1) <= 0.0:
        violations.append(Violation(label="H3", message="chi12+chi21 ≤ 0"))
    for i, j in PAIRS:
        if k_denominator(spec, i, j) <= 0.0:
            violations.append(
                Violation(label="K", message=f"no-switch value undefined in regime ({i},{j})")
            )
    rho = max(spec.b(i, j) for i, j in PAIRS)
    if spec.discount <= rho:
        violations.append(
            Violation(label="growth", message=f"discount {spec.discount} ≤ max drift {rho}")
        )
    return ValidationReport(violations=tuple(violations))


def characteristic_roots(b: float, sigma: float, r: float) -> tuple[float, float]:
    """Return the roots of sigma**2 m (m - 1) / 2 + b m - r = 0 as ``(m_plus, m_minus)``.

    The larger-magnitude root is computed first and the other one from the
    product of the roots, which avoids cancellation.
    """
    s2 = sigma * sigma
    p = b / s2 - 0.5
    product = -2.0 * r / s2
    disc = math.sqrt(p * p - product)
    if p <= 0.0:
        m_plus = -p + disc
        return m_plus, product / m_plus
    m_minus = -p - disc
    return product / m_minus, m_minus


def derive(spec: GameSpec, i: int, j: int) -> RegimeDerived:
    """Return m+, m- and K for joint regime ``(i, j)``.

    Examples
    --------
    >>> spec = GameSpec(
    ...     drift=((0, 0), (0, 0)), vol=((1, 1), (1, 1)), discount=0.5, gamma=0.5,
    ...     cost_max=((0, 1), (1, 0)), cost_min=((0, 1), (1, 0)))
    >>> round(derive(spec, 1, 1).m_plus, 4)
    1.618
    """
    denominator = k_denominator(spec, i, j)
    if denominator <= 0.0:
        raise SpecValidationError(
            f"no-switch value undefined in regime ({i},{j}): denominator {denominator} ≤ 0"
        )
    m_plus, m_minus = characteristic_roots(spec.b(i, j), spec.sigma(i, j), spec.discount)
    return RegimeDerived(m_plus=m_plus, m_minus=m_minus, K=1.0 / denominator)


def derive_all(spec: GameSpec) -> dict[tuple[int, int], RegimeDerived]:
    """Derive the constants of all four joint regimes."""
    return {pair: derive(spec, *pair) for pair in PAIRS}


def no_switch_value(spec: GameSpec, i: int, j: int, x: float) -> float:
    """Expected discounted profit when nobody ever switches, K_ij x**gamma."""
    if x <= 0.0:
        raise SwitchingGameError(f"state must be positive, got x={x}")
    return derive(spec, i, j).K * x**spec.gamma


def load_spec(path: Path) -> GameSpec:
    """Read a JSON game specification; unknown keys are rejected."""
    spec = GameSpec.model_validate_json(Path(path).read_text())
    logger.debug("Loaded game specification from %s", path)
    return spec
