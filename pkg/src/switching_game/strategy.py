"""Closed-loop threshold strategies shared by the simulator and the hitting-time recursion."""

from __future__ import annotations

import math
from enum import Enum
from typing import NamedTuple

from pydantic import BaseModel, ConfigDict, model_validator

from switching_game.closedform import Region, RegionKind, Solution
from switching_game.exceptions import SwitchingGameError
from switching_game.model import PAIRS, GameSpec, Player, other


class RuleKind(str, Enum):
    """When a player leaves its current regime."""

    NEVER = "never"
    ALWAYS = "always_switch"
    ABOVE = "switch_above"
    BELOW = "switch_below"


class Rule(BaseModel):
    """A switching rule for one player in one joint regime."""

    model_config = ConfigDict(frozen=True)

    kind: RuleKind = RuleKind.NEVER
    threshold: float | None = None

    @model_validator(mode="after")
    def _check_threshold(self) -> Rule:
        bounded = self.kind in (RuleKind.ABOVE, RuleKind.BELOW)
        if bounded and (self.threshold is None or not 0.0 < self.threshold < math.inf):
            raise ValueError(f"{self.kind.value} needs a positive finite threshold")
        if not bounded and self.threshold is not None:
            raise ValueError(f"{self.kind.value} takes no threshold")
        return self

    @classmethod
    def above(cls, threshold: float) -> Rule:
        """Switch when the state is at or above ``threshold``; ``inf`` means never."""
        if math.isinf(threshold):
            return cls()
        return cls(kind=RuleKind.ABOVE, threshold=threshold)

    @classmethod
    def below(cls, threshold: float) -> Rule:
        """Switch when the state is at or below ``threshold``; ``0`` means never."""
        if threshold == 0.0:
            return cls()
        return cls(kind=RuleKind.BELOW, threshold=threshold)

    @classmethod
    def from_region(cls, region: Region) -> Rule:
        """The rule that switches exactly on ``region``."""
        match region.kind:
            case RegionKind.EMPTY:
                return cls()
            case RegionKind.ALL:
                return cls(kind=RuleKind.ALWAYS)
            case RegionKind.BELOW:
                return cls(kind=RuleKind.BELOW, threshold=region.threshold)
            case _:
                return cls(kind=RuleKind.ABOVE, threshold=region.threshold)

    def fires(self, x: float) -> bool:
        """Whether the rule switches at ``x``."""
        match self.kind:
            case RuleKind.NEVER:
                return False
            case RuleKind.ALWAYS:
                return True
            case RuleKind.ABOVE:
                return x >= self.threshold  # type: ignore[operator]
            case _:
                return x <= self.threshold  # type: ignore[operator]

    def scaled(self, factor: float) -> Rule:
        """Move a finite threshold by ``factor``."""
        if self.threshold is None:
            return self
        return self.model_copy(update={"threshold": self.threshold * factor})


class Action(NamedTuple):
    """Outcome of the immediate switches at one state."""

    i: int
    j: int
    paid: float
    received: float


def _key(i: int, j: int) -> str:
    return f"{i}{j}"


NEVER = Rule()


class ThresholdStrategy(BaseModel):
    """Threshold rules of both players, one per player and joint regime.

    When both players' rules fire, player I switches first and the rules of
    the new joint regime are consulted again.
    """

    model_config = ConfigDict(frozen=True)

    max_rules: dict[str, Rule]
    min_rules: dict[str, Rule]

    @classmethod
    def per_regime(
        cls, max_rules: dict[int, Rule], min_rules: dict[int, Rule]
    ) -> ThresholdStrategy:
        """Rules that depend only on the player's own regime."""
        return cls(
            max_rules={_key(i, j): max_rules.get(i, NEVER) for i, j in PAIRS},
            min_rules={_key(i, j): min_rules.get(j, NEVER) for i, j in PAIRS},
        )

    def rule(self, player: Player, i: int, j: int) -> Rule:
        """Rule of ``player`` in joint regime ``(i, j)``."""
        rules = self.max_rules if player is Player.MAX else self.min_rules
        return rules[_key(i, j)]

    def act(self, spec: GameSpec, i: int, j: int, x: float) -> Action:
        """Apply every immediate switch prescribed at ``x``."""
        paid = received = 0.0
        seen = {(i, j)}
        while True:
            if self.rule(Player.MAX, i, j).fires(x):
                k = other(i)
                paid += spec.c(i, k)
                i = k
            elif self.rule(Player.MIN, i, j).fires(x):
                l = other(j)  # noqa: E741
                received += spec.chi(j, l)
                j = l
            else:
                return Action(i, j, paid, received)
            if (i, j) in seen:
                raise SwitchingGameError(f"strategy switches in a cycle at x={x!r}")
            seen.add((i, j))

    def continuation(self, i: int, j: int) -> tuple[float, float]:
        """Open interval ``(lo, hi)`` on which nobody switches in ``(i, j)``."""
        lo, hi = 0.0, math.inf
        for rule in (self.rule(Player.MAX, i, j), self.rule(Player.MIN, i, j)):
            if rule.kind is RuleKind.ALWAYS:
                return 0.0, 0.0
            if rule.kind is RuleKind.BELOW:
                lo = max(lo, rule.threshold)  # type: ignore[arg-type]
            elif rule.kind is RuleKind.ABOVE:
                hi = min(hi, rule.threshold)  # type: ignore[arg-type]
        return lo, hi

    def levels(self) -> list[float]:
        """Every finite threshold used by either player."""
        rules = [*self.max_rules.values(), *self.min_rules.values()]
        return sorted({rule.threshold for rule in rules if rule.threshold is not None})

    def has_thresholds(self, player: Player) -> bool:
        """Whether ``player`` uses at least one finite threshold."""
        rules = self.max_rules if player is Player.MAX else self.min_rules
        return any(rule.threshold is not None for rule in rules.values())

    def scaled(self, player: Player, factor: float) -> ThresholdStrategy:
        """Scale every threshold of ``player`` by ``factor``."""
        field = "max_rules" if player is Player.MAX else "min_rules"
        rules = getattr(self, field)
        return self.model_copy(update={field: {k: r.scaled(factor) for k, r in rules.items()}})

    def flipped(self, player: Player, regime: int) -> ThresholdStrategy:
        """Swap never and always for ``player`` whenever it is in ``regime``."""
        field = "max_rules" if player is Player.MAX else "min_rules"
        position = 0 if player is Player.MAX else 1
        swap = {RuleKind.NEVER: Rule(kind=RuleKind.ALWAYS), RuleKind.ALWAYS: NEVER}
        rules = {
            key: swap.get(rule.kind, rule) if int(key[position]) == regime else rule
            for key, rule in getattr(self, field).items()
        }
        return self.model_copy(update={field: rules})


def strategy_from_solution(solution: Solution) -> ThresholdStrategy:
    """The strategy that switches exactly on the solution's switching regions."""
    return ThresholdStrategy(
        max_rules={key: Rule.from_region(r) for key, r in solution.regions_max.items()},
        min_rules={key: Rule.from_region(r) for key, r in solution.regions_min.items()},
    )
