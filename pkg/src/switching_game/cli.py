"""switching-game CLI."""

from __future__ import annotations

import logging
import math
from enum import Enum
from pathlib import Path
from typing import Annotated

import numpy as np
import pandas as pd
import typer
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from rich.console import Console
from rich.table import Table

from switching_game.artifacts import load_solution, save_solution, write_csv
from switching_game.closedform import Solution, solve
from switching_game.exceptions import (
    ClassificationError,
    HittingError,
    SpecValidationError,
    SwitchingGameError,
    ThresholdSolveError,
)
from switching_game.hitting import SearchGrids, threshold_search, write_surface
from switching_game.logs import configure_logging
from switching_game.model import PAIRS, GameSpec, Player, load_spec, validate
from switching_game.montecarlo import SimConfig, simulate_payoff, trace_paths
from switching_game.qvi import GridSpec, make_grid, verify
from switching_game.strategy import strategy_from_solution
from switching_game.sweep import sweep_cost, to_frame

app = typer.Typer(help="Solve, verify and simulate two-player switching games on a GBM.")
console = Console()
logger = logging.getLogger(__name__)

EXIT_INVALID = 1
EXIT_CLASSIFICATION = 2
EXIT_VERIFICATION = 3
EXIT_NUMERICAL = 4


class Command(str, Enum):
    """Sub-commands."""

    SOLVE = "solve"
    VERIFY = "verify"
    SIMULATE = "simulate"
    SEARCH = "search"
    SWEEP = "sweep"


class RunConfig(BaseModel):
    """Options shared by every command."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    command: Command
    input: Path = Field(..., description="JSON game specification.")
    out: Path = Field(Path("out"), description="Directory receiving the artifacts.")
    grid: int = Field(400, ge=2, description="Grid points (solve/verify) or levels per threshold (search).")
    paths: int = Field(10_000, ge=2, description="Monte Carlo paths.")
    seed: int = Field(0, ge=0, description="Monte Carlo seed.")
    dt: float = Field(1e-3, gt=0.0, description="Monte Carlo time step.")
    workers: int = Field(1, ge=1, description="Worker processes.")


InputOption = Annotated[Path, typer.Option("--input", "-i", help="JSON game specification.")]
OutOption = Annotated[Path, typer.Option("--out", "-o", help="Output directory.")]


def _fail(code: int, message: str) -> typer.Exit:
    typer.echo(message, err=True)
    return typer.Exit(code)


def _load(config: RunConfig) -> GameSpec:
    try:
        return load_spec(config.input)
    except OSError as error:
        raise _fail(EXIT_INVALID, f"cannot read {config.input}: {error}") from error
    except ValidationError as error:
        raise _fail(EXIT_INVALID, f"invalid game specification in {config.input}:\n{error}") from error


def _solve(spec: GameSpec) -> Solution:
    try:
        return solve(spec)
    except SpecValidationError as error:
        raise _fail(EXIT_INVALID, str(error)) from error
    except ClassificationError as error:
        raise _fail(EXIT_CLASSIFICATION, f"classification failed: {error}") from error
    except ThresholdSolveError as error:
        raise _fail(EXIT_NUMERICAL, f"threshold solve failed: {error}") from error


def _prepare(config: RunConfig) -> GameSpec:
    config.out.mkdir(parents=True, exist_ok=True)
    return _load(config)


def _regions_text(solution: Solution) -> str:
    lines = [f"case {solution.case.value}, condition {solution.condition.value}"]
    for player, label in ((Player.MAX, "player I"), (Player.MIN, "player II")):
        for i, j in PAIRS:
            lines.append(f"{label} in ({i},{j}): {solution.region(player, i, j).describe()}")
    return "\n".join(lines) + "\n"


def run_solve(config: RunConfig) -> int:
    """Solve the game and write the value functions, thresholds and regions."""
    spec = _prepare(config)
    solution = _solve(spec)
    xs = make_grid(solution, GridSpec(points=config.grid))
    frame = pd.DataFrame({"x": xs})
    for i, j in PAIRS:
        frame[f"v{i}{j}"] = solution.value(i, j, xs)
    write_csv(frame, config.out / "solution.csv")
    thresholds = pd.DataFrame(
        {"name": list(solution.thresholds), "value": list(solution.thresholds.values())}
    )
    write_csv(thresholds, config.out / "thresholds.csv")
    (config.out / "regions.txt").write_text(_regions_text(solution))
    save_solution(solution, config.out / "solution.json")

    table = Table(title=f"{solution.case.value}/{solution.condition.value}")
    table.add_column("regime")
    table.add_column("player I switches")
    table.add_column("player II switches")
    table.add_column(f"v(x0={spec.x0:g})", justify="right")
    for i, j in PAIRS:
        table.add_row(
            f"({i},{j})",
            solution.region(Player.MAX, i, j).describe(),
            solution.region(Player.MIN, i, j).describe(),
            f"{float(solution.value(i, j, spec.x0)):.10g}",
        )
    console.print(table)
    return 0


def run_verify(config: RunConfig, solution_path: Path | None = None) -> int:
    """Check the quasi-variational inequalities of a solution."""
    spec = _prepare(config)
    if solution_path is None:
        solution = _solve(spec)
    else:
        try:
            solution = load_solution(solution_path)
        except (OSError, ValidationError) as error:
            raise _fail(EXIT_INVALID, f"cannot load solution {solution_path}: {error}") from error
    report = verify(spec, solution, GridSpec(points=config.grid))
    report.write_csv(config.out / "qvi_report.csv")
    table = Table(title="QVI verification")
    table.add_column("check")
    table.add_column("value", justify="right")
    table.add_row("worst residual", f"{report.worst_residual:.3e}")
    table.add_row("worst max-min/min-max gap", f"{report.worst_gap:.3e}")
    table.add_row("worst smooth-fit jump", f"{report.worst_jump:.3e}")
    table.add_row("untagged points", str(len(report.violations)))
    console.print(table)
    if not report.passed:
        raise _fail(EXIT_VERIFICATION, "verification failed")
    typer.echo("verification passed")
    return 0


def run_simulate(
    config: RunConfig,
    antithetic: bool = False,
    horizon: float | None = None,
    traces: int = 0,
) -> int:
    """Estimate the payoff of the equilibrium strategy from every joint regime."""
    spec = _prepare(config)
    solution = _solve(spec)
    strategy = strategy_from_solution(solution)
    try:
        sim = SimConfig(
            paths=config.paths,
            dt=config.dt,
            horizon=horizon,
            seed=config.seed,
            antithetic=antithetic,
            workers=config.workers,
        )
        estimates = {pair: simulate_payoff(spec, strategy, sim, start=pair) for pair in PAIRS}
    except ValidationError as error:
        raise _fail(EXIT_INVALID, f"invalid simulation settings:\n{error}") from error
    except SwitchingGameError as error:
        raise _fail(EXIT_NUMERICAL, f"simulation failed: {error}") from error
    frame = pd.DataFrame(
        {
            "i": [i for i, _ in PAIRS],
            "j": [j for _, j in PAIRS],
            "x0": spec.x0,
            "mean": [estimates[pair].mean for pair in PAIRS],
            "std_error": [estimates[pair].std_error for pair in PAIRS],
            "closed_form": [float(solution.value(*pair, spec.x0)) for pair in PAIRS],
        }
    )
    write_csv(frame, config.out / "estimates.csv")
    if traces:
        write_csv(trace_paths(spec, strategy, sim, count=traces), config.out / "traces.csv")

    table = Table(title=f"{sim.paths} paths, dt={sim.dt:g}, seed={sim.seed}")
    for column in ("regime", "estimate", "std. error", "closed form"):
        table.add_column(column, justify="right")
    for pair in PAIRS:
        table.add_row(
            f"({pair[0]},{pair[1]})",
            f"{estimates[pair].mean:.8g}",
            f"{estimates[pair].std_error:.2g}",
            f"{float(solution.value(*pair, spec.x0)):.8g}",
        )
    console.print(table)
    return 0


def run_search(
    config: RunConfig,
    lo: float,
    hi: float,
    player_two_never: bool = False,
    regime: tuple[int, int] = (1, 1),
) -> int:
    """Run the min-max threshold search at ``x0``."""
    spec = _prepare(config)
    try:
        validate(spec).raise_for_violations()
    except SpecValidationError as error:
        raise _fail(EXIT_INVALID, str(error)) from error
    grids = SearchGrids.geometric(lo, hi, config.grid)
    if player_two_never:
        grids = grids.model_copy(update={"x12_prime": (math.inf,)})
    try:
        result = threshold_search(spec, spec.x0, grids, regime=regime, workers=config.workers)
    except HittingError as error:
        raise _fail(EXIT_NUMERICAL, f"search failed: {error}") from error
    write_surface(config.out / "surface.csv", result)
    write_csv(result.best_frame(), config.out / "best.csv")
    typer.echo(
        f"y21={result.best.y21:.6g} x12'={result.best.x12_prime:.6g} x12={result.best.x12:.6g} "
        f"value={result.value:.10g} gap={result.gap:.3g}"
    )
    return 0


def run_sweep(config: RunConfig, cost: str, values: np.ndarray) -> int:
    """Re-solve the game over a range of one switching cost."""
    spec = _prepare(config)
    try:
        rows = sweep_cost(spec, cost, values)
    except SwitchingGameError as error:
        raise _fail(EXIT_INVALID, str(error)) from error
    write_csv(to_frame(rows), config.out / "sweep.csv")
    solved = sum(1 for row in rows if not row.error)
    typer.echo(f"solved {solved} of {len(rows)} values of {cost}")
    return 0


@app.callback()
def main(
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Log debug messages.")] = False,
    quiet: Annotated[bool, typer.Option("--quiet", "-q", help="Log warnings only.")] = False,
) -> None:
    """Configure logging for every command."""
    configure_logging(logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO)


@app.command("solve")
def solve_command(
    input: InputOption,  # noqa: A002
    out: OutOption = Path("out"),
    grid: Annotated[int, typer.Option(help="Points of the output grid.")] = 400,
) -> None:
    """Solve a game and write solution.csv, thresholds.csv, regions.txt and solution.json."""
    run_solve(RunConfig(command=Command.SOLVE, input=input, out=out, grid=grid))


@app.command("verify")
def verify_command(
    input: InputOption,  # noqa: A002
    out: OutOption = Path("out"),
    solution: Annotated[
        Path | None, typer.Option(help="solution.json written by solve; re-solved if omitted.")
    ] = None,
    grid: Annotated[int, typer.Option(help="Points of the verification grid.")] = 400,
) -> None:
    """Verify the quasi-variational inequalities and write qvi_report.csv."""
    run_verify(RunConfig(command=Command.VERIFY, input=input, out=out, grid=grid), solution)


@app.command("simulate")
def simulate_command(
    input: InputOption,  # noqa: A002
    out: OutOption = Path("out"),
    paths: Annotated[int, typer.Option(help="Number of paths.")] = 10_000,
    seed: Annotated[int, typer.Option(help="Root seed.")] = 0,
    dt: Annotated[float, typer.Option(help="Time step.")] = 1e-3,
    horizon: Annotated[float | None, typer.Option(help="Truncation horizon.")] = None,
    antithetic: Annotated[bool, typer.Option(help="Use antithetic pairs.")] = False,
    workers: Annotated[int, typer.Option(help="Worker processes.")] = 1,
    traces: Annotated[int, typer.Option(help="Dump this many path traces (at most 100).")] = 0,
) -> None:
    """Simulate the equilibrium strategy and write estimates.csv."""
    config = RunConfig(
        command=Command.SIMULATE,
        input=input,
        out=out,
        paths=paths,
        seed=seed,
        dt=dt,
        workers=workers,
    )
    run_simulate(config, antithetic=antithetic, horizon=horizon, traces=traces)


@app.command("search")
def search_command(
    input: InputOption,  # noqa: A002
    out: OutOption = Path("out"),
    grid: Annotated[int, typer.Option(help="Levels per threshold.")] = 64,
    lo: Annotated[float, typer.Option(help="Smallest candidate level.")] = 0.1,
    hi: Annotated[float, typer.Option(help="Largest candidate level.")] = 10.0,
    player_two_never: Annotated[
        bool, typer.Option("--player-two-never", help="Pin player II to never switching.")
    ] = False,
    start: Annotated[str, typer.Option(help="Starting joint regime, e.g. 11.")] = "11",
    workers: Annotated[int, typer.Option(help="Worker processes.")] = 1,
) -> None:
    """Search the threshold grid and write surface.csv and best.csv."""
    if start not in {f"{i}{j}" for i, j in PAIRS}:
        raise _fail(EXIT_INVALID, f"--start must be one of 11, 12, 21, 22, got {start!r}")
    config = RunConfig(
        command=Command.SEARCH, input=input, out=out, grid=grid, workers=workers
    )
    run_search(config, lo, hi, player_two_never, (int(start[0]), int(start[1])))


@app.command("sweep")
def sweep_command(
    input: InputOption,  # noqa: A002
    out: OutOption = Path("out"),
    cost: Annotated[str, typer.Option(help="Cost to vary: c12, c21, chi12 or chi21.")] = "c12",
    start: Annotated[float, typer.Option(help="First value.")] = 0.1,
    stop: Annotated[float, typer.Option(help="Last value.")] = 1.0,
    num: Annotated[int, typer.Option(help="Number of values.")] = 10,
) -> None:
    """Re-solve the game over a range of one cost and write sweep.csv."""
    config = RunConfig(command=Command.SWEEP, input=input, out=out)
    run_sweep(config, cost, np.linspace(start, stop, num))


if __name__ == "__main__":
    app()
