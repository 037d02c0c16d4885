"""CSV and JSON artifacts."""

import json
from pathlib import Path

import pandas as pd

from switching_game.closedform import Solution

FLOAT_FORMAT = "%.16e"


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Write ``frame`` with a header row, full-precision floats and LF line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def save_solution(solution: Solution, path: Path) -> Path:
    """Persist a solution as JSON so that it can be verified later."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(solution.to_dict(), indent=2) + "\n")
    return path


def load_solution(path: Path) -> Solution:
    """Read a solution written by `save_solution`."""
    return Solution.model_validate_json(Path(path).read_text())
