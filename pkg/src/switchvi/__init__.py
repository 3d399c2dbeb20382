"""Finite-difference and lattice solvers for switching games with interconnected obstacles."""
from pathlib import Path

__version__ = "0.1.0"

PROBLEMS_DIR = Path(__file__).with_name("problems")


def shipped_problem(name: str) -> Path:
    """Path of a problem file shipped with the package, e.g. ``shipped_problem('d1')``."""
    path = PROBLEMS_DIR / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(f"no shipped problem {name!r}")
    return path
