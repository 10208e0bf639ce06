"""Exception types raised across the package.

All of them derive from :class:`ValueError` so callers that only care about
"bad input" can catch one thing.
"""

from __future__ import annotations


class FraclabError(ValueError):
    """Base class for every rejection raised by fraclab."""


class GridError(FraclabError):
    """Invalid grid, grid function, ball or ladder."""


class MarginError(FraclabError):
    """A semigroup time whose reach does not fit inside the grid margin."""


class KernelError(FraclabError):
    """Invalid kernel family parameters or profile samples."""


class QuadratureError(FraclabError):
    """Quadrature window or step count that cannot resolve the integrand."""


class ExponentError(FraclabError):
    """Exponent outside the admissible window of an operator or norm."""


class IndexWindowError(FraclabError):
    """An index tuple violating one named admissibility constraint.

    Parameters
    ----------
    constraint:
        Human readable form of the violated inequality, e.g. ``"β₂ < −α"``.
    """

    def __init__(self, constraint: str, detail: str = "") -> None:
        self.constraint = constraint
        msg = f"{constraint} violated"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class ConfigError(FraclabError):
    """Malformed or inconsistent configuration file."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None) -> None:
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")
