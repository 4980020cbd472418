from __future__ import annotations

from typing import Iterable, Optional, Sequence, Tuple

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COMPUTE = 3


class ColocError(Exception):
    """Base class for every error raised by the package.

    exit_code is what the command line returns when the error reaches it.
    """

    exit_code: int = EXIT_COMPUTE


class TopologyError(ColocError):
    exit_code = EXIT_INPUT


class InfeasibleSpecError(ColocError):
    """A graph model or degree target that cannot be realized."""

    exit_code = EXIT_INPUT


class ConfigError(ColocError):
    exit_code = EXIT_INPUT


class InstanceParseError(ColocError):
    """Malformed instance file; carries 1-based line and column."""

    exit_code = EXIT_INPUT

    def __init__(self, message: str, line: int, column: int = 1) -> None:
        self.line = int(line)
        self.column = int(column)
        super().__init__(f"line {self.line}, column {self.column}: {message}")


class ZeroDistanceLinkError(ColocError):
    exit_code = EXIT_INPUT

    def __init__(self, link: Tuple[int, int]) -> None:
        # stored 0-based, reported 1-based
        self.link = (int(link[0]), int(link[1]))
        super().__init__(
            f"link ({self.link[0] + 1},{self.link[1] + 1}) has zero length"
        )


class SingularMatrixError(ColocError):
    pass


class SingularSampleError(ColocError):
    def __init__(self, indices: Iterable[int]) -> None:
        self.indices: Sequence[int] = tuple(int(i) for i in indices)
        super().__init__(f"non-invertible samples at indices {list(self.indices)}")


class EmptySampleError(ColocError):
    pass


class AllTrialsSingularError(ColocError):
    pass


class AllRestartsSingularError(ColocError):
    def __init__(self, restarts: int, message: Optional[str] = None) -> None:
        self.restarts = int(restarts)
        super().__init__(message or f"all {self.restarts} restarts ended on a singular geometry")
