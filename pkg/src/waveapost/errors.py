"""Shared exception types with CLI exit-code mapping.

Exit codes used by the command-line tool: 0 ok, 1 check failure,
2 configuration error, 3 numerical abort.
"""


class ConfigError(ValueError):
    """Invalid configuration value (CLI exit code 2)."""


class DataError(ValueError):
    """Invalid problem data (non-finite source, non-positive wave speed, ...)."""


class IncompatibleMeshError(ValueError):
    """Meshes do not share the same macro partition."""


class NumericalAbort(RuntimeError):
    """Numerical failure: CFL violation, non-convergent iteration (exit code 3)."""
