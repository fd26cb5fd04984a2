"""Exception hierarchy shared by every module.

Each concrete error carries a distinct ``exit_code`` so the CLI can map
computational failures onto process exit statuses without a lookup table.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all errors raised by tvsmas."""

    exit_code = 9


class ConfigInvalid(ToolkitError):
    exit_code = 3

    def __init__(self, message: str, pointer: str = ""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


class NotStronglyConnected(ToolkitError):
    exit_code = 4


class NotDetailBalanced(ToolkitError):
    exit_code = 5

    def __init__(self, edge: tuple[int, int], message: str = ""):
        self.edge = edge
        i, j = edge
        super().__init__(message or f"inconsistent detail-balance weights on edge ({i}, {j})")


class AsymmetricInput(ToolkitError):
    exit_code = 10


class NonFiniteInput(ToolkitError):
    exit_code = 6


class NonFiniteState(ToolkitError):
    exit_code = 6

    def __init__(self, step: int, realization: int | None = None):
        self.step = step
        self.realization = realization
        where = f"step {step}"
        if realization is not None:
            where += f" of realization {realization}"
        super().__init__(f"state became non-finite at {where}")


class SingularHessian(ToolkitError):
    exit_code = 7


class SingularEstimatorMatrix(ToolkitError):
    exit_code = 7


class SingularSystem(ToolkitError):
    exit_code = 7


class NoConvergence(ToolkitError):
    exit_code = 8

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"Newton iteration did not converge (residual {residual:.3e})")


class ShapeMismatch(ToolkitError):
    exit_code = 11


class InvalidExponents(ToolkitError):
    exit_code = 12


class InvalidTheta(ToolkitError):
    exit_code = 12


class EmptySample(ToolkitError):
    exit_code = 13


class InvalidGraph(ToolkitError):
    exit_code = 14
