"""Time-varying distributed optimization over stochastic multi-agent systems.

Protocols, closed-form bounds and seeded Monte Carlo ensembles for agents
whose dynamics are SDEs tracking the minimizer of a time-varying objective.
"""

__version__ = "0.1.0"

from .errors import ToolkitError  # noqa: E402

__all__ = ["ToolkitError", "__version__"]
