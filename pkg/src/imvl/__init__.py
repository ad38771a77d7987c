"""High-order conservative block-centered schemes for 1D transport with
equilibrium adsorption."""
from __future__ import annotations

__version__ = "0.1.0"

from .coefficients import PRESETS, SchemeParams, get_scheme  # noqa: E402
from .solver import Problem, RunResult, SolverConfig, run  # noqa: E402
from .cases import builtin_case  # noqa: E402

__all__ = ["PRESETS", "SchemeParams", "get_scheme", "Problem", "RunResult", "SolverConfig", "run", "builtin_case", "__version__"]
