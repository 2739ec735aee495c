"""Forward simulation and moment-based source inversion for stochastic
time-fractional diffusion on [0, 1].

Modules: ``mlfunc`` (Mittag-Leffler function), ``fracops`` (L1 weights and
fractional integrals), ``forward`` (spectral kernels and the FEM/L1 solver),
``stochastic`` (ensembles and moments), ``volterra`` (inversion),
``mollify`` (regularisation) and ``experiments`` (presets, driver, CLI).
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DomainError,
    KernelTailError,
    NumericalFailure,
    StochFracError,
)
from .fracops import TimeGrid  # noqa: E402
from .mlfunc import MLParams, ml_eval, ml_time_derivative  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "KernelTailError",
    "NumericalFailure",
    "StochFracError",
    "TimeGrid",
    "MLParams",
    "ml_eval",
    "ml_time_derivative",
]
