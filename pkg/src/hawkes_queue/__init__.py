"""Hawkes and state-dependent Hawkes infinite-server queues.

Simulation, closed-form and ODE moments, characteristic-ODE transforms and a
Monte Carlo validation harness.
"""

import os as _os

# numba's TBB layer warns on machines without a matching libtbb; the
# workqueue layer is always available and sufficient for independent paths.
_os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

from .errors import (  # noqa: E402
    DomainError,
    EvaluationError,
    ExplosionError,
    IntegrationError,
    NonFiniteError,
    NumericalError,
    ParameterError,
    SimulationError,
    StepUnderflowError,
)
from .model import (  # noqa: E402
    ArrivalParams,
    Constant,
    Exponential,
    Model,
    ModelKind,
    ServiceParams,
    laplace,
    preset,
    raw_moment,
    sample,
)

__version__ = "0.1.0"
