"""HySure fusion: VCA subspace, sensor estimation and the ADMM solver."""

from .sensor import estimate_sensor
from .solver import (HysureParams, NumericalError, SolveTrace, hysure_objective,
                     hysure_sharpen, vtv_prox)
from .vca import Subspace, vca

__all__ = ["HysureParams", "NumericalError", "SolveTrace", "Subspace", "estimate_sensor",
           "hysure_objective", "hysure_sharpen", "vca", "vtv_prox"]
