"""Cohomology of cocycles over circle diffeomorphisms: arithmetic, renormalization, coboundaries."""

__version__ = "0.1.0"

from .arithmetic import ContinuedFraction, expand, from_partial_quotients, parse_alpha
from .circlemap import CircleLift, make_family, renorm_geometry
from .coboundary import approximate_by_coboundary, verify_coboundary_certificate
from .errors import CohomologyError
from .functions import PeriodicFunction, TrigFunction, named_function
from .models import NumericsConfig

__all__ = [
    "__version__",
    "ContinuedFraction",
    "expand",
    "from_partial_quotients",
    "parse_alpha",
    "CircleLift",
    "make_family",
    "renorm_geometry",
    "approximate_by_coboundary",
    "verify_coboundary_certificate",
    "CohomologyError",
    "PeriodicFunction",
    "TrigFunction",
    "named_function",
    "NumericsConfig",
]
