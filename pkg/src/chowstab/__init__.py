"""Monte Carlo evaluation of stability energy functionals on projective varieties."""
__version__ = "0.1.0"

from .projlin import ContractError, GeodesicDirection, GroupElement, SingularityError  # noqa: F401
from .polynomial import HomogeneousPolynomial  # noqa: F401
from .sampler import MCEstimate, SeededStream  # noqa: F401
