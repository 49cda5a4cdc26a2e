"""Particle transport through a tight-binding chain between two finite reservoirs."""

from .errors import *  # noqa: F401,F403
from .lattice import LatticeConfig
from .reservoirs import *  # noqa: F401,F403
from .dynamics import *  # noqa: F401,F403
from .analysis import *  # noqa: F401,F403

__version__ = "0.1.0"
