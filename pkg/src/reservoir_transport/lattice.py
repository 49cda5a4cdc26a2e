"""Uniform nearest-neighbour chain coupled to a reservoir at each end."""

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import ConfigError

__all__ = ["LatticeConfig"]


@dataclass(frozen=True)
class LatticeConfig:
    """Chain of ``M`` sites with hopping ``J``, on-site energy ``eps_S`` and
    edge coupling rates ``gamma_L`` (site 1) and ``gamma_R`` (site M).

    Energies and rates are in units of ``J`` by convention; times in 1/J.
    """

    M: int
    J: float
    eps_S: float
    gamma_L: float
    gamma_R: float

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"site count must be a positive integer, got {self.M!r}", "lattice.M")
        object.__setattr__(self, "M", int(self.M))
        for name in ("J", "eps_S", "gamma_L", "gamma_R"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ConfigError(f"must be finite, got {value}", f"lattice.{name}")
            object.__setattr__(self, name, value)
        if self.J <= 0:
            raise ConfigError(f"tunneling energy must be > 0, got {self.J}", "lattice.J")
        if self.gamma_L < 0 or self.gamma_R < 0:
            raise ConfigError("coupling rates must be >= 0", "lattice.gamma")

    @property
    def gamma_bar(self):
        return 0.5 * (self.gamma_L + self.gamma_R)

    @cached_property
    def adjacency(self):
        """M x M nearest-neighbour adjacency matrix of the open chain (read-only)."""
        a = np.eye(self.M, k=1) + np.eye(self.M, k=-1)
        a.flags.writeable = False
        return a

    def hamiltonian(self):
        """Single-particle Hamiltonian matrix: eps_S on the diagonal, -J between neighbours."""
        return self.eps_S * np.eye(self.M) - self.J * self.adjacency

    def mirrored(self):
        """Same chain with the two edge couplings exchanged."""
        return replace(self, gamma_L=self.gamma_R, gamma_R=self.gamma_L)
