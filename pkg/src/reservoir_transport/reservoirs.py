"""Thermodynamics of finite grand-canonical reservoirs.

A reservoir is described by its quantum statistics, inverse temperature and
single-particle density of states.  Its state at any time is fixed by the
chemical potential, from which the particle number ``N(mu)``, its
derivative ``f(mu) = dN/dmu`` and the occupation of any level follow.

Energies are measured in units of the lattice tunneling ``J`` with hbar = 1.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import expit

from .errors import ConfigError, DomainError, SolverError
from .polylog import polylog

__all__ = [
    "Statistics",
    "HarmonicTrap3D",
    "TabulatedDOS",
    "ReservoirModel",
    "EquilibriumResult",
    "occupation",
    "g_of_mu",
    "particle_number",
    "particle_number_quadrature",
    "f_of_mu",
    "f_of_mu_quadrature",
    "chemical_potential_for_occupation",
    "equilibrium_solve",
]

# Bosonic chemical potentials must stay this far below the band bottom.
BOSE_GUARD = 1e-12
# Quadrature cutoff above max(mu, E0), in units of 1/beta; e**-45 ~ 3e-20.
_TAIL_WIDTH = 45.0


class Statistics(enum.Enum):
    BOSE = "bose"
    FERMI = "fermi"

    @property
    def sign(self):
        """+1 for bosons, -1 for fermions, as in a a^dagger = 1 + sign * a^dagger a."""
        return 1 if self is Statistics.BOSE else -1

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"statistics must be 'bose' or 'fermi', got {value!r}", "statistics") from None


@dataclass(frozen=True)
class HarmonicTrap3D:
    """Anisotropic 3-D harmonic trap, D(e) = e**2 / (2 wx wy wz)."""

    omega_x: float
    omega_y: float
    omega_z: float

    def __post_init__(self):
        for name in ("omega_x", "omega_y", "omega_z"):
            w = float(getattr(self, name))
            if not (math.isfinite(w) and w > 0):
                raise ConfigError(f"trap frequency must be > 0, got {w}", f"reservoirs.trap.{name}")
            object.__setattr__(self, name, w)

    @property
    def omega_product(self):
        return self.omega_x * self.omega_y * self.omega_z

    @property
    def min_energy(self):
        return 0.5 * (self.omega_x + self.omega_y + self.omega_z)

    def __call__(self, energy):
        return np.asarray(energy) ** 2 / (2.0 * self.omega_product)


@dataclass(frozen=True, eq=False)
class TabulatedDOS:
    """Density of states given at strictly increasing energies, linearly interpolated.

    The DOS vanishes outside the tabulated range; the first energy is the band bottom.
    """

    energies: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        e = np.array(self.energies, dtype=float)
        d = np.array(self.values, dtype=float)
        if e.ndim != 1 or e.shape != d.shape or e.size < 2:
            raise ConfigError("energies and values must be 1-D arrays of equal length >= 2", "reservoirs.dos")
        if not np.all(np.diff(e) > 0):
            raise ConfigError("tabulated energies must be strictly increasing", "reservoirs.dos.energies")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ConfigError("tabulated DOS values must be finite and >= 0", "reservoirs.dos.values")
        e.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "values", d)

    @property
    def min_energy(self):
        return float(self.energies[0])

    @property
    def max_energy(self):
        return float(self.energies[-1])

    def __call__(self, energy):
        return np.interp(energy, self.energies, self.values, left=0.0, right=0.0)


@dataclass(frozen=True)
class ReservoirModel:
    """Statistics, inverse temperature and density of states of one reservoir."""

    statistics: Statistics
    beta: float
    dos: object = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "statistics", Statistics.parse(self.statistics))
        beta = float(self.beta)
        if not (math.isfinite(beta) and beta > 0):
            raise ConfigError(f"inverse temperature must be > 0, got {beta}", "reservoirs.beta")
        object.__setattr__(self, "beta", beta)

    @property
    def E0(self):
        """Minimum single-particle energy of the reservoir."""
        if self.dos is None:
            raise ConfigError("reservoir has no density of states", "reservoirs.dos")
        return self.dos.min_energy

    def _check_mu(self, mu):
        if not math.isfinite(mu):
            raise DomainError(f"chemical potential must be finite, got {mu}")
        if self.statistics is Statistics.BOSE and mu >= self.E0 - BOSE_GUARD:
            raise DomainError(
                f"bosonic chemical potential {mu} must lie below the band bottom E0 = {self.E0}"
            )


@dataclass(frozen=True)
class EquilibriumResult:
    mu_inf: float
    n_inf: float
    N_inf: float
    residual: float


def occupation(energy, mu, model):
    """Bose-Einstein or Fermi-Dirac occupation 1 / (exp(beta (e - mu)) -+ 1)."""
    x = model.beta * (np.asarray(energy, dtype=float) - mu)
    if model.statistics is Statistics.FERMI:
        out = expit(-x)
    else:
        if np.any(x <= 0):
            raise DomainError("bosonic occupation diverges for mu >= energy")
        out = 1.0 / np.expm1(x)
    return out if out.ndim else float(out)


def g_of_mu(mu, energy, model):
    """Derivative of the occupation with respect to mu: beta n (1 +- n)."""
    n = np.asarray(occupation(energy, mu, model))
    out = model.beta * n * (1.0 + model.statistics.sign * n)
    return out if out.ndim else float(out)


def _fugacity_terms(mu, model):
    """Return (z, ln(1 -+ z)) with z = exp(-beta (E0 - mu)), sign-adjusted per statistics."""
    u = model.beta * (mu - model.E0)
    if model.statistics is Statistics.BOSE:
        # ln(1 - z) without cancellation near z -> 1
        return math.exp(u), math.log(-math.expm1(u))
    if u > 700.0:
        raise DomainError(f"beta (mu - E0) = {u:.1f} exceeds the floating-point range")
    return math.exp(u), float(np.logaddexp(0.0, u))


def particle_number(mu, model):
    """Reservoir particle number N(mu).

    Harmonic traps use the closed polylogarithm form; any other density of
    states is integrated numerically.
    """
    model._check_mu(mu)
    if not isinstance(model.dos, HarmonicTrap3D):
        return particle_number_quadrature(mu, model)
    b, e0 = model.beta, model.E0
    z, log_term = _fugacity_terms(mu, model)
    if model.statistics is Statistics.BOSE:
        total = -(e0**2) / (2 * b) * log_term + e0 / b**2 * polylog(2, z) + polylog(3, z) / b**3
    else:
        total = e0**2 / (2 * b) * log_term - e0 / b**2 * polylog(2, -z) - polylog(3, -z) / b**3
    return total / model.dos.omega_product


def f_of_mu(mu, model):
    """dN/dmu, the factor relating reservoir particle flow to mu drift."""
    model._check_mu(mu)
    if not isinstance(model.dos, HarmonicTrap3D):
        return f_of_mu_quadrature(mu, model)
    b, e0 = model.beta, model.E0
    z, log_term = _fugacity_terms(mu, model)
    if model.statistics is Statistics.BOSE:
        total = 0.5 * e0**2 * z / (1 - z) - e0 / b * log_term + polylog(2, z) / b**2
    else:
        total = 0.5 * e0**2 * z / (1 + z) + e0 / b * log_term - polylog(2, -z) / b**2
    return total / model.dos.omega_product


def _integrate_over_band(integrand, mu, model):
    lo = model.E0
    hi = max(mu, lo) + _TAIL_WIDTH / model.beta
    if isinstance(model.dos, TabulatedDOS):
        hi = min(hi, model.dos.max_energy)
    points = [mu] if lo < mu < hi else None
    value, _ = integrate.quad(integrand, lo, hi, points=points, epsabs=0.0, epsrel=1e-13, limit=500)
    return value


def particle_number_quadrature(mu, model):
    """N(mu) by adaptive Gauss-Kronrod quadrature of D(e) n(e, mu) over the band."""
    model._check_mu(mu)
    return _integrate_over_band(lambda e: model.dos(e) * occupation(e, mu, model), mu, model)


def f_of_mu_quadrature(mu, model):
    """dN/dmu by quadrature of D(e) g(mu, e) over the band."""
    model._check_mu(mu)
    return _integrate_over_band(lambda e: model.dos(e) * g_of_mu(mu, e, model), mu, model)


def chemical_potential_for_occupation(n, energy, model):
    """Chemical potential that gives occupation ``n`` at ``energy``."""
    n = float(n)
    if n <= 0 or (model.statistics is Statistics.FERMI and n >= 1):
        raise DomainError(f"occupation {n} is outside the allowed range")
    return energy - math.log(1.0 / n + model.statistics.sign) / model.beta


def equilibrium_solve(N0, lattice, model, mu_bracket=None, rtol=1e-12):
    """Common chemical potential reached once both reservoirs and the lattice equilibrate.

    Solves N0 = 2 N(mu) + M n(eps_S, mu).  ``lattice=None`` means no lattice
    sites.  ``mu_bracket`` (typically the initial pair mu_L(0), mu_R(0)) seeds
    the bracket search, which widens until the residual changes sign.
    """
    N0 = float(N0)
    if not N0 > 0:
        raise DomainError(f"total particle number must be > 0, got {N0}")
    M = 0 if lattice is None else lattice.M
    eps_S = 0.0 if lattice is None else lattice.eps_S
    beta = model.beta

    upper = math.inf
    if model.statistics is Statistics.BOSE:
        upper = model.E0 - 2 * BOSE_GUARD
        if M:
            upper = min(upper, eps_S - 2 * BOSE_GUARD)

    def residual(mu):
        r = 2.0 * particle_number(mu, model) - N0
        if M:
            r += M * occupation(eps_S, mu, model)
        return r

    def slope(mu):
        d = 2.0 * f_of_mu(mu, model)
        if M:
            d += M * g_of_mu(mu, eps_S, model)
        return d

    centre = (model.E0, model.E0) if mu_bracket is None else (min(mu_bracket), max(mu_bracket))
    lo, hi = centre[0] - 5.0 / beta, centre[1] + 5.0 / beta
    hi = min(hi, upper)
    lo = min(lo, hi - 1.0 / beta)
    width = hi - lo
    for _ in range(200):
        if residual(lo) < 0:
            break
        lo -= width
        width *= 2
    else:
        raise SolverError("no lower bracket for the equilibrium chemical potential")
    width = hi - lo
    for _ in range(200):
        if residual(hi) > 0:
            break
        if hi >= upper:
            raise SolverError(
                f"N0 = {N0} exceeds what the reservoirs can hold below condensation"
            )
        hi = min(hi + width, upper)
        width *= 2
    else:
        raise SolverError("no upper bracket for the equilibrium chemical potential")

    # Newton steps from the bracket midpoint, falling back to bisection
    mu = 0.5 * (lo + hi)
    tol = rtol * N0
    for _ in range(200):
        r = residual(mu)
        if abs(r) < tol:
            break
        if r < 0:
            lo = mu
        else:
            hi = mu
        step = mu - r / slope(mu)
        mu = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 4 * np.finfo(float).eps * max(1.0, abs(mu)):
            break
    else:
        raise SolverError("equilibrium iteration did not converge")

    mu = float(mu)
    r = float(residual(mu))
    if abs(r) > 1e-9 * N0:
        raise SolverError(f"equilibrium residual {r:.3e} exceeds tolerance")
    n_inf = occupation(eps_S, mu, model) if M else math.nan
    return EquilibriumResult(mu_inf=mu, n_inf=n_inf, N_inf=float(particle_number(mu, model)), residual=r)
