"""Coupled lattice/reservoir time evolution.

The lattice is tracked through its single-particle density matrix (SPDM)
``sigma[j, k] = <a_j^+ a_k>`` and, optionally, its two-particle density matrix
(TPDM) ``delta[j, m, k, n] = <a_j^+ a_m a_k^+ a_n>``.  With finite reservoirs
the two chemical potentials evolve alongside so that the total particle
number is conserved; with stationary reservoirs the resonant occupations
are fixed constants.

Indices are 0-based throughout: site 0 touches the left reservoir and site
M - 1 the right one.  Sites outside the chain contribute nothing.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import RK45

from .errors import ConfigError, DomainError, IntegrationError, InvariantError
from .lattice import LatticeConfig
from .reservoirs import ReservoirModel, Statistics, f_of_mu, occupation, particle_number

__all__ = [
    "FiniteReservoirs",
    "StationaryReservoirs",
    "FINITE",
    "SystemState",
    "Observables",
    "IntegratorOptions",
    "Trajectory",
    "spdm_rhs",
    "mu_rhs",
    "tpdm_rhs",
    "observables",
    "integrate",
    "long_range_pairs",
    "wick_tpdm",
    "log_time_grid",
    "linear_time_grid",
]


@dataclass(frozen=True)
class FiniteReservoirs:
    """Reservoirs whose chemical potentials drift as particles are exchanged."""


@dataclass(frozen=True)
class StationaryReservoirs:
    """Infinite reservoirs with fixed resonant-level occupations."""

    n_L: float
    n_R: float


FINITE = FiniteReservoirs()


@dataclass
class SystemState:
    t: float
    sigma: np.ndarray
    mu_L: float = math.nan
    mu_R: float = math.nan
    delta: np.ndarray | None = None

    @classmethod
    def empty_lattice(cls, M, mu_L=math.nan, mu_R=math.nan, tpdm=False, t=0.0):
        """Vacuum on the lattice: sigma = 0 and, if requested, delta = 0."""
        delta = np.zeros((M,) * 4, dtype=complex) if tpdm else None
        return cls(t=float(t), sigma=np.zeros((M, M), dtype=complex), mu_L=mu_L, mu_R=mu_R, delta=delta)


def _reservoir_pair(models):
    if models is None:
        return None, None
    if isinstance(models, ReservoirModel):
        return models, models
    left, right = models
    return left, right


def _statistics(models, statistics=None):
    if statistics is not None:
        return Statistics.parse(statistics)
    left, right = _reservoir_pair(models)
    if left is None:
        return None
    if left.statistics is not right.statistics:
        raise ConfigError("both reservoirs must host the same kind of particle", "statistics")
    return left.statistics


def _resonant_occupations(mu_L, mu_R, lattice, models, mode):
    if isinstance(mode, StationaryReservoirs):
        return mode.n_L, mode.n_R
    left, right = _reservoir_pair(models)
    if left is None:
        raise ConfigError("finite reservoirs need a reservoir model", "reservoirs")
    return occupation(lattice.eps_S, mu_L, left), occupation(lattice.eps_S, mu_R, right)


def _check_shape(array, shape, what):
    if array.shape != shape:
        raise ConfigError(f"{what} has shape {array.shape}, expected {shape}")


def _spdm_derivative(sigma, lattice, n_L, n_R):
    # Gain rate gamma*n and loss rate gamma*(1 +- n) damp an edge coherence at
    # (loss -+ gain)/2 = gamma/2 for both statistics, so only the gain
    # gamma*n survives as a source and no statistics sign appears here.
    A = lattice.adjacency
    d = 1j * lattice.J * (sigma @ A - A @ sigma)
    gl, gr = lattice.gamma_L, lattice.gamma_R
    d[0, :] -= 0.5 * gl * sigma[0, :]
    d[:, 0] -= 0.5 * gl * sigma[:, 0]
    d[-1, :] -= 0.5 * gr * sigma[-1, :]
    d[:, -1] -= 0.5 * gr * sigma[:, -1]
    d[0, 0] += gl * n_L
    d[-1, -1] += gr * n_R
    return d


def _shift(delta, A, axis):
    return np.moveaxis(np.tensordot(A, delta, axes=([1], [axis])), 0, axis)


def _tpdm_derivative(delta, sigma, lattice, n_L, n_R, sign):
    A = lattice.adjacency
    M = lattice.M
    d = 1j * lattice.J * (
        _shift(delta, A, 1) + _shift(delta, A, 3) - _shift(delta, A, 0) - _shift(delta, A, 2)
    )
    eye = np.eye(M)
    for site, gamma, n_res in ((0, lattice.gamma_L, n_L), (M - 1, lattice.gamma_R, n_R)):
        if gamma == 0.0:
            continue
        e = eye[site]
        hits = e[:, None, None, None] + e[None, :, None, None] + e[None, None, :, None] + e[None, None, None, :]
        d -= 0.5 * gamma * hits * delta
        # delta_{m s} delta_{k s} sigma_{j n}, from the loss channel
        d[:, site, site, :] += gamma * (1.0 + sign * n_res) * sigma
        d[site, site, :, :] += gamma * n_res * sigma
        d[:, :, site, site] += gamma * n_res * sigma
        # delta_{j s} delta_{n s} (1 +- sigma)_{k m}; the slice is indexed [m, k]
        d[site, :, :, site] += gamma * n_res * (eye + sign * sigma).T
    return d


def spdm_rhs(state, lattice, models, mode):
    """Time derivative of the SPDM for a given state.

    In finite mode the resonant occupations follow from the state's chemical
    potentials; in stationary mode they are the constants carried by ``mode``.
    """
    sigma = np.asarray(state.sigma, dtype=complex)
    _check_shape(sigma, (lattice.M, lattice.M), "sigma")
    n_L, n_R = _resonant_occupations(state.mu_L, state.mu_R, lattice, models, mode)
    return _spdm_derivative(sigma, lattice, n_L, n_R)


def mu_rhs(state, lattice, models):
    """(dmu_L/dt, dmu_R/dt) from the particle flow through each contact."""
    left, right = _reservoir_pair(models)
    if left is None:
        raise ConfigError("finite reservoirs need a reservoir model", "reservoirs")
    sigma = np.asarray(state.sigma)
    _check_shape(sigma, (lattice.M, lattice.M), "sigma")
    n_L, n_R = _resonant_occupations(state.mu_L, state.mu_R, lattice, models, FINITE)
    f_L, f_R = f_of_mu(state.mu_L, left), f_of_mu(state.mu_R, right)
    assert f_L > 0 and f_R > 0, "dN/dmu must be positive"
    return (
        lattice.gamma_L * (sigma[0, 0].real - n_L) / f_L,
        lattice.gamma_R * (sigma[-1, -1].real - n_R) / f_R,
    )


def tpdm_rhs(state, lattice, models, mode, statistics=None):
    """Time derivative of the TPDM.  Needs the SPDM at the same time."""
    if state.delta is None:
        raise ConfigError("state carries no TPDM", "tpdm")
    stats = _statistics(models, statistics)
    if stats is None:
        raise ConfigError("TPDM evolution depends on the particle statistics", "statistics")
    M = lattice.M
    delta = np.asarray(state.delta, dtype=complex)
    sigma = np.asarray(state.sigma, dtype=complex)
    _check_shape(delta, (M,) * 4, "delta")
    _check_shape(sigma, (M, M), "sigma")
    n_L, n_R = _resonant_occupations(state.mu_L, state.mu_R, lattice, models, mode)
    return _tpdm_derivative(delta, sigma, lattice, n_L, n_R, stats.sign)


def wick_tpdm(sigma, statistics):
    """TPDM of a Gaussian (quasi-free) state with SPDM ``sigma``.

    Any state reached from the vacuum under these quadratic dynamics is
    Gaussian, so this gives an independent check of the TPDM evolution.
    """
    sign = Statistics.parse(statistics).sign
    sigma = np.asarray(sigma)
    M = sigma.shape[-1]
    eye = np.eye(M)
    return (
        np.einsum("mk,...jn->...jmkn", eye, sigma)
        + sign * np.einsum("...jn,...km->...jmkn", sigma, sigma)
        + np.einsum("...jm,...kn->...jmkn", sigma, sigma)
    )


def long_range_pairs(M):
    """0-based index pairs (j, k) with k - j > 1."""
    return [(j, k) for j in range(M) for k in range(j + 2, M)]


@dataclass(frozen=True)
class Observables:
    """One-body observables, and fluctuations when the TPDM is known.

    Array fields carry any leading (time) axes of the input.  ``j[..., l]`` is
    the current from site l to l + 1; positive values flow left to right.
    """

    n: np.ndarray
    j: np.ndarray
    I: np.ndarray
    coherences: np.ndarray
    N_S: np.ndarray
    n_res_L: np.ndarray
    n_res_R: np.ndarray
    var_n: np.ndarray | None = None
    var_j: np.ndarray | None = None


def _observables(sigma, n_L, n_R, delta, lattice):
    M, J = lattice.M, lattice.J
    n = np.real(np.diagonal(sigma, axis1=-2, axis2=-1)).copy()
    l = np.arange(M - 1)
    j = np.real(1j * J * (sigma[..., l + 1, l] - sigma[..., l, l + 1]))
    I = -0.5 * lattice.gamma_L * (n[..., 0] - n_L) + 0.5 * lattice.gamma_R * (n[..., -1] - n_R)
    pairs = long_range_pairs(M)
    if pairs:
        rows, cols = np.array(pairs).T
        coherences = np.abs(sigma[..., rows, cols])
    else:
        coherences = np.zeros(sigma.shape[:-2] + (0,))
    var_n = var_j = None
    if delta is not None:
        s = np.arange(M)
        var_n = np.real(delta[..., s, s, s, s]) - n**2
        second = J**2 * np.real(
            delta[..., l + 1, l, l, l + 1]
            + delta[..., l, l + 1, l + 1, l]
            - delta[..., l + 1, l, l + 1, l]
            - delta[..., l, l + 1, l, l + 1]
        )
        var_j = second - j**2
    return Observables(
        n=n,
        j=j,
        I=I,
        coherences=coherences,
        N_S=n.sum(axis=-1),
        n_res_L=np.asarray(n_L, dtype=float) * np.ones(sigma.shape[:-2]),
        n_res_R=np.asarray(n_R, dtype=float) * np.ones(sigma.shape[:-2]),
        var_n=var_n,
        var_j=var_j,
    )


def observables(state, lattice, models, mode):
    """Populations, currents, macroscopic current, coherences and variances of one state."""
    sigma = np.asarray(state.sigma, dtype=complex)
    _check_shape(sigma, (lattice.M, lattice.M), "sigma")
    n_L, n_R = _resonant_occupations(state.mu_L, state.mu_R, lattice, models, mode)
    return _observables(sigma, n_L, n_R, state.delta, lattice)


class _Layout:
    """Packing of (sigma, mu_L, mu_R, delta) into one real vector.

    sigma is stored as its real diagonal followed by the real and imaginary
    parts of the strict upper triangle, so the unpacked matrix is Hermitian
    by construction.
    """

    def __init__(self, M, finite, tpdm):
        self.M = M
        self.finite = finite
        self.tpdm = tpdm
        self.iu = np.triu_indices(M, 1)
        n_up = len(self.iu[0])
        self.n_sigma = M + 2 * n_up
        self.n_mu = 2 if finite else 0
        self.n_delta = 2 * M**4 if tpdm else 0
        self.size = self.n_sigma + self.n_mu + self.n_delta
        self._up = slice(M, M + n_up)
        self._up_im = slice(M + n_up, self.n_sigma)

    def pack(self, sigma, mu_L=math.nan, mu_R=math.nan, delta=None):
        y = np.empty(self.size)
        y[: self.M] = np.real(np.diagonal(sigma))
        upper = sigma[self.iu]
        y[self._up] = upper.real
        y[self._up_im] = upper.imag
        i = self.n_sigma
        if self.finite:
            y[i : i + 2] = mu_L, mu_R
            i += 2
        if self.tpdm:
            flat = np.asarray(delta, dtype=complex).ravel()
            y[i : i + flat.size] = flat.real
            y[i + flat.size :] = flat.imag
        return y

    def unpack(self, y):
        """Unpack one vector (shape (size,)) or a stack (shape (..., size))."""
        M = self.M
        lead = y.shape[:-1]
        sigma = np.zeros(lead + (M, M), dtype=complex)
        d = np.arange(M)
        sigma[..., d, d] = y[..., :M]
        upper = y[..., self._up] + 1j * y[..., self._up_im]
        sigma[..., self.iu[0], self.iu[1]] = upper
        sigma[..., self.iu[1], self.iu[0]] = np.conj(upper)
        i = self.n_sigma
        mu_L = mu_R = np.full(lead, math.nan) if lead else math.nan
        if self.finite:
            mu_L, mu_R = y[..., i], y[..., i + 1]
            i += 2
        delta = None
        if self.tpdm:
            half = M**4
            delta = (y[..., i : i + half] + 1j * y[..., i + half :]).reshape(lead + (M,) * 4)
        return sigma, mu_L, mu_R, delta


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances and invariant thresholds for :func:`integrate`."""

    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = math.inf
    first_step: float | None = None
    check_invariants: bool = True
    conservation_tol: float = 1e-6
    pauli_tol: float = 1e-9
    tpdm_symmetry_tol: float = 1e-9
    tpdm_max_sites: int = 8


@dataclass(eq=False)
class Trajectory:
    """Sampled solution of the coupled equations plus invariant monitors."""

    t: np.ndarray
    sigma: np.ndarray
    mu_L: np.ndarray
    mu_R: np.ndarray
    delta: np.ndarray | None
    lattice: LatticeConfig
    models: object
    mode: object
    statistics: Statistics | None
    options: IntegratorOptions
    N0: float = math.nan
    N_L: np.ndarray | None = None
    N_R: np.ndarray | None = None
    conservation_residual: np.ndarray | None = None
    hermiticity_error: np.ndarray | None = None
    tpdm_asymmetry: np.ndarray | None = None
    eig_min: np.ndarray | None = None
    eig_max: np.ndarray | None = None
    n_steps: int = 0
    nfev: int = 0
    step_sizes: list = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.t)

    @property
    def finite(self):
        return isinstance(self.mode, FiniteReservoirs)

    def state(self, i):
        delta = None if self.delta is None else self.delta[i]
        return SystemState(float(self.t[i]), self.sigma[i], float(self.mu_L[i]), float(self.mu_R[i]), delta)

    @cached_property
    def observables(self):
        if self.finite:
            left, right = _reservoir_pair(self.models)
            n_L = occupation(self.lattice.eps_S, self.mu_L, left)
            n_R = occupation(self.lattice.eps_S, self.mu_R, right)
        else:
            n_L, n_R = self.mode.n_L, self.mode.n_R
        return _observables(self.sigma, n_L, n_R, self.delta, self.lattice)


def _rev(delta):
    lead = delta.ndim - 4
    return np.transpose(delta, tuple(range(lead)) + tuple(lead + i for i in (3, 2, 1, 0)))


def integrate(initial, lattice, models, mode, t_grid, opts=None, statistics=None):
    """Integrate the lattice (and reservoir) equations and sample at ``t_grid``.

    Uses the Dormand-Prince 5(4) embedded pair with its continuous extension
    for output between steps.  Raises :class:`IntegrationError` (carrying the
    last good state) if the step size collapses, and :class:`InvariantError`
    if conservation or the positivity/Pauli bounds are broken beyond the
    thresholds in ``opts``.  Invalid initial chemical potentials raise
    :class:`DomainError` before any step is taken.
    """
    opts = opts or IntegratorOptions()
    M = lattice.M
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ConfigError("t_grid must be a non-empty 1-D array", "time")
    if np.any(np.diff(t_grid) <= 0):
        raise ConfigError("t_grid must be strictly increasing", "time")
    if t_grid[0] < initial.t:
        raise ConfigError("t_grid starts before the initial time", "time")

    finite = isinstance(mode, FiniteReservoirs)
    stats = _statistics(models, statistics)
    left, right = _reservoir_pair(models)
    if finite and left is None:
        raise ConfigError("finite reservoirs need a reservoir model", "reservoirs")
    tpdm = initial.delta is not None
    if tpdm:
        if M > opts.tpdm_max_sites:
            raise ConfigError(
                f"TPDM evolution is limited to M <= {opts.tpdm_max_sites} (M**4 growth)", "tpdm"
            )
        if stats is None:
            raise ConfigError("TPDM evolution depends on the particle statistics", "statistics")
    sigma0 = np.asarray(initial.sigma, dtype=complex)
    _check_shape(sigma0, (M, M), "initial sigma")
    if np.max(np.abs(sigma0 - sigma0.conj().T), initial=0.0) > opts.pauli_tol:
        raise ConfigError("initial sigma must be Hermitian", "initial.sigma")
    if tpdm:
        _check_shape(np.asarray(initial.delta), (M,) * 4, "initial delta")
    if finite:
        # raises DomainError for chemical potentials outside the valid range
        for mu, model in ((initial.mu_L, left), (initial.mu_R, right)):
            occupation(lattice.eps_S, mu, model)
            f_of_mu(mu, model)

    layout = _Layout(M, finite, tpdm)
    y0 = layout.pack(sigma0, initial.mu_L, initial.mu_R, initial.delta)
    sign = stats.sign if stats is not None else 0
    eps_S = lattice.eps_S

    def fun(t, y):
        sigma, mu_L, mu_R, delta = layout.unpack(y)
        out = np.empty_like(y)
        if finite:
            n_L, n_R = occupation(eps_S, mu_L, left), occupation(eps_S, mu_R, right)
        else:
            n_L, n_R = mode.n_L, mode.n_R
        ds = _spdm_derivative(sigma, lattice, n_L, n_R)
        out[:M] = np.real(np.diagonal(ds))
        upper = ds[layout.iu]
        out[layout._up] = upper.real
        out[layout._up_im] = upper.imag
        i = layout.n_sigma
        if finite:
            out[i] = lattice.gamma_L * (sigma[0, 0].real - n_L) / f_of_mu(mu_L, left)
            out[i + 1] = lattice.gamma_R * (sigma[-1, -1].real - n_R) / f_of_mu(mu_R, right)
            i += 2
        if tpdm:
            dd = _tpdm_derivative(delta, sigma, lattice, n_L, n_R, sign).ravel()
            out[i : i + dd.size] = dd.real
            out[i + dd.size :] = dd.imag
        return out

    samples = []
    k = 0
    while k < t_grid.size and t_grid[k] == initial.t:
        samples.append(y0.copy())
        k += 1
    steps = []
    nfev = 0
    if k < t_grid.size:
        try:
            # the initial step selection already evaluates a trial point
            solver = RK45(
                fun,
                initial.t,
                y0,
                t_grid[-1],
                rtol=opts.rtol,
                atol=opts.atol,
                max_step=opts.max_step,
                first_step=opts.first_step,
            )
        except DomainError as exc:
            raise IntegrationError(
                f"right-hand side left its domain during step selection at t = {initial.t}: {exc}",
                last_state=_state_from_vector(layout, initial.t, y0),
            ) from exc
        while solver.status == "running":
            t_prev, y_prev = solver.t, solver.y.copy()
            try:
                message = solver.step()
            except DomainError as exc:
                raise IntegrationError(
                    f"right-hand side left its domain at t = {t_prev}: {exc}",
                    last_state=_state_from_vector(layout, t_prev, y_prev),
                ) from exc
            if solver.status == "failed":
                raise IntegrationError(
                    f"integration failed at t = {t_prev}: {message}",
                    last_state=_state_from_vector(layout, t_prev, y_prev),
                )
            steps.append(solver.step_size)
            if k < t_grid.size and t_grid[k] <= solver.t:
                dense = solver.dense_output()
                while k < t_grid.size and t_grid[k] <= solver.t:
                    samples.append(solver.y.copy() if t_grid[k] == solver.t else dense(t_grid[k]))
                    k += 1
        nfev = solver.nfev

    Y = np.array(samples)
    sigma, mu_L, mu_R, delta = layout.unpack(Y)
    traj = Trajectory(
        t=t_grid,
        sigma=sigma,
        mu_L=np.asarray(mu_L, dtype=float),
        mu_R=np.asarray(mu_R, dtype=float),
        delta=delta,
        lattice=lattice,
        models=models,
        mode=mode,
        statistics=stats,
        options=opts,
        n_steps=len(steps),
        nfev=nfev,
        step_sizes=steps,
    )
    _monitor(traj, initial)
    return traj


def _state_from_vector(layout, t, y):
    sigma, mu_L, mu_R, delta = layout.unpack(y)
    return SystemState(float(t), sigma, float(mu_L), float(mu_R), delta)


def _monitor(traj, initial):
    opts = traj.options
    sigma = traj.sigma
    traj.hermiticity_error = np.max(np.abs(sigma - np.conj(np.swapaxes(sigma, -1, -2))), axis=(-2, -1))
    eig = np.linalg.eigvalsh(sigma)
    traj.eig_min, traj.eig_max = eig[:, 0], eig[:, -1]
    if traj.delta is not None:
        traj.tpdm_asymmetry = np.max(
            np.abs(np.conj(traj.delta) - _rev(traj.delta)), axis=(-4, -3, -2, -1)
        )
    if traj.finite:
        left, right = _reservoir_pair(traj.models)
        N0 = (
            particle_number(initial.mu_L, left)
            + particle_number(initial.mu_R, right)
            + float(np.real(np.trace(initial.sigma)))
        )
        traj.N0 = N0
        traj.N_L = np.array([particle_number(m, left) for m in traj.mu_L])
        traj.N_R = np.array([particle_number(m, right) for m in traj.mu_R])
        N_S = np.real(np.trace(sigma, axis1=-2, axis2=-1))
        traj.conservation_residual = (traj.N_L + traj.N_R + N_S - N0) / N0
    if not opts.check_invariants:
        return
    diagnostics = {}
    if traj.conservation_residual is not None:
        worst = float(np.max(np.abs(traj.conservation_residual)))
        if worst > opts.conservation_tol:
            diagnostics["conservation"] = worst
    if traj.statistics is Statistics.FERMI:
        if traj.eig_min.min() < -opts.pauli_tol or traj.eig_max.max() > 1 + opts.pauli_tol:
            diagnostics["pauli"] = (float(traj.eig_min.min()), float(traj.eig_max.max()))
    elif traj.eig_min.min() < -opts.pauli_tol:
        diagnostics["positivity"] = float(traj.eig_min.min())
    if traj.tpdm_asymmetry is not None and traj.tpdm_asymmetry.max() > opts.tpdm_symmetry_tol:
        diagnostics["tpdm_symmetry"] = float(traj.tpdm_asymmetry.max())
    if diagnostics:
        raise InvariantError(f"invariant violated: {diagnostics}", diagnostics)


def log_time_grid(t_max, t_min=1e-3, per_decade=200, max_rows=5000, include_zero=True):
    """Logarithmic output grid from ``t_min`` to ``t_max`` (plus t = 0)."""
    if not (0 < t_min < t_max):
        raise ConfigError("need 0 < t_min < t_max", "time")
    decades = math.log10(t_max / t_min)
    n = int(min(max(2, math.ceil(decades * per_decade) + 1), max_rows - int(include_zero)))
    grid = np.geomspace(t_min, t_max, n)
    return np.concatenate([[0.0], grid]) if include_zero else grid


def linear_time_grid(t_max, rows=1001):
    if not t_max > 0:
        raise ConfigError("t_max must be > 0", "time")
    return np.linspace(0.0, t_max, int(rows))
