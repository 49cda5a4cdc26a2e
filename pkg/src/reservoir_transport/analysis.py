"""Closed-form predictions and trajectory post-processing.

Covers the non-equilibrium steady state between stationary reservoirs, the
spectrum of the effective non-Hermitian Hamiltonian, the equilibration rate
between finite reservoirs, the metastable (slowly drifting) lattice state,
the short-time power-law series and exponential decay fits.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dynamics import StationaryReservoirs, _spdm_derivative, long_range_pairs
from .errors import ConfigError, DomainError, FitWindowError, NumericalError, SolverError
from .lattice import LatticeConfig
from .reservoirs import equilibrium_solve, f_of_mu, g_of_mu, occupation

__all__ = [
    "NessState",
    "EffSpectrum",
    "ScalingFit",
    "RateMethod",
    "RateEstimate",
    "MetastablePrediction",
    "ShortTimeSeries",
    "ExpFit",
    "EquilibrationAnalysis",
    "ness",
    "heff_matrix",
    "heff_spectrum",
    "tau_rel_scaling",
    "coupling_factor",
    "alpha_exact",
    "alpha_approx",
    "metastable_state",
    "short_time_series",
    "exponent_map",
    "power_law_exponents",
    "fit_exponential",
    "metastability_onset",
    "equilibration_fits",
    "relaxation_fits",
    "classify_rate",
]

# A fixed point is certified if the stationary RHS vanishes to this level
FIXED_POINT_TOL = 1e-12


def _ness_profile(delta_n, n_bar, gamma_L, gamma_R, J):
    """Current and (edge, bulk, edge) populations of the (meta)stable state."""
    D = (4 * J**2 + gamma_L * gamma_R) * (gamma_L + gamma_R)
    j = 4 * gamma_L * gamma_R * J**2 * delta_n / D
    half = delta_n / (2 * D)
    lr = gamma_L * gamma_R
    n_first = n_bar + (4 * (gamma_L - gamma_R) * J**2 + lr * gamma_R + lr * gamma_L) * half
    n_bulk = n_bar + (4 * (gamma_L - gamma_R) * J**2 + lr * gamma_R - lr * gamma_L) * half
    n_last = n_bar + (4 * (gamma_L - gamma_R) * J**2 - lr * gamma_R - lr * gamma_L) * half
    return j, n_first, n_bulk, n_last


@dataclass(frozen=True, eq=False)
class NessState:
    """Steady state between stationary reservoirs.

    ``n_inf`` holds all M site populations; ``residual`` is the max-norm of
    the stationary right-hand side at ``sigma_inf``.
    """

    j_inf: float
    n_inf: np.ndarray
    sigma_inf: np.ndarray
    residual: float

    @property
    def n_first(self):
        return float(self.n_inf[0])

    @property
    def n_bulk(self):
        return float(self.n_inf[1]) if len(self.n_inf) > 2 else math.nan

    @property
    def n_last(self):
        return float(self.n_inf[-1])


def ness(delta_n, n_bar, lattice):
    """Steady state for resonant occupations n_L = n_bar + dn/2, n_R = n_bar - dn/2.

    Bulk sites share one population and the current is uniform along the
    chain; the SPDM has only nearest-neighbour coherences.  The result is
    checked to be a fixed point of the stationary equations.
    """
    gl, gr, J, M = lattice.gamma_L, lattice.gamma_R, lattice.J, lattice.M
    if gl + gr <= 0:
        raise ConfigError("a steady state needs at least one coupled reservoir", "lattice.gamma")
    n_L, n_R = n_bar + 0.5 * delta_n, n_bar - 0.5 * delta_n
    if M == 1:
        # single site fed from both sides
        n = np.array([(gl * n_L + gr * n_R) / (gl + gr)])
        j_inf = gl * gr * delta_n / (gl + gr)
        sigma = n.astype(complex).reshape(1, 1)
    else:
        j_inf, n_first, n_bulk, n_last = _ness_profile(delta_n, n_bar, gl, gr, J)
        n = np.full(M, n_bulk)
        n[0], n[-1] = n_first, n_last
        sigma = np.diag(n).astype(complex)
        k = np.arange(M - 1)
        # j = iJ(sigma_{l+1,l} - sigma_{l,l+1}) with sigma_{l,l+1} purely imaginary
        sigma[k, k + 1] = 1j * j_inf / (2 * J)
        sigma[k + 1, k] = -1j * j_inf / (2 * J)
    residual = float(np.max(np.abs(_spdm_derivative(sigma, lattice, n_L, n_R))))
    scale = max(1.0, abs(n_L), abs(n_R)) * max(1.0, gl, gr, J)
    if residual > FIXED_POINT_TOL * scale:
        raise NumericalError(f"steady-state formulas leave a residual of {residual:.3e}")
    return NessState(j_inf=float(j_inf), n_inf=n, sigma_inf=sigma, residual=residual)


@dataclass(frozen=True, eq=False)
class EffSpectrum:
    """Complex single-particle energies E_k = e_k - i Gamma_k / 2.

    ``tau_rel`` is ``math.inf`` and ``decaying`` is False in the Hermitian
    limit, where nothing relaxes.
    """

    eigenvalues: np.ndarray
    Gamma: np.ndarray
    Gamma_min: float
    tau_rel: float
    decaying: bool

    @property
    def pair_rates(self):
        """Decay rates (Gamma_j + Gamma_k) / 2 of SPDM components in the eigenbasis."""
        return 0.5 * (self.Gamma[:, None] + self.Gamma[None, :])


def heff_matrix(lattice):
    h = lattice.hamiltonian().astype(complex)
    h[0, 0] -= 0.5j * lattice.gamma_L
    h[-1, -1] -= 0.5j * lattice.gamma_R
    return h


def heff_spectrum(lattice, rate_tol=1e-13):
    """Spectrum of the non-Hermitian single-particle Hamiltonian and the relaxation time."""
    try:
        E = np.linalg.eigvals(heff_matrix(lattice))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigenvalue iteration failed: {exc}") from exc
    order = np.lexsort((E.real, -E.imag))
    E = E[order]
    Gamma = -2.0 * E.imag
    Gamma_min = float(Gamma.min())
    decaying = Gamma_min > rate_tol * max(1.0, lattice.gamma_L + lattice.gamma_R)
    return EffSpectrum(
        eigenvalues=E,
        Gamma=Gamma,
        Gamma_min=Gamma_min,
        tau_rel=1.0 / Gamma_min if decaying else math.inf,
        decaying=bool(decaying),
    )


@dataclass(frozen=True, eq=False)
class ScalingFit:
    """tau_rel on an (M, gamma_bar) grid with a power-law fit in M per gamma_bar.

    ``tau_rel[i, k]`` belongs to ``M[i]`` and ``gamma_bar[k]``.  ``tau_rel_M1``
    is the analytic single-site value 1 / (2 gamma_bar), kept out of the fits.
    """

    M: np.ndarray
    gamma_bar: np.ndarray
    tau_rel: np.ndarray
    exponents: np.ndarray
    exponent_stderr: np.ndarray
    prefactors: np.ndarray
    tau_rel_M1: np.ndarray


def tau_rel_scaling(M_list, gamma_list, eps_S=2.0, J=1.0):
    """Fit tau_rel = C M**p at each symmetric coupling gamma_L = gamma_R = gamma_bar."""
    Ms = np.array(sorted(set(int(m) for m in M_list if int(m) > 1)))
    gammas = np.array([float(g) for g in gamma_list])
    if Ms.size < 3:
        raise ConfigError("need at least three lattice sizes M > 1 for a scaling fit", "sweep.M")
    if np.any(gammas <= 0):
        raise ConfigError("coupling rates must be > 0 for a scaling fit", "sweep.gamma_bar")
    tau = np.array(
        [[heff_spectrum(LatticeConfig(m, J, eps_S, g, g)).tau_rel for g in gammas] for m in Ms]
    )
    exps, errs, pref = [], [], []
    for k in range(gammas.size):
        reg = stats.linregress(np.log(Ms), np.log(tau[:, k]))
        exps.append(reg.slope)
        errs.append(reg.stderr)
        pref.append(math.exp(reg.intercept))
    return ScalingFit(
        M=Ms,
        gamma_bar=gammas,
        tau_rel=tau,
        exponents=np.array(exps),
        exponent_stderr=np.array(errs),
        prefactors=np.array(pref),
        tau_rel_M1=1.0 / (2.0 * gammas),
    )


class RateMethod(enum.Enum):
    EXACT = "exact"
    APPROX = "approx"
    FIT = "fit"


@dataclass(frozen=True)
class RateEstimate:
    alpha: float
    method: RateMethod
    stderr: float = math.nan

    @property
    def tau_eq(self):
        return 1.0 / self.alpha if self.alpha > 0 else math.inf


def coupling_factor(lattice):
    """8 gL gR J**2 / ((4 J**2 + gL gR)(gL + gR)), the conductance-like prefactor of alpha."""
    gl, gr, J = lattice.gamma_L, lattice.gamma_R, lattice.J
    if gl + gr <= 0:
        return 0.0
    return 8 * gl * gr * J**2 / ((4 * J**2 + gl * gr) * (gl + gr))


def alpha_exact(lattice, model, mu_inf):
    """Equilibration rate from the linearized reservoir dynamics around mu_inf."""
    ratio = g_of_mu(mu_inf, lattice.eps_S, model) / f_of_mu(mu_inf, model)
    return RateEstimate(alpha=float(ratio * coupling_factor(lattice)), method=RateMethod.EXACT)


def alpha_approx(lattice, delta_n_0, delta_N_0):
    """Equilibration rate from the initial occupation and particle-number biases."""
    if delta_N_0 == 0:
        raise DomainError("initial particle-number bias must be nonzero")
    return RateEstimate(
        alpha=float(coupling_factor(lattice) * delta_n_0 / delta_N_0), method=RateMethod.APPROX
    )


@dataclass(frozen=True, eq=False)
class MetastablePrediction:
    """Lattice state slaved to the instantaneous reservoir bias.

    ``populations`` has shape (..., M); other fields carry the leading shape
    of the inputs.
    """

    n_first: np.ndarray
    n_bulk: np.ndarray
    n_last: np.ndarray
    j: np.ndarray
    I: np.ndarray
    populations: np.ndarray


def metastable_state(delta_n_t, n_bar_t, lattice):
    """Steady-state formulas evaluated with time-dependent Delta n(t), n_bar(t)."""
    dn = np.asarray(delta_n_t, dtype=float)
    nb = np.asarray(n_bar_t, dtype=float)
    gl, gr, J, M = lattice.gamma_L, lattice.gamma_R, lattice.J, lattice.M
    if gl + gr <= 0:
        raise ConfigError("a metastable state needs at least one coupled reservoir", "lattice.gamma")
    j, n1, nm, nM = _ness_profile(dn, nb, gl, gr, J)
    n1, nm, nM = np.broadcast_arrays(n1, nm, nM)
    pops = np.repeat(nm[..., None], M, axis=-1)
    pops[..., 0] = n1
    pops[..., -1] = nM
    if M == 1:
        pops[..., 0] = nb + 0.5 * dn * (gl - gr) / (gl + gr)
        j = gl * gr * dn / (gl + gr)
    n_L, n_R = nb + 0.5 * dn, nb - 0.5 * dn
    I = -0.5 * gl * (pops[..., 0] - n_L) + 0.5 * gr * (pops[..., -1] - n_R)
    return MetastablePrediction(n_first=n1, n_bulk=nm, n_last=nM, j=j, I=I, populations=pops)


def exponent_map(M):
    """Leading short-time exponent p(j, k) = M - |j + k - (M + 1)| for 1-based j, k."""
    j = np.arange(1, M + 1)
    return M - np.abs(j[:, None] + j[None, :] - (M + 1))


@dataclass(frozen=True, eq=False)
class ShortTimeSeries:
    """Polynomial short-time solution from an empty lattice.

    ``coefficients[j, k, p]`` multiplies t**p in sigma_jk(t) (0-based j, k).
    """

    coefficients: np.ndarray
    exponents: np.ndarray
    order: int

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        powers = t[..., None] ** np.arange(self.order + 1)
        return np.einsum("...p,jkp->...jk", powers, self.coefficients)


def _corner_series(gamma, n0, J):
    """Coefficients (t, t**2, t**3) of the four elements nearest one driven edge."""
    c = gamma * n0
    return {
        (0, 0): c * np.array([1.0, -gamma / 2, (gamma**2 - 2 * J**2) / 6]),
        (0, 1): 0.5j * J * c * np.array([0.0, 1.0, -gamma / 2]),
        (0, 2): c * np.array([0.0, 0.0, -(J**2) / 6]),
        (1, 1): c * np.array([0.0, 0.0, J**2 / 3]),
    }


def short_time_series(lattice, n_L0, n_R0, order=3):
    """Iterative solution of the SPDM equations from an empty lattice, to ``order`` in t.

    The two driven edges contribute additively.  Each edge's terms only reach
    the far edge at order M, so for M >= 3 the series is exact through t**3.
    """
    if order not in (1, 2, 3):
        raise ConfigError(f"series order must be 1, 2 or 3, got {order}", "order")
    M = lattice.M
    if M < 3:
        raise ConfigError("the edge-additive series needs M >= 3", "lattice.M")
    coef = np.zeros((M, M, order + 1), dtype=complex)
    for gamma, n0, mirror in ((lattice.gamma_L, n_L0, False), (lattice.gamma_R, n_R0, True)):
        for (j, k), c in _corner_series(gamma, n0, lattice.J).items():
            if mirror:
                # sigma_{M+1-j, M+1-k} (1-based) takes the left-edge form
                j, k = M - 1 - j, M - 1 - k
            coef[j, k, 1:] += c[:order]
            if j != k:
                coef[k, j, 1:] += np.conj(c[:order])
    return ShortTimeSeries(coefficients=coef, exponents=exponent_map(M), order=order)


def power_law_exponents(t, sigma, window=None):
    """Log-log slopes of |sigma_jk(t)| over ``window``; returns an (M, M) array."""
    t = np.asarray(t, dtype=float)
    sigma = np.asarray(sigma)
    mask = t > 0
    if window is not None:
        mask &= (t >= window[0]) & (t <= window[1])
    if mask.sum() < 3:
        raise FitWindowError("need at least three positive times in the window")
    x = np.log(t[mask])
    y = np.log(np.abs(sigma[mask]))
    y = y.reshape(y.shape[0], -1)
    # least-squares slopes for all elements at once
    xc = x - x.mean()
    slopes = xc @ (y - y.mean(axis=0)) / (xc @ xc)
    return slopes.reshape(sigma.shape[1:])


@dataclass(frozen=True)
class ExpFit:
    """Exponential fit |y - y_inf| = A exp(-rate t).

    ``rate_ci`` is the 95% confidence interval of the rate and ``residual``
    the rms deviation of ln|y - y_inf| from the fitted line.
    """

    rate: float
    rate_ci: tuple
    prefactor: float
    residual: float
    window: tuple
    n_points: int
    envelope: bool = False


def _block_maxima(t, a, block):
    edges = np.arange(t[0], t[-1] + block, block)
    idx = np.searchsorted(t, edges)
    ts, vs = [], []
    for lo, hi in zip(idx[:-1], idx[1:]):
        if hi > lo:
            i = lo + int(np.argmax(a[lo:hi]))
            ts.append(t[i])
            vs.append(a[i])
    return np.array(ts), np.array(vs)


def fit_exponential(t, y, y_inf=0.0, window=None, envelope=False, block=None, noise_floor=0.0, min_points=10):
    """Fit ln|y - y_inf| linearly in t over ``window``.

    With ``envelope=True`` the fit uses block maxima of |y - y_inf| so that
    oscillating decays (and their zero crossings) are allowed; otherwise a
    sign change of y - y_inf inside the window is an error.  Points with
    |y - y_inf| <= ``noise_floor`` are dropped.
    """
    t = np.asarray(t, dtype=float)
    dev = np.asarray(y) - y_inf
    if np.iscomplexobj(dev):
        if not envelope:
            raise FitWindowError("complex series need envelope fitting")
        dev = np.abs(dev)
    mask = np.ones(t.shape, dtype=bool)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
    t, dev = t[mask], dev[mask]
    if t.size == 0:
        raise FitWindowError("empty fit window")
    a = np.abs(dev)
    if envelope:
        if block is None:
            block = (t[-1] - t[0]) / 50
        t, a = _block_maxima(t, a, block)
    else:
        nonzero = dev[dev != 0]
        if nonzero.size and not (np.all(nonzero > 0) or np.all(nonzero < 0)):
            raise FitWindowError("y - y_inf changes sign inside the fit window")
    keep = a > noise_floor
    t, a = t[keep], a[keep]
    if t.size < min_points:
        raise FitWindowError(f"only {t.size} usable points in the fit window (need {min_points})")
    reg = stats.linregress(t, np.log(a))
    half = stats.t.ppf(0.975, t.size - 2) * reg.stderr
    resid = np.log(a) - (reg.intercept + reg.slope * t)
    return ExpFit(
        rate=float(-reg.slope),
        rate_ci=(float(-reg.slope - half), float(-reg.slope + half)),
        prefactor=float(math.exp(reg.intercept)),
        residual=float(np.sqrt(np.mean(resid**2))),
        window=(float(t[0]), float(t[-1])),
        n_points=int(t.size),
        envelope=bool(envelope),
    )


def metastability_onset(t, sigma, threshold=1e-3):
    """First time after their peak at which all long-range coherences fall below
    ``threshold`` times that peak."""
    t = np.asarray(t)
    sigma = np.asarray(sigma)
    pairs = long_range_pairs(sigma.shape[-1])
    if not pairs:
        return float(t[0])
    rows, cols = np.array(pairs).T
    coh = np.max(np.abs(sigma[:, rows, cols]), axis=-1)
    peak = int(np.argmax(coh))
    below = np.nonzero(coh[peak:] < threshold * coh[peak])[0]
    if below.size == 0:
        raise FitWindowError("long-range coherences never fall below the metastability threshold")
    return float(t[peak + below[0]])


def _noise_end(t, dev, start):
    """End of the clean decay: first time past ``start`` where |dev| falls
    below 1e3 machine epsilons of its initial size."""
    cut = 1e3 * np.finfo(float).eps * abs(dev[0])
    late = np.nonzero((t >= start) & (np.abs(dev) < cut))[0]
    return float(t[late[0]]) if late.size else float(t[-1])


@dataclass(frozen=True, eq=False)
class EquilibrationAnalysis:
    """Long-time decay analysis of a finite-reservoir trajectory."""

    alpha: RateEstimate
    mu_inf: float
    n_inf: float
    t_star: float
    tau_rel: float
    t_a: float
    series: dict
    fits: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)


def equilibration_fits(traj, coherences=True):
    """Fit the exponential approach to equilibrium of a finite-reservoir trajectory.

    Series fitted: ``delta_n`` and ``delta_N`` (reservoir biases), ``n_bar``
    (mean resonant occupation minus n_inf), ``n_l`` (site populations minus
    n_inf), ``j_l`` (bond currents) and, optionally, long-range coherences.
    The window starts 5 tau_rel past the metastability onset and ends where
    each series reaches its floating-point noise floor.  Series whose fit
    fails land in ``failures`` with the reason.
    """
    if not traj.finite:
        raise ConfigError("equilibration analysis needs a finite-reservoir trajectory", "mode")
    lattice = traj.lattice
    models = traj.models
    left = models if not isinstance(models, tuple) else models[0]
    eq = equilibrium_solve(traj.N0, lattice, left, mu_bracket=(traj.mu_L[0], traj.mu_R[0]))
    alpha = alpha_exact(lattice, left, eq.mu_inf)
    tau_rel = heff_spectrum(lattice).tau_rel
    t_star = metastability_onset(traj.t, traj.sigma)
    t_a = t_star + 5 * tau_rel
    obs = traj.observables
    coherence_floor = 1e3 * traj.options.atol
    series = {
        "delta_n": (obs.n_res_L - obs.n_res_R, 0.0),
        "n_bar": (0.5 * (obs.n_res_L + obs.n_res_R), eq.n_inf),
        "delta_N": (traj.N_L - traj.N_R, 0.0),
    }
    for l in range(lattice.M):
        series[f"n_{l + 1}"] = (obs.n[:, l], eq.n_inf)
    for l in range(lattice.M - 1):
        series[f"j_{l + 1}{l + 2}"] = (obs.j[:, l], 0.0)
    if coherences:
        for j, k in long_range_pairs(lattice.M):
            series[f"coh_{j + 1}{k + 1}"] = (np.abs(traj.sigma[:, j, k]), 0.0)
    fits, failures = {}, {}
    for name, (y, y_inf) in series.items():
        dev = y - y_inf
        t_b = _noise_end(traj.t, dev, t_a)
        # coherences that vanish by symmetry sit at the integrator's noise level
        floor = coherence_floor if name.startswith("coh_") else 0.0
        try:
            fits[name] = fit_exponential(traj.t, y, y_inf, window=(t_a, t_b), noise_floor=floor)
        except FitWindowError as exc:
            failures[name] = str(exc)
    return EquilibrationAnalysis(
        alpha=alpha,
        mu_inf=eq.mu_inf,
        n_inf=eq.n_inf,
        t_star=t_star,
        tau_rel=tau_rel,
        t_a=t_a,
        series=series,
        fits=fits,
        failures=failures,
    )


def relaxation_fits(traj, state=None, noise_floor=None, block=5.0):
    """Envelope fits of |sigma_jk(t) - sigma_inf_jk| for a stationary-reservoir trajectory.

    The first pass opens the window at 3 / Gamma_min.  The second pass waits
    a further three e-folds of the gap between the fitted rate and the next
    pair rate, so that elements with little weight on the slowest mode are
    not fitted on their transient.  By default the noise floor is 1e3 times
    the integrator's error budget at the scale of the resonant occupations.
    Returns a dict keyed by 0-based (j, k) with j <= k.
    """
    if not isinstance(traj.mode, StationaryReservoirs):
        raise ConfigError("relaxation analysis needs a stationary-reservoir trajectory", "mode")
    mode = traj.mode
    lattice = traj.lattice
    if state is None:
        state = ness(mode.n_L - mode.n_R, 0.5 * (mode.n_L + mode.n_R), lattice)
    if noise_floor is None:
        scale = max(abs(mode.n_L), abs(mode.n_R))
        noise_floor = 1e3 * (traj.options.atol + traj.options.rtol * scale)
    spectrum = heff_spectrum(lattice)
    if not spectrum.decaying:
        raise FitWindowError("the lattice does not relax (Hermitian limit)")
    rates = np.unique(np.round(spectrum.pair_rates, 12))
    next_rate = rates[1] if rates.size > 1 else math.inf
    end = traj.t[-1]

    def fit(dev, start):
        return fit_exponential(
            traj.t, dev, 0.0, window=(start, end), envelope=True, block=block, noise_floor=noise_floor
        )

    fits = {}
    for j in range(lattice.M):
        for k in range(j, lattice.M):
            dev = np.abs(traj.sigma[:, j, k] - state.sigma_inf[j, k])
            first = fit(dev, 3.0 / spectrum.Gamma_min)
            start = 3.0 / first.rate
            if next_rate > first.rate:
                start += 3.0 / (next_rate - first.rate)
            fits[(j, k)] = fit(dev, start)
    return fits


def classify_rate(rate, alpha, tol=0.25):
    """Return 1 or 2 when ``rate`` is within ``tol`` (relative) of alpha or 2 alpha."""
    for multiple in (1, 2):
        if abs(rate / (multiple * alpha) - 1.0) <= tol:
            return multiple
    raise FitWindowError(f"rate {rate:.4g} is neither alpha = {alpha:.4g} nor 2 alpha")
