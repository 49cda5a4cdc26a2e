"""Randomized invariant checks.

``check_*`` functions take an integer seed so the acceptance suite can run
them on a fixed seed list; the hypothesis tests below draw seeds and
parameters on their own.
"""

import dataclasses

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
import reservoir_transport as rt

TOL = dict(rtol=1e-10, atol=1e-13)


def _random_chain(rng, M_range=(2, 7)):
    M = int(rng.integers(*M_range, endpoint=True))
    return rt.LatticeConfig(
        M=M,
        J=float(rng.uniform(0.5, 1.5)),
        eps_S=float(rng.uniform(-2, 3)),
        gamma_L=float(rng.uniform(0.05, 1.5)),
        gamma_R=float(rng.uniform(0.05, 1.5)),
    )


def _random_occupations(rng, statistics):
    hi = 1.0 if statistics == "fermi" else 3.0
    return float(rng.uniform(0, hi)), float(rng.uniform(0, hi))


def _pauli_ok(traj, statistics, tol=1e-9):
    eig = np.linalg.eigvalsh(traj.sigma)
    if statistics == "fermi":
        return eig.min() >= -tol and eig.max() <= 1 + tol
    return eig.min() >= -tol


def _parity_error(sigma):
    M = sigma.shape[-1]
    j = np.arange(M)
    even = (j[:, None] + j[None, :]) % 2 == 0
    return max(np.max(np.abs(sigma.imag[..., even])), np.max(np.abs(sigma.real[..., ~even])))


def _check_fd_continuity(chain, mode, opts, statistics, n_max, h=1e-3):
    centres = np.array([2.0, 7.0, 19.0])
    fine_t = np.sort(np.concatenate([centres - h, centres, centres + h]))
    initial = rt.SystemState.empty_lattice(chain.M)
    fine = rt.integrate(initial, chain, None, mode, fine_t, opts, statistics).observables
    fd = (fine.n[2::3] - fine.n[0::3]) / (2 * h)
    bulk_flow = fine.j[1::3, :-1] - fine.j[1::3, 1:]
    scale = (4 * chain.J + chain.gamma_L + chain.gamma_R) ** 3 * max(n_max, 1e-3)
    assert np.max(np.abs(fd[:, 1:-1] - bulk_flow)) < h**2 * scale + 1e-6


def check_stationary_invariants(seed):
    rng = np.random.default_rng(seed)
    statistics = "fermi" if seed % 2 == 0 else "bose"
    chain = _random_chain(rng)
    n_L, n_R = _random_occupations(rng, statistics)
    t = np.linspace(0, 30, 601)
    opts = rt.IntegratorOptions(**TOL)
    traj = rt.integrate(
        rt.SystemState.empty_lattice(chain.M), chain, None, rt.StationaryReservoirs(n_L, n_R), t, opts, statistics
    )
    sigma = traj.sigma

    # Hermiticity (structural) and the Pauli / positivity bounds
    assert np.max(np.abs(sigma - np.conj(np.swapaxes(sigma, 1, 2)))) < 1e-10
    assert _pauli_ok(traj, statistics)

    # real on even j + k, imaginary on odd j + k from an empty start
    assert _parity_error(sigma) < 1e-9

    # continuity in the bulk and the edge balance, exactly at every sample
    obs = traj.observables
    mode = traj.mode
    for i in range(0, len(t), 50):
        dn = np.real(np.diagonal(rt.spdm_rhs(traj.state(i), chain, None, mode)))
        j = obs.j[i]
        if chain.M > 2:
            assert np.allclose(dn[1:-1], j[:-1] - j[1:], atol=1e-13)
        assert np.isclose(dn[0], chain.gamma_L * (n_L - obs.n[i, 0]) - j[0], atol=1e-13)
        assert np.isclose(dn[-1], chain.gamma_R * (n_R - obs.n[i, -1]) + j[-1], atol=1e-13)
        assert np.isclose(dn[0] - dn[-1], -j[0] - j[-1] + 2 * obs.I[i], atol=1e-13)
    # and against centred differences of a finely sampled trajectory
    if chain.M > 2:
        _check_fd_continuity(chain, mode, opts, statistics, max(n_L, n_R))

    # mirror: swapping the reservoirs reflects the chain
    mirrored = rt.integrate(
        rt.SystemState.empty_lattice(chain.M),
        chain.mirrored(),
        None,
        rt.StationaryReservoirs(n_R, n_L),
        t,
        opts,
        statistics,
    )
    assert np.max(np.abs(mirrored.sigma - sigma[:, ::-1, ::-1])) < 1e-8
    assert np.allclose(mirrored.observables.j, -obs.j[:, ::-1], atol=1e-8)
    state = rt.ness(n_L - n_R, 0.5 * (n_L + n_R), chain)
    flipped = rt.ness(n_R - n_L, 0.5 * (n_L + n_R), chain.mirrored())
    assert np.isclose(flipped.j_inf, -state.j_inf, atol=1e-15)
    assert np.allclose(flipped.n_inf, state.n_inf[::-1], atol=1e-15)


def check_tpdm_invariants(seed):
    rng = np.random.default_rng(10_000 + seed)
    statistics = "fermi" if seed % 2 == 0 else "bose"
    chain = _random_chain(rng, (2, 4))
    n_L, n_R = _random_occupations(rng, statistics)
    t = np.linspace(0, 20, 201)
    traj = rt.integrate(
        rt.SystemState.empty_lattice(chain.M, tpdm=True),
        chain,
        None,
        rt.StationaryReservoirs(n_L, n_R),
        t,
        rt.IntegratorOptions(**TOL),
        statistics,
    )
    delta = traj.delta
    assert np.max(np.abs(np.conj(delta) - np.transpose(delta, (0, 4, 3, 2, 1)))) < 1e-9
    if statistics == "fermi":
        l = np.arange(chain.M)
        assert np.max(np.abs(delta[:, l, l, l, l] - np.real(traj.sigma[:, l, l]))) < 1e-8
        assert np.max(traj.observables.var_n) <= 0.25 + 1e-9
    for i in (50, 200):
        assert np.max(np.abs(delta[i] - oracles.wick(traj.sigma[i], statistics))) < 1e-8
    assert _pauli_ok(traj, statistics)


def check_finite_conservation(seed):
    rng = np.random.default_rng(20_000 + seed)
    statistics = "fermi" if seed % 2 == 0 else "bose"
    chain = _random_chain(rng, (2, 5))
    trap = rt.HarmonicTrap3D(*rng.uniform(0.1, 0.4, size=3))
    # the resonant level sits above the band bottom
    chain = dataclasses.replace(chain, eps_S=trap.min_energy + float(rng.uniform(0.2, 3.0)))
    beta = float(rng.uniform(0.5, 2.0))
    model = rt.ReservoirModel(statistics, beta, trap)
    if statistics == "fermi":
        mus = rng.uniform(-1, 3, size=2)
    else:
        mus = trap.min_energy - rng.uniform(0.05, 1.0, size=2)
    traj = rt.integrate(
        rt.SystemState.empty_lattice(chain.M, *mus), chain, model, rt.FINITE, np.linspace(0, 50, 101)
    )
    assert np.max(np.abs(traj.conservation_residual)) < 1e-6
    # the rate identity f_L mu_L' + f_R mu_R' + tr(sigma') = 0 at samples
    for i in (0, 50, 100):
        state = traj.state(i)
        dmu = rt.mu_rhs(state, chain, model)
        dsig = rt.spdm_rhs(state, chain, model, rt.FINITE)
        total = rt.f_of_mu(state.mu_L, model) * dmu[0] + rt.f_of_mu(state.mu_R, model) * dmu[1]
        assert abs(total + np.trace(dsig).real) < 1e-12 * max(1.0, abs(np.trace(dsig)))


@settings(max_examples=25, deadline=None, derandomize=True)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_stationary_invariants(seed):
    check_stationary_invariants(seed)


@settings(max_examples=20, deadline=None, derandomize=True)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_tpdm_invariants(seed):
    check_tpdm_invariants(seed)


@settings(max_examples=20, deadline=None, derandomize=True)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_finite_conservation(seed):
    check_finite_conservation(seed)


@settings(max_examples=50, deadline=None, derandomize=True)
@given(
    st.sampled_from(["fermi", "bose"]),
    st.floats(0.2, 5.0),
    st.floats(-3.0, 3.0),
)
def test_particle_number_and_occupation_increase_with_mu(statistics, beta, offset):
    model = rt.ReservoirModel(statistics, beta, rt.HarmonicTrap3D(0.2, 0.2, 0.05))
    top = model.E0 - 1e-3 if statistics == "bose" else model.E0 + 3.0
    mus = np.linspace(top - 4.0 + 0.0 * offset, top, 101)
    N = np.array([rt.particle_number(m, model) for m in mus])
    n = np.array([rt.occupation(model.E0 + 0.5 + abs(offset), m, model) for m in mus])
    assert np.all(np.diff(N) > 0)
    assert np.all(np.diff(n) > 0)


@settings(max_examples=50, deadline=None, derandomize=True)
@given(st.sampled_from(["fermi", "bose"]), st.floats(0.1, 10.0), st.floats(-5, 5), st.floats(30, 600))
def test_boltzmann_limit(statistics, beta, mu, x):
    model = rt.ReservoirModel(statistics, beta)
    energy = mu + x / beta
    assert abs(rt.occupation(energy, mu, model) - np.exp(-x)) <= 1e-12


@settings(max_examples=50, deadline=None, derandomize=True)
@given(st.floats(0.01, 100.0), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_fermi_pauli_bound(beta, energy, mu):
    n = rt.occupation(energy, mu, rt.ReservoirModel("fermi", beta))
    assert 0.0 <= n <= 1.0


@settings(max_examples=30, deadline=None, derandomize=True)
@given(
    st.integers(1, 30),
    st.floats(0.0, 2.0),
    st.floats(0.0, 2.0),
    st.floats(-3.0, 3.0),
)
def test_heff_spectrum_structure(M, gamma_L, gamma_R, eps_S):
    chain = rt.LatticeConfig(M, 1.0, eps_S, gamma_L, gamma_R)
    spec = rt.heff_spectrum(chain)
    assert len(spec.eigenvalues) == M
    assert np.all(spec.eigenvalues.imag <= 1e-12)
    assert abs(spec.eigenvalues.sum() - (M * eps_S - 0.5j * (gamma_L + gamma_R))) < 1e-12 * max(1, M)
    if gamma_L + gamma_R > 0:
        assert np.all(spec.Gamma > 0)


@settings(max_examples=40, deadline=None, derandomize=True)
@given(
    st.integers(1, 9),
    st.floats(0.05, 2.0),
    st.floats(0.05, 2.0),
    st.floats(0.3, 2.0),
    st.floats(-1.0, 1.0),
    st.floats(0.0, 1.0),
)
def test_ness_is_fixed_point_and_mirrors(M, gamma_L, gamma_R, J, delta_n, n_bar):
    chain = rt.LatticeConfig(M, J, 2.0, gamma_L, gamma_R)
    state = rt.ness(delta_n, n_bar, chain)
    mode = rt.StationaryReservoirs(n_bar + delta_n / 2, n_bar - delta_n / 2)
    rhs = rt.spdm_rhs(rt.SystemState(0.0, state.sigma_inf), chain, None, mode)
    assert np.max(np.abs(rhs)) < 1e-12
    flipped = rt.ness(-delta_n, n_bar, chain.mirrored())
    assert np.isclose(flipped.j_inf, -state.j_inf, atol=1e-14)
    assert np.allclose(flipped.n_inf, state.n_inf[::-1], atol=1e-14)
    obs = rt.observables(rt.SystemState(0.0, state.sigma_inf), chain, None, mode)
    assert np.allclose(obs.j, state.j_inf, atol=1e-14)
    assert np.isclose(obs.I, state.j_inf, atol=1e-14)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(
    st.floats(0.05, 2.0),
    st.floats(0.05, 2.0),
    st.floats(0.3, 2.0),
    st.floats(-1.0, 1.0),
    st.floats(0.0, 1.0),
    st.integers(3, 10),
)
def test_metastable_current_identity(gamma_L, gamma_R, J, delta_n, n_bar, M):
    # the edge populations reproduce the macroscopic current I = j
    chain = rt.LatticeConfig(M, J, 2.0, gamma_L, gamma_R)
    pred = rt.metastable_state(delta_n, n_bar, chain)
    assert np.isclose(pred.I, pred.j, atol=1e-14)
