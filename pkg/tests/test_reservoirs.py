import math

import numpy as np
import pytest

import oracles
import reservoir_transport as rt
from reservoir_transport import ConfigError, DomainError, SolverError

TRAP = (0.2, 0.2, 0.05)


def fermi(beta=1.0, dos=None):
    return rt.ReservoirModel("fermi", beta, rt.HarmonicTrap3D(*TRAP) if dos is None else dos)


def bose(beta=0.7, dos=None):
    return rt.ReservoirModel("bose", beta, rt.HarmonicTrap3D(*TRAP) if dos is None else dos)


class TestOccupation:
    def test_reference_values(self):
        assert rt.occupation(2.0, 1.2, fermi()) == pytest.approx(0.310, abs=5e-4)
        assert rt.occupation(2.0, 0.7, fermi()) == pytest.approx(0.214, abs=5e-4)
        assert rt.occupation(2.0, -0.059, bose()) == pytest.approx(0.310, abs=5e-4)

    def test_half_filling(self):
        for beta in (0.1, 1.0, 30.0):
            assert rt.occupation(0.7, 0.7, fermi(beta)) == 0.5

    def test_bose_divergence(self):
        with pytest.raises(DomainError, match="diverges"):
            rt.occupation(1.0, 1.0, bose())
        with pytest.raises(DomainError):
            rt.occupation(1.0, 1.5, bose())

    def test_vectorized(self):
        e = np.linspace(1, 3, 5)
        n = rt.occupation(e, 0.5, fermi())
        assert n.shape == (5,)
        assert np.all(np.diff(n) < 0)

    def test_formula(self):
        assert rt.occupation(2.0, 0.3, bose(0.9)) == pytest.approx(1 / (math.exp(0.9 * 1.7) - 1), rel=1e-15)
        assert rt.occupation(2.0, 0.3, fermi(0.9)) == pytest.approx(1 / (math.exp(0.9 * 1.7) + 1), rel=1e-15)


class TestGOfMu:
    @pytest.mark.parametrize("model", [fermi(1.0), bose(0.7), fermi(5.0)])
    def test_finite_difference(self, model):
        h = 1e-6
        for mu in (-0.7, -0.2, 0.1):
            fd = (rt.occupation(2.0, mu + h, model) - rt.occupation(2.0, mu - h, model)) / (2 * h)
            assert rt.g_of_mu(mu, 2.0, model) == pytest.approx(fd, rel=1e-6)

    def test_half_filling(self):
        assert rt.g_of_mu(1.3, 1.3, fermi(2.5)) == pytest.approx(2.5 / 4, rel=1e-15)

    def test_positive(self):
        assert rt.g_of_mu(0.0, 2.0, bose()) > 0
        assert rt.g_of_mu(5.0, 2.0, fermi()) > 0


class TestParticleNumber:
    def test_reference_values(self):
        assert rt.particle_number(1.2, fermi()) == pytest.approx(1276, abs=1)
        assert rt.particle_number(0.7, fermi()) == pytest.approx(838, abs=1)
        assert rt.particle_number(-0.059, bose()) == pytest.approx(1654, abs=1)
        assert rt.particle_number(-0.479, bose()) == pytest.approx(1164, abs=1)

    def test_against_direct_quadrature(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            beta = rng.uniform(0.3, 4.0)
            mu = rng.uniform(-2.0, 4.0)
            assert rt.particle_number(mu, fermi(beta)) == pytest.approx(
                oracles.fermi_particle_number_direct(mu, beta, TRAP), rel=1e-8
            )
            mu_b = 0.225 - rng.uniform(1e-3, 2.0)
            assert rt.particle_number(mu_b, bose(beta)) == pytest.approx(
                oracles.bose_particle_number_direct(mu_b, beta, TRAP), rel=1e-8
            )

    def test_closed_form_matches_library_quadrature(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            beta = rng.uniform(0.3, 4.0)
            for model, mu in ((fermi(beta), rng.uniform(-2, 4)), (bose(beta), 0.225 - rng.uniform(1e-3, 2))):
                assert rt.particle_number(mu, model) == pytest.approx(
                    rt.particle_number_quadrature(mu, model), rel=1e-8
                )
                assert rt.f_of_mu(mu, model) == pytest.approx(rt.f_of_mu_quadrature(mu, model), rel=1e-8)

    def test_fermi_below_band_bottom(self):
        # fermionic chemical potentials below E0 are accepted
        mu = -1.0
        assert rt.particle_number(mu, fermi()) == pytest.approx(
            oracles.fermi_particle_number_direct(mu, 1.0, TRAP), rel=1e-8
        )

    def test_bose_guard(self):
        with pytest.raises(DomainError):
            rt.particle_number(0.225, bose())
        with pytest.raises(DomainError):
            rt.f_of_mu(0.3, bose())

    def test_tabulated_dos_reproduces_trap(self):
        e = np.linspace(0.225, 80.0, 400001)
        table = rt.TabulatedDOS(e, rt.HarmonicTrap3D(*TRAP)(e))
        model = rt.ReservoirModel("fermi", 1.0, table)
        # linear interpolation of e^2 on a 2e-4 grid: relative error ~ h^2 / (8 e^2)
        assert rt.particle_number(1.2, model) == pytest.approx(rt.particle_number(1.2, fermi()), rel=1e-8)
        assert rt.f_of_mu(1.2, model) == pytest.approx(rt.f_of_mu(1.2, fermi()), rel=1e-8)

    def test_tabulated_validation(self):
        with pytest.raises(ConfigError):
            rt.TabulatedDOS([0, 1, 1], [1, 1, 1])
        with pytest.raises(ConfigError):
            rt.TabulatedDOS([0, 1, 2], [1, -1, 1])

    def test_trap_validation(self):
        with pytest.raises(ConfigError):
            rt.HarmonicTrap3D(0.2, 0.0, 0.1)
        assert rt.HarmonicTrap3D(*TRAP).min_energy == pytest.approx(0.225)


class TestFOfMu:
    @pytest.mark.parametrize("model", [fermi(1.0), bose(0.7), fermi(0.3), bose(3.0)])
    def test_finite_difference(self, model):
        h = 1e-5
        for mu in (-1.0, -0.3, 0.1):
            fd = (rt.particle_number(mu + h, model) - rt.particle_number(mu - h, model)) / (2 * h)
            assert rt.f_of_mu(mu, model) == pytest.approx(fd, rel=1e-6)

    def test_degenerate_limit(self):
        # at low temperature dN/dmu approaches the density of states at mu
        model = fermi(50.0)
        assert rt.f_of_mu(2.0, model) == pytest.approx(rt.HarmonicTrap3D(*TRAP)(2.0), rel=1e-2)

    def test_positive(self):
        for mu in np.linspace(-3, 5, 17):
            assert rt.f_of_mu(mu, fermi()) > 0


class TestEquilibrium:
    def test_reference_values(self):
        chain = rt.LatticeConfig(6, 1.0, 2.0, 0.5, 0.5)
        eq = rt.equilibrium_solve(2114, chain, fermi())
        assert eq.mu_inf == pytest.approx(0.972, abs=1e-3)
        assert eq.n_inf == pytest.approx(0.263, abs=5e-4)
        assert eq.N_inf == pytest.approx(1056, abs=1)
        assert abs(2 * eq.N_inf + 6 * eq.n_inf - 2114) < 1e-9 * 2114

    def test_no_lattice(self):
        eq = rt.equilibrium_solve(2114, None, fermi())
        assert eq.N_inf == pytest.approx(1057, rel=1e-12)

    def test_lattice_absorbs_particles(self):
        model = fermi()
        mu0 = 0.9
        N0 = 2 * rt.particle_number(mu0, model)
        for M in (1, 2, 5):
            chain = rt.LatticeConfig(M, 1.0, 2.0, 0.5, 0.5)
            eq = rt.equilibrium_solve(N0, chain, model, mu_bracket=(mu0, mu0))
            assert eq.mu_inf < mu0

    def test_bose(self):
        chain = rt.LatticeConfig(3, 1.0, 2.0, 0.5, 0.5)
        model = bose()
        N0 = rt.particle_number(-0.059, model) + rt.particle_number(-0.479, model)
        eq = rt.equilibrium_solve(N0, chain, model, mu_bracket=(-0.479, -0.059))
        assert -0.479 < eq.mu_inf < -0.059
        assert abs(2 * eq.N_inf + 3 * eq.n_inf - N0) < 1e-9 * N0

    def test_bose_overfilled(self):
        with pytest.raises(SolverError):
            rt.equilibrium_solve(1e9, rt.LatticeConfig(3, 1.0, 2.0, 0.5, 0.5), bose())

    def test_invalid_N0(self):
        with pytest.raises(DomainError):
            rt.equilibrium_solve(-1.0, None, fermi())


def test_chemical_potential_inverse():
    for model in (fermi(), bose()):
        for n in (0.05, 0.31, 0.6):
            mu = rt.chemical_potential_for_occupation(n, 2.0, model)
            assert rt.occupation(2.0, mu, model) == pytest.approx(n, rel=1e-13)
    with pytest.raises(DomainError):
        rt.chemical_potential_for_occupation(1.2, 2.0, fermi())


def test_statistics_parse():
    assert rt.Statistics.parse("Bose") is rt.Statistics.BOSE
    assert rt.Statistics.FERMI.sign == -1
    with pytest.raises(ConfigError):
        rt.Statistics.parse("boltzmann")


def test_model_validation():
    with pytest.raises(ConfigError):
        rt.ReservoirModel("fermi", 0.0)
