"""
Reservoir thermodynamics
========================

Each reservoir is a 3-D harmonic trap in the grand-canonical ensemble.  Its
chemical potential fixes both the occupation of the level that is resonant
with the lattice and the total particle number.  This script prints the
quantities that enter the coupled dynamics.
"""

import reservoir_transport as rt

trap = rt.HarmonicTrap3D(0.2, 0.2, 0.05)
fermi = rt.ReservoirModel("fermi", beta=1.0, dos=trap)
bose = rt.ReservoirModel("bose", beta=0.7, dos=trap)
eps_S = 2.0

print(f"band bottom E0 = {trap.min_energy:.4f}")

# fermions: mu above E0 is allowed and common
for mu in (1.2, 0.7):
    n = rt.occupation(eps_S, mu, fermi)
    N = rt.particle_number(mu, fermi)
    print(f"fermi  mu = {mu:6.3f}  n(eps_S) = {n:.4f}  N = {N:8.2f}  dN/dmu = {rt.f_of_mu(mu, fermi):8.2f}")

# bosons: mu must stay below E0; these values give the same resonant occupations
for mu in (-0.059, -0.479):
    n = rt.occupation(eps_S, mu, bose)
    N = rt.particle_number(mu, bose)
    print(f"bose   mu = {mu:6.3f}  n(eps_S) = {n:.4f}  N = {N:8.2f}  dN/dmu = {rt.f_of_mu(mu, bose):8.2f}")

# closed forms versus direct quadrature of the density of states
mu = 1.2
print(f"closed form N = {rt.particle_number(mu, fermi):.10f}")
print(f"quadrature  N = {rt.particle_number_quadrature(mu, fermi):.10f}")

# once the reservoirs have exchanged particles through the lattice they share one mu
chain = rt.LatticeConfig(M=6, J=1.0, eps_S=eps_S, gamma_L=0.5, gamma_R=0.5)
N0 = rt.particle_number(1.2, fermi) + rt.particle_number(0.7, fermi)
eq = rt.equilibrium_solve(N0, chain, fermi)
print(f"N0 = {N0:.2f} -> mu_inf = {eq.mu_inf:.5f}, n_inf = {eq.n_inf:.5f}, N_inf = {eq.N_inf:.2f} per reservoir")

# a bosonic reservoir cannot hold a chemical potential at or above E0
try:
    rt.particle_number(0.3, bose)
except rt.DomainError as exc:
    print("expected error:", exc)
