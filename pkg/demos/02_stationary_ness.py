"""
Steady state between infinite reservoirs
========================================

With the resonant occupations frozen, the lattice relaxes to a steady state
with a uniform current and a three-step population profile.  The approach
is governed by the smallest decay rate of the effective non-Hermitian
single-particle Hamiltonian.
"""

import numpy as np

import reservoir_transport as rt

chain = rt.LatticeConfig(M=6, J=1.0, eps_S=2.0, gamma_L=0.5, gamma_R=0.5)
n_L, n_R = 0.310, 0.214

state = rt.ness(n_L - n_R, 0.5 * (n_L + n_R), chain)
print("steady-state populations:", np.round(state.n_inf, 6))
print(f"steady-state current j = {state.j_inf:.6f} J (fixed-point residual {state.residual:.1e})")

spec = rt.heff_spectrum(chain)
print("decay rates Gamma_k:", np.round(spec.Gamma, 6))
print(f"Gamma_min = {spec.Gamma_min:.7f} J, tau_rel = {spec.tau_rel:.2f} / J")

# integrate from an empty lattice and watch every element approach the steady state
mode = rt.StationaryReservoirs(n_L, n_R)
opts = rt.IntegratorOptions(rtol=1e-12, atol=1e-15)
t = rt.linear_time_grid(800.0, 16001)
traj = rt.integrate(rt.SystemState.empty_lattice(6), chain, None, mode, t, opts)
print(f"max |sigma(800) - sigma_inf| = {np.max(np.abs(traj.sigma[-1] - state.sigma_inf)):.2e}")

fits = rt.relaxation_fits(traj, state)
ratios = np.array([f.rate / spec.Gamma_min for f in fits.values()])
print(f"fitted rate / Gamma_min over all {len(fits)} elements: {ratios.min():.4f} .. {ratios.max():.4f}")

# relaxation slows down quickly with the chain length
scaling = rt.tau_rel_scaling([5, 10, 15, 20, 25], [0.1, 0.5, 0.9])
for g, p in zip(scaling.gamma_bar, scaling.exponents):
    print(f"gamma_bar = {g:.1f}: tau_rel ~ M^{p:.3f}")
