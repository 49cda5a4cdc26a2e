"""
Short-time growth from an empty lattice
=======================================

Particles enter at the two edges, so an element sigma_jk first becomes
nonzero once the hopping has had enough powers of t to connect j and k to
an edge.  The leading exponent is p(j, k) = M - |j + k - (M + 1)|.
"""

import numpy as np

import reservoir_transport as rt

chain = rt.LatticeConfig(M=6, J=1.0, eps_S=2.0, gamma_L=0.5, gamma_R=0.5)
model = rt.ReservoirModel("fermi", 1.0, rt.HarmonicTrap3D(0.2, 0.2, 0.05))

print("predicted exponents:\n", rt.exponent_map(6))

t = np.concatenate([[0.0], np.geomspace(1e-3, 1e-1, 200)])
opts = rt.IntegratorOptions(rtol=1e-10, atol=1e-40)
traj = rt.integrate(rt.SystemState.empty_lattice(6, 1.2, 0.7), chain, model, rt.FINITE, t, opts)
print("fitted log-log slopes:\n", np.round(rt.power_law_exponents(traj.t, traj.sigma, (1e-3, 1e-1)), 3))

# the third-order series solves the lattice equations at fixed resonant occupations
n_L0, n_R0 = rt.occupation(2.0, 1.2, model), rt.occupation(2.0, 0.7, model)
series = rt.short_time_series(chain, n_L0, n_R0)
fixed = rt.integrate(rt.SystemState.empty_lattice(6), chain, None, rt.StationaryReservoirs(n_L0, n_R0), t, opts)

# finite reservoirs start draining at once; the drift of n_L enters sigma_11 at order t^2
mu_dot = chain.gamma_L * (0.0 - n_L0) / rt.f_of_mu(1.2, model)
drift_coef = 0.5 * chain.gamma_L * rt.g_of_mu(1.2, 2.0, model) * mu_dot
for tk in (0.001, 0.01, 0.03, 0.05):
    i = np.argmin(np.abs(t - tk))
    err = np.max(np.abs(series(t[i]) - fixed.sigma[i]))
    drift = (traj.sigma[i, 0, 0] - fixed.sigma[i, 0, 0]).real
    print(
        f"t = {t[i]:.4f}: series error / t^4 = {err / t[i] ** 4:.3f}, "
        f"reservoir drift in sigma_11 / predicted = {drift / (drift_coef * t[i] ** 2):.3f}"
    )
