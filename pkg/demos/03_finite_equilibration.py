"""
Equilibration of finite reservoirs
==================================

Finite reservoirs drain into each other through the lattice.  After a fast
transient (set by tau_rel) the lattice follows the slowly shrinking bias,
and the bias itself closes exponentially at the rate alpha.  This run takes
about a minute.
"""

import numpy as np

import reservoir_transport as rt

trap = rt.HarmonicTrap3D(0.2, 0.2, 0.05)
model = rt.ReservoirModel("fermi", 1.0, trap)
chain = rt.LatticeConfig(M=6, J=1.0, eps_S=2.0, gamma_L=0.5, gamma_R=0.5)

initial = rt.SystemState.empty_lattice(6, mu_L=1.2, mu_R=0.7)
traj = rt.integrate(initial, chain, model, rt.FINITE, rt.log_time_grid(6e4))
print(f"{traj.n_steps} steps; worst relative particle-number drift {np.max(np.abs(traj.conservation_residual)):.1e}")
print(f"mu_L, mu_R at the end: {traj.mu_L[-1]:.5f}, {traj.mu_R[-1]:.5f}")

analysis = rt.equilibration_fits(traj)
alpha = analysis.alpha.alpha
print(f"metastability onset t* = {analysis.t_star:.1f} / J, fit window opens at {analysis.t_a:.1f} / J")
print(f"alpha (linearized reservoirs) = {alpha:.5e} J")
dn0 = rt.occupation(2.0, 1.2, model) - rt.occupation(2.0, 0.7, model)
dN0 = rt.particle_number(1.2, model) - rt.particle_number(0.7, model)
print(f"alpha (initial biases)        = {rt.alpha_approx(chain, dn0, dN0).alpha:.5e} J")

# the bias and the currents decay at alpha, the mean occupation and bulk sites at 2 alpha
for name in ("delta_n", "delta_N", "n_bar", "j_12", "n_1", "n_3", "coh_13"):
    fit = analysis.fits[name]
    print(f"{name:8s} rate / alpha = {fit.rate / alpha:.4f} -> class {rt.classify_rate(fit.rate, alpha)} alpha")
print("not fitted (zero by symmetry):", sorted(analysis.failures))

# inside the metastable window the lattice is slaved to the reservoir bias
obs = traj.observables
window = traj.t >= analysis.t_star
pred = rt.metastable_state(obs.n_res_L - obs.n_res_R, 0.5 * (obs.n_res_L + obs.n_res_R), chain)
print(f"max relative error of the slaved populations: {np.max(np.abs(pred.populations - obs.n)[window] / obs.n[window]):.1e}")
