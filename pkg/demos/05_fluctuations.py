"""
Fluctuations: bosons versus fermions
====================================

The single-particle density matrix does not depend on the particle
statistics once the resonant occupations match.  Number and current
fluctuations come from the two-particle density matrix and do: fermions are
bounded by n (1 - n) <= 1/4, bosons bunch.
"""

import numpy as np

import reservoir_transport as rt

trap = rt.HarmonicTrap3D(0.2, 0.2, 0.05)
chain = rt.LatticeConfig(M=3, J=1.0, eps_S=2.0, gamma_L=0.5, gamma_R=0.5)
grid = rt.log_time_grid(2e3)
runs = {}
for name, beta, mus in (("fermi", 1.0, (1.2, 0.7)), ("bose", 0.7, (-0.059, -0.479))):
    model = rt.ReservoirModel(name, beta, trap)
    initial = rt.SystemState.empty_lattice(3, *mus, tpdm=True)
    runs[name] = rt.integrate(initial, chain, model, rt.FINITE, grid)

f, b = runs["fermi"], runs["bose"]
short = grid <= 10.0
print(f"max |sigma_F - sigma_B| for t <= 10: {np.max(np.abs(f.sigma[short] - b.sigma[short])):.2e}")

fo, bo = f.observables, b.observables
print(f"fermions: max |var n - n(1 - n)| = {np.max(np.abs(fo.var_n - fo.n * (1 - fo.n))):.1e}, max var n = {fo.var_n.max():.3f}")
for tk in (1.0, 10.0, 100.0, 1000.0):
    i = np.argmin(np.abs(grid - tk))
    print(
        f"t = {grid[i]:7.1f}: var n_1 fermi {fo.var_n[i, 0]:.4f}  bose {bo.var_n[i, 0]:.4f}"
        f" | var j_12 fermi {fo.var_j[i, 0]:.4f}  bose {bo.var_j[i, 0]:.4f}"
    )

# states reached from the vacuum stay Gaussian, so Wick's theorem holds along the run
for name, traj in runs.items():
    print(f"{name}: max deviation from Wick factorization {np.max(np.abs(traj.delta - rt.wick_tpdm(traj.sigma, name))):.1e}")
