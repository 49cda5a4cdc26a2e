"""Independent reference implementations used only by the tests.

The many-body oracle builds annihilation operators on the full Fock space
(Jordan-Wigner strings for fermions, truncated ladders for bosons), applies
the Lindblad generator to a density matrix and reads off the derivatives of
<a_j^+ a_k> and <a_j^+ a_m a_k^+ a_n> directly.
"""

import itertools
import math

import numpy as np
from scipy import integrate as sp_integrate


def fock_operators(M, statistics, cutoff=5):
    if statistics == "fermi":
        a = np.array([[0, 1], [0, 0]], dtype=complex)
        Z = np.diag([1.0, -1.0]).astype(complex)
        I = np.eye(2)
        before, local = Z, a
    else:
        a = np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)
        I = np.eye(cutoff)
        before, local = I, a
    ops = []
    for i in range(M):
        mats = [before] * i + [local] + [I] * (M - i - 1)
        op = mats[0]
        for m in mats[1:]:
            op = np.kron(op, m)
        ops.append(op)
    return ops


def total_number(ops):
    return np.real(np.diag(sum(o.conj().T @ o for o in ops)))


def _dissipator(c, rho):
    cd = c.conj().T
    return c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c)


def lindblad(rho, ops, J, eps, gamma_L, gamma_R, n_L, n_R, statistics):
    M = len(ops)
    H = sum(eps * o.conj().T @ o for o in ops)
    H = H - J * sum(ops[i].conj().T @ ops[i + 1] + ops[i + 1].conj().T @ ops[i] for i in range(M - 1))
    s = 1 if statistics == "bose" else -1
    out = -1j * (H @ rho - rho @ H)
    for site, g, n in ((0, gamma_L, n_L), (M - 1, gamma_R, n_R)):
        out += g * n * _dissipator(ops[site].conj().T, rho)
        out += g * (1 + s * n) * _dissipator(ops[site], rho)
    return out


def random_density_matrix(ops, rng, max_particles=None):
    dim = ops[0].shape[0]
    X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    if max_particles is not None:
        # keep the truncated bosonic ladder away from its edge
        drop = total_number(ops) > max_particles
        X[drop, :] = 0
        X[:, drop] = 0
    rho = X @ X.conj().T
    return rho / np.trace(rho)


def reduced_matrices(rho, ops):
    M = len(ops)
    ad = [o.conj().T for o in ops]
    sigma = np.array([[np.trace(rho @ ad[j] @ ops[k]) for k in range(M)] for j in range(M)])
    delta = np.zeros((M,) * 4, dtype=complex)
    for j, m, k, n in itertools.product(range(M), repeat=4):
        delta[j, m, k, n] = np.trace(rho @ ad[j] @ ops[m] @ ad[k] @ ops[n])
    return sigma, delta


def wick(sigma, statistics):
    """<a_j^+ a_m a_k^+ a_n> of a Gaussian state, written out index by index."""
    s = 1 if statistics == "bose" else -1
    M = sigma.shape[0]
    out = np.zeros((M,) * 4, dtype=complex)
    for j, m, k, n in itertools.product(range(M), repeat=4):
        # a_m a_k^+ = delta_mk + s a_k^+ a_m, then Wick on <a_j^+ a_k^+ a_m a_n>
        four = sigma[j, n] * sigma[k, m] + s * sigma[j, m] * sigma[k, n]
        out[j, m, k, n] = (m == k) * sigma[j, n] + s * four
    return out


def taylor_spdm(t, M, J, gamma_L, gamma_R, n_L, n_R, order=12):
    """sigma(t) from an empty lattice as the truncated series sum_k t^k/k! L^{k-1}(S)."""
    A = np.eye(M, k=1) + np.eye(M, k=-1)
    G = np.zeros(M)
    G[0] += gamma_L
    G[-1] += gamma_R

    def L(s):
        return 1j * J * (s @ A - A @ s) - 0.5 * (G[:, None] + G[None, :]) * s

    S = np.zeros((M, M), dtype=complex)
    S[0, 0] += gamma_L * n_L
    S[-1, -1] += gamma_R * n_R
    total = np.zeros((M, M), dtype=complex)
    term = S
    for k in range(1, order + 1):
        total = total + t**k / math.factorial(k) * term
        term = L(term)
    return total


def fermi_particle_number_direct(mu, beta, omegas):
    """Quadrature of D(e) n(e) for a harmonic trap with a plain Fermi function."""
    w = np.prod(omegas)
    e0 = 0.5 * sum(omegas)
    f = lambda e: e**2 / (2 * w) / (np.exp(beta * (e - mu)) + 1.0)
    hi = max(mu, e0) + 60.0 / beta
    return sp_integrate.quad(f, e0, hi, points=[mu] if e0 < mu < hi else None, limit=400, epsabs=0, epsrel=1e-13)[0]


def bose_particle_number_direct(mu, beta, omegas):
    w = np.prod(omegas)
    e0 = 0.5 * sum(omegas)
    f = lambda e: e**2 / (2 * w) / np.expm1(beta * (e - mu))
    return sp_integrate.quad(f, e0, e0 + 60.0 / beta, limit=400, epsabs=0, epsrel=1e-13)[0]
