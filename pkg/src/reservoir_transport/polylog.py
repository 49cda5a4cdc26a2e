"""Real dilogarithm and trilogarithm, Li_2(z) and Li_3(z), for real z < 1.

Bosonic reservoirs need arguments in (0, 1); fermionic reservoirs need
negative arguments of arbitrary magnitude.  The evaluation combines

* the defining power series sum_k z**k / k**s for |z| <= 0.6,
* the expansion of Li_s(e**w) in powers of w = ln z for 0.6 < z < 1,
* the duplication formula Li_s(-x) = 2**(1-s) Li_s(x**2) - Li_s(x) for 0.6 < x <= 1,
* the inversion formulas relating Li_s(-x) and Li_s(-1/x) for x > 1.
"""

import math

import numpy as np
from scipy.special import bernoulli

from .errors import DomainError

__all__ = ["polylog", "ZETA2", "ZETA3"]

ZETA2 = math.pi**2 / 6.0
ZETA3 = 1.2020569031595942853997381615114

_SERIES_RADIUS = 0.6
# 0.6**80 / 80**2 ~ 3e-22, well below the 1e-17 term cutoff
_K = np.arange(1, 81, dtype=float)
_INV_POWERS = {s: 1.0 / _K**s for s in (2, 3)}

# zeta(-n) = (-1)**n B_{n+1} / (n + 1), n >= 1; zeta(0) = -1/2
_NMAX = 40
_B = bernoulli(_NMAX + 1)
_ZETA_NEG = np.array([-0.5] + [(-1) ** n * _B[n + 1] / (n + 1) for n in range(1, _NMAX + 1)])
_HARMONIC = {2: 1.0, 3: 1.5}
_ZETA_POS = {1: None, 2: ZETA2, 3: ZETA3}


def _power_series(s, z):
    return float(np.dot(np.power(z, _K), _INV_POWERS[s]))


def _zeta(n):
    if n > 1:
        return _ZETA_POS[n]
    return _ZETA_NEG[-n]


def _log_series(s, z):
    """Li_s(z) for 0 < z <= 1 via the expansion in w = ln z (converges for |w| < 2 pi)."""
    if z == 1.0:
        return _ZETA_POS[s]
    w = math.log(z)
    total = w ** (s - 1) / math.factorial(s - 1) * (_HARMONIC[s] - math.log(-w))
    term_w = 1.0
    for k in range(0, _NMAX + s):
        if k > 0:
            term_w *= w / k
        if k == s - 1:
            continue
        c = _zeta(s - k)
        if c == 0.0:
            continue
        term = c * term_w
        total += term
        if k > s and abs(term) < 1e-18:
            break
    return total


def _negative_mid(s, x):
    """Li_s(-x) for 0.6 < x <= 1 by duplication."""
    if x == 1.0:
        return -(1.0 - 2.0 ** (1 - s)) * _ZETA_POS[s]
    return 2.0 ** (1 - s) * _li(s, x * x) - _li(s, x)


def _li(s, z):
    if z == 0.0:
        return 0.0
    if abs(z) <= _SERIES_RADIUS:
        return _power_series(s, z)
    if z > 0.0:
        return _log_series(s, z)
    x = -z
    if x <= 1.0:
        return _negative_mid(s, x)
    lx = math.log(x)
    inv = _li(s, -1.0 / x)
    if s == 2:
        return -ZETA2 - 0.5 * lx * lx - inv
    return inv - ZETA2 * lx - lx**3 / 6.0


def polylog(s, z):
    """Polylogarithm Li_s(z) of integer order s in {2, 3} for real z < 1.

    Absolute accuracy is about 1e-15 for arguments of order unity; for
    large negative z the relative accuracy stays near machine precision.
    """
    if s not in (2, 3):
        raise ValueError(f"polylog order must be 2 or 3, got {s!r}")
    z = float(z)
    if not math.isfinite(z):
        raise DomainError(f"polylog argument must be finite, got {z}")
    if z >= 1.0:
        raise DomainError(f"polylog argument must be < 1 on the real branch, got {z}")
    return _li(s, z)
