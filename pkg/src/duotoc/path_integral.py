"""Closed-form OTOC front from summing paths of the projected transfer matrix.

The 1-step form keeps only z_1 (single-site jumps of the front); the 2-step
form adds z_2.  Both reduce to binomial tails, evaluated here through a
regularized incomplete beta function.  Everything that can underflow is
carried as (sign, log|value|).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Infeasible

_TINY = 1e-300
_EPS = 1e-16


def log_binomial(m, n):
    if n < 0 or n > m:
        return -math.inf
    return math.lgamma(m + 1) - math.lgamma(n + 1) - math.lgamma(m - n + 1)


def _beta_cf(x, a, b, max_iter=100000):
    """Continued fraction for I_x(a, b) (modified Lentz); converges for x < (a+1)/(a+b+2)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = _TINY if abs(d) < _TINY else d
    d = 1.0 / d
    h = d
    for k in range(1, max_iter):
        k2 = 2 * k
        aa = k * (b - k) * x / ((qam + k2) * (a + k2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + k) * (qab + k) * x / ((a + k2) * (qap + k2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def _log_beta_front(x, a, b):
    lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    return a * math.log(x) + b * math.log1p(-x) - lbeta - math.log(a)


def log_regularized_incomplete_beta(x, a, b):
    """log I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("incomplete beta needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"incomplete beta argument {x} outside [0, 1]")
    if x == 0.0:
        return -math.inf
    if x == 1.0:
        return 0.0
    if x < (a + 1.0) / (a + b + 2.0):
        return _log_beta_front(x, a, b) + math.log(_beta_cf(x, a, b))
    # I_x(a, b) = 1 - I_{1-x}(b, a)
    y = 1.0 - x
    other = math.exp(_log_beta_front(y, b, a)) * _beta_cf(y, b, a)
    return math.log1p(-other) if other < 1.0 else -math.inf


def regularized_incomplete_beta(x, a, b):
    return math.exp(log_regularized_incomplete_beta(x, a, b))


def _logsumexp(logs):
    logs = [v for v in logs if v != -math.inf]
    if not logs:
        return -math.inf
    top = max(logs)
    return top + math.log(sum(math.exp(v - top) for v in logs))


def log_P_poly(m, nu, x):
    """log of P_{m,nu}(x) = sum_{k=0}^{m-nu} C(m-k-1, nu-1) x^k."""
    if not (isinstance(m, (int, np.integer)) and isinstance(nu, (int, np.integer))):
        raise TypeError("m and nu must be integers")
    if nu < 1 or m < nu:
        raise ValueError(f"P_poly needs m >= nu >= 1, got m={m}, nu={nu}")
    if x < 0:
        raise ValueError("P_poly needs x >= 0")
    if x == 0:
        return log_binomial(m - 1, nu - 1)
    lx = math.log(x)
    return _logsumexp([log_binomial(m - k - 1, nu - 1) + k * lx for k in range(m - nu + 1)])


def P_poly(m, nu, x):
    return math.exp(log_P_poly(m, nu, x))


def front_profile_F(z1, n, m):
    """I_{z1}(n, m-n+1), the probability of at least n successes in m trials of probability z1."""
    if n < 1 or n > m:
        raise ValueError(f"front profile needs 1 <= n <= m, got n={n}, m={m}")
    if not 0.0 <= z1 <= 1.0:
        raise ValueError("z1 must lie in [0, 1]")
    return regularized_incomplete_beta(z1, n, m - n + 1)


def _log_F(z1, nu, m):
    # F(0) = 1 (certain), F(nu > m) = 0
    if nu <= 0:
        return 0.0
    if nu > m:
        return -math.inf
    return log_regularized_incomplete_beta(z1, nu, m - nu + 1)


def _log_binom_pmf(z1, m, j):
    """log [C(m, j) z1^j (1-z1)^(m-j)]."""
    if j < 0 or j > m:
        return -math.inf
    return log_binomial(m, j) + _xlogy(j, z1) + _xlogy(m - j, 1.0 - z1)


def _xlogy(k, y):
    if k == 0:
        return 0.0
    return -math.inf if y == 0 else k * math.log(y)


def otoc_lightcone(z1, q, m):
    """Even-parity OTOC on the light-cone edge (n = 1)."""
    q2 = q * q
    return 1.0 - q2 * (1.0 - z1) ** m / (q2 - 1)


def otoc_1step(z1, q, n, m):
    """OTOC with only single-site front jumps: F(n) - P[Bin(m, z1) = n-1] / (q^2 - 1)."""
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    if n == 1:
        return otoc_lightcone(z1, q, m)
    return math.exp(_log_F(z1, n, m)) - math.exp(_log_binom_pmf(z1, m, n - 1)) / (q * q - 1)


def otoc_1step_asymptotic(z1, q, n, m):
    """Two-front combination (q^2 F(n) - F(n-1)) / (q^2 - 1); algebraically the same as otoc_1step."""
    q2 = q * q
    return (q2 * math.exp(_log_F(z1, n, m)) - math.exp(_log_F(z1, n - 1, m))) / (q2 - 1)


def _signed_log_pow(base, k):
    """(sign, log|base^k|) with 0^0 = 1."""
    if k == 0:
        return 1, 0.0
    if base == 0:
        return 0, -math.inf
    return (-1 if (base < 0 and k % 2) else 1), k * math.log(abs(base))


def _signed_sum(terms):
    """Sum of sign * exp(log) pairs, scaled by the largest magnitude."""
    live = [(s, v) for s, v in terms if s != 0 and v != -math.inf]
    if not live:
        return 0.0
    top = max(v for _, v in live)
    return math.exp(top) * math.fsum(s * math.exp(v - top) for s, v in live)


def otoc_2step(z1, z2, q, n, m):
    """OTOC with single- and two-site front jumps.

    Sum over the number h of two-site jumps of three contributions, set by
    where the front starts next to the left boundary.
    """
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    if z2 == 0:
        return otoc_1step(z1, q, n, m)
    if z1 <= 0:
        raise Infeasible("z2 > 0 requires z1 > 0")
    q2 = q * q
    zt = z1 - z2 / q2
    lz1, lz2, lq2 = math.log(z1), math.log(z2), math.log(q2)
    terms = []
    for h in range((n - 1) // 2 + 1):
        s, lzt = _signed_log_pow(zt, n - 1 - 2 * h)
        lc = log_binomial(n - 1 - h, h)
        terms.append((s, lc + (1 - n + h) * lz1 - h * lq2 + lzt + h * lz2 + _log_F(z1, n - h, m)))
        lt = (lc + lzt + h * (lz2 - lq2) + log_binomial(m, n - 1 - h)
              + _xlogy(m - n + 1 + h, 1.0 - z1) - math.log(q2 - 1))
        terms.append((-s, lt))
    for h in range((n - 2) // 2 + 1) if n >= 2 else ():
        s, lzt = _signed_log_pow(zt, n - 2 - 2 * h)
        lc = log_binomial(n - 2 - h, h)
        terms.append((s, lc + (lz2 - lq2) + lzt + h * lz2 - h * lq2 - (n - 1 - h) * lz1
                      + _log_F(z1, n - 1 - h, m)))
    return _signed_sum(terms)


def otoc_closed_xt(x, t, z1, z2=0.0, q=2):
    """Even-parity closed form at spacetime point (x, t); 1 outside the light cone."""
    if (t - x) % 2:
        raise ValueError("closed forms cover the even sublattice (t - x even)")
    n, m = (t - x + 2) // 2, (t + x) // 2
    if n < 1 or m < 1:
        return 1.0 if n < 1 else -1.0 / (q * q - 1) if n == 1 else 0.0
    return otoc_2step(z1, z2, q, n, m) if z2 else otoc_1step(z1, q, n, m)


@dataclass(frozen=True)
class FrontParams:
    z1: float
    z2: float
    q: int
    v_B1: float
    D1: float
    xi: float
    h_max: float
    v_B2: float
    D2: float

    def expanded(self):
        """First-order-in-h_max expansions of v_B2 and D2."""
        v, h = self.v_B1, self.h_max
        return v - (1 - v * v) * h / 2, self.D1 * (1 + (1 + 3 * v) * h / 2)


def front_params(z1, z2, q):
    if z1 == 0 and z2 > 0:
        raise Infeasible("z2 > 0 needs z1 > 0: z1 = 0 means a dual-unitary gate, where every z_k vanishes")
    if not 0 < z1 < 1:
        raise ValueError("front parameters need 0 < z1 < 1")
    if z2 < 0:
        raise ValueError("z2 must be non-negative")
    v1 = (1 - z1) / (1 + z1)
    D1 = v1 * (1 - v1 * v1)
    xi = z2 / (q * q * z1)
    # (1 - 1/sqrt(1 + 4 xi / (1 - xi)^2)) / 2, written without the 0/0 at xi = 1
    h = 0.5 * (1 - abs(1 - xi) / (1 + xi))
    den = 1 - (1 + v1) * h / 2
    v2 = (v1 - (1 + v1) * h / 2) / den
    D2 = D1 * (1 - (1 - v2) * h / 2) / den**2
    return FrontParams(z1=z1, z2=z2, q=q, v_B1=v1, D1=D1, xi=xi, h_max=h, v_B2=v2, D2=D2)


def erf_front(x, t, v_B, D):
    """1/2 (1 + erf((x - v_B t) / sqrt(2 D t))); vectorised over x."""
    from scipy.special import erf

    if t <= 0 or D <= 0:
        raise ValueError("erf front needs t > 0 and D > 0")
    return 0.5 * (1 + erf((np.asarray(x, dtype=float) - v_B * t) / np.sqrt(2 * D * t)))


def log_zeta(v):
    a, b = (1 + v) / 2, (1 - v) / 2
    return a * math.log(a) - b * math.log(b) - v * math.log(v)


def gamma_decay(v, z1):
    """Per-time-step decay factor of the OTOC along x = v t inside the light cone."""
    if not 0 < v < 1:
        raise ValueError("gamma needs 0 < v < 1")
    if not 0 < z1 < 1:
        raise ValueError("gamma needs 0 < z1 < 1")
    return math.exp(log_zeta(v) + v * math.log1p(-z1) + (1 - v) / 2 * math.log(z1))


@dataclass(frozen=True)
class DecayReport:
    regime: str
    gamma: float | None = None
    rate: float | None = None
    scrambling_time: float | None = None


def decay_report(v, z1):
    """Decay factor, rate -log(gamma) and scrambling time -1/log(gamma) along x = v t.

    Only defined strictly inside the front (0 < v < v_B1); elsewhere the
    regime label is returned instead.
    """
    v1 = (1 - z1) / (1 + z1)
    if v >= 1:
        return DecayReport("outside-cone")
    if v >= v1:
        return DecayReport("front")
    if v <= 0:
        return DecayReport("outside-cone")
    g = gamma_decay(v, z1)
    rate = -math.log(g)
    return DecayReport("inside", gamma=g, rate=rate, scrambling_time=1.0 / rate)
