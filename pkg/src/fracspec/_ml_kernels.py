"""Scalar Mittag-Leffler kernels (numba-compatible).

Three evaluation routes for real arguments:

* power series, used for ``-1 <= z <= 20`` where it is free of cancellation;
* the large-argument expansion for ``z < -1`` (with the pole residues that
  appear for ``1 < alpha <= 2``), accepted only when its smallest retained
  term is below ``ASYMPTOTIC_TOL`` relative to the result;
* inversion of the Laplace transform ``s**(a-b) / (s**a - z)`` along an
  optimally placed parabolic contour (Garrappa, SIAM J. Numer. Anal. 53,
  2015), which covers everything else.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from ._accel import njit

LOG_EPS = math.log(2.220446049250313e-16)
CONTOUR_LOG_TOL = math.log(1.0e-15)
ASYMPTOTIC_TOL = 1.0e-15
SERIES_NEG_RADIUS = 1.0
SERIES_POS_RADIUS = 20.0


@njit
def log_rgamma(x):
    """Return ``(log|1/Gamma(x)|, sign(1/Gamma(x)))``; sign 0 at the poles."""
    if x <= 0.0 and x == math.floor(x):
        return -math.inf, 0.0
    if x > 0.0:
        return -math.lgamma(x), 1.0
    # reflection: 1/Gamma(x) = sin(pi x) Gamma(1-x) / pi
    n = math.floor(x + 0.5)
    s = math.sin(math.pi * (x - n))
    if int(n) % 2 != 0:
        s = -s
    sign = 1.0 if s > 0.0 else -1.0
    return math.log(abs(s)) + math.lgamma(1.0 - x) - math.log(math.pi), sign


@njit
def rgamma(x):
    """Reciprocal gamma function, zero at the non-positive integers."""
    if x <= 0.0 and x == math.floor(x):
        return 0.0
    if 0.0 < x < 170.0:
        return 1.0 / math.gamma(x)
    la, sg = log_rgamma(x)
    return sg * math.exp(la)


@njit
def ml_series(a, b, z):
    """Taylor series; intended for ``-1 <= z`` and moderate positive ``z``."""
    if z == 0.0:
        return rgamma(b)
    total = 0.0
    if z > 0.0:
        lz = math.log(z)
        peaked = False
        prev = 0.0
        for k in range(20000):
            la, sg = log_rgamma(a * k + b)
            if sg == 0.0:
                continue
            term = sg * math.exp(k * lz + la)
            total += term
            mag = abs(term)
            if mag < prev:
                peaked = True
            prev = mag
            if peaked and mag <= 1.0e-17 * abs(total):
                break
        return total
    zk = 1.0
    small = 0
    for k in range(5000):
        if k > 0:
            zk *= z
        term = zk * rgamma(a * k + b)
        total += term
        if a * k + b > 2.0 and abs(term) <= 1.0e-17 * abs(total):
            small += 1
            if small >= 2:
                break
        else:
            small = 0
    return total


@njit
def ml_asymptotic(a, b, x):
    """Large-argument expansion of ``E_{a,b}(-x)``; NaN when not accurate."""
    res = 0.0
    if a > 1.0:
        r = x ** (1.0 / a)
        ang = math.pi / a
        s = complex(r * math.cos(ang), r * math.sin(ang))
        res = (2.0 / a) * (s ** (1.0 - b) * cmath.exp(s)).real
    lx = math.log(x)
    acc = 0.0
    prev = math.inf
    nonzero = False
    for k in range(1, 400):
        y = b - a * k
        # |1/Gamma(y)| <= Gamma(1-y)/pi for y < 1: envelope immune to near-zeros
        if y < 1.0:
            lenv = math.lgamma(1.0 - y) - math.log(math.pi)
        else:
            lenv = -math.lgamma(y)
        env = math.exp(lenv - k * lx)
        if env > prev:
            return math.nan
        prev = env
        la, sg = log_rgamma(y)
        if sg != 0.0:
            nonzero = True
            mag = math.exp(la - k * lx)
            # -(-x)^(-k) / Gamma(b - a k)
            if k % 2 == 0:
                acc -= sg * mag
            else:
                acc += sg * mag
        total = acc + res
        if env <= ASYMPTOTIC_TOL * abs(total):
            return total
        if not nonzero and a == 2.0 and b == math.floor(b):
            # all algebraic terms vanish for a = 2 and integer b
            return res
    return math.nan


@njit
def _optimal_bounded(phi_j, phi_j1, pj, qj, log_epsilon):
    fac = 1.01
    f_max = math.exp(log_epsilon - LOG_EPS)
    sq_phi_j = math.sqrt(phi_j)
    threshold = 2.0 * math.sqrt(log_epsilon - LOG_EPS)
    sq_phi_j1 = min(math.sqrt(phi_j1), threshold - sq_phi_j)
    adm = False
    f_bar = 1.0
    sqb_j = sq_phi_j
    sqb_j1 = sq_phi_j1
    if pj < 1e-14 and qj < 1e-14:
        adm = True
    elif pj < 1e-14:
        if sq_phi_j > 0.0:
            f_min = fac * (sq_phi_j / (sq_phi_j1 - sq_phi_j)) ** qj
        else:
            f_min = fac
        if f_min < f_max:
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fq = f_bar ** (-1.0 / qj)
            sqb_j1 = (2.0 * sq_phi_j1 - fq * sq_phi_j) / (2.0 + fq)
            adm = True
    elif qj < 1e-14:
        f_min = fac * (sq_phi_j1 / (sq_phi_j1 - sq_phi_j)) ** pj
        if f_min < f_max:
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fp = f_bar ** (-1.0 / pj)
            sqb_j = (2.0 * sq_phi_j + fp * sq_phi_j1) / (2.0 - fp)
            adm = True
    else:
        f_min = fac * (sq_phi_j + sq_phi_j1) / (sq_phi_j1 - sq_phi_j) ** max(pj, qj)
        if f_min < f_max:
            f_min = max(f_min, 1.5)
            f_bar = f_min + f_min / f_max * (f_max - f_min)
            fp = f_bar ** (-1.0 / pj)
            fq = f_bar ** (-1.0 / qj)
            w = -phi_j1 / log_epsilon
            den = 2.0 + w - (1.0 + w) * fp + fq
            sqb_j = ((2.0 + w + fq) * sq_phi_j + fp * sq_phi_j1) / den
            sqb_j1 = (-(1.0 + w) * fq * sq_phi_j + (2.0 + w - (1.0 + w) * fp) * sq_phi_j1) / den
            adm = True
    if not adm:
        return 0.0, 0.0, math.inf
    log_epsilon = log_epsilon - math.log(f_bar)
    w = -sqb_j1 * sqb_j1 / log_epsilon
    mu = (((1.0 + w) * sqb_j + sqb_j1) / (2.0 + w)) ** 2
    h = -2.0 * math.pi / log_epsilon * (sqb_j1 - sqb_j) / ((1.0 + w) * sqb_j + sqb_j1)
    n = math.ceil(math.sqrt(1.0 - log_epsilon / mu) / h)
    return mu, h, float(n)


@njit
def _optimal_unbounded(phi_j, pj, log_epsilon):
    sq_phi_j = math.sqrt(phi_j)
    phib = phi_j * 1.01 if phi_j > 0.0 else 0.01
    sqb = math.sqrt(phib)
    f_min = 1.0
    f_max = 10.0
    f_tar = 5.0
    n = 0.0
    big_a = 0.0
    sq_mu = 0.0
    for _ in range(200):
        lept = log_epsilon / phib
        n = float(math.ceil(phib / math.pi * (1.0 - 1.5 * lept + math.sqrt(1.0 - 2.0 * lept))))
        big_a = math.pi * n / phib
        sq_mu = sqb * abs(4.0 - big_a) / abs(7.0 - math.sqrt(1.0 + 12.0 * big_a))
        if pj < 1e-14:
            break
        fbar = ((sqb - sq_phi_j) / sq_mu) ** (-pj)
        if f_min < fbar < f_max:
            break
        sqb = f_tar ** (-1.0 / pj) * sq_mu + sq_phi_j
        phib = sqb * sqb
    mu = sq_mu * sq_mu
    h = (-3.0 * big_a - 2.0 + 2.0 * math.sqrt(1.0 + 12.0 * big_a)) / (4.0 - big_a) / n
    threshold = log_epsilon - LOG_EPS
    if mu > threshold:
        if abs(pj) < 1e-14:
            q = 0.0
        else:
            q = f_tar ** (-1.0 / pj) * math.sqrt(mu)
        phib = (q + math.sqrt(phi_j)) ** 2
        if phib < threshold:
            w = math.sqrt(LOG_EPS / (LOG_EPS - log_epsilon))
            u = math.sqrt(-phib / LOG_EPS)
            mu = threshold
            n = float(math.ceil(w * log_epsilon / 2.0 / math.pi / (u * w - 1.0)))
            h = math.sqrt(LOG_EPS / (LOG_EPS - log_epsilon)) / n
        else:
            n = math.inf
            h = 0.0
    return mu, h, n


@njit
def ml_contour(a, b, z):
    """Laplace-transform inversion of ``E_{a,b}(z)`` for real ``z != 0``."""
    log_epsilon = CONTOUR_LOG_TOL
    theta = math.pi if z < 0.0 else 0.0
    kmin = int(math.ceil(-a / 2.0 - theta / 2.0 / math.pi))
    kmax = int(math.floor(a / 2.0 - theta / 2.0 / math.pi))
    npole = max(kmax - kmin + 1, 0)
    az = abs(z) ** (1.0 / a)
    poles = np.empty(npole + 1, dtype=np.complex128)
    phis = np.empty(npole + 2)
    poles[0] = 0.0
    phis[0] = 0.0
    m = 1
    for k in range(kmin, kmax + 1):
        ang = (theta + 2.0 * k * math.pi) / a
        s = complex(az * math.cos(ang), az * math.sin(ang))
        ph = 0.5 * (s.real + abs(s))
        if ph <= 1e-15:
            continue
        # insertion by phi
        pos = m
        while pos > 1 and phis[pos - 1] > ph:
            phis[pos] = phis[pos - 1]
            poles[pos] = poles[pos - 1]
            pos -= 1
        phis[pos] = ph
        poles[pos] = s
        m += 1
    nsing = m
    phis[nsing] = math.inf
    pvals = np.ones(nsing)
    pvals[0] = max(0.0, -2.0 * (a - b + 1.0))
    qvals = np.ones(nsing)
    qvals[nsing - 1] = math.inf

    best_n = math.inf
    best_mu = 0.0
    best_h = 0.0
    best_j = 0
    for _ in range(20):
        best_n = math.inf
        for j in range(nsing):
            if not (phis[j] < log_epsilon - LOG_EPS and phis[j] < phis[j + 1]):
                continue
            if j < nsing - 1:
                mu, h, n = _optimal_bounded(phis[j], phis[j + 1], pvals[j], qvals[j], log_epsilon)
            else:
                mu, h, n = _optimal_unbounded(phis[j], pvals[j], log_epsilon)
            if n < best_n:
                best_n = n
                best_mu = mu
                best_h = h
                best_j = j
        if best_n > 200.0:
            log_epsilon += math.log(10.0)
        else:
            break

    n = int(best_n)
    mu = best_mu
    h = best_h
    # conjugate symmetry for real z: sum over u >= 0 and take twice the real part
    acc = 0.0
    for k in range(0, n + 1):
        u = h * k
        s = mu * complex(1.0, u) ** 2
        ds = complex(-2.0 * mu * u, 2.0 * mu)
        val = cmath.exp(s) * s ** (a - b) / (s ** a - z) * ds
        # divide by 2*pi*i: imag part carries the real contribution
        contrib = val.imag
        if k == 0:
            acc += contrib
        else:
            acc += 2.0 * contrib
    integral = h * acc / (2.0 * math.pi)
    res = 0.0
    for j in range(best_j + 1, nsing):
        res += ((1.0 / a) * poles[j] ** (1.0 - b) * cmath.exp(poles[j])).real
    return integral + res


@njit
def ml_scalar(a, b, z):
    """``E_{a,b}(z)`` for real finite ``z``; ``a > 0``."""
    if z == 0.0:
        return rgamma(b)
    if a == 1.0 and b == 1.0:
        return math.exp(z)
    if -SERIES_NEG_RADIUS <= z <= SERIES_POS_RADIUS:
        return ml_series(a, b, z)
    if z < 0.0 and a <= 2.0 and a != 1.0:
        v = ml_asymptotic(a, b, -z)
        if not math.isnan(v):
            return v
    return ml_contour(a, b, z)


@njit
def ml_fill(a, b, z, out):
    for i in range(z.shape[0]):
        out[i] = ml_scalar(a, b, z[i])
    return out
