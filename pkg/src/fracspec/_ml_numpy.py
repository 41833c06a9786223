"""Vectorized numpy evaluation of E_{a,b} (fallback when numba is off).

Series and large-argument routes run elementwise over arrays; the contour
route is evaluated per element with the (uncompiled) scalar kernel.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from . import _ml_kernels as K


def _series_small(a: float, b: float, z: np.ndarray) -> np.ndarray:
    # |z| <= 1: plain accumulation, no cancellation worth guarding against
    total = np.zeros_like(z)
    zk = np.ones_like(z)
    small = np.zeros(z.shape, dtype=int)
    active = np.ones(z.shape, dtype=bool)
    for k in range(5000):
        if k > 0:
            zk = zk * z
        term = zk * special.rgamma(a * k + b)
        total = np.where(active, total + term, total)
        if a * k + b > 2.0:
            tiny = np.abs(term) <= 1.0e-17 * np.abs(total)
            small = np.where(tiny, small + 1, 0)
            active &= small < 2
            if not active.any():
                break
    return total


def _asymptotic(a: float, b: float, x: np.ndarray) -> np.ndarray:
    # same acceptance rule as the scalar kernel: stop on the Gamma envelope
    res = np.zeros_like(x)
    if a > 1.0:
        s = x ** (1.0 / a) * np.exp(1j * math.pi / a)
        res = (2.0 / a) * (s ** (1.0 - b) * np.exp(s)).real
    lx = np.log(x)
    acc = np.zeros_like(x)
    prev = np.full(x.shape, np.inf)
    out = np.full(x.shape, np.nan)
    active = np.ones(x.shape, dtype=bool)
    nonzero = False
    for k in range(1, 400):
        y = b - a * k
        if y < 1.0:
            lenv = math.lgamma(1.0 - y) - math.log(math.pi)
        else:
            lenv = -math.lgamma(y)
        env = np.exp(lenv - k * lx)
        active &= ~(env > prev)
        prev = env
        la, sg = K.log_rgamma(y)
        if sg != 0.0:
            nonzero = True
            sgn = -sg if k % 2 == 0 else sg
            acc = acc + sgn * np.exp(la - k * lx)
        total = acc + res
        done = active & (env <= K.ASYMPTOTIC_TOL * np.abs(total))
        out[done] = total[done]
        active &= ~done
        if not nonzero and a == 2.0 and b == math.floor(b):
            out[active] = res[active]
            return out
        if not active.any():
            break
    return out


def ml_array(a: float, b: float, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.full(z.shape, np.nan)
    zero = z == 0.0
    out[zero] = K.rgamma(b)
    if a == 1.0 and b == 1.0:
        return np.exp(z)
    small = (~zero) & (z >= -K.SERIES_NEG_RADIUS) & (z < 0.0)
    if small.any():
        out[small] = _series_small(a, b, z[small])
    big = z < -K.SERIES_NEG_RADIUS
    if big.any() and a <= 2.0 and a != 1.0:
        out[big] = _asymptotic(a, b, -z[big])
    rest = np.isnan(out)
    for i in np.flatnonzero(rest):
        out.flat[i] = K.ml_scalar(a, b, float(z.flat[i]))
    return out
