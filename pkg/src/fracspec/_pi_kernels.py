"""Product-integration sums for ``int_0^t k(t-s) g(s) ds``.

``g`` is piecewise linear on each segment ``[s_j, s_{j+1}]`` with left value
``gl[j]`` and slope ``sl[j]``, so jumps at segment ends are allowed. With
``P1(tau) = int_0^tau k`` and ``P2(tau) = int_0^tau P1`` the exact segment
moments are::

    int k(t-s) ds            = P1(t-a) - P1(t-b)
    int k(t-s) (s-a) ds      = -(b-a) P1(t-b) + P2(t-a) - P2(t-b)
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit


@njit
def _toeplitz_nb(w0, w1, gl, sl, out):
    n = out.shape[0]
    out[0] = 0.0
    for k in range(1, n):
        acc = 0.0
        for j in range(k):
            m = k - j
            acc += gl[j] * w0[m] + sl[j] * w1[m]
        out[k] = acc


def _toeplitz_np(w0, w1, gl, sl, out):
    n = out.shape[0]
    out[0] = 0.0
    c = np.convolve(gl, w0[1:])[: n - 1] + np.convolve(sl, w1[1:])[: n - 1]
    out[1:] = c


def toeplitz_weights(P1: np.ndarray, P2: np.ndarray, h: float):
    """Segment moments on a uniform grid from ``P1(m h)``, ``P2(m h)``, m = 0..J."""
    w0 = np.zeros_like(P1)
    w1 = np.zeros_like(P1)
    w0[1:] = P1[1:] - P1[:-1]
    w1[1:] = -h * P1[:-1] + P2[1:] - P2[:-1]
    return w0, w1


def toeplitz_conv(w0, w1, gl, sl) -> np.ndarray:
    """Convolution values at ``j h`` for j = 0..len(gl)."""
    out = np.empty(gl.shape[0] + 1)
    if USE_NUMBA:
        _toeplitz_nb(w0, w1, np.ascontiguousarray(gl), np.ascontiguousarray(sl), out)
    else:
        _toeplitz_np(w0, w1, gl, sl, out)
    return out


@njit
def _triangular_nb(P1, P2, s, gl, sl, out):
    n = s.shape[0]
    out[0] = 0.0
    for i in range(1, n):
        acc = 0.0
        for j in range(i):
            h = s[j + 1] - s[j]
            acc += gl[j] * (P1[i, j] - P1[i, j + 1])
            acc += sl[j] * (-h * P1[i, j + 1] + P2[i, j] - P2[i, j + 1])
        out[i] = acc


def _triangular_np(P1, P2, s, gl, sl, out):
    h = np.diff(s)
    w0 = P1[:, :-1] - P1[:, 1:]
    w1 = -h[None, :] * P1[:, 1:] + P2[:, :-1] - P2[:, 1:]
    # row i uses segments j < i
    mask = np.arange(w0.shape[1])[None, :] < np.arange(P1.shape[0])[:, None]
    out[:] = np.sum(np.where(mask, w0 * gl[None, :] + w1 * sl[None, :], 0.0), axis=1)


def triangular_conv(P1: np.ndarray, P2: np.ndarray, s: np.ndarray, gl, sl) -> np.ndarray:
    """Convolution values at every node of a non-uniform grid ``s`` (``s[0] = 0``).

    ``P1[i, j] = P1(s_i - s_j)`` for ``j <= i`` (upper part ignored).
    """
    out = np.empty(s.shape[0])
    if USE_NUMBA:
        _triangular_nb(P1, P2, s, np.ascontiguousarray(gl), np.ascontiguousarray(sl), out)
    else:
        _triangular_np(P1, P2, s, gl, sl, out)
    return out
