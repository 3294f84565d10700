"""Pure-numpy fallback for the hot kernels.

Expression order matches the compiled versions in ``_kernels.pyx`` term for
term, so both backends agree to the last bit for the filter-bank kernels
(the extension is built with FP contraction disabled).
"""

import numpy as np

_SQRT2 = np.sqrt(2.0)
_SQRT3 = np.sqrt(3.0)
_H0 = (1.0 + _SQRT3) / (4.0 * _SQRT2)
_H1 = (3.0 + _SQRT3) / (4.0 * _SQRT2)
_H2 = (3.0 - _SQRT3) / (4.0 * _SQRT2)
_H3 = (1.0 - _SQRT3) / (4.0 * _SQRT2)


def d4_analyze(a):
    """One D4 analysis level along the last axis with periodic wrap.

    ``a`` is (m, n) complex128 with even n; the approximation lands in
    ``[:, :n//2]`` and the detail in ``[:, n//2:]``.
    """
    m, n = a.shape
    half = n // 2
    base = np.arange(0, n, 2)
    x0 = a[:, base]
    x1 = a[:, (base + 1) % n]
    x2 = a[:, (base + 2) % n]
    x3 = a[:, (base + 3) % n]
    out = np.empty_like(a)
    out[:, :half] = _H0 * x0 + _H1 * x1 + _H2 * x2 + _H3 * x3
    out[:, half:] = _H3 * x0 - _H2 * x1 + _H1 * x2 - _H0 * x3
    return out


def d4_synthesize(a):
    """Exact inverse (transpose) of :func:`d4_analyze`."""
    m, n = a.shape
    half = n // 2
    lo = a[:, :half]
    hi = a[:, half:]
    lo_prev = np.roll(lo, 1, axis=1)
    hi_prev = np.roll(hi, 1, axis=1)
    out = np.empty_like(a)
    out[:, 0::2] = _H0 * lo + _H2 * lo_prev + _H3 * hi + _H1 * hi_prev
    out[:, 1::2] = _H1 * lo + _H3 * lo_prev - _H2 * hi - _H0 * hi_prev
    return out


def soft_threshold(v, t):
    """Complex soft threshold: shrink magnitudes by ``t``, keep phases."""
    mag = np.abs(v)
    scale = np.maximum(mag - t, 0.0)
    np.divide(scale, mag, out=scale, where=mag > 0.0)
    return v * scale


def clip_unit_disk(v):
    """Project each entry onto the closed complex unit disk."""
    mag = np.abs(v)
    scale = np.ones_like(mag)
    np.divide(1.0, mag, out=scale, where=mag > 1.0)
    return v * scale
