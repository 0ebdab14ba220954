"""Modular arithmetic helpers for long orbits.

Products of a real rotation number with a large integer (binomial
coefficients, squares of summation indices) lose their fractional part
to rounding if formed directly. ``frac_mul`` splits both factors so that
every partial product is exact in double precision.
"""

import math

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1, Veltkamp split constant
_K_SHIFT = 2 ** 27


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def frac(a):
    """Fractional part in [0, 1)."""
    a = np.asarray(a, dtype=float)
    r = a - np.floor(a)
    return np.where(r >= 1.0, 0.0, r)


def frac_mul(q, k):
    """Return frac(q * k) for real ``q`` and integer ``k`` with |k| < 2**53.

    Each partial product of the split factors fits in 53 bits, so the
    fractional part is accurate to a few ulps regardless of |k|.
    """
    q = np.asarray(q, dtype=float)
    k = np.asarray(k, dtype=np.int64)
    kh = np.floor_divide(k, _K_SHIFT)
    kl = k - kh * _K_SHIFT
    kh = kh.astype(float)
    kl = kl.astype(float)
    qh, ql = _split(q)
    parts = (
        frac(qh * kh * _K_SHIFT),
        frac(qh * kl),
        frac(ql * kh * _K_SHIFT),
        frac(ql * kl),
    )
    return frac(parts[0] + parts[1] + parts[2] + parts[3])


def mod(a, period):
    """Reduce into [0, period) with a single correction step."""
    a = np.asarray(a, dtype=float)
    r = a - period * np.floor(a / period)
    r = np.where(r >= period, r - period, r)
    return np.where(r < 0.0, r + period, r)


def circle_distance(a, b, period=1.0):
    """Distance on R / period Z, elementwise."""
    d = mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), period)
    return np.minimum(d, period - d)


def expi(phase):
    """exp(2 pi i phase), with ``phase`` reduced mod 1 first."""
    return np.exp(2j * np.pi * frac(phase))


class KahanAccumulator:
    """Compensated running sum for scalars or arrays."""

    def __init__(self, initial=0.0):
        self.total = np.array(initial, dtype=float)
        self._c = np.zeros_like(self.total)

    def add(self, value):
        y = np.asarray(value, dtype=float) - self._c
        t = self.total + y
        self._c = (t - self.total) - y
        self.total = t
        return self.total


def complex_fsum(values):
    """Correctly rounded sum of a sequence of complex numbers."""
    values = np.asarray(values, dtype=complex).ravel()
    return complex(math.fsum(values.real), math.fsum(values.imag))
