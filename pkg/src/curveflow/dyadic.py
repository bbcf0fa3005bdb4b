"""Dyadic partition of unity, frequency cutoffs, projections, frequency index.

The bump psi is built from the standard exp(-1/s) smooth step eta:
eta = 1 on [0,1], 0 on [2,inf), psi(t) = eta(|t|) - eta(2|t|).  Its dilates
psi_l(t) = psi(2^{-l} t) telescope to 1 for every t != 0.  psi is chosen
even, which makes several principal-value integrals vanish by parity.

Projections act in the second variable of a 2D grid function as frequency
multipliers (psi_l for the band projection, rho_l for the plateau cutoff),
applied via the FFT.  For band-limited grid data this is identical to the
spatial convolution definition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .curves import Curve
from .gridfn import GridFunction2D

__all__ = [
    "BumpFunction",
    "FrequencyCutoff",
    "make_bump",
    "make_frequency_cutoff",
    "project",
    "frequency_index",
    "max_projection_level",
]


def _glue(s: np.ndarray) -> np.ndarray:
    """exp(-1/s) for s > 0, zero otherwise (smooth at 0 from the right)."""
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(divide="ignore", over="ignore"):
        out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_step(s) -> np.ndarray:
    """eta: 1 on [0, 1], 0 on [2, inf), smooth exp(-1/s) glue in between."""
    s = np.abs(np.asarray(s, dtype=float))
    a = _glue(2.0 - s)
    b = _glue(s - 1.0)
    with np.errstate(invalid="ignore"):
        mid = a / (a + b)
    out = np.where(s <= 1.0, 1.0, np.where(s >= 2.0, 0.0, mid))
    return out


@dataclass(frozen=True)
class BumpFunction:
    """The dyadic bump psi supported on {1/2 <= |t| <= 2}, even, 0 <= psi <= 1."""

    support: tuple = (0.5, 2.0)
    even: bool = True

    def eval(self, t) -> np.ndarray:
        t = np.abs(np.asarray(t, dtype=float))
        return smooth_step(t) - smooth_step(2.0 * t)

    def __call__(self, t) -> np.ndarray:
        return self.eval(t)

    def dilated(self, l: int, t) -> np.ndarray:
        """psi_l(t) = psi(2^{-l} t)."""
        return self.eval(np.asarray(t, dtype=float) * 2.0 ** (-l))


@dataclass(frozen=True)
class FrequencyCutoff:
    """rho supported on {1/4 <= |xi| <= 4}, equal to 1 on {1/2 <= |xi| <= 2}."""

    support: tuple = (0.25, 4.0)
    plateau: tuple = (0.5, 2.0)

    def eval(self, xi) -> np.ndarray:
        xi = np.abs(np.asarray(xi, dtype=float))
        return smooth_step(xi / 2.0) - smooth_step(4.0 * xi)

    def __call__(self, xi) -> np.ndarray:
        return self.eval(xi)

    def dilated(self, l: int, xi) -> np.ndarray:
        return self.eval(np.asarray(xi, dtype=float) * 2.0 ** (-l))


def make_bump() -> BumpFunction:
    return BumpFunction()


def make_frequency_cutoff() -> FrequencyCutoff:
    return FrequencyCutoff()


def max_projection_level(h2: float) -> int:
    """Largest l with 2^{l+2} <= pi/h2 (multiplier support inside Nyquist)."""
    return int(np.floor(np.log2(np.pi / h2))) - 2


def project(f: GridFunction2D, l: int, which: str = "P") -> GridFunction2D:
    """Littlewood-Paley projection in the second variable.

    which = 'P' multiplies the second-variable spectrum by psi_l, 'PP' by
    rho_l (the plateau cutoff).  Frequencies are angular.
    """
    if which not in ("P", "PP"):
        raise ValueError("which must be 'P' (band) or 'PP' (plateau cutoff)")
    l_max = max_projection_level(f.h2)
    if l > l_max:
        raise ValueError(
            f"projection level {l} not resolvable: need 2^(l+2) <= pi/h2, so l <= {l_max}"
        )
    omega = 2.0 * np.pi * np.fft.fftfreq(f.n2, d=f.h2)
    if which == "P":
        mult = make_bump().dilated(l, omega)
    else:
        mult = make_frequency_cutoff().dilated(l, omega)
    spec = np.fft.fft(f.values, axis=1)
    out = np.fft.ifft(spec * mult[None, :], axis=1)
    return f.with_values(out)


NO_HIGH_PART = None  # sentinel returned for u = 0: the decomposition is all-low


def frequency_index(u_abs: float, curve: Curve, l: int = 0) -> Optional[int]:
    """Largest integer n with gamma(2^n) <= 1 / (2^l * u_abs).

    Returns the no-high-part sentinel (None) when u_abs == 0.  The returned
    n satisfies the sandwich 1/gamma(2^{n+1}) <= 2^l u_abs <= 1/gamma(2^n).
    """
    if u_abs < 0:
        raise ValueError("frequency_index expects |u|; got a negative value")
    if u_abs == 0:
        return NO_HIGH_PART
    target = 1.0 / (2.0 ** l * u_abs)

    def g(n: int) -> float:
        return float(curve.deriv(2.0 ** n, 0, check=False))

    # exponential bracketing on the integer exponent
    if g(0) <= target:
        lo, hi, step = 0, 1, 1
        while g(hi) <= target:
            lo = hi
            step *= 2
            hi += step
    else:
        hi, lo, step = 0, -1, 1
        while g(lo) > target:
            hi = lo
            step *= 2
            lo -= step
    # invariant: g(lo) <= target < g(hi); binary search for the largest such lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if g(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo
