"""Free Schrodinger-type group for arbitrary signature, two ways.

The group S(t) multiplies the spectrum by a unimodular phase built from
the signed symbol sum_j eps_j xi_j^2, or transports Gabor atoms by a
closed form; the two realizations agree on the frame span and that
agreement fixes the sign convention used here, exp(+i t symbol).
`set_sign_flip(True)` switches both realizations to the opposite
convention at once.

The Duhamel map A f(t) = int_0^t S(t - tau) f(tau) dtau is computed
spectrally, either by trapezoidal quadrature on a space-time field or
in closed form for a time-harmonic source.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .fields import (
    ComplexField,
    SpaceTimeField,
    fourier_forward,
    fourier_inverse,
)
from .gabor import _BOUNDARY_MARGIN

__all__ = [
    "set_sign_flip",
    "sign_flipped",
    "propagate_spectral",
    "atom_evolution",
    "propagate_gabor",
    "linear_evolution",
    "duhamel",
    "duhamel_modulated",
]

_SIGN_FLIP = False


def set_sign_flip(flag):
    """Flip the time direction of both propagator realizations."""
    global _SIGN_FLIP
    _SIGN_FLIP = bool(flag)


def sign_flipped():
    return _SIGN_FLIP


def _effective_time(t):
    return -t if _SIGN_FLIP else t


def _phase(grid, eps, t):
    return np.exp(1j * _effective_time(t) * eps.symbol(grid))


def propagate_spectral(f, t, eps):
    """S(t) f through the spectral multiplier exp(i t sum eps_j xi_j^2)."""
    spec = fourier_forward(f) * _phase(f.grid, eps, float(t))
    return fourier_inverse(f.grid, spec)


def atom_evolution(grid, k, l, t, eps):
    """Closed-form evolution of the atom e^{ik.x} e^{-|x-l|^2/2}.

    S(t) moves the center to l_j - 2 t eps_j k_j and widens the envelope
    through the complex factor (1 - 2 i eps_j t)^{-1/2} (principal
    branch; the argument keeps positive real part for real t).  The
    transported center must stay 6 units inside the box, else periodic
    wrap-around would corrupt the comparison with the spectral form.
    """
    t = _effective_time(float(t))
    k = tuple(float(c) for c in k)
    l = tuple(float(c) for c in l)
    phase0 = sum(e * kj**2 for e, kj in zip(eps.eps, k))
    vals = np.full(grid.samples, np.exp(1j * t * phase0), dtype=np.complex128)
    for j in range(grid.dim):
        ej = eps.eps[j]
        center = l[j] - 2.0 * t * ej * k[j]
        if abs(center) > grid.half_extent[j] - _BOUNDARY_MARGIN:
            raise ValueError("transported atom leaves the safe interior")
        denom = 1.0 - 2.0j * ej * t
        x = grid.x_axis(j)
        prof = np.exp(1j * k[j] * x - (x - center) ** 2 / (2.0 * denom)) / np.sqrt(denom)
        vals = vals * grid.broadcast_axis(prof, j)
    return ComplexField(grid=grid, values=vals)


def propagate_gabor(coeffs, t, eps):
    """sum_{k,l} c_{k,l} atom_evolution(k, l, t); deterministic order."""
    grid = coeffs.grid
    out = np.zeros(grid.samples, dtype=np.complex128)
    for (k, l), c in coeffs.items():
        out += c * atom_evolution(grid, k, l, t, eps).values
    return ComplexField(grid=grid, values=out)


def linear_evolution(f, times, eps):
    """Trace of S(t) f on the given time slices."""
    grid = f.grid
    times = np.asarray(times, dtype=np.float64)
    spec = fourier_forward(f)
    sym = eps.symbol(grid)
    vals = np.empty((len(times),) + grid.samples, dtype=np.complex128)
    for j, t in enumerate(times):
        vals[j] = fourier_inverse(
            grid, spec * np.exp(1j * _effective_time(float(t)) * sym)
        ).values
    return SpaceTimeField(grid=grid, times=times, values=vals)


def duhamel(forcing, eps):
    """A F(t) = int S(t - tau) F(tau) dtau by trapezoid in tau.

    Written as S(t) applied to the running integral of S(-tau) F(tau),
    which costs two transforms per slice.  The lower limit is the
    field's first time slice.  Second order in the slice spacing.
    """
    if len(forcing.times) < 3:
        raise ValueError("duhamel needs at least 3 time slices")
    grid = forcing.grid
    sym = eps.symbol(grid)
    times = forcing.times
    spec = np.empty_like(forcing.values)
    for j in range(len(times)):
        tj = _effective_time(float(times[j]))
        spec[j] = fourier_forward(forcing.slice(j)) * np.exp(-1j * tj * sym)
    acc = cumulative_trapezoid(spec, x=times, axis=0, initial=0.0)
    out = np.empty_like(forcing.values)
    for j in range(len(times)):
        tj = _effective_time(float(times[j]))
        out[j] = fourier_inverse(grid, acc[j] * np.exp(1j * tj * sym)).values
    return SpaceTimeField(grid=grid, times=times, values=out)


def duhamel_modulated(f, omega0, times, eps):
    """A applied to the time-harmonic source e^{i omega0 tau} f(x).

    The tau integral is exact: the spectrum picks up
    t e^{i t (omega0 + Delta)/ ...} -- concretely
    (e^{i t Delta} - 1)/(i Delta) with Delta = omega0 - symbol, written
    through a sinc so the resonant set Delta = 0 is smooth.  Useful as
    a quadrature-free oracle: at resonance the modulus grows linearly
    in t.
    """
    grid = f.grid
    times = np.asarray(times, dtype=np.float64)
    spec = fourier_forward(f)
    sym = eps.symbol(grid)
    flip = -1.0 if _SIGN_FLIP else 1.0
    delta = float(omega0) - flip * sym
    vals = np.empty((len(times),) + grid.samples, dtype=np.complex128)
    for j, t in enumerate(times):
        t = float(t)
        window = t * np.exp(0.5j * t * delta) * np.sinc(t * delta / (2.0 * np.pi))
        vals[j] = fourier_inverse(
            grid, spec * np.exp(1j * flip * t * sym) * window
        ).values
    return SpaceTimeField(grid=grid, times=times, values=vals)
