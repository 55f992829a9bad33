"""Periodic grids, spectral transforms, and space-time norms.

Everything downstream works on a rectangular box [-L_1, L_1) x ... x
[-L_n, L_n) with an even number of samples per axis.  The Fourier
convention is

    f_hat(xi) = integral f(x) exp(-i x . xi) dx,

realized as a dx-scaled centered FFT, so the frequency nodes on axis i
are (pi / L_i) * {-N_i/2, ..., N_i/2 - 1} and Plancherel reads
||f_hat||_2^2 = (2 pi)^n ||f||_2^2 exactly on the grid.

Space integrals are full-node Riemann sums (the grid is periodic, so
left endpoints are all nodes); time integrals over a slice sequence
t_0 < ... < t_J are left-endpoint sums with weight dt, which makes a
constant integrate to exactly t_J - t_0.  L^inf norms are node maxima
over every slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "Signature",
    "elliptic",
    "hyperbolic",
    "ComplexField",
    "SpaceTimeField",
    "make_grid",
    "fourier_forward",
    "fourier_inverse",
    "fractional_derivative",
    "spectral_derivative",
    "lp_norm",
    "inner",
    "anisotropic_norm",
    "time_outer_norm",
    "spacetime_lp_norm",
    "pad_spectrum",
    "truncate_spectrum",
    "resample",
    "dealiased_apply",
    "stable_sum",
]


def stable_sum(values):
    """Compensated sum of an iterable of floats in the given order."""
    return math.fsum(values)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on a centered box.

    Attributes
    ----------
    dim : int
        Number of space dimensions.
    half_extent : tuple of float
        L_i per axis; the box is [-L_i, L_i).
    samples : tuple of int
        Even sample count N_i per axis.
    """

    dim: int
    half_extent: tuple
    samples: tuple

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("grid dimension must be >= 1")
        if len(self.half_extent) != self.dim or len(self.samples) != self.dim:
            raise ValueError("per-axis parameters must match the grid dimension")
        for L in self.half_extent:
            if not (L > 0):
                raise ValueError("half extent must be positive")
        for N in self.samples:
            if N % 2 != 0:
                raise ValueError("sample counts must be even")
            if N < 16:
                raise ValueError("sample counts must be >= 16")

    @property
    def dx(self):
        return tuple(2.0 * L / N for L, N in zip(self.half_extent, self.samples))

    @property
    def dxi(self):
        return tuple(np.pi / L for L in self.half_extent)

    @property
    def cell_volume(self):
        vol = 1.0
        for h in self.dx:
            vol *= h
        return vol

    def x_axis(self, axis):
        """Sample positions along one axis."""
        N = self.samples[axis]
        h = self.dx[axis]
        return (np.arange(N) - N // 2) * h

    def xi_axis(self, axis):
        """Frequency nodes along one axis, ascending."""
        N = self.samples[axis]
        return (np.arange(N) - N // 2) * self.dxi[axis]

    def xi_max(self, axis):
        """Largest |xi| represented on an axis."""
        return (self.samples[axis] // 2) * self.dxi[axis]

    def broadcast_axis(self, values, axis):
        """Reshape a per-axis 1D array for broadcasting over the grid."""
        shape = [1] * self.dim
        shape[axis] = len(values)
        return values.reshape(shape)

    def key(self):
        return (self.dim, self.half_extent, self.samples)


def make_grid(dim, half_extent, samples):
    """Build a Grid; scalars are broadcast to every axis.

    >>> g = make_grid(1, 16 * np.pi, 256)
    >>> g.dx[0] == np.pi / 8 and g.dxi[0] == 1 / 16
    True
    """
    if np.isscalar(half_extent):
        half_extent = (float(half_extent),) * dim
    else:
        half_extent = tuple(float(L) for L in half_extent)
    if np.isscalar(samples):
        samples = (int(samples),) * dim
    else:
        samples = tuple(int(N) for N in samples)
    return Grid(dim=dim, half_extent=half_extent, samples=samples)


@dataclass(frozen=True, eq=False)
class Signature:
    """Sequence of +-1 signs defining |xi|^2_pm = sum eps_j xi_j^2."""

    eps: tuple

    def __post_init__(self):
        if len(self.eps) < 1 or any(e not in (-1, 1) for e in self.eps):
            raise ValueError("signature entries must be +1 or -1")

    @property
    def dim(self):
        return len(self.eps)

    def symbol(self, grid):
        """Samples of sum_j eps_j xi_j^2 on the grid's frequency nodes."""
        if grid.dim != self.dim:
            raise ValueError("signature dimension does not match grid")
        acc = np.zeros(grid.samples, dtype=np.float64)
        for j in range(grid.dim):
            acc = acc + self.eps[j] * grid.broadcast_axis(grid.xi_axis(j) ** 2, j)
        return acc

    def of_vector(self, k):
        return sum(e * float(c) ** 2 for e, c in zip(self.eps, k))


def elliptic(dim):
    return Signature(eps=(1,) * dim)


def hyperbolic(dim):
    """Signature (+1, -1, ..., -1)."""
    return Signature(eps=(1,) + (-1,) * (dim - 1))


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex samples of a function on a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if tuple(self.values.shape) != self.grid.samples:
            raise ValueError("field shape does not match grid")
        if self.values.dtype != np.complex128:
            object.__setattr__(self, "values", self.values.astype(np.complex128))

    def map(self, values):
        return ComplexField(grid=self.grid, values=values)


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Slices of a function of (t, x): values[j] samples u(t_j, .).

    Slice times must be strictly increasing and uniformly spaced.
    """

    grid: Grid
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != self.grid.dim + 1:
            raise ValueError("space-time values must stack slices on axis 0")
        if tuple(self.values.shape[1:]) != self.grid.samples:
            raise ValueError("slice shape does not match grid")
        if len(self.times) != self.values.shape[0]:
            raise ValueError("time axis length mismatch")
        if len(self.times) < 2:
            raise ValueError("need at least two time slices")
        steps = np.diff(self.times)
        if np.any(steps <= 0):
            raise ValueError("slice times must be strictly increasing")
        if np.max(steps) - np.min(steps) > 1e-9 * np.max(steps):
            raise ValueError("slice times must be uniformly spaced")
        if self.values.dtype != np.complex128:
            object.__setattr__(self, "values", self.values.astype(np.complex128))

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    @property
    def span(self):
        return float(self.times[-1] - self.times[0])

    def slice(self, j):
        return ComplexField(grid=self.grid, values=self.values[j])

    def window(self, j):
        """Restriction to the first j+1 slices."""
        if j < 1:
            raise ValueError("a window needs at least two slices")
        return SpaceTimeField(
            grid=self.grid, times=self.times[: j + 1], values=self.values[: j + 1]
        )


# ---------------------------------------------------------------------------
# transforms


def fourier_forward(f):
    """Approximate f_hat(xi) = integral f exp(-i x xi) dx on the xi nodes."""
    g = f.grid
    spec = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(f.values)))
    return spec * g.cell_volume


def fourier_inverse(grid, spec):
    """Exact inverse of :func:`fourier_forward` on the same grid."""
    if tuple(spec.shape) != grid.samples:
        raise ValueError("spectrum shape does not match grid")
    vals = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(spec)))
    return ComplexField(grid=grid, values=vals / grid.cell_volume)


def fractional_derivative(f, axis, s):
    """|D_{x_axis}|^s via the Fourier multiplier |xi_axis|^s.

    s = 0 reproduces the input up to transform round-off; s < 0 is
    rejected (the symbol is singular at xi = 0).
    """
    if s < 0:
        raise ValueError("fractional order must be >= 0")
    g = f.grid
    if not (0 <= axis < g.dim):
        raise ValueError("axis out of range")
    spec = fourier_forward(f)
    if s > 0:
        mult = np.abs(g.xi_axis(axis)) ** s
        spec = spec * g.broadcast_axis(mult, axis)
    return fourier_inverse(g, spec)


def spectral_derivative(f, axis):
    """d/dx_axis via the i*xi multiplier."""
    g = f.grid
    if not (0 <= axis < g.dim):
        raise ValueError("axis out of range")
    spec = fourier_forward(f) * g.broadcast_axis(1j * g.xi_axis(axis), axis)
    return fourier_inverse(g, spec)


# ---------------------------------------------------------------------------
# norms


def _check_p(p):
    if p != np.inf and p < 1:
        raise ValueError("Lebesgue exponents must be >= 1 or inf")


def lp_norm(f, p):
    """L^p norm of a spatial field (node quadrature)."""
    _check_p(p)
    a = np.abs(f.values)
    if p == np.inf:
        return float(a.max())
    return float((np.sum(a**p) * f.grid.cell_volume) ** (1.0 / p))


def inner(f, g):
    """L^2 pairing <f, g> = integral f conj(g)."""
    return complex(np.sum(f.values * np.conj(g.values)) * f.grid.cell_volume)


def anisotropic_norm(u, axis, p_outer, p_inner):
    """|| ||u||_{L^{p_inner} over (other space axes, t)} ||_{L^{p_outer}_{x_axis}}.

    Time integration is left-endpoint (final slice unweighted); inf
    exponents are node maxima over every slice.

    Parameters
    ----------
    u : SpaceTimeField
    axis : int
        Outer space axis, 0-based.
    p_outer, p_inner : float or np.inf
    """
    _check_p(p_outer)
    _check_p(p_inner)
    g = u.grid
    if not (0 <= axis < g.dim):
        raise ValueError("axis out of range")
    a = np.abs(u.values)
    inner_axes = tuple(j + 1 for j in range(g.dim) if j != axis) + (0,)
    if p_inner == np.inf:
        prof = a.max(axis=inner_axes)
    else:
        weight = u.dt
        for j in range(g.dim):
            if j != axis:
                weight *= g.dx[j]
        prof = (np.sum(a[:-1] ** p_inner, axis=inner_axes) * weight) ** (1.0 / p_inner)
    if p_outer == np.inf:
        return float(prof.max())
    return float((np.sum(prof**p_outer) * g.dx[axis]) ** (1.0 / p_outer))


def time_outer_norm(u, q_time, p_space):
    """|| ||u(t)||_{L^{p_space}_x} ||_{L^{q_time}_t} on the slice window."""
    _check_p(q_time)
    _check_p(p_space)
    g = u.grid
    a = np.abs(u.values)
    space_axes = tuple(range(1, g.dim + 1))
    if p_space == np.inf:
        prof = a.max(axis=space_axes)
    else:
        prof = (np.sum(a**p_space, axis=space_axes) * g.cell_volume) ** (1.0 / p_space)
    if q_time == np.inf:
        return float(prof.max())
    return float((np.sum(prof[:-1] ** q_time) * u.dt) ** (1.0 / q_time))


def spacetime_lp_norm(u, p):
    """Unmixed L^p norm over space and the time window."""
    _check_p(p)
    a = np.abs(u.values)
    if p == np.inf:
        return float(a.max())
    return float((np.sum(a[:-1] ** p) * u.grid.cell_volume * u.dt) ** (1.0 / p))


# ---------------------------------------------------------------------------
# dealiasing

def _pad_slices(coarse, fine):
    out = []
    for Nc, Nf in zip(coarse, fine):
        lo = (Nf - Nc) // 2
        out.append(slice(lo, lo + Nc))
    return tuple(out)


def pad_spectrum(grid, spec, fine_samples):
    """Embed a centered spectrum into a finer grid with the same extents."""
    out = np.zeros(fine_samples, dtype=np.complex128)
    out[_pad_slices(grid.samples, fine_samples)] = spec
    return out


def truncate_spectrum(spec, coarse_samples):
    """Centered truncation, the adjoint of :func:`pad_spectrum`."""
    return spec[_pad_slices(coarse_samples, spec.shape)].copy()


def _fine_grid(grid, pad):
    fine = []
    for N in grid.samples:
        M = int(math.ceil(pad * N / 2.0)) * 2
        fine.append(max(M, N))
    return make_grid(grid.dim, grid.half_extent, tuple(fine))


def resample(f, samples):
    """Band-limited resampling of a field to a new sample count."""
    g = f.grid
    spec = fourier_forward(f)
    tgt = make_grid(g.dim, g.half_extent, samples)
    if all(M >= N for M, N in zip(tgt.samples, g.samples)):
        spec2 = pad_spectrum(g, spec, tgt.samples)
    elif all(M <= N for M, N in zip(tgt.samples, g.samples)):
        spec2 = truncate_spectrum(spec, tgt.samples)
    else:
        raise ValueError("resampling must refine or coarsen every axis")
    return fourier_inverse(tgt, spec2)


def dealiased_apply(func, *fields, degree):
    """Evaluate a pointwise product-type nonlinearity without aliasing.

    The factors are upsampled to a grid padded by (degree + 1) / 2,
    func is applied to the fine samples, and the result is truncated
    back to the original frequency band.

    Parameters
    ----------
    func : callable
        Maps the tuple of fine sample arrays to one array.
    fields : ComplexField
        All on a common grid.
    degree : int
        Total polynomial degree of func in the inputs; sets the
        padding factor.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid.key() != g.key():
            raise ValueError("factors must share one grid")
    fine = _fine_grid(g, (degree + 1) / 2.0)
    fine_vals = [
        fourier_inverse(fine, pad_spectrum(g, fourier_forward(f), fine.samples)).values
        for f in fields
    ]
    out = func(*fine_vals)
    spec = fourier_forward(ComplexField(grid=fine, values=out))
    return fourier_inverse(g, truncate_spectrum(spec, g.samples))
