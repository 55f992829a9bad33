"""Shared builders for the test suite.

Random inputs are always drawn from explicitly seeded generators so
every expected value frozen in the tests is reproducible bit for bit.
"""

import numpy as np

from modlab.fields import ComplexField, fourier_forward, fourier_inverse, lp_norm
from modlab.gabor import gauss_atom


def band_limited_field(grid, rng, cap):
    """Unit-norm random field with spectrum confined to |xi_i| <= cap."""
    vals = rng.normal(size=grid.samples) + 1j * rng.normal(size=grid.samples)
    spec = fourier_forward(ComplexField(grid=grid, values=vals))
    keep = np.ones(grid.samples, dtype=np.float64)
    for i in range(grid.dim):
        inside = (np.abs(grid.xi_axis(i)) <= cap + 1e-12).astype(np.float64)
        keep = keep * grid.broadcast_axis(inside, i)
    f = fourier_inverse(grid, spec * keep)
    return f.map(f.values / lp_norm(f, 2))


def atom_superposition(grid, rng, n_atoms, k_cap, l_cap):
    """Random Gauss-atom superposition on integer nodes inside the caps.

    Returns the field together with the (amplitude, k, l) list that
    produced it.
    """
    vals = np.zeros(grid.samples, dtype=np.complex128)
    pairs = []
    for _ in range(n_atoms):
        amp = complex(rng.normal(), rng.normal())
        k = tuple(int(rng.integers(-k_cap, k_cap + 1)) for _ in range(grid.dim))
        l = tuple(int(rng.integers(-l_cap, l_cap + 1)) for _ in range(grid.dim))
        vals = vals + amp * gauss_atom(grid, k, l).values
        pairs.append((amp, k, l))
    return ComplexField(grid=grid, values=vals), pairs


def rel_l2(a, b):
    """Relative L2 distance between two fields on one grid."""
    return lp_norm(a.map(a.values - b.values), 2) / lp_norm(b, 2)
