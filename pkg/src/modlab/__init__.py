"""modlab: a numerical laboratory for modulation-space analysis.

Frequency-uniform decompositions, Gabor frames, free Schrodinger
propagation with mixed-signature Laplacians, anisotropic space-time
seminorms, dispersive-estimate sweeps, a split-step solver, and
reference blow-up / norm-inflation scenarios, all on periodic grids.
"""

__version__ = "0.1.0"

from .fields import (  # noqa: F401
    ComplexField,
    Grid,
    Signature,
    SpaceTimeField,
    anisotropic_norm,
    elliptic,
    fourier_forward,
    fourier_inverse,
    fractional_derivative,
    hyperbolic,
    lp_norm,
    make_grid,
)
