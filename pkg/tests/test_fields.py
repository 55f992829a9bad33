"""Grid geometry, transforms, and norm layers.

Expected values are closed forms: plane waves under spectral
multipliers, Gaussians under Lp norms, constants under the mixed
space-time norms.
"""

import math

import numpy as np
import pytest

from conftest import band_limited_field, rel_l2
from modlab.fields import (
    ComplexField,
    Grid,
    SpaceTimeField,
    anisotropic_norm,
    dealiased_apply,
    fourier_forward,
    fourier_inverse,
    fractional_derivative,
    inner,
    lp_norm,
    make_grid,
    resample,
    spacetime_lp_norm,
    spectral_derivative,
    stable_sum,
    time_outer_norm,
)


def test_grid_axes():
    g = make_grid(1, 8 * np.pi, 64)
    assert g.dx[0] == pytest.approx(np.pi / 4, rel=1e-15)
    assert g.dxi[0] == pytest.approx(1 / 8, rel=1e-15)
    assert g.x_axis(0)[0] == pytest.approx(-8 * np.pi, rel=1e-15)
    assert g.xi_max(0) == pytest.approx(4.0, rel=1e-15)
    assert g.cell_volume == pytest.approx(np.pi / 4, rel=1e-15)


def test_grid_validation():
    with pytest.raises(ValueError, match="even"):
        make_grid(1, 8 * np.pi, 63)
    with pytest.raises(ValueError, match=">= 16"):
        make_grid(1, 8 * np.pi, 8)
    with pytest.raises(ValueError, match="dimension"):
        Grid(dim=2, half_extent=(np.pi,), samples=(32, 32))
    with pytest.raises(ValueError, match="positive"):
        make_grid(1, 0.0, 32)


def test_field_shape_guard():
    g = make_grid(2, np.pi, 16)
    with pytest.raises(ValueError, match="shape"):
        ComplexField(grid=g, values=np.zeros((16, 8), dtype=np.complex128))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fourier_roundtrip(seed):
    g = make_grid(2, (np.pi, 2 * np.pi), (32, 16))
    rng = np.random.default_rng(seed)
    f = ComplexField(
        grid=g, values=rng.normal(size=g.samples) + 1j * rng.normal(size=g.samples)
    )
    back = fourier_inverse(g, fourier_forward(f))
    assert rel_l2(back, f) < 1e-13


def test_tone_spectrum_location():
    # e^{i 3 x} on half extent 8 pi: dxi = 1/8, so the tone sits 24
    # steps above the center bin N // 2
    g = make_grid(1, 8 * np.pi, 64)
    tone = ComplexField(
        grid=g, values=np.exp(1j * 3 * g.x_axis(0)).astype(np.complex128)
    )
    spec = np.abs(fourier_forward(tone))
    hot = int(np.argmax(spec))
    assert hot == 64 // 2 + 24
    rest = np.delete(spec, hot)
    assert np.max(rest) < 1e-10 * spec[hot]


def test_fractional_derivative_tone():
    # |xi|^s acts on e^{i 3 x} as the scalar 3^s
    g = make_grid(1, 8 * np.pi, 320)
    tone = ComplexField(
        grid=g, values=np.exp(1j * 3 * g.x_axis(0)).astype(np.complex128)
    )
    out = fractional_derivative(tone, 0, 0.5)
    assert np.max(np.abs(out.values - 3 ** 0.5 * tone.values)) < 1e-12
    ident = fractional_derivative(tone, 0, 0.0)
    assert np.max(np.abs(ident.values - tone.values)) < 1e-13
    with pytest.raises(ValueError):
        fractional_derivative(tone, 0, -0.5)


def test_spectral_derivative_matches_finite_differences():
    # smooth band-limited field: the 4th order central stencil agrees
    # with the exact spectral derivative to its own truncation error
    g = make_grid(1, 8 * np.pi, 4096)
    f = band_limited_field(g, np.random.default_rng(4), 1.5)
    exact = spectral_derivative(f, 0)
    v = f.values
    h = g.dx[0]
    fd = (
        -np.roll(v, -2) + 8 * np.roll(v, -1) - 8 * np.roll(v, 1) + np.roll(v, 2)
    ) / (12 * h)
    err = lp_norm(f.map(fd - exact.values), 2) / lp_norm(exact, 2)
    assert err < 1e-7


def test_lp_norm_gaussian_closed_forms():
    g = make_grid(1, 8 * np.pi, 256)
    f = ComplexField(
        grid=g, values=np.exp(-0.5 * g.x_axis(0) ** 2).astype(np.complex128)
    )
    assert lp_norm(f, 2) == pytest.approx(np.pi ** 0.25, rel=1e-12)
    assert lp_norm(f, 1) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)
    assert lp_norm(f, np.inf) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        lp_norm(f, 0.5)


def test_inner_product():
    g = make_grid(1, np.pi, 32)
    rng = np.random.default_rng(5)
    f = ComplexField(
        grid=g, values=rng.normal(size=32) + 1j * rng.normal(size=32)
    )
    h = ComplexField(
        grid=g, values=rng.normal(size=32) + 1j * rng.normal(size=32)
    )
    assert inner(f, f).real == pytest.approx(lp_norm(f, 2) ** 2, rel=1e-13)
    assert abs(inner(f, f).imag) < 1e-13
    assert inner(f, h) == pytest.approx(np.conj(inner(h, f)), rel=1e-13)


def _const_spacetime():
    g = make_grid(2, (np.pi, 2 * np.pi), (16, 16))
    times = np.linspace(0.0, 1.0, 5)
    vals = np.ones((5,) + g.samples, dtype=np.complex128)
    return SpaceTimeField(grid=g, times=times, values=vals)


def test_anisotropic_norm_constant():
    # u = 1 on [-pi, pi) x [-2 pi, 2 pi) x [0, 1]: the inner L^2 over
    # (x2, t) gives sqrt(4 pi), the outer L^4 over x1 gives (2 pi)^{1/4}
    u = _const_spacetime()
    want = (2 * np.pi) ** 0.25 * (4 * np.pi) ** 0.5
    assert anisotropic_norm(u, 0, 4.0, 2.0) == pytest.approx(want, rel=1e-12)
    want_swap = (4 * np.pi) ** 0.5 * (2 * np.pi) ** 0.25
    assert anisotropic_norm(u, 1, 2.0, 4.0) == pytest.approx(want_swap, rel=1e-12)
    assert anisotropic_norm(u, 1, np.inf, np.inf) == pytest.approx(1.0, rel=1e-12)


def test_time_outer_norms_constant():
    u = _const_spacetime()
    want = (1.0 * 2 * np.pi * 4 * np.pi) ** 0.5
    assert time_outer_norm(u, 2.0, 2.0) == pytest.approx(want, rel=1e-12)
    assert spacetime_lp_norm(u, 2.0) == pytest.approx(want, rel=1e-12)
    assert spacetime_lp_norm(u, np.inf) == pytest.approx(1.0, rel=1e-12)


def test_resample_roundtrip():
    g = make_grid(1, 8 * np.pi, 256)
    f = ComplexField(
        grid=g, values=np.exp(-0.5 * g.x_axis(0) ** 2).astype(np.complex128)
    )
    up = resample(f, (512,))
    back = resample(up, (256,))
    assert np.max(np.abs(back.values - f.values)) < 1e-13


def test_dealiased_cubic_of_cosine():
    # cos^3 = (3 cos k x + cos 3 k x) / 4; with 3 k outside the band
    # only the first term survives, while the naive pointwise cube
    # aliases the high tone back into the box
    g = make_grid(1, np.pi, 64)
    k = 12
    u = ComplexField(grid=g, values=np.cos(k * g.x_axis(0)).astype(np.complex128))
    want = ComplexField(
        grid=g, values=(0.75 * np.cos(k * g.x_axis(0))).astype(np.complex128)
    )
    cube = dealiased_apply(lambda w: w ** 3, u, degree=3)
    assert rel_l2(cube, want) < 1e-13
    naive = ComplexField(grid=g, values=u.values ** 3)
    assert rel_l2(naive, want) > 0.2


def test_spacetime_field_validation():
    g = make_grid(1, np.pi, 16)
    vals = np.zeros((3, 16), dtype=np.complex128)
    with pytest.raises(ValueError, match="uniform"):
        SpaceTimeField(grid=g, times=np.array([0.0, 0.1, 0.5]), values=vals)
    with pytest.raises(ValueError, match="increasing"):
        SpaceTimeField(grid=g, times=np.array([0.0, 0.0, 0.1]), values=vals)
    u = SpaceTimeField(grid=g, times=np.array([0.0, 0.5, 1.0]), values=vals)
    assert u.dt == pytest.approx(0.5)
    assert u.span == pytest.approx(1.0)
    assert u.window(1).values.shape[0] == 2
    with pytest.raises(ValueError):
        u.window(0)


def test_stable_sum():
    vals = [1e16, 1.0, -1e16, 1.0]
    assert stable_sum(vals) == pytest.approx(math.fsum(vals), abs=0.0)
    assert stable_sum([]) == 0.0
