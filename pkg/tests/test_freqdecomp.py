"""Frequency partition, box operators, and modulation norms.

The plane-wave cases have exact values: a lattice tone meets exactly
one window at height one, so every norm reduces to a bracket weight
times an Lp constant.
"""

import numpy as np
import pytest

from conftest import band_limited_field, rel_l2
from modlab.fields import ComplexField, fourier_forward, lp_norm, make_grid
from modlab.freqdecomp import (
    NormSpec,
    box_op,
    bracket,
    build_partition,
    conj_box_symmetry_check,
    direction_transfer_check,
    gauss_window_field,
    modulation_norm,
    mollifier,
    partition_unity_deviation,
    plateau_bump,
    product_support_check,
    stft_modulation_norm,
    unit_window,
)


def test_window_profiles():
    y = np.linspace(-2.0, 2.0, 401)
    pb = plateau_bump(y)
    assert np.all(pb[np.abs(y) <= 0.5] == 1.0)
    assert np.all(pb[np.abs(y) >= 1.0] == 0.0)
    assert np.all((pb >= 0.0) & (pb <= 1.0))
    assert np.all(mollifier(y) >= 0.0)
    assert np.all(unit_window(y)[np.abs(y) >= 1.0] == 0.0)


def test_bracket_values():
    assert bracket(0) == 1.0
    assert bracket(3) == pytest.approx(np.sqrt(10.0), rel=1e-15)
    assert bracket((3, 4)) == pytest.approx(np.sqrt(26.0), rel=1e-15)


def test_partition_needs_fine_spacing():
    with pytest.raises(ValueError, match="spacing"):
        build_partition(make_grid(1, np.pi, 64))


@pytest.mark.parametrize(
    "dim,samples", [(1, 128), (2, 64)], ids=["1d", "2d"]
)
def test_partition_unity(dim, samples):
    part = build_partition(make_grid(dim, 8 * np.pi, samples))
    assert partition_unity_deviation(part) < 1e-12


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_box_reconstruction(seed):
    # band-limited data are reproduced by summing every covered box
    g = make_grid(2, 8 * np.pi, 64)
    part = build_partition(g)
    cap = min(part.kmax(i) for i in range(2))
    f = band_limited_field(g, np.random.default_rng([10, seed]), cap)
    acc = np.zeros(g.samples, dtype=np.complex128)
    for k in part.lattice():
        acc += box_op(part, f, k).values
    assert rel_l2(f.map(acc), f) < 1e-10


def test_box_spectrum_support():
    # sigma_k lives in the unit cube around k, so box_k output has no
    # spectral mass beyond |xi_i - k_i| = 1
    g = make_grid(2, 8 * np.pi, 64)
    part = build_partition(g)
    f = band_limited_field(g, np.random.default_rng(6), 2)
    loc = box_op(part, f, (1, 0))
    spec = np.abs(fourier_forward(loc))
    xi1 = g.xi_axis(0)[:, None]
    xi2 = g.xi_axis(1)[None, :]
    outside = (np.abs(xi1 - 1.0) > 1.0 + 1e-9) | (np.abs(xi2) > 1.0 + 1e-9)
    assert np.max(spec[outside]) < 1e-12 * np.max(spec)


def test_conjugate_box_symmetry():
    g = make_grid(2, 8 * np.pi, 64)
    part = build_partition(g)
    rng = np.random.default_rng(8)
    f = band_limited_field(g, rng, 2)
    f = f.map(f.values.real.astype(np.complex128))
    holds, dev = conj_box_symmetry_check(part, f, (1, 1))
    assert holds
    assert dev < 1e-12


def test_product_support():
    g = make_grid(2, 8 * np.pi, 64)
    part = build_partition(g)
    u1 = band_limited_field(g, np.random.default_rng(31), 2)
    u2 = band_limited_field(g, np.random.default_rng(32), 2)
    # |(0,0) - (4,0)| = 4 > r + 1 = 3: separated, product annihilated
    ok, detail = product_support_check(part, (0, 0), [(2, 0), (2, 0)], [u1, u2])
    assert ok and detail["separated"]
    assert detail["norm"] < 1e-10 * detail["scale"]
    # |(2,0) - (2,0)| = 0: vacuous
    ok2, detail2 = product_support_check(part, (2, 0), [(1, 0), (1, 0)], [u1, u2])
    assert ok2 and not detail2["separated"]
    with pytest.raises(ValueError, match="one box index per factor"):
        product_support_check(part, (0, 0), [(2, 0)], [u1, u2])


def test_direction_transfer():
    # a box at k = (20, 0) carries x2 frequencies of size at most 1,
    # so the transverse derivative is small next to the main one
    g = make_grid(2, (8 * np.pi, 8 * np.pi), (352, 64))
    part = build_partition(g)
    f = band_limited_field(g, np.random.default_rng(21), 21)
    ratio = direction_transfer_check(part, f, (20, 0))
    assert ratio <= (0 + 1) / (20 - 1)
    with pytest.raises(ValueError, match="requires"):
        direction_transfer_check(part, f, (8, 0))


def _tone_128():
    g = make_grid(1, 8 * np.pi, 128)
    return g, ComplexField(
        grid=g, values=np.exp(1j * 3 * g.x_axis(0)).astype(np.complex128)
    )


def test_modulation_norm_plane_wave():
    # e^{i 3 x} meets only the window at k = 3, at height one, so
    # M^1_{2,1} = <3> * ||e^{i 3 x}||_2 = sqrt(10) * sqrt(16 pi)
    g, tone = _tone_128()
    want = np.sqrt(10.0) * np.sqrt(16 * np.pi)
    got = modulation_norm(tone, NormSpec(s=1.0, p=2.0, q=1.0))
    assert got == pytest.approx(want, rel=1e-12)


def test_modulation_norm_exponent_paths():
    g, tone = _tone_128()
    want = np.sqrt(10.0)
    got_inf_p = modulation_norm(tone, NormSpec(s=1.0, p=np.inf, q=1.0))
    assert got_inf_p == pytest.approx(want, rel=1e-10)
    got_inf_q = modulation_norm(tone, NormSpec(s=1.0, p=np.inf, q=np.inf))
    assert got_inf_q == pytest.approx(want, rel=1e-10)


def test_norm_spec_validation():
    with pytest.raises(ValueError, match=">= 1"):
        NormSpec(s=0.0, p=0.5, q=1.0)
    with pytest.raises(ValueError, match=">= 1"):
        NormSpec(s=0.0, p=2.0, q=0.0)


def test_stft_norm_scaling():
    # [DERIVED 2026-08-18] frozen from this exact draw; the short-time
    # transform norm is homogeneous of degree one
    g, tone = _tone_128()
    ns = NormSpec(s=1.0, p=2.0, q=1.0)
    got = stft_modulation_norm(tone, ns)
    assert got == pytest.approx(106.52152914174683, rel=1e-9)
    double = stft_modulation_norm(tone.map(2.0 * tone.values), ns)
    assert double == pytest.approx(2.0 * got, rel=1e-12)


def test_gauss_window_normalized():
    g = make_grid(1, 8 * np.pi, 128)
    w = gauss_window_field(g)
    assert lp_norm(w, 2) == pytest.approx(1.0, rel=1e-12)
