"""Gabor frame analysis, synthesis, and frame bounds.

Frame bound digits are frozen from the deterministic power iteration;
round trips compare synthesize(analyze(f)) against f in relative L2.
"""

import numpy as np
import pytest

from conftest import atom_superposition, rel_l2
from modlab.fields import inner, lp_norm, make_grid
from modlab.freqdecomp import NormSpec
from modlab.gabor import (
    FrameCoefficients,
    analyze,
    coefficient_norm,
    default_truncation,
    frame_bounds,
    frame_operator_apply,
    gauss_atom,
    load_coefficients,
    save_coefficients,
    synthesize,
)


def test_gauss_atom_profile():
    g = make_grid(1, 8 * np.pi, 256)
    atom = gauss_atom(g, (3,), (2,))
    x = g.x_axis(0)
    want = np.exp(1j * 3 * x - 0.5 * (x - 2.0) ** 2)
    assert np.max(np.abs(atom.values - want)) < 1e-15
    with pytest.raises(ValueError, match="boundary"):
        gauss_atom(g, (0,), (8 * np.pi - 2.0,))


def test_default_truncation():
    # N = 384 on half extent 8 pi: xi_max = 24, covered modulations
    # reach 22, and the margins take off 2 and 6 respectively
    assert default_truncation(make_grid(1, 8 * np.pi, 384)) == (20, 19)
    assert default_truncation(make_grid(2, 8 * np.pi, 160)) == (6, 19)


def test_frame_bounds_1d():
    # [DERIVED 2026-08-18] power-iteration digits on (8 pi, 384) with
    # radius (8, 8); the frame is tight to about 2e-4
    fb = frame_bounds(make_grid(1, 8 * np.pi, 384), 8, 8)
    assert fb.lower == pytest.approx(11.13560965422145, rel=1e-10)
    assert fb.upper == pytest.approx(11.137672707706926, rel=1e-10)
    assert fb.upper / fb.lower < 1.001
    assert fb.ratio == pytest.approx(fb.upper / fb.lower, rel=1e-12)


def test_frame_bounds_2d_tensor():
    # the separable window tensorizes: 2D bounds are products of 1D
    # bounds of the same radii
    g2 = make_grid(2, 8 * np.pi, 160)
    g1 = make_grid(1, 8 * np.pi, 160)
    fb2 = frame_bounds(g2, 8, 8)
    fb1 = frame_bounds(g1, 8, 8)
    assert fb2.lower == pytest.approx(fb1.lower ** 2, rel=1e-9)
    assert fb2.upper == pytest.approx(fb1.upper ** 2, rel=1e-9)


def test_roundtrip_1d():
    g = make_grid(1, 8 * np.pi, 320)
    f, _ = atom_superposition(g, np.random.default_rng(11), 4, 6, 6)
    coeffs = analyze(f, 16, 19, tol=1e-9)
    assert rel_l2(synthesize(coeffs), f) < 1e-8


def test_roundtrip_2d():
    g = make_grid(2, 8 * np.pi, 224)
    f, _ = atom_superposition(g, np.random.default_rng(3), 6, 2, 5)
    coeffs = analyze(f, 12, 19)
    assert rel_l2(synthesize(coeffs), f) < 1e-8


def test_analyze_linearity():
    g = make_grid(1, 8 * np.pi, 256)
    f, _ = atom_superposition(g, np.random.default_rng(14), 3, 3, 4)
    c1 = analyze(f, 14, 19, tol=1e-9)
    c2 = analyze(f.map((2.0 - 1.0j) * f.values), 14, 19, tol=1e-9)
    keys = set(c1.data)
    scale = max(abs(v) for v in c1.data.values())
    for key in keys & set(c2.data):
        assert abs(c2.data[key] - (2.0 - 1.0j) * c1.data[key]) < 1e-7 * scale


def test_synthesize_exact_atom_sum():
    g = make_grid(1, 8 * np.pi, 256)
    data = {((2,), (1,)): 1.5 + 0.5j, ((-1,), (-3,)): -0.25j}
    coeffs = FrameCoefficients(grid=g, k_radius=4, l_radius=6, data=data)
    direct = np.zeros(g.samples, dtype=np.complex128)
    for (k, l), c in data.items():
        direct += c * gauss_atom(g, k, l).values
    out = synthesize(coeffs)
    assert np.max(np.abs(out.values - direct)) < 1e-12


def test_frame_operator_within_bounds():
    g = make_grid(1, 8 * np.pi, 384)
    fb = frame_bounds(g, 8, 8)
    for j in range(3):
        f, _ = atom_superposition(g, np.random.default_rng([13, j]), 3, 4, 4)
        sf, warning = frame_operator_apply(f, 8, 8)
        assert not warning
        q = inner(sf, f).real / lp_norm(f, 2) ** 2
        assert fb.lower - 1e-8 <= q <= fb.upper + 1e-8


def test_coefficient_norm_formula():
    g = make_grid(1, 8 * np.pi, 256)
    data = {
        ((0,), (0,)): 3.0 + 0j,
        ((0,), (1,)): 4.0 + 0j,
        ((3,), (0,)): 2.0 + 0j,
    }
    coeffs = FrameCoefficients(grid=g, k_radius=4, l_radius=4, data=data)
    # l^2 in l then <k>^s weighted l^1 in k
    want = 1.0 * 5.0 + np.sqrt(10.0) * 2.0
    got = coefficient_norm(coeffs, NormSpec(s=1.0, p=2.0, q=1.0))
    assert got == pytest.approx(want, rel=1e-12)
    got_inf = coefficient_norm(coeffs, NormSpec(s=0.0, p=np.inf, q=np.inf))
    assert got_inf == pytest.approx(4.0, rel=1e-12)


def test_save_load_roundtrip(tmp_path):
    g = make_grid(1, 8 * np.pi, 256)
    f, _ = atom_superposition(g, np.random.default_rng(15), 3, 3, 4)
    coeffs = analyze(f, 14, 19, tol=1e-9)
    path = tmp_path / "coeffs.tsv"
    save_coefficients(coeffs, path)
    back = load_coefficients(path, g, 14, 19)
    assert set(back.data) == set(coeffs.data)
    for key, val in coeffs.data.items():
        assert back.data[key] == val  # repr round-trips floats exactly


def test_coverage_guards():
    g = make_grid(1, 8 * np.pi, 128)
    f, _ = atom_superposition(g, np.random.default_rng(16), 2, 2, 2)
    with pytest.raises(ValueError, match="band"):
        analyze(f, 40, 8)
    tone = gauss_atom(g, (5,), (0,))
    with pytest.raises(ValueError, match="coverage|band|radius"):
        analyze(tone, 1, 8)


def test_nonconvergence_raises():
    g = make_grid(1, 8 * np.pi, 128)
    f, _ = atom_superposition(g, np.random.default_rng(17), 2, 2, 2)
    with pytest.raises(RuntimeError, match="did not converge"):
        analyze(f, 4, 8, tol=1e-16, max_iter=3)
