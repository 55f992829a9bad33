"""Composite space-time seminorms and their traces.

One frozen value pins the whole chain: a free evolution of a carried
Gaussian, measured in the second-moment family on an anisotropic grid.
"""

import numpy as np
import pytest

from conftest import band_limited_field
from modlab.fields import ComplexField, SpaceTimeField, hyperbolic, make_grid
from modlab.freqdecomp import build_partition
from modlab.propagator import linear_evolution
from modlab.seminorms import (
    GENERAL_TAGS,
    TAGS_1D,
    TAGS_2D,
    SeminormId,
    composite_seminorm,
    intersection_seminorm,
    seminorm_trace,
)


def test_tag_families():
    assert set(GENERAL_TAGS) == {"sm", "max", "str"}
    assert set(TAGS_2D) == {"sm2", "max2d", "ant", "str2", "gstr"}
    assert set(TAGS_1D) == {"sm1", "max1", "ant1", "str1", "gstr1"}


def test_id_validation_and_labels():
    sid = SeminormId(tag="sm", m=2)
    assert sid.label == "sm(m=2)"
    assert SeminormId(tag="ant").label == "ant"
    with pytest.raises(ValueError):
        SeminormId(tag="nope")
    with pytest.raises(ValueError):
        SeminormId(tag="sm")  # the moment family needs m
    with pytest.raises(ValueError):
        SeminormId(tag="sm", m=1)  # m starts at 2
    with pytest.raises(ValueError):
        SeminormId(tag="ant", m=2)  # fixed ids take no parameter


def _free_evolution():
    g = make_grid(2, (8 * np.pi, 8 * np.pi), (448, 64))
    x1 = g.x_axis(0)[:, None]
    x2 = g.x_axis(1)[None, :]
    prof = np.exp(-0.5 * (x1 ** 2 + x2 ** 2)) * np.exp(1j * 25 * x1)
    f = ComplexField(grid=g, values=prof.astype(np.complex128))
    times = np.linspace(0.0, 0.5, 6)
    u = linear_evolution(f, times, hyperbolic(2))
    return u, build_partition(g)


def test_second_moment_frozen_value():
    # [DERIVED 2026-08-18] frozen from this exact configuration: a
    # unit-width Gaussian at carrier 25 e_1 evolved freely to t = 0.5
    u, part = _free_evolution()
    val = composite_seminorm(u, SeminormId(tag="sm", m=2), part)
    assert val == pytest.approx(16.268011294833293, rel=1e-9)


def test_zero_field_gives_zero():
    g = make_grid(2, 8 * np.pi, 64)
    part = build_partition(g)
    times = np.linspace(0.0, 0.5, 4)
    u = SpaceTimeField(
        grid=g, times=times, values=np.zeros((4,) + g.samples, dtype=np.complex128)
    )
    for tag in ("sm", "max", "str"):
        assert composite_seminorm(u, SeminormId(tag=tag, m=2), part) == 0.0
    for tag in TAGS_2D:
        assert composite_seminorm(u, SeminormId(tag=tag), part) == 0.0


def test_dimension_gating():
    g1 = make_grid(1, 8 * np.pi, 128)
    part1 = build_partition(g1)
    f = band_limited_field(g1, np.random.default_rng(3), 3)
    times = np.linspace(0.0, 0.5, 4)
    u = linear_evolution(f, times, hyperbolic(1))
    # the planar family is rejected on a line grid and vice versa
    with pytest.raises(ValueError):
        composite_seminorm(u, SeminormId(tag="ant"), part1)
    val = composite_seminorm(u, SeminormId(tag="ant1"), part1)
    assert np.isfinite(val) and val > 0


def test_trace_rows_and_monotonicity():
    g = make_grid(2, 8 * np.pi, 64)
    part = build_partition(g)
    f = band_limited_field(g, np.random.default_rng(12), 2)
    times = np.linspace(0.0, 0.5, 6)
    u = linear_evolution(f, times, hyperbolic(2))
    sids = [SeminormId(tag="sm", m=2), SeminormId(tag="str", m=2)]
    rows = seminorm_trace(u, sids, part)
    labels = [sid.label for sid in sids]
    assert len(rows) == 5  # windows [t0, t_j] for j = 1..5
    for row in rows:
        assert set(row) == {"t"} | set(labels)
    for lab in labels:
        vals = [row[lab] for row in rows]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_intersection_is_max():
    u, part = _free_evolution()
    sids = [SeminormId(tag="sm", m=2), SeminormId(tag="sm", m=3)]
    parts = [composite_seminorm(u, sid, part) for sid in sids]
    assert intersection_seminorm(u, sids, part) == pytest.approx(
        max(parts), rel=1e-12
    )
