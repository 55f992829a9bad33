"""Frequency-decomposed anisotropic space-time semi-norms.

Each semi-norm sums, over integer frequency boxes k, a bracket-weighted
mixed norm of the box-localized piece of a space-time field.  The tags
come in three families:

  general (parameter m >= 2):
    sm   sum_i over |k_i| >= max(20, |k_j|): <k_i>^(1/2+1/m) of
         L^inf_{x_i} L^2_{rest, t}
    max  sum_i over all k: L^m_{x_i} L^inf_{rest, t}
    str  <k>^(1/m) of the larger of L^inf_t L^2_x and L^{m+2}_{x,t}

  two dimensional:
    sm2    <k_i>^(3/2) on the dominant axis, threshold 20
    max2d  L^2_{x_i} L^inf over both axes
    ant    L^2_{x_i} L^4 over both axes
    str2   <k> of the larger of L^inf_t L^2_x and L^4_{x,t}
    gstr   L^3_{x,t}

  one dimensional:
    sm1    <k>^(4/3) of L^inf_x L^2_t over |k| >= 20
    max1   L^3_x L^inf_t
    ant1   L^3_x L^6_t
    str1   <k>^(5/6) of the larger of L^inf_t L^2_x and L^6_{x,t}
    gstr1  L^4_{x,t}

Intersection norms are realized as the max of their realizations, and
all time integrals run over the simulated window only.  Boxes whose
spectral content is below 1e-15 of the field's spectral peak are
skipped; for band-limited data this is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    SpaceTimeField,
    anisotropic_norm,
    fourier_forward,
    spacetime_lp_norm,
    stable_sum,
    time_outer_norm,
)
from .freqdecomp import bracket

__all__ = [
    "SeminormId",
    "GENERAL_TAGS",
    "TAGS_2D",
    "TAGS_1D",
    "composite_seminorm",
    "seminorm_trace",
    "intersection_seminorm",
]

GENERAL_TAGS = ("sm", "max", "str")
TAGS_2D = ("sm2", "max2d", "ant", "str2", "gstr")
TAGS_1D = ("sm1", "max1", "ant1", "str1", "gstr1")

_THRESHOLD = 20
_SKIP_REL = 1e-15


@dataclass(frozen=True)
class SeminormId:
    """Tag plus, for the general family, the integrability parameter m."""

    tag: str
    m: int | None = None

    def __post_init__(self):
        if self.tag in GENERAL_TAGS:
            if self.m is None or self.m < 2:
                raise ValueError(f"tag {self.tag!r} needs parameter m >= 2")
        elif self.tag in TAGS_2D or self.tag in TAGS_1D:
            if self.m is not None:
                raise ValueError(f"tag {self.tag!r} takes no parameter")
        else:
            raise ValueError(f"unknown semi-norm tag {self.tag!r}")

    @property
    def label(self):
        if self.m is not None:
            return f"{self.tag}(m={self.m})"
        return self.tag

    def dims(self):
        """Grid dimensions this id applies to."""
        if self.tag in GENERAL_TAGS:
            return (1, 2, 3)
        if self.tag in TAGS_2D:
            return (2,)
        return (1,)


def _euclid_bracket(k):
    return float(np.sqrt(1.0 + sum(float(c) ** 2 for c in k)))


def _slice_spectra(u):
    cached = getattr(u, "_spectra_cache", None)
    if cached is not None:
        return cached
    spec = np.stack([fourier_forward(u.slice(j)) for j in range(len(u.times))])
    object.__setattr__(u, "_spectra_cache", spec)
    return spec


def _box_from_spectra(u, partition, k, spec):
    from .fields import fourier_inverse

    grid = u.grid
    vals = np.empty_like(spec)
    for j in range(spec.shape[0]):
        vals[j] = fourier_inverse(grid, partition.windowed_spectrum(spec[j], k)).values
    return SpaceTimeField(grid=grid, times=u.times, values=vals)


def _term_norms(box, sid, k):
    """(weight, mixed-norm value) contributions of box k for one id."""
    tag = sid.tag
    n = box.grid.dim
    out = []
    if tag == "sm":
        m = sid.m
        for i in range(n):
            others = max(
                (abs(int(k[j])) for j in range(n) if j != i), default=0
            )
            if abs(int(k[i])) >= max(_THRESHOLD, others):
                w = bracket(k[i]) ** (0.5 + 1.0 / m)
                out.append(w * anisotropic_norm(box, i, np.inf, 2))
    elif tag == "max":
        m = sid.m
        for i in range(n):
            out.append(anisotropic_norm(box, i, m, np.inf))
    elif tag == "str":
        m = sid.m
        w = _euclid_bracket(k) ** (1.0 / m)
        v = max(time_outer_norm(box, np.inf, 2), spacetime_lp_norm(box, m + 2))
        out.append(w * v)
    elif tag == "sm2":
        k1, k2 = abs(int(k[0])), abs(int(k[1]))
        if k1 >= max(k2, _THRESHOLD):
            out.append(bracket(k[0]) ** 1.5 * anisotropic_norm(box, 0, np.inf, 2))
        if k2 >= max(k1, _THRESHOLD):
            out.append(bracket(k[1]) ** 1.5 * anisotropic_norm(box, 1, np.inf, 2))
    elif tag == "max2d":
        out.append(anisotropic_norm(box, 0, 2, np.inf))
        out.append(anisotropic_norm(box, 1, 2, np.inf))
    elif tag == "ant":
        out.append(anisotropic_norm(box, 0, 2, 4))
        out.append(anisotropic_norm(box, 1, 2, 4))
    elif tag == "str2":
        w = _euclid_bracket(k)
        out.append(
            w * max(time_outer_norm(box, np.inf, 2), spacetime_lp_norm(box, 4))
        )
    elif tag == "gstr":
        out.append(spacetime_lp_norm(box, 3))
    elif tag == "sm1":
        if abs(int(k[0])) >= _THRESHOLD:
            out.append(bracket(k[0]) ** (4.0 / 3.0) * anisotropic_norm(box, 0, np.inf, 2))
    elif tag == "max1":
        out.append(anisotropic_norm(box, 0, 3, np.inf))
    elif tag == "ant1":
        out.append(anisotropic_norm(box, 0, 3, 6))
    elif tag == "str1":
        w = _euclid_bracket(k) ** (5.0 / 6.0)
        out.append(
            w * max(time_outer_norm(box, np.inf, 2), spacetime_lp_norm(box, 6))
        )
    elif tag == "gstr1":
        out.append(spacetime_lp_norm(box, 4))
    return out


def _needs_box(sid, k):
    """Whether box k can contribute at all (admissibility pre-filter)."""
    tag = sid.tag
    if tag == "sm":
        n = len(k)
        return any(
            abs(int(k[i]))
            >= max(
                _THRESHOLD,
                max((abs(int(k[j])) for j in range(n) if j != i), default=0),
            )
            for i in range(n)
        )
    if tag == "sm2":
        k1, k2 = abs(int(k[0])), abs(int(k[1]))
        return k1 >= max(k2, _THRESHOLD) or k2 >= max(k1, _THRESHOLD)
    if tag == "sm1":
        return abs(int(k[0])) >= _THRESHOLD
    return True


def composite_seminorm(u, sid, partition):
    """The semi-norm of a space-time field, summed over occupied boxes."""
    if partition.grid is not u.grid and partition.grid.key != u.grid.key:
        raise ValueError("partition and field live on different grids")
    if u.grid.dim not in sid.dims():
        raise ValueError(f"semi-norm {sid.label} undefined in dimension {u.grid.dim}")
    spec = _slice_spectra(u)
    sabs = np.max(np.abs(spec), axis=0)
    peak = float(np.max(sabs))
    if peak == 0.0:
        return 0.0
    terms = []
    for k in partition.lattice():
        if not _needs_box(sid, k):
            continue
        if partition.window_peak(sabs, k) <= _SKIP_REL * peak:
            continue
        box = _box_from_spectra(u, partition, k, spec)
        terms.extend(_term_norms(box, sid, k))
    return stable_sum(terms)


def intersection_seminorm(u, sids, partition):
    """max over the given ids; the norm of their intersection space."""
    return max(composite_seminorm(u, sid, partition) for sid in sids)


def seminorm_trace(u, sids, partition, start=2):
    """Per-id traces over the expanding windows [t_0, t_j].

    Returns a list of rows {"t": t_j, label: value, ...}, j >= start,
    suitable for delimited serialization.  Windows nest, so each column
    is nondecreasing.
    """
    rows = []
    for j in range(start, len(u.times) + 1):
        win = u.window(j)
        row = {"t": float(u.times[j - 1])}
        for sid in sids:
            row[sid.label] = composite_seminorm(win, sid, partition)
        rows.append(row)
    return rows
