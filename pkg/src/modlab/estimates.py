"""Ratio harnesses for the linear space-time estimates.

Each registered case pairs a left-hand mixed norm of the free or
forced evolution with the data-side norm and bracket weight that is
supposed to dominate it.  Sweep data are spectrally supported inside
a single decomposition window plateau, so the window projection acts
as the identity and the measured ratio isolates the inequality
itself rather than projection error.  A bounded estimate shows up as
a normalized ratio whose fitted log-log slope against the bracket
weight is near zero.

Time integrals are truncated to [0, T], with T capped so that mass
transported at group velocity 2*max|k| stays well inside the box;
this finite window stands in for the line integrals of the continuum
statements.  Forced cases drive the evolution with a separable
resonant source exp(i*omega0*t)*g(x), omega0 matched to the window's
symbol value, evaluated through the exact modulated quadrature of
`propagator.duhamel_modulated`; the source's mixed norms then reduce
to closed-form time factors times spatial quadrature.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .fields import (
    ComplexField,
    SpaceTimeField,
    anisotropic_norm,
    fourier_inverse,
    fractional_derivative,
    hyperbolic,
    lp_norm,
    make_grid,
    spacetime_lp_norm,
    spectral_derivative,
    time_outer_norm,
)
from .freqdecomp import (
    NormSpec,
    bracket,
    build_partition,
    modulation_norm,
    plateau_bump,
)
from .gabor import gauss_atom
from .propagator import duhamel_modulated, linear_evolution

_INF = np.inf
_EQ_TOL = 1e-12


def worker_count():
    """Parallel row workers, capped by the MODLAB_THREADS variable."""
    raw = os.environ.get("MODLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(n, 1)


def _map_jobs(fn, jobs):
    # results keep job order, so reports are reproducible
    n = worker_count()
    if n <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, jobs))


def _conjugate(e):
    if e == 1:
        return _INF
    if e == _INF:
        return 1.0
    return e / (e - 1.0)


def check_l1_window(n, p, pbar):
    """Exponent gate for the L^1-side anisotropic family."""
    gap = n * (0.5 - (0.0 if pbar == _INF else 1.0 / pbar))
    need = 0.0 if p == _INF else 1.0 / p
    if gap > need + _EQ_TOL:
        return
    if abs(gap - need) <= _EQ_TOL and 1 < p < _INF:
        return
    raise ValueError(
        "requires n(1/2 - 1/pbar) > 1/p, or equality with 1 < p < inf"
    )


def check_l2_window(n, q, qbar, allow_q2=False):
    """Exponent gate for the L^2-side anisotropic family.

    The forced-smoothing case extends the admissible range to the
    q = 2 endpoint, which is where the half-bracket gain matters.
    """
    if q < 2 or qbar < 2:
        raise ValueError("requires 2 <= q, qbar <= inf")
    gap = n * (0.5 - (0.0 if qbar == _INF else 2.0 / qbar))
    need = 0.0 if q == _INF else 2.0 / q
    if gap > need + _EQ_TOL:
        return
    if abs(gap - need) <= _EQ_TOL and (2 < q < _INF or (allow_q2 and q >= 2)):
        return
    raise ValueError(
        "requires n(1/2 - 2/qbar) > 2/q, or equality with 2 < q < inf"
    )


def check_lr_window(n, r, p, pbar):
    """Exponent gate for the L^r-data anisotropic family."""
    gap = n * (1.0 / r - 0.5 - (0.0 if pbar == _INF else 1.0 / pbar))
    need = 0.0 if p == _INF else 1.0 / p
    if gap > need + _EQ_TOL and r <= p:
        return
    if abs(gap - need) <= _EQ_TOL and r < p < _INF:
        return
    raise ValueError(
        "requires n(1/r - 1/2 - 1/pbar) > 1/p with r <= p, "
        "or equality with r < p < inf"
    )


def check_spacetime_power(n, p):
    if not (4.0 / n <= p < _INF):
        raise ValueError("requires 4/n <= p < inf")


# ---------------------------------------------------------------------------
# data families


_SHAPES = ("wide", "narrow", "rough", "atoms")


def box_datum(grid, k, shape="wide", seed=7):
    """One seeded datum spectrally confined to the plateau of window k.

    Shapes: "wide" and "narrow" are plateau products of widths 0.45
    and 0.25; "rough" carries a random smooth spectral phase on width
    0.40; "atoms" is a 4-term Gauss-atom cluster near k (spectrum is
    Gaussian-tailed, so only full-norm cases should use it).
    """
    k = tuple(int(c) for c in k)
    if len(k) != grid.dim:
        raise ValueError("window index dimension mismatch")
    if shape not in _SHAPES:
        raise ValueError(f"unknown datum shape {shape!r}")
    rng = np.random.default_rng(
        [seed, _SHAPES.index(shape)] + [c + 4096 for c in k]
    )
    if shape == "atoms":
        vals = np.zeros(grid.samples, dtype=np.complex128)
        for _ in range(4):
            dk = rng.integers(-1, 2, size=grid.dim)
            dl = rng.integers(-2, 3, size=grid.dim)
            coef = rng.normal() + 1j * rng.normal()
            atom_k = tuple(int(c + d) for c, d in zip(k, dk))
            atom_l = tuple(int(d) for d in dl)
            vals = vals + coef * gauss_atom(grid, atom_k, atom_l).values
        return ComplexField(grid=grid, values=vals)
    width = {"wide": 0.45, "narrow": 0.25, "rough": 0.40}[shape]
    spec = np.ones(grid.samples, dtype=np.complex128)
    for i in range(grid.dim):
        rel = grid.xi_axis(i) - k[i]
        prof = plateau_bump(rel / width)
        if shape == "rough":
            phase = np.zeros_like(rel)
            for m in range(1, 4):
                amp = rng.uniform(0.0, 1.2)
                off = rng.uniform(0.0, 2.0 * np.pi)
                phase += amp * np.cos(np.pi * m * rel / width + off)
            prof = prof * np.exp(1j * phase)
        spec = spec * grid.broadcast_axis(prof, i)
    return fourier_inverse(grid, spec)


# ---------------------------------------------------------------------------
# case registry


@dataclass(frozen=True)
class EstimateCase:
    """One registered inequality: evaluators plus its predicted weight."""

    case_id: str
    group: str
    kind: str
    pre_op: object
    post_op: object
    lhs: object
    data_norm: object
    weight_kind: str
    weight_exponent: float
    shapes: tuple
    default_k: tuple
    conditions: str

    def weight(self, k):
        if self.weight_kind == "none":
            return 1.0
        if self.weight_kind == "euclid":
            return bracket(k) ** self.weight_exponent
        if self.weight_kind == "first":
            return bracket(k[0]) ** self.weight_exponent
        raise ValueError(f"unknown weight kind {self.weight_kind!r}")

    def slope_abscissa(self, k):
        return bracket(k[0]) if self.weight_kind == "first" else bracket(k)


@dataclass
class EstimateReport:
    """Rows of (window, datum) ratios with the fitted sweep slope."""

    case_id: str
    rows: list
    max_ratio: float
    slope: object
    slope_tol: float
    gain_slope: object
    meta: dict

    def as_dict(self):
        return {
            "case_id": self.case_id,
            "rows": self.rows,
            "max_ratio": self.max_ratio,
            "slope": self.slope,
            "slope_tol": self.slope_tol,
            "gain_slope": self.gain_slope,
            "meta": self.meta,
        }


def _forcing_l1_xt(g, T):
    return float(T) * lp_norm(g, 1)


def _forcing_l1x1_l2(g, T):
    a = np.abs(g.values)
    rest = tuple(range(1, g.grid.dim))
    tail_vol = 1.0
    for h in g.grid.dx[1:]:
        tail_vol *= h
    inner = np.sqrt(np.sum(a * a, axis=rest) * tail_vol) if rest else a
    return float(np.sum(inner) * g.grid.dx[0] * np.sqrt(T))


def _forcing_l43(g, T):
    return float(T) ** 0.75 * lp_norm(g, 4.0 / 3.0)


def _strichartz_pair(ev):
    return max(spacetime_lp_norm(ev, 4), time_outer_norm(ev, _INF, 2))


def _sup_ratio_over_time(ev):
    half = ev.grid.dim / 2.0
    return max(
        lp_norm(ev.slice(j), _INF) / (1.0 + abs(float(t)) ** half)
        for j, t in enumerate(ev.times)
    )


def _build_cases():
    low_k = ((8, 0), (16, 0), (24, 0), (32, 0))
    high_k = ((20, 0), (28, 0), (40, 0), (56, 0))
    box_shapes = ("wide", "narrow", "rough")
    full_shapes = ("wide", "rough", "atoms")

    check_l1_window(2, 2, _INF)
    check_l1_window(2, 2, 4)
    check_spacetime_power(2, 2)
    check_l2_window(2, 4, _INF)
    check_l2_window(2, 2, _INF, allow_q2=True)
    check_lr_window(2, 4.0 / 3.0, 2, _INF)

    cases = [
        EstimateCase(
            "free-anisotropic", "a", "free", None, None,
            lambda ev: anisotropic_norm(ev, 0, 2, _INF),
            lambda g, T, part: modulation_norm(g, NormSpec(0.5, 1, 1), part),
            "none", 0.0, full_shapes, low_k,
            "n(1/2 - 1/pbar) > 1/p at (p, pbar) = (2, inf)",
        ),
        EstimateCase(
            "window-l1", "b", "free", None, None,
            lambda ev: max(
                anisotropic_norm(ev, 0, 2, 4),
                anisotropic_norm(ev, 0, 2, _INF),
            ),
            lambda g, T, part: lp_norm(g, 1),
            "euclid", 0.5, box_shapes, low_k,
            "n(1/2 - 1/pbar) >= 1/p at (p, pbar) = (2, 4) and (2, inf)",
        ),
        EstimateCase(
            "smooth-effect", "c", "free", "half-dx1", None,
            lambda ev: anisotropic_norm(ev, 0, _INF, 2),
            lambda g, T, part: lp_norm(g, 2),
            "none", 0.0, box_shapes, low_k,
            "none (holds for every window index)",
        ),
        EstimateCase(
            "strichartz", "d", "free", None, None,
            _strichartz_pair,
            lambda g, T, part: lp_norm(g, 2),
            "none", 0.0, box_shapes, low_k,
            "4/n <= p < inf at p = 2",
        ),
        EstimateCase(
            "smooth-strichartz", "e1", "duhamel", None, "dx1",
            _strichartz_pair,
            lambda g, T, part: _forcing_l1x1_l2(g, T),
            "first", 0.5, box_shapes, low_k,
            "4/n <= p < inf at p = 2",
        ),
        EstimateCase(
            "strichartz-smooth", "e2", "duhamel", "dx1", None,
            lambda ev: anisotropic_norm(ev, 0, _INF, 2),
            lambda g, T, part: _forcing_l43(g, T),
            "first", 0.5, box_shapes, low_k,
            "4/n <= p < inf at p = 2",
        ),
        EstimateCase(
            "strichartz-maximal", "e3", "duhamel", None, "dx1",
            lambda ev: anisotropic_norm(ev, 0, 2, _INF),
            lambda g, T, part: _forcing_l43(g, T),
            "first", 1.5, box_shapes, low_k,
            "2 <= q <= inf at q = 2, with 4/n <= p < inf at p = 2",
        ),
        EstimateCase(
            "smooth-maximal", "e4", "duhamel", None, "dx1",
            lambda ev: anisotropic_norm(ev, 0, 4, _INF),
            lambda g, T, part: _forcing_l1x1_l2(g, T),
            "first", 0.75, box_shapes, low_k,
            "2 < q <= inf at q = 4",
        ),
        EstimateCase(
            "window-l2", "f", "free", None, None,
            lambda ev: anisotropic_norm(ev, 0, 4, _INF),
            lambda g, T, part: lp_norm(g, 2),
            "first", 0.25, box_shapes, low_k,
            "n(1/2 - 2/qbar) > 2/q at (q, qbar) = (4, inf)",
        ),
        EstimateCase(
            "maximal-smooth", "g", "duhamel", None, None,
            lambda ev: anisotropic_norm(ev, 0, 2, _INF),
            lambda g, T, part: _forcing_l1x1_l2(g, T),
            "first", 0.0, box_shapes, high_k,
            "n(1/2 - 2/qbar) >= 2/q at (q, qbar) = (2, inf), |k_1| >= 20",
        ),
        EstimateCase(
            "uniform-lp", "h", "free", None, None,
            _sup_ratio_over_time,
            lambda g, T, part: lp_norm(g, _INF),
            "none", 0.0, box_shapes, low_k,
            "1 <= p <= inf at p = inf",
        ),
        EstimateCase(
            "free-anisotropic-lr", "i", "free", None, None,
            lambda ev: anisotropic_norm(ev, 0, 2, _INF),
            lambda g, T, part: modulation_norm(
                g, NormSpec(0.75, 4.0 / 3.0, 1), part
            ),
            "none", 0.0, full_shapes, low_k,
            "n(1/r - 1/2 - 1/pbar) = 1/p with r < p < inf "
            "at (r, p, pbar) = (4/3, 2, inf)",
        ),
    ]
    return {case.case_id: case for case in cases}


CASES = _build_cases()


def list_cases():
    """Registered case ids in registry order."""
    return list(CASES)


def resolve_case(case):
    if isinstance(case, EstimateCase):
        return case
    if case in CASES:
        return CASES[case]
    raise ValueError(f"unknown estimate case {case!r}")


# ---------------------------------------------------------------------------
# sweep driver


def estimate_grid(max_k, n2=64):
    """Anisotropic sweep grid whose band covers window max_k + 2."""
    n1 = 16 * (int(max_k) + 3)
    return make_grid(2, (8.0 * np.pi, 8.0 * np.pi), (n1, n2))


def _normalize_k_list(case, k_list):
    if k_list is None:
        return [tuple(k) for k in case.default_k]
    out = []
    for k in k_list:
        if np.isscalar(k):
            out.append((int(k), 0))
        else:
            out.append(tuple(int(c) for c in k))
    return out


def _window_cap(grid, max_k):
    return grid.half_extent[0] / (4.0 * max(max_k, 1))


def _apply_pre(f, op):
    if op is None:
        return f
    if op == "dx1":
        return spectral_derivative(f, 0)
    if op == "half-dx1":
        return fractional_derivative(f, 0, 0.5)
    raise ValueError(f"unknown operator tag {op!r}")


def _apply_post(ev, op):
    if op is None:
        return ev
    vals = np.stack(
        [_apply_pre(ev.slice(j), op).values for j in range(len(ev.times))]
    )
    return SpaceTimeField(grid=ev.grid, times=ev.times, values=vals)


def run_estimate(case, seed=7, k_list=None, t_window=None, grid=None,
                 slices=25, slope_tol=0.15):
    """Sweep one case over window indices and seeded data.

    Returns an EstimateReport with one row per (window, datum).  The
    slope is fitted by least squares on log(max ratio per window)
    against the log bracket weight, and needs at least four distinct
    window indices; with fewer it is left as None.
    """
    case = resolve_case(case)
    k_list = _normalize_k_list(case, k_list)
    if not k_list:
        raise ValueError("need at least one window index")
    if case.group == "g":
        for k in k_list:
            if abs(k[0]) < 20:
                raise ValueError(
                    "requires |k_1| >= 20 for the forced-smoothing case"
                )
    max_k = max(max(abs(c) for c in k) for k in k_list)
    if grid is None:
        grid = estimate_grid(max_k)
    part = build_partition(grid)
    for k in k_list:
        part.admissible(k)
    if t_window is not None:
        t_fixed = float(t_window[1] if np.iterable(t_window) else t_window)
        if t_fixed > _window_cap(grid, max_k) + 1e-9:
            raise ValueError(
                "time window exceeds the transported-support cap L/(4 max|k|)"
            )
        if t_fixed <= 0:
            raise ValueError("time window must be positive")
    eps = hyperbolic(grid.dim)

    def horizon(k):
        # scaling-correct default: a fixed fraction of the window's own
        # transport cap, so slow and fast windows see a complete sweep
        if t_window is not None:
            return t_fixed
        return 0.6 * _window_cap(grid, max(abs(c) for c in k))

    def one_row(job):
        k, shape = job
        T = horizon(k)
        times = np.linspace(0.0, T, int(slices))
        g = box_datum(grid, k, shape=shape, seed=seed)
        data_val = case.data_norm(g, T, part)
        u_in = _apply_pre(g, case.pre_op)
        if case.kind == "free":
            ev = linear_evolution(u_in, times, eps)
        else:
            omega0 = eps.of_vector(k)
            ev = duhamel_modulated(u_in, omega0, times, eps)
        ev = _apply_post(ev, case.post_op)
        lhs = case.lhs(ev)
        rhs = case.weight(k) * data_val
        ratio = lhs / rhs if rhs > 0 else 0.0
        return {"k": k, "shape": shape, "T": T, "lhs": lhs, "rhs": rhs,
                "ratio": ratio}

    jobs = [(k, shape) for k in k_list for shape in case.shapes]
    rows = _map_jobs(one_row, jobs)

    per_k = {}
    for row in rows:
        per_k[row["k"]] = max(per_k.get(row["k"], 0.0), row["ratio"])
    max_ratio = max(per_k.values())
    slope = None
    gain_slope = None
    if len(per_k) >= 4 and min(per_k.values()) > 0:
        ks = sorted(per_k)
        xs = np.log([case.slope_abscissa(k) for k in ks])
        ys = np.log([per_k[k] for k in ks])
        slope = float(np.polyfit(xs, ys, 1)[0])
        if case.group == "g":
            # same rows weighed against the unsmoothed half-power
            gain_slope = float(np.polyfit(xs, ys - 0.5 * xs, 1)[0])
    meta = {
        "group": case.group,
        "seed": seed,
        "samples": list(grid.samples),
        "half_extent": list(grid.half_extent),
        "t_window": "auto" if t_window is None else t_fixed,
        "slices": int(slices),
        "signature": "hyperbolic",
        "shapes": list(case.shapes),
        "conditions": case.conditions,
    }
    return EstimateReport(case.case_id, rows, max_ratio, slope, slope_tol,
                          gain_slope, meta)


def refinement_check(case, seed=7, k_list=None, slices=25):
    """Max-ratio change under doubling of the active axis and the
    time sampling.

    The sweep data are band-limited along the transverse axis by
    construction, so its sampling is exact and held fixed.
    """
    case = resolve_case(case)
    if k_list is None:
        k_list = [(20, 0), (26, 0)] if case.group == "g" else [(8, 0), (12, 0)]
    k_list = _normalize_k_list(case, k_list)
    max_k = max(max(abs(c) for c in k) for k in k_list)
    base = estimate_grid(max_k)
    fine = make_grid(2, base.half_extent, (2 * base.samples[0], base.samples[1]))
    r0 = run_estimate(case, seed=seed, k_list=k_list, grid=base,
                      slices=slices)
    r1 = run_estimate(case, seed=seed, k_list=k_list, grid=fine,
                      slices=2 * slices - 1)
    change = abs(r1.max_ratio - r0.max_ratio) / r0.max_ratio
    return {"case_id": case.case_id, "base": r0.max_ratio,
            "fine": r1.max_ratio, "rel_change": change}


# ---------------------------------------------------------------------------
# sequence-function convolution bound


def _check_convol_exponents(theta, p, r):
    rp = _conjugate(r)
    target = (0.0 if rp == _INF else 1.0 / rp) + (0.0 if p == _INF else 1.0 / p)
    if theta > target + _EQ_TOL:
        if p >= r:
            return
        raise ValueError("requires p >= r when theta > 1/r' + 1/p")
    if abs(theta - target) <= _EQ_TOL and 0 < theta < 1 and 1 < p < _INF:
        return
    raise ValueError(
        "requires theta > 1/r' + 1/p, or equality with "
        "theta in (0, 1) and 1 < p < inf"
    )


def convolution_lemma_check(a, theta, p, r, b=0.0, c=1.0, l_start=0):
    """Left side, right scale, and ratio of the lattice-tail bound.

    The left side is the L^p quadrature of
    sum_l |a_l| (1 + |x - l + b|/|c|)^(-theta), integrated exactly
    over the line: adaptive quadrature on the kink interval plus the
    two unbounded tails.  The right scale is <c>^(1/p + 1/r') times
    the little-l^r norm of a.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError("coefficient sequence must be one-dimensional")
    if abs(c) < 1.0:
        raise ValueError("requires |c| >= 1")
    if theta <= 0:
        raise ValueError("requires theta > 0")
    _check_convol_exponents(theta, p, r)
    mags = np.abs(a)
    active = np.nonzero(mags)[0]
    if active.size == 0:
        return 0.0, 0.0, 0.0
    weights = mags[active]
    centers = (l_start + active) - b
    scale = abs(c)

    def profile(x):
        return float(
            np.sum(weights * (1.0 + np.abs(x - centers) / scale) ** (-theta))
        )

    lo = float(centers.min())
    hi = float(centers.max())
    if p == _INF:
        xs = np.linspace(lo - 2.0 * scale, hi + 2.0 * scale, 40001)
        lhs = max(max(profile(x) for x in xs),
                  max(profile(x) for x in centers))
    else:
        integrand = lambda x: profile(x) ** p
        total = 0.0
        if hi > lo:
            pts = sorted(float(x) for x in centers)
            total += quad(integrand, lo, hi, points=pts, limit=300)[0]
        total += quad(integrand, -np.inf, lo, limit=300)[0]
        total += quad(integrand, hi, np.inf, limit=300)[0]
        lhs = total ** (1.0 / p)
    rp = _conjugate(r)
    expo = (0.0 if p == _INF else 1.0 / p) + (0.0 if rp == _INF else 1.0 / rp)
    norm_a = (
        float(weights.max()) if r == _INF
        else float(np.sum(weights ** r) ** (1.0 / r))
    )
    rhs_scale = bracket(c) ** expo * norm_a
    ratio = lhs / rhs_scale if rhs_scale > 0 else 0.0
    return lhs, rhs_scale, ratio


def convolution_c_sweep(a, theta, p, r, b=0.0, c_list=(1, 2, 4, 8, 16)):
    """Fitted slope of log(left side) against log<c> over a c sweep."""
    if len(c_list) < 2:
        raise ValueError("need at least two c values to fit a slope")
    rows = []
    for c in c_list:
        lhs, rhs_scale, ratio = convolution_lemma_check(
            a, theta, p, r, b=b, c=c
        )
        rows.append({"c": float(c), "lhs": lhs, "rhs_scale": rhs_scale,
                     "ratio": ratio})
    xs = np.log([bracket(row["c"]) for row in rows])
    ys = np.log([row["lhs"] for row in rows])
    slope = float(np.polyfit(xs, ys, 1)[0])
    return slope, rows
