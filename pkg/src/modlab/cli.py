"""Command line front end for the laboratory.

Ten subcommands cover the main workflows: checking the frequency
partition, evaluating decomposition norms, frame analysis round trips,
propagating data under either quadratic symbol, running dispersive
ratio sweeps, marching the nonlinear solver, iterating the fixed-point
map, probing the singular family, measuring norm growth of modulated
data, and sweeping the embedding ratio.

Every run reads an optional JSON config whose keys are all validated
(unknown keys are rejected), merges any command line overrides, and
writes three artifacts into the output directory: a CSV table with a
fixed header, a JSON report, and a PNG figure rendered offscreen.
Identical configs and seeds produce byte-identical reports.  Exit
status is 0 on success, 1 on a validation problem, and 2 when the
computation itself fails (divergence or a blow-up).

The MODLAB_THREADS environment variable caps worker threads in the
sweep commands; everything else is single threaded.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .estimates import list_cases, run_estimate
from .fields import (
    ComplexField,
    elliptic,
    fourier_forward,
    fourier_inverse,
    hyperbolic,
    lp_norm,
    make_grid,
)
from .freqdecomp import (
    NormSpec,
    box_op,
    build_partition,
    modulation_norm,
    partition_unity_deviation,
    stft_modulation_norm,
)
from .gabor import analyze, frame_bounds, gauss_atom, synthesize
from .propagator import atom_evolution, propagate_spectral
from .scenarios import (
    blowup_sphere,
    blowup_u,
    blowup_u_residual,
    embedding_family,
    norm_inflation_sweep,
    schmap_residual,
    weighted_sobolev_norm,
)
from .solver import BlowUpError, SolverParams, evolve, picard_iterate

_PI = math.pi

# fixed PNG text chunk so repeated runs write identical bytes
_PNG_META = {"Software": "modlab"}


class CliError(Exception):
    """A problem with the invocation or its config, not the numerics."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _figure():
    """Import matplotlib lazily and force the offscreen backend."""
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


# ---------------------------------------------------------------------------
# config plumbing

_MISSING = object()


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise CliError("config must be a JSON object")
    return raw


def _take(command, cfg, schema):
    """Validate every config key against the schema; reject strangers."""
    left = dict(cfg)
    out = {}
    for key, (conv, default) in schema.items():
        if key in left:
            out[key] = conv(key, left.pop(key))
        elif default is _MISSING:
            raise CliError(f"{command}: config key '{key}' is required")
        else:
            out[key] = default
    if left:
        bad = ", ".join(sorted(left))
        raise CliError(f"{command}: unknown config keys: {bad}")
    return out


def _as_int(key, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise CliError(f"config key '{key}' must be an integer")
    return v


def _as_float(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise CliError(f"config key '{key}' must be a number")
    return float(v)


def _as_exponent(key, v):
    """A Lebesgue exponent: a number >= 1 or the string 'inf'."""
    if isinstance(v, str):
        if v.lower() in ("inf", "infinity"):
            return np.inf
        raise CliError(f"config key '{key}' must be a number or 'inf'")
    return _as_float(key, v)


def _as_str(key, v):
    if not isinstance(v, str):
        raise CliError(f"config key '{key}' must be a string")
    return v


def _as_seed(key, v):
    s = _as_int(key, v)
    if not (0 <= s < 2**64):
        raise CliError(f"config key '{key}' must fit in an unsigned 64-bit value")
    return s


def _as_float_list(key, v):
    if not isinstance(v, list) or not v:
        raise CliError(f"config key '{key}' must be a non-empty list of numbers")
    return [_as_float(key, x) for x in v]


def _as_int_list(key, v):
    if not isinstance(v, list) or not v:
        raise CliError(f"config key '{key}' must be a non-empty list of integers")
    return [_as_int(key, x) for x in v]


def _as_extent(key, v):
    if isinstance(v, list):
        return tuple(_as_float(key, x) for x in v)
    return _as_float(key, v)


def _as_samples(key, v):
    if isinstance(v, list):
        return tuple(_as_int(key, x) for x in v)
    return _as_int(key, v)


def _as_k_list(key, v):
    """A list of frequency indices, each an integer pair."""
    if not isinstance(v, list) or not v:
        raise CliError(f"config key '{key}' must be a non-empty list")
    out = []
    for item in v:
        if not isinstance(item, list):
            raise CliError(f"config key '{key}' must hold integer lists")
        out.append(tuple(_as_int(key, c) for c in item))
    return out


def _optional(conv):
    def wrapped(key, v):
        if v is None:
            return None
        return conv(key, v)

    return wrapped


def _parse_seed_flag(text):
    try:
        s = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("seed must be an integer")
    if not (0 <= s < 2**64):
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit value")
    return s


def _parse_n_flag(text):
    try:
        vals = [int(tok) for tok in text.split(",") if tok != ""]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma list of integers")
    if not vals:
        raise argparse.ArgumentTypeError("expected a comma list of integers")
    return vals


def _resolve_seed(command, args, cfg, required):
    seed = cfg.get("seed")
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    if required and seed is None:
        raise CliError(
            f"{command}: a seed is required; pass --seed or set the"
            " 'seed' config key"
        )
    return seed


def _signature(name, dim):
    if name == "elliptic":
        return elliptic(dim)
    if name == "hyperbolic":
        return hyperbolic(dim)
    raise CliError("config key 'signature' must be 'elliptic' or 'hyperbolic'")


# ---------------------------------------------------------------------------
# report writers

def _ensure_out(args):
    out = args.out
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(out, command, payload):
    path = os.path.join(out, f"{command}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_csv(out, command, header, rows):
    path = os.path.join(out, f"{command}.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return path


def _save_figure(plt, fig, out, command):
    path = os.path.join(out, f"{command}.png")
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return path


def _fmt_k(k):
    return ";".join(str(int(c)) for c in k)


# ---------------------------------------------------------------------------
# shared data builders

def _random_superposition(grid, atoms, rng, k_cap=None, center_cap=None,
                          band_cap=None):
    """Random sum of Gaussian wave packets, carriers inside the band.

    With band_cap the result is projected onto |xi_i| <= band_cap, so
    the field sits entirely inside a truncated partition's coverage.
    """
    if k_cap is None:
        k_cap = max(2, int(min(grid.xi_max(i) for i in range(grid.dim))) - 2)
    if center_cap is None:
        center_cap = min(grid.half_extent) / 2.0
    xs = [grid.broadcast_axis(grid.x_axis(i), i) for i in range(grid.dim)]
    vals = np.zeros(grid.samples, dtype=np.complex128)
    for _ in range(atoms):
        amp = complex(rng.normal(), rng.normal())
        width = float(rng.uniform(0.7, 1.6))
        x0 = rng.uniform(-center_cap, center_cap, size=grid.dim)
        k0 = rng.integers(-k_cap, k_cap + 1, size=grid.dim)
        r2 = np.zeros(grid.samples)
        phase = np.zeros(grid.samples)
        for i in range(grid.dim):
            d = xs[i] - x0[i]
            r2 = r2 + d * d
            phase = phase + float(k0[i]) * xs[i]
        vals = vals + amp * np.exp(-r2 / (2.0 * width**2)) * np.exp(1j * phase)
    f = ComplexField(grid=grid, values=vals)
    if band_cap is not None:
        spec = fourier_forward(f)
        for i in range(grid.dim):
            keep = np.abs(grid.xi_axis(i)) <= band_cap
            spec = spec * grid.broadcast_axis(keep.astype(float), i)
        f = fourier_inverse(grid, spec)
    return f


def _frame_superposition(grid, atoms, rng, k_cap=6, l_cap=6):
    """Random combination of exact frame atoms, safely inside coverage."""
    pairs = []
    vals = np.zeros(grid.samples, dtype=np.complex128)
    for _ in range(atoms):
        amp = complex(rng.normal(), rng.normal())
        k = tuple(int(c) for c in rng.integers(-k_cap, k_cap + 1, size=grid.dim))
        l = tuple(int(c) for c in rng.integers(-l_cap, l_cap + 1, size=grid.dim))
        pairs.append((amp, k, l))
        vals = vals + amp * gauss_atom(grid, k, l).values
    return ComplexField(grid=grid, values=vals), pairs


def _heatmap(ax, f, title):
    grid = f.grid
    mag = np.abs(f.values)
    if grid.dim == 1:
        ax.plot(grid.x_axis(0), mag, lw=1.0)
        ax.set_xlabel("x")
        ax.set_ylabel("|u|")
    else:
        L0, L1 = grid.half_extent[0], grid.half_extent[1]
        im = ax.imshow(
            mag.T,
            origin="lower",
            extent=(-L0, L0, -L1, L1),
            aspect="auto",
            cmap="magma",
        )
        ax.figure.colorbar(im, ax=ax, shrink=0.85)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    ax.set_title(title)


# ---------------------------------------------------------------------------
# subcommands

_GRID_SCHEMA = {
    "dim": (_as_int, 2),
    "half_extent": (_as_extent, 8.0 * _PI),
    "samples": (_as_samples, 64),
}


def _cmd_partition_check(args):
    cfg = _take(
        "partition-check",
        _load_config(args.config),
        {
            **_GRID_SCHEMA,
            "members": (_as_int, 20),
            "atoms": (_as_int, 4),
            "seed": (_optional(_as_seed), None),
        },
    )
    seed = _resolve_seed("partition-check", args, cfg, required=True)
    grid = make_grid(cfg["dim"], cfg["half_extent"], cfg["samples"])
    part = build_partition(grid)
    unity = partition_unity_deviation(part)
    lattice = list(part.lattice())
    cap = min(part.kmax(i) for i in range(grid.dim))
    rows = []
    for j in range(cfg["members"]):
        rng = np.random.default_rng([seed, j])
        f = _random_superposition(grid, cfg["atoms"], rng, band_cap=cap)
        rec = np.zeros(grid.samples, dtype=np.complex128)
        for k in lattice:
            rec += box_op(part, f, k).values
        denom = lp_norm(f, 2)
        rel = lp_norm(f.map(rec - f.values), 2) / denom
        rows.append((j, float(denom), float(rel)))
    worst = max(r[2] for r in rows)

    out = _ensure_out(args)
    _write_csv(out, "partition-check", ["member", "l2_norm", "recon_rel"], rows)
    _write_json(
        out,
        "partition-check",
        {
            "command": "partition-check",
            "grid": list(grid.key()),
            "seed": seed,
            "members": cfg["members"],
            "atoms": cfg["atoms"],
            "unity_deviation": unity,
            "max_recon_rel": worst,
            "boxes": len(lattice),
        },
    )
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy([r[0] for r in rows], [max(r[2], 1e-18) for r in rows], "o")
    ax.set_xlabel("family member")
    ax.set_ylabel("relative reconstruction error")
    ax.set_title(f"box-sum reconstruction (unity deviation {unity:.2e})")
    fig.tight_layout()
    _save_figure(plt, fig, out, "partition-check")
    print(
        f"partition-check: unity_deviation={unity:.3e}"
        f" max_recon_rel={worst:.3e}"
    )
    return 0


def _cmd_norm(args):
    cfg = _take(
        "norm",
        _load_config(args.config),
        {
            **_GRID_SCHEMA,
            "s": (_as_float, 0.0),
            "p": (_as_exponent, 2.0),
            "q": (_as_exponent, 1.0),
            "atoms": (_as_int, 4),
            "seed": (_optional(_as_seed), None),
        },
    )
    seed = _resolve_seed("norm", args, cfg, required=True)
    grid = make_grid(cfg["dim"], cfg["half_extent"], cfg["samples"])
    part = build_partition(grid)
    cap = min(part.kmax(i) for i in range(grid.dim))
    rng = np.random.default_rng([seed, 0])
    f = _random_superposition(grid, cfg["atoms"], rng, band_cap=cap)
    spec = NormSpec(cfg["s"], cfg["p"], cfg["q"])
    value = modulation_norm(f, spec, part)
    stft = stft_modulation_norm(f, spec, part)
    ratio = stft / value if value > 0 else float("nan")

    out = _ensure_out(args)
    _write_csv(
        out,
        "norm",
        ["s", "p", "q", "decomposition_norm", "stft_norm", "ratio"],
        [(cfg["s"], cfg["p"], cfg["q"], value, stft, ratio)],
    )
    _write_json(
        out,
        "norm",
        {
            "command": "norm",
            "grid": list(grid.key()),
            "seed": seed,
            "atoms": cfg["atoms"],
            "spec": {"s": cfg["s"], "p": cfg["p"], "q": cfg["q"]},
            "decomposition_norm": value,
            "stft_norm": stft,
            "ratio": ratio,
        },
    )
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    _heatmap(ax, f, f"|f|, decomposition norm {value:.6g}")
    fig.tight_layout()
    _save_figure(plt, fig, out, "norm")
    print(f"norm: value={value:.9e} stft_ratio={ratio:.4f}")
    return 0


def _cmd_gabor(args):
    cfg = _take(
        "gabor",
        _load_config(args.config),
        {
            "dim": (_as_int, 1),
            "half_extent": (_as_extent, 8.0 * _PI),
            "samples": (_as_samples, 320),
            "k_radius": (_as_int, 16),
            "l_radius": (_as_int, 19),
            "atoms": (_as_int, 4),
            "tol": (_as_float, 1e-9),
            "max_iter": (_as_int, 800),
            "seed": (_optional(_as_seed), None),
        },
    )
    seed = _resolve_seed("gabor", args, cfg, required=True)
    grid = make_grid(cfg["dim"], cfg["half_extent"], cfg["samples"])
    rng = np.random.default_rng([seed, 0])
    f, _ = _frame_superposition(grid, cfg["atoms"], rng)
    coeffs = analyze(
        f,
        k_radius=cfg["k_radius"],
        l_radius=cfg["l_radius"],
        tol=cfg["tol"],
        max_iter=cfg["max_iter"],
    )
    back = synthesize(coeffs)
    rel = lp_norm(f.map(back.values - f.values), 2) / lp_norm(f, 2)
    bounds = frame_bounds(grid, cfg["k_radius"], cfg["l_radius"])
    lo, hi = bounds.lower, bounds.upper
    coeff_l2 = math.sqrt(sum(abs(c) ** 2 for c in coeffs.data.values()))

    items = sorted(coeffs.data.items())
    rows = [
        (_fmt_k(k), _fmt_k(l), c.real, c.imag, abs(c)) for (k, l), c in items
    ]
    out = _ensure_out(args)
    _write_csv(out, "gabor", ["k", "l", "re", "im", "abs"], rows)
    _write_json(
        out,
        "gabor",
        {
            "command": "gabor",
            "grid": list(grid.key()),
            "seed": seed,
            "atoms": cfg["atoms"],
            "k_radius": cfg["k_radius"],
            "l_radius": cfg["l_radius"],
            "roundtrip_rel": rel,
            "frame_lower": lo,
            "frame_upper": hi,
            "coeff_count": len(coeffs.data),
            "coeff_l2": coeff_l2,
        },
    )
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    if grid.dim == 1:
        K, L = cfg["k_radius"], cfg["l_radius"]
        table = np.zeros((2 * K + 1, 2 * L + 1))
        for (k, l), c in coeffs.data.items():
            table[k[0] + K, l[0] + L] = abs(c)
        im = ax.imshow(
            table,
            origin="lower",
            extent=(-L - 0.5, L + 0.5, -K - 0.5, K + 0.5),
            aspect="auto",
            cmap="viridis",
        )
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_xlabel("translation l")
        ax.set_ylabel("modulation k")
    else:
        K = cfg["k_radius"]
        table = np.zeros((2 * K + 1, 2 * K + 1))
        for (k, l), c in coeffs.data.items():
            i, j = k[0] + K, k[1] + K
            table[i, j] = max(table[i, j], abs(c))
        im = ax.imshow(
            table.T,
            origin="lower",
            extent=(-K - 0.5, K + 0.5, -K - 0.5, K + 0.5),
            aspect="auto",
            cmap="viridis",
        )
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_xlabel("k1")
        ax.set_ylabel("k2")
    ax.set_title(f"frame coefficients, round trip {rel:.2e}")
    fig.tight_layout()
    _save_figure(plt, fig, out, "gabor")
    print(
        f"gabor: roundtrip_rel={rel:.3e}"
        f" frame_bounds=({lo:.6f}, {hi:.6f})"
    )
    return 0


def _cmd_propagate(args):
    cfg = _take(
        "propagate",
        _load_config(args.config),
        {
            "dim": (_as_int, 2),
            "half_extent": (_as_extent, 8.0 * _PI),
            "samples": (_as_samples, 160),
            "signature": (_as_str, "hyperbolic"),
            "atoms": (_as_int, 10),
            "times": (_as_float_list, [0.1, 0.5, 1.0]),
            "seed": (_optional(_as_seed), None),
        },
    )
    seed = _resolve_seed("propagate", args, cfg, required=True)
    grid = make_grid(cfg["dim"], cfg["half_extent"], cfg["samples"])
    eps = _signature(cfg["signature"], grid.dim)
    rng = np.random.default_rng([seed, 0])
    # carriers capped at 4: group velocity 2k must not carry a packet
    # into its periodic image over the configured times
    u0, pairs = _frame_superposition(grid, cfg["atoms"], rng, k_cap=4)
    base = lp_norm(u0, 2)

    rows = []
    last = None
    for t in cfg["times"]:
        u_spec = propagate_spectral(u0, float(t), eps)
        closed = np.zeros(grid.samples, dtype=np.complex128)
        for amp, k, l in pairs:
            closed += amp * atom_evolution(grid, k, l, float(t), eps).values
        gap = lp_norm(u0.map(u_spec.values - closed), 2) / base
        drift = abs(lp_norm(u_spec, 2) - base) / base
        rows.append((float(t), lp_norm(u_spec, 2), gap, drift))
        last = u_spec
    worst_gap = max(r[2] for r in rows)
    worst_drift = max(r[3] for r in rows)

    out = _ensure_out(args)
    _write_csv(
        out,
        "propagate",
        ["t", "l2_norm", "closed_form_rel", "unitarity_drift"],
        rows,
    )
    _write_json(
        out,
        "propagate",
        {
            "command": "propagate",
            "grid": list(grid.key()),
            "signature": cfg["signature"],
            "seed": seed,
            "atoms": cfg["atoms"],
            "times": cfg["times"],
            "max_closed_form_rel": worst_gap,
            "max_unitarity_drift": worst_drift,
        },
    )
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    _heatmap(ax, last, f"|u(t={cfg['times'][-1]:g})|, {cfg['signature']} symbol")
    fig.tight_layout()
    _save_figure(plt, fig, out, "propagate")
    print(
        f"propagate: max_closed_form_rel={worst_gap:.3e}"
        f" max_unitarity_drift={worst_drift:.3e}"
    )
    return 0


def _cmd_estimate(args):
    cfg = _take(
        "estimate",
        _load_config(args.config),
        {
            "case": (_optional(_as_str), None),
            "seed": (_optional(_as_seed), None),
            "k": (_optional(_as_k_list), None),
            "t_window": (_optional(_as_float), None),
            "slices": (_as_int, 25),
        },
    )
    case = args.case if args.case is not None else cfg["case"]
    if case is None:
        known = ", ".join(list_cases())
        raise CliError(f"estimate: pick a case with --case; one of: {known}")
    seed = _resolve_seed("estimate", args, cfg, required=True)
    report = run_estimate(
        case,
        seed=seed,
        k_list=cfg["k"],
        t_window=cfg["t_window"],
        slices=cfg["slices"],
    )

    rows = []
    for r in report.rows:
        rows.append(
            (_fmt_k(r["k"]), r["shape"], r["T"], r["lhs"], r["rhs"], r["ratio"])
        )
    out = _ensure_out(args)
    _write_csv(out, "estimate", ["k", "shape", "T", "lhs", "rhs", "ratio"], rows)
    payload = report.as_dict()
    payload["command"] = "estimate"
    payload["seed"] = seed
    _write_json(out, "estimate", payload)

    by_k = {}
    for r in report.rows:
        by_k.setdefault(tuple(r["k"]), []).append(r["ratio"])
    xs, ys = [], []
    for k in sorted(by_k):
        mag = max(abs(c) for c in k)
        xs.append(math.log2(math.sqrt(1.0 + mag * mag)))
        ys.append(math.log2(max(by_k[k])))
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot(xs, ys, "o", label="max ratio per window")
    if report.slope is not None and len(xs) >= 2:
        coeff = np.polyfit(xs, ys, 1)
        grid_x = np.linspace(min(xs), max(xs), 50)
        ax.plot(grid_x, np.polyval(coeff, grid_x), "-", lw=1.0,
                label=f"slope {report.slope:+.3f}")
        ax.legend()
    ax.set_xlabel("log2 <k>")
    ax.set_ylabel("log2 max ratio")
    ax.set_title(f"case {report.case_id}")
    fig.tight_layout()
    _save_figure(plt, fig, out, "estimate")

    line = (
        f"estimate[{report.case_id}]: max_ratio={report.max_ratio:.6g}"
    )
    if report.slope is not None:
        line += f" slope={report.slope:+.4f}"
    if report.gain_slope is not None:
        line += f" gain_slope={report.gain_slope:+.4f}"
    print(line)
    return 0


def _cmd_solve(args):
    cfg = _take(
        "solve",
        _load_config(args.config),
        {
            **_GRID_SCHEMA,
            "signature": (_as_str, "hyperbolic"),
            "kind": (_as_str, "power"),
            "kappa": (_as_int, 1),
            "nu": (_as_int, 1),
            "mu": (_as_float, 1.0),
            "lam": (_optional(_as_float_list), None),
            "dt": (_as_float, 0.01),
            "t_final": (_as_float, 1.0),
            "amplitude": (_as_float, 0.01),
            "carrier": (_as_int_list, [1, -1]),
            "snapshots": (_as_int, 33),
            "seed": (_optional(_as_seed), None),
        },
    )
    seed = _resolve_seed("solve", args, cfg, required=False)
    grid = make_grid(cfg["dim"], cfg["half_extent"], cfg["samples"])
    eps = _signature(cfg["signature"], grid.dim)
    carrier = cfg["carrier"]
    if len(carrier) != grid.dim:
        raise CliError("solve: config key 'carrier' must match the dimension")
    lam = tuple(cfg["lam"]) if cfg["lam"] is not None else ()
    params = SolverParams(
        signature=eps,
        kind=cfg["kind"],
        lam=lam,
        kappa=cfg["kappa"],
        mu=cfg["mu"],
        nu=cfg["nu"],
        dt=cfg["dt"],
        t_final=cfg["t_final"],
    )
    atom = gauss_atom(grid, carrier, (0,) * grid.dim)
    u0 = atom.map(cfg["amplitude"] * atom.values / lp_norm(atom, 2))
    part = build_partition(grid)
    ev, trace = evolve(u0, params, part, snapshots=cfg["snapshots"])

    labels = [key for key in trace[0] if key != "t"]
    rows = [[row["t"]] + [row[lab] for lab in labels] for row in trace]
    out = _ensure_out(args)
    _write_csv(out, "solve", ["t"] + labels, rows)
    mass0 = lp_norm(u0, 2) ** 2
    mass1 = lp_norm(ev.slice(len(ev.times) - 1), 2) ** 2
    drift = abs(mass1 - mass0) / max(mass0, 1e-300) / params.t_final
    _write_json(
        out,
        "solve",
        {
            "command": "solve",
            "grid": list(grid.key()),
            "signature": cfg["signature"],
            "kind": cfg["kind"],
            "kappa": cfg["kappa"],
            "nu": cfg["nu"],
            "mu": cfg["mu"],
            "lam": list(lam),
            "dt": cfg["dt"],
            "t_final": cfg["t_final"],
            "amplitude": cfg["amplitude"],
            "carrier": carrier,
            "seed": seed,
            "final_l2": math.sqrt(mass1),
            "mass_drift_per_unit_time": drift,
            "trace_max": {lab: max(row[lab] for row in trace) for lab in labels},
        },
    )
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for lab in labels:
        ax.plot([row["t"] for row in trace], [row[lab] for row in trace],
                lw=1.2, label=lab)
    ax.set_xlabel("t")
    ax.set_ylabel("window semi-norm")
    ax.legend()
    ax.set_title(f"{cfg['kind']} evolution, {cfg['signature']} symbol")
    fig.tight_layout()
    _save_figure(plt, fig, out, "solve")
    print(
        f"solve: t_final={params.t_final:g} final_l2={math.sqrt(mass1):.9e}"
        f" mass_drift={drift:.3e}"
    )
    return 0


def _cmd_picard(args):
    cfg = _take(
        "picard",
        _load_config(args.config),
        {
            **_GRID_SCHEMA,
            "signature": (_as_str, "hyperbolic"),
            "kind": (_as_str, "power"),
            "kappa": (_as_int, 1),
            "nu": (_as_int, 1),
            "mu": (_as_float, 1.0),
            "lam": (_optional(_as_float_list), None),
            "window": (_as_float, 0.5),
            "iterates": (_as_int, 4),
            "slices": (_as_int, 33),
            "amplitude": (_as_float, 0.01),
            "carrier": (_as_int_list, [1, -1]),
            "seed": (_optional(_as_seed), None),
        },
    )
    seed = _resolve_seed("picard", args, cfg, required=False)
    grid = make_grid(cfg["dim"], cfg["half_extent"], cfg["samples"])
    eps = _signature(cfg["signature"], grid.dim)
    carrier = cfg["carrier"]
    if len(carrier) != grid.dim:
        raise CliError("picard: config key 'carrier' must match the dimension")
    lam = tuple(cfg["lam"]) if cfg["lam"] is not None else ()
    params = SolverParams(
        signature=eps,
        kind=cfg["kind"],
        lam=lam,
        kappa=cfg["kappa"],
        mu=cfg["mu"],
        nu=cfg["nu"],
        dt=cfg["window"],
        t_final=cfg["window"],
    )
    atom = gauss_atom(grid, carrier, (0,) * grid.dim)
    u0 = atom.map(cfg["amplitude"] * atom.values / lp_norm(atom, 2))
    trace = picard_iterate(
        u0, params, cfg["iterates"], cfg["window"], slices=cfg["slices"]
    )

    rows = []
    for j, d in enumerate(trace.distances):
        ratio = trace.ratios[j - 1] if j >= 1 else ""
        rows.append((j + 1, d, ratio))
    out = _ensure_out(args)
    _write_csv(out, "picard", ["iterate", "distance", "ratio"], rows)
    payload = trace.as_dict()
    payload["command"] = "picard"
    payload["seed"] = seed
    _write_json(out, "picard", payload)

    plt = _figure()
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    pos = [(j + 1, d) for j, d in enumerate(trace.distances) if d > 0]
    if pos:
        ax.semilogy([p[0] for p in pos], [p[1] for p in pos], "o-")
    ax.set_xlabel("iterate")
    ax.set_ylabel("successive distance")
    ax.set_title("fixed-point iteration")
    fig.tight_layout()
    _save_figure(plt, fig, out, "picard")

    last = trace.distances[-1]
    worst = max(trace.ratios) if trace.ratios else float("nan")
    print(
        f"picard: final_distance={last:.3e} max_ratio={worst:.3e}"
        f" diverged={trace.diverged}"
    )
    if trace.diverged:
        print("modlab: numerical failure: iteration diverged", file=sys.stderr)
        return 2
    return 0


def _cmd_blowup(args):
    cfg = _take(
        "blowup",
        _load_config(args.config),
        {
            "t_star": (_as_float, 2.0),
            "offsets": (_as_float_list, [0.1, 0.01, 0.001]),
            "half_extent": (_as_extent, (4.2, 1.0)),
            "samples": (_as_samples, (1024, 64)),
            "patch_extent": (_as_float, 2.0),
            "patch_samples": (_as_int, 48),
            "h": (_as_float, 1e-3),
            "seed": (_optional(_as_seed), None),
        },
    )
    seed = _resolve_seed("blowup", args, cfg, required=False)
    grid = make_grid(2, cfg["half_extent"], cfg["samples"])
    patch = make_grid(2, cfg["patch_extent"], cfg["patch_samples"])
    T = cfg["t_star"]

    sphere = blowup_sphere(1.0, patch)
    stack = sphere.stack()
    unit_gap = float(np.max(np.abs(np.sum(stack * stack, axis=0) - 1.0)))
    map_res = schmap_residual(1.0, patch, cfg["h"])
    chart_res = blowup_u_residual(T - 1.0, T, patch, cfg["h"])

    rows = []
    closest = None
    for off in cfg["offsets"]:
        u, rep = blowup_u(T - off, T, grid)
        peak = float(np.max(np.abs(u.values)))
        rows.append(
            (off, peak, rep["count"], rep["min_denominator"], rep["suppressed"])
        )
        closest = u
    out = _ensure_out(args)
    _write_csv(
        out,
        "blowup",
        ["offset", "max_abs_u", "cells_above", "min_denominator", "suppressed"],
        rows,
    )
    _write_json(
        out,
        "blowup",
        {
            "command": "blowup",
            "t_star": T,
            "offsets": cfg["offsets"],
            "grid": list(grid.key()),
            "patch": list(patch.key()),
            "h": cfg["h"],
            "seed": seed,
            "sphere_unit_gap": unit_gap,
            "map_residual": map_res,
            "chart_residual": chart_res,
            "rows": [
                {
                    "offset": r[0],
                    "max_abs_u": r[1],
                    "cells_above": r[2],
                    "min_denominator": r[3],
                    "suppressed": r[4],
                }
                for r in rows
            ],
        },
    )
    plt = _figure()
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    L0, L1 = grid.half_extent
    im = ax.imshow(
        np.log10(1.0 + np.abs(closest.values)).T,
        origin="lower",
        extent=(-L0, L0, -L1, L1),
        aspect="auto",
        cmap="inferno",
    )
    fig.colorbar(im, ax=ax, shrink=0.85, label="log10(1 + |u|)")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_title(f"amplitude at offset {cfg['offsets'][-1]:g} before the singular time")
    fig.tight_layout()
    _save_figure(plt, fig, out, "blowup")
    print(
        f"blowup: max_abs_u={rows[-1][1]:.6g} at offset {rows[-1][0]:g},"
        f" map_residual={map_res:.3e}"
    )
    return 0


def _cmd_inflate(args):
    cfg = _take(
        "inflate",
        _load_config(args.config),
        {
            "kappa": (_as_int, 1),
            "s": (_as_float, 0.0),
            "N": (_as_int_list, [8, 16, 32, 64]),
            "T": (_as_float, 0.25),
            "slices": (_as_int, 65),
            "eps": (_as_float, 0.125),
            "seed": (_optional(_as_seed), None),
        },
    )
    seed = _resolve_seed("inflate", args, cfg, required=False)
    kappa = args.kappa if args.kappa is not None else cfg["kappa"]
    s = args.s if args.s is not None else cfg["s"]
    n_list = args.N if args.N is not None else cfg["N"]
    slope, rows = norm_inflation_sweep(
        kappa,
        s,
        n_list,
        T=cfg["T"],
        eps_width=cfg["eps"],
        slices=cfg["slices"],
    )

    out = _ensure_out(args)
    _write_csv(
        out,
        "inflate",
        ["N", "norm", "data_norm"],
        [(r["N"], r["norm"], r["data_norm"]) for r in rows],
    )
    _write_json(
        out,
        "inflate",
        {
            "command": "inflate",
            "kappa": kappa,
            "s": s,
            "N": list(n_list),
            "T": cfg["T"],
            "slices": cfg["slices"],
            "eps": cfg["eps"],
            "seed": seed,
            "slope": slope,
            "rows": rows,
        },
    )
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ns = [r["N"] for r in rows]
    vals = [r["norm"] for r in rows]
    ax.loglog(ns, vals, "o", base=2, label="response norm")
    if len(ns) >= 2:
        xs = np.log2(np.asarray(ns, dtype=float))
        coeff = np.polyfit(xs, np.log2(np.asarray(vals)), 1)
        grid_x = np.linspace(xs[0], xs[-1], 50)
        ax.loglog(2.0**grid_x, 2.0 ** np.polyval(coeff, grid_x), "-", lw=1.0,
                  base=2, label=f"slope {slope:+.3f}")
    ax.set_xlabel("carrier frequency N")
    ax.set_ylabel("window norm of the cubic response")
    ax.legend()
    ax.set_title(f"kappa={kappa}, s={s:g}")
    fig.tight_layout()
    _save_figure(plt, fig, out, "inflate")
    print(f"inflate: kappa={kappa} s={s:g} slope={slope:+.4f}")
    return 0


def _cmd_embed(args):
    cfg = _take(
        "embed",
        _load_config(args.config),
        {
            "half_extent": (_as_extent, 8.0 * _PI),
            "samples": (_as_samples, 224),
            "s": (_as_float, 0.0),
            "b": (_as_float, 2.0),
            "modulation_limit": (_as_int, 10),
            "seed": (_optional(_as_seed), None),
        },
    )
    seed = _resolve_seed("embed", args, cfg, required=False)
    grid = make_grid(2, cfg["half_extent"], cfg["samples"])
    family = embedding_family(grid, modulation_limit=cfg["modulation_limit"])
    if cfg["b"] <= grid.dim / 2.0:
        raise CliError("embed: config key 'b' must exceed half the dimension")
    part = build_partition(grid)
    spec = NormSpec(cfg["s"], 1, 1)
    rows = []
    for j, f in enumerate(family):
        strong = weighted_sobolev_norm(f, cfg["s"] + cfg["b"], cfg["b"])
        weak = modulation_norm(f, spec, part)
        ratio = weak / strong if strong > 0 else float("nan")
        rows.append((j, strong, weak, ratio))
    best = max(r[3] for r in rows if math.isfinite(r[3]))

    out = _ensure_out(args)
    _write_csv(
        out,
        "embed",
        ["member", "weighted_sobolev", "decomposition_norm", "ratio"],
        rows,
    )
    _write_json(
        out,
        "embed",
        {
            "command": "embed",
            "grid": list(grid.key()),
            "s": cfg["s"],
            "b": cfg["b"],
            "modulation_limit": cfg["modulation_limit"],
            "seed": seed,
            "members": len(rows),
            "max_ratio": best,
        },
    )
    plt = _figure()
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot([r[0] for r in rows], [r[3] for r in rows], "o")
    ax.axhline(best, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("family member")
    ax.set_ylabel("norm ratio")
    ax.set_title(f"embedding ratios, s={cfg['s']:g}, b={cfg['b']:g}")
    fig.tight_layout()
    _save_figure(plt, fig, out, "embed")
    print(f"embed: max_ratio={best:.6f} over {len(rows)} members")
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_common(sp):
    sp.add_argument("--config", metavar="PATH", default=None,
                    help="JSON config file; every key is validated")
    sp.add_argument("--out", metavar="DIR", default="modlab-out",
                    help="output directory (default: modlab-out)")
    sp.add_argument("--seed", metavar="U64", type=_parse_seed_flag,
                    default=None, help="RNG seed; overrides the config")


def build_parser():
    parser = _Parser(
        prog="modlab",
        description="Numerical laboratory for frequency-uniform analysis"
        " and non-elliptic propagation.",
        epilog="MODLAB_THREADS caps worker threads in the sweep commands.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    sp = sub.add_parser("partition-check",
                        help="unity and reconstruction checks for the partition")
    _add_common(sp)
    sp.set_defaults(func=_cmd_partition_check)

    sp = sub.add_parser("norm", help="decomposition norm of a random field")
    _add_common(sp)
    sp.set_defaults(func=_cmd_norm)

    sp = sub.add_parser("gabor", help="frame analysis round trip and bounds")
    _add_common(sp)
    sp.set_defaults(func=_cmd_gabor)

    sp = sub.add_parser("propagate",
                        help="closed form versus spectral propagation")
    _add_common(sp)
    sp.set_defaults(func=_cmd_propagate)

    sp = sub.add_parser("estimate", help="one dispersive ratio sweep")
    _add_common(sp)
    sp.add_argument("--case", metavar="ID", default=None,
                    help="estimate case id (see the error text for the list)")
    sp.set_defaults(func=_cmd_estimate)

    sp = sub.add_parser("solve", help="march the nonlinear evolution")
    _add_common(sp)
    sp.set_defaults(func=_cmd_solve)

    sp = sub.add_parser("picard", help="fixed-point iteration on one window")
    _add_common(sp)
    sp.set_defaults(func=_cmd_picard)

    sp = sub.add_parser("blowup", help="probe the singular closed-form family")
    _add_common(sp)
    sp.set_defaults(func=_cmd_blowup)

    sp = sub.add_parser("inflate", help="norm growth of modulated plateau data")
    _add_common(sp)
    sp.add_argument("--kappa", type=int, default=None, metavar="K",
                    help="interaction power (overrides the config)")
    sp.add_argument("--s", type=float, default=None, metavar="S",
                    help="regularity index (overrides the config)")
    sp.add_argument("--N", type=_parse_n_flag, default=None, metavar="LIST",
                    help="comma list of carrier frequencies, e.g. 8,16,32,64")
    sp.set_defaults(func=_cmd_inflate)

    sp = sub.add_parser("embed", help="norm ratio sweep over a fixed family")
    _add_common(sp)
    sp.set_defaults(func=_cmd_embed)

    return parser


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            return 1
        return args.func(args)
    except CliError as exc:
        print(f"modlab: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"modlab: {exc}", file=sys.stderr)
        return 1
    except BlowUpError as exc:
        print(f"modlab: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
