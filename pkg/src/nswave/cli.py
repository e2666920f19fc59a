"""Command line front end: configured runs with manifests and summaries.

    nswave simulate2d --config run.cfg --out results/

Each subcommand resolves its config (defaults filled in, unknown keys
rejected), runs, and writes into the output directory:

    manifest.json     resolved config, seed, threads, timing, checks
    summary.txt       one PASS or FAIL line per check with the measured value
    diagnostics.csv   time series of norms and residuals, for runs that evolve
    snapshots/        spectral field files, when run.snapshot_stride >= 1

Passing a finished manifest.json as --config reproduces the run it
records; its seed and thread count are adopted unless overridden on the
command line. The exit status is 0 exactly when every check passed.

Geometry conventions for subcommands that pair a 2D profile with a 3D
box: picard and contraction read grid.periods as the profile-plane
periods (P_w, P_z) and build the canonical commensurable 3D box on
grid.points; stability and cgl (stability mode) read grid.* as the 3D
box and derive the profile grid from its x and z axes.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from . import cgl as _cgl
from . import experiments as _exp
from .config import SCHEMAS, RunManifest, config_from_file, resolve_config
from .field import SpectralField
from .fieldio import read_field, write_diagnostics_csv, write_field
from .grid import GridSpec, set_fft_workers
from .operators import (
    divergence_residual,
    l2_norm_spectral,
    lp_norm,
    random_div_free,
)
from .picard import PicardConfig, picard_solve
from .planewave import (
    ModeMap,
    WaveProfile,
    canonical_box,
    commutation_check,
    embed_W,
    wave_scale,
)
from .solver import SolverConfig, duhamel_residual, evolve, evolve_perturbation

__all__ = ["main"]

_HELP = {
    "simulate2d": "evolve 2D velocity data and check its invariants",
    "simulate3d": "evolve 3D velocity data and check its invariants",
    "planewave-check": "verify 2D-profile / 3D-box evolution commutation",
    "picard": "run the weighted-norm iteration against a background wave",
    "stability": "perturb a decayed wave and measure the decay exponents",
    "heatdecay": "verify heat-flow smoothing rates on closed-form data",
    "contraction": "measure the Lipschitz ratio of the integral map",
    "scan": "scan initial sizes for growth of the critical envelope",
    "cgl": "Ginzburg-Landau runs: evolve, planewave-check, or stability",
}


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _summary_lines(checks) -> list[str]:
    return [f"{'PASS' if ok else 'FAIL'} {name} = {_fmt(value)}"
            for name, ok, value in checks]


def _axis_values(cfg: dict, key: str, dim: int, kind=float) -> tuple:
    vals = cfg[key]
    if len(vals) == 1:
        vals = vals * dim
    if len(vals) != dim:
        raise ValueError(f"{key} needs 1 or {dim} values, got {len(vals)}")
    return tuple(kind(v) for v in vals)


def _grid_from(cfg: dict, prefix: str, dim: int) -> GridSpec:
    points = _axis_values(cfg, f"{prefix}.points", dim, int)
    periods = _axis_values(cfg, f"{prefix}.periods", dim, float)
    return GridSpec(dim, points, periods,
                    dealias_fraction=cfg[f"{prefix}.dealias"])


def _write_csv(path: Path, header, columns) -> None:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(f"{float(v):.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _save_diagnostics(out: Path, traj) -> list[str]:
    write_diagnostics_csv(out / "diagnostics.csv", traj)
    return ["diagnostics.csv"]


def _save_snapshots(out: Path, traj) -> list[str]:
    snap = out / "snapshots"
    snap.mkdir(parents=True, exist_ok=True)
    outputs = []
    index = ["index,t"]
    for i, (t, state) in enumerate(zip(traj.times, traj.states)):
        name = f"snapshots/state_{i:06d}.f64"
        write_field(out / name, state, wave_speed=traj.wave_speed)
        index.append(f"{i},{t:.17g}")
        outputs.append(name)
    (snap / "times.csv").write_text("\n".join(index) + "\n", encoding="utf-8")
    outputs.append("snapshots/times.csv")
    return outputs


def _write_fits_csv(out: Path, fits) -> str:
    _write_csv(out / "fits.csv",
               ("p", "slope", "theory_slope", "residual",
                "window_lo", "window_hi"),
               ([f.p for f in fits], [f.slope for f in fits],
                [f.theory_slope for f in fits], [f.residual for f in fits],
                [f.window[0] for f in fits], [f.window[1] for f in fits]))
    return "fits.csv"


def _energy_growth(traj) -> float:
    """Largest upward step of the energy, relative to the initial energy."""
    e = np.asarray(traj.step_energies, dtype=float)
    if e.size < 2 or e[0] <= 0:
        return 0.0
    return float(max(np.diff(e).max(), 0.0) / e[0])


def _rel_l2(f: SpectralField, ref: SpectralField) -> float:
    return l2_norm_spectral(f - ref) / l2_norm_spectral(ref)


def _envelope_growth(traj, p: float, window: tuple) -> float:
    """Max over window of tau^{(1-3/p)/2} ||v||_p, relative to its start."""
    alpha = (1.0 - 3.0 / p) / 2.0
    ws = [(row.t - traj.t0) ** alpha * row.lp[p]
          for row in traj.diagnostics
          if window[0] <= row.t - traj.t0 <= window[1]]
    if not ws:
        return float("inf")
    return float(max(ws) / ws[0])


def _halves_growth(taus, vals) -> float:
    """Late-half max of a weighted series relative to its early-half max."""
    taus = np.asarray(taus, dtype=float)
    vals = np.asarray(vals, dtype=float)
    if taus.size < 4:
        return float("inf")
    mid = taus[0] + (taus[-1] - taus[0]) / 2.0
    early = vals[taus <= mid]
    late = vals[taus > mid]
    if early.size == 0 or late.size == 0 or early.max() <= 0:
        return float("inf")
    return float(late.max() / early.max())


def _initial_velocity(cfg: dict, grid: GridSpec, seed: int) -> SpectralField:
    kind = cfg["ic.kind"]
    if kind == "taylor-green":
        if grid.dim != 2:
            raise ValueError("taylor-green initial data is 2D")
        return _exp.taylor_green(grid)
    if kind == "random":
        return random_div_free(grid, seed, cfg["ic.max_mode"],
                               cfg["ic.amplitude"])
    if kind == "file":
        if not cfg["ic.file"]:
            raise ValueError("ic.kind = file requires ic.file")
        field, _ = read_field(cfg["ic.file"])
        return field
    raise ValueError(f"unknown ic.kind {kind!r}")


def _run_simulate(cfg: dict, out: Path, seed: int, dim: int):
    grid = _grid_from(cfg, "grid", dim)
    u0 = _initial_velocity(cfg, grid, seed)
    grid = u0.grid
    scfg = SolverConfig(dt=cfg["run.dt"], t_final=cfg["run.t_final"],
                        nu=cfg["run.nu"],
                        snapshot_stride=cfg["run.snapshot_stride"],
                        diag_stride=cfg["run.diag_stride"])
    traj = evolve(u0, scfg)
    outputs = _save_diagnostics(out, traj)
    if cfg["run.snapshot_stride"] >= 1:
        outputs += _save_snapshots(out, traj)

    checks = []
    growth = _energy_growth(traj)
    checks.append(("energy_monotone", growth <= 1e-8, growth))
    div_tol = cfg.get("check.div_tol", 1e-12)
    div = traj.max_divergence_residual()
    checks.append(("div_residual", div <= div_tol, div))
    if cfg["ic.kind"] == "taylor-green":
        ref = _exp.taylor_green(grid, traj.final_time, cfg["run.nu"])
        err = _rel_l2(traj.final_state, ref)
        checks.append(("closed_form_error", err <= cfg["check.tol"], err))
        e0 = float(traj.step_energies[0])
        e_ref = e0 * np.exp(-4.0 * cfg["run.nu"] * traj.final_time)
        e_err = abs(float(traj.step_energies[-1]) - e_ref) / e0
        checks.append(("closed_form_energy", e_err <= cfg["check.tol"], e_err))
    if cfg["run.snapshot_stride"] == 1 and abs(cfg["run.dt"] - 1e-3) <= 1e-15:
        resid = duhamel_residual(traj, u0)
        checks.append(("duhamel_residual", resid <= 1e-6, resid))
    return checks, outputs


def _run_simulate2d(cfg, out, seed):
    return _run_simulate(cfg, out, seed, 2)


def _run_simulate3d(cfg, out, seed):
    return _run_simulate(cfg, out, seed, 3)


def _run_planewave_check(cfg: dict, out: Path, seed: int):
    grid2 = _grid_from(cfg, "profile", 2)
    c = cfg["wave.c"]
    h = random_div_free(grid2, seed, cfg["ic.max_mode"], cfg["ic.amplitude"],
                        components=2)
    prof = WaveProfile(h, c).divergence_free()
    pts3 = cfg["wave.points3"]
    if pts3 == (0,):
        grid3 = canonical_box(grid2, c)
    else:
        if len(pts3) == 1:
            pts3 = pts3 * 3
        grid3 = canonical_box(grid2, c, points=tuple(int(v) for v in pts3))
    n_steps = int(round(cfg["run.t_final"] / cfg["run.dt"]))
    scfg = SolverConfig(dt=cfg["run.dt"], t_final=cfg["run.t_final"],
                        nu=cfg["run.nu"],
                        snapshot_stride=max(1, n_steps // 10), diag_stride=0)
    mismatch = commutation_check(prof, scfg, grid3)

    mm = ModeMap(grid2, grid3, prof.c)
    phi0 = embed_W(prof, grid3)
    back, off = mm.extract_vector(phi0.coeffs)
    h2 = SpectralField(grid2, back, real_space=prof.h.real_space)
    roundtrip = max(_rel_l2(h2, prof.h), off)
    div = divergence_residual(phi0)

    checks = [
        ("commutation_mismatch", mismatch <= cfg["check.tol"], mismatch),
        ("embed_roundtrip", roundtrip <= 1e-12, roundtrip),
        ("embedded_div_residual", div <= 1e-12, div),
    ]
    return checks, []


def _profile_pair(cfg: dict, seed: int):
    """Profile grid from grid.periods (P_w, P_z) plus the canonical box."""
    c = cfg["wave.c"]
    per2 = _axis_values(cfg, "grid.periods", 2, float)
    pts3 = _axis_values(cfg, "grid.points", 3, int)
    ppts = cfg.get("profile.points", (0,))
    if ppts == (0,):
        ppts = (pts3[0], pts3[2])
    elif len(ppts) == 1:
        ppts = ppts * 2
    g2 = GridSpec(2, tuple(int(v) for v in ppts), per2,
                  dealias_fraction=cfg["grid.dealias"])
    grid3 = canonical_box(g2, c, points=pts3)
    h = random_div_free(g2, seed + 1, cfg["profile.max_mode"],
                        cfg["profile.amplitude"], components=2)
    return WaveProfile(h, c).divergence_free(), grid3


def _run_picard(cfg: dict, out: Path, seed: int):
    prof, grid3 = _profile_pair(cfg, seed)
    t_star = cfg["picard.t_star"]
    scfg = SolverConfig(dt=cfg["run.dt"], t_final=t_star, nu=cfg["run.nu"],
                        snapshot_stride=1, diag_stride=1)
    traj2 = evolve(prof.h, scfg)
    traj2.wave_speed = prof.c

    v0 = random_div_free(grid3, seed, cfg["ic.max_mode"], 1.0)
    v0 = _exp.rescale_lp(v0, 3.0, cfg["ic.amplitude"])
    pcfg = PicardConfig(T_star=t_star, L=cfg["picard.l_rate"] or None,
                        gammas=cfg["picard.gammas"],
                        holder_p=cfg["picard.holder_p"],
                        max_iter=cfg["picard.max_iter"],
                        eps=cfg["picard.eps"])
    ptraj, rep = picard_solve(v0, traj2, pcfg, scfg)

    direct = evolve_perturbation(v0, traj2, scfg)
    denom = max(l2_norm_spectral(s) for s in direct.states)
    fp_err = max(l2_norm_spectral(a - b)
                 for a, b in zip(ptraj.states, direct.states)) / denom

    checks = [
        ("initial_size_small", rep.eps_ok, rep.v0_l3),
        ("background_moderate", rep.M <= 2.0, rep.M),
        ("increment_ratios", bool(rep.ratios)
         and max(rep.ratios) <= cfg["check.ratio_bound"],
         max(rep.ratios) if rep.ratios else float("inf")),
        ("iteration_diverged", not rep.diverged, rep.diverged),
        ("recurrence_gap", rep.recurrence_gap <= 1e-9, rep.recurrence_gap),
        ("fixed_point_error", fp_err <= cfg["check.fp_tol"], fp_err),
    ]
    outputs = _save_diagnostics(out, direct)
    n = list(range(1, len(rep.W) + 1))
    _write_csv(out / "picard_norms.csv", ("n", "W", "K", "K_grad"),
               (n, rep.W, rep.K, rep.K_grad))
    outputs.append("picard_norms.csv")
    return checks, outputs


def _stability_geometry(cfg: dict):
    """3D box from grid.*, profile grid from its x and z axes."""
    c = cfg["wave.c"]
    pts3 = _axis_values(cfg, "grid.points", 3, int)
    per3 = _axis_values(cfg, "grid.periods", 3, float)
    s = wave_scale(c)
    g2 = GridSpec(2, (pts3[0], pts3[2]), (per3[0] / s, per3[2]),
                  dealias_fraction=cfg["grid.dealias"])
    return c, g2, pts3


def _run_stability(cfg: dict, out: Path, seed: int):
    c, g2, pts3 = _stability_geometry(cfg)
    h = _exp.ring_profile(g2, seed + 1, cfg["profile.mode_band"],
                          cfg["profile.amplitude"], components=2)
    prof = WaveProfile(h, c)
    grid3 = canonical_box(g2, c, points=pts3)
    spec = _exp.BumpSpec(radius=cfg["stability.radius"],
                         core=cfg["stability.core"] or None)
    window = tuple(cfg["stability.window"])
    rcfg = _exp.StabilityRunConfig(
        prof0=prof, v0_spec=spec, eps=cfg["stability.eps"],
        delta=cfg["stability.delta"], T=cfg["stability.t_final"],
        grid3=grid3, window=window, dt=cfg["run.dt"], seed=seed,
        diag_stride=cfg["run.diag_stride"])
    vtraj, fits = _exp.stability_run(rcfg)
    by_p = {float(f.p): f for f in fits}

    outputs = _save_diagnostics(out, vtraj)
    outputs.append(_write_fits_csv(out, fits))

    t_a, t_b = window
    t_box = _exp.finite_box_time(grid3, spec.radius)
    t_b_eff = min(t_b, t_box) if t_box > 0 else t_b
    span = t_b_eff / t_a
    checks = [("fit_window_span", True, span)]
    if span >= 10.0:
        lo, hi = cfg["check.p3_band"]
        f3 = by_p[3.0]
        checks.append(("slope_p3", lo <= f3.slope <= hi, f3.slope))
        f6 = by_p[6.0]
        checks.append(("slope_p6",
                       abs(f6.slope - f6.theory_slope) <= cfg["check.p6_tol"],
                       f6.slope))
        fi = by_p[float("inf")]
        checks.append(("slope_pinf",
                       abs(fi.slope - fi.theory_slope) <= cfg["check.pinf_tol"],
                       fi.slope))
    else:
        bound = cfg["check.envelope_growth"]
        for p in (3.0, 6.0, np.inf):
            g = _envelope_growth(vtraj, p, (t_a, t_b_eff))
            checks.append((f"envelope_p{p:g}", g <= bound, g))
    eps0 = rcfg.eps
    guard = max(row.lp[3.0] for row in vtraj.diagnostics) / eps0
    checks.append(("l3_growth_guard", guard <= 10.0, guard))
    div = vtraj.max_divergence_residual()
    checks.append(("div_residual", div <= 1e-12, div))
    return checks, outputs


def _run_heatdecay(cfg: dict, out: Path, seed: int):
    qs, ps, ds = cfg["heat.qs"], cfg["heat.ps"], cfg["heat.ds"]
    if not len(qs) == len(ps) == len(ds):
        raise ValueError("heat.qs, heat.ps and heat.ds must align")
    checks = []
    outputs = []
    for q, p, d in zip(qs, ps, ds):
        rep = _exp.heat_estimate_check(
            q, p, d, t_min=cfg["heat.t_min"], t_max=cfg["heat.t_max"],
            num=cfg["heat.num"], sigma=cfg["heat.sigma"],
            flat_tol=cfg["check.flat_tol"])
        tag = f"q{q:g}_p{p:g}_d{d}"
        sel = rep.times >= rep.times[-1] / 10.0
        flat = max(_variation(rep.ratio_same_time[sel]),
                   _variation(rep.grad_ratio_same_time[sel]))
        checks.append((f"flat_{tag}", rep.flat_ok and rep.grad_flat_ok, flat))
        bound = max(float(rep.ratio.max()), float(rep.grad_ratio.max()))
        checks.append((f"bounded_{tag}",
                       rep.bounded_ok and rep.grad_bounded_ok, bound))
        if rep.contraction_ok is not None:
            checks.append((f"contraction_{tag}", rep.contraction_ok,
                           float(rep.ratio[-1])))
        name = f"heat_{tag}.csv"
        _write_csv(out / name,
                   ("t", "ratio", "ratio_same_time", "grad_ratio",
                    "grad_ratio_same_time"),
                   (rep.times, rep.ratio, rep.ratio_same_time, rep.grad_ratio,
                    rep.grad_ratio_same_time))
        outputs.append(name)
    return checks, outputs


def _variation(series: np.ndarray) -> float:
    series = np.asarray(series, dtype=float)
    if series.size == 0 or series.mean() == 0:
        return float("inf")
    return float((series.max() - series.min()) / series.mean())


def _run_contraction(cfg: dict, out: Path, seed: int):
    prof, grid3 = _profile_pair(cfg, seed)
    T = cfg["contraction.t_final"]
    rcfg = _exp.StabilityRunConfig(
        prof0=prof,
        v0_spec=_exp.BumpSpec(radius=min(grid3.period_per_axis) / 32.0),
        eps=cfg["contraction.eps"], delta=cfg["contraction.delta"], T=T,
        grid3=grid3, window=(T / 4.0, T / 2.0), dt=cfg["run.dt"], seed=seed)
    rep = _exp.phi_contraction_check(rcfg, cfg["contraction.pairs"],
                                     max_mode=cfg["contraction.max_mode"])
    checks = [
        ("max_contraction_ratio",
         rep.max_ratio <= cfg["check.ratio_bound"], rep.max_ratio),
        ("pairs_tested", len(rep.ratios) == cfg["contraction.pairs"],
         len(rep.ratios)),
        ("no_expansion_failures", not rep.failures, len(rep.failures)),
    ]
    _write_csv(out / "contraction_ratios.csv", ("pair", "ratio"),
               (list(range(len(rep.ratios))), rep.ratios))
    return checks, ["contraction_ratios.csv"]


def _run_scan(cfg: dict, out: Path, seed: int):
    grid3 = _grid_from(cfg, "grid", 3)
    rep = _exp.kato_smallness_scan(
        grid3, cfg["scan.amplitudes"], dt=cfg["run.dt"],
        t_final=cfg["scan.t_final"], seed=seed,
        max_mode=cfg["scan.max_mode"], diag_stride=cfg["scan.diag_stride"])
    checks = [
        ("amplitudes_scanned", len(rep.rows) == len(cfg["scan.amplitudes"]),
         len(rep.rows)),
        ("bounded_frontier", rep.frontier > 0.0, rep.frontier),
    ]
    _write_csv(out / "scan.csv",
               ("amplitude", "bounded", "peak_envelope"),
               ([r.amplitude for r in rep.rows],
                [float(r.bounded) for r in rep.rows],
                [float(np.max(r.envelope)) if len(r.envelope) else float("nan")
                 for r in rep.rows]))
    return checks, ["scan.csv"]


def _run_cgl(cfg: dict, out: Path, seed: int):
    mode = cfg["cgl.mode"]
    if mode == "evolve":
        return _run_cgl_evolve(cfg, out, seed)
    if mode == "planewave-check":
        return _run_cgl_planewave(cfg, out, seed)
    if mode == "stability":
        return _run_cgl_stability(cfg, out, seed)
    raise ValueError(f"unknown cgl.mode {mode!r}")


def _run_cgl_evolve(cfg: dict, out: Path, seed: int):
    pts = cfg["grid.points"]
    dim = 2 if len(pts) == 1 else len(pts)
    grid = _grid_from(cfg, "grid", dim)
    kind = cfg["ic.kind"]
    if kind == "random":
        f0 = _cgl.random_scalar_field(grid, seed, max_mode=cfg["ic.max_mode"],
                                      amplitude=cfg["ic.amplitude"])
    elif kind == "constant":
        f0 = _cgl.cgl_field(grid, np.full(grid.shape, cfg["ic.amplitude"],
                                          dtype=np.complex128))
    elif kind == "file":
        if not cfg["ic.file"]:
            raise ValueError("ic.kind = file requires ic.file")
        f0, _ = read_field(cfg["ic.file"])
        grid = f0.grid
    else:
        raise ValueError(f"unknown ic.kind {kind!r}")

    eps, k = cfg["cgl.eps"], cfg["cgl.k"]
    user_stride = cfg["run.snapshot_stride"]
    n_steps = int(round(cfg["run.t_final"] / cfg["run.dt"]))
    stride = user_stride if user_stride >= 1 else (1 if n_steps <= 2000 else 0)
    eq = _cgl.CGLConfig(eps=eps, k=k, dt=cfg["run.dt"],
                        t_final=cfg["run.t_final"], snapshot_stride=stride,
                        diag_stride=cfg["run.diag_stride"])
    traj = _cgl.cgl_evolve(f0, eq)
    outputs = _save_diagnostics(out, traj)
    if user_stride >= 1:
        outputs += _save_snapshots(out, traj)

    checks = []
    erep = _cgl.cgl_energy_identity_check(traj, eps, k)
    checks.append(("energy_instant_defect",
                   erep.max_instant_defect <= cfg["check.instant_tol"],
                   erep.max_instant_defect))
    if stride == 1:
        checks.append(("energy_step_defect",
                       erep.max_step_defect <= cfg["check.step_tol"],
                       erep.max_step_defect))
    growth = _energy_growth(traj)
    checks.append(("energy_monotone", growth <= 1e-8, growth))
    if kind == "constant":
        a0 = complex(cfg["ic.amplitude"], 0.0)
        a_num = complex(traj.final_state.coeffs[(0,) * (grid.dim + 1)]
                        / grid.num_points)
        grow = 1.0 + 2.0 * k * abs(a0) ** 2 * traj.final_time
        a_ref = a0 * grow ** -0.5 * np.exp(1j * np.log(grow) / (2.0 * k))
        err = abs(a_num - a_ref) / abs(a_ref)
        checks.append(("constant_mode_error", err <= cfg["check.ode_tol"],
                       err))
    if n_steps <= 2000:
        d = _cgl.gauge_covariance_defect(f0, eq, 0.7)
        checks.append(("gauge_covariance", d <= 1e-12, d))
    return checks, outputs


def _run_cgl_planewave(cfg: dict, out: Path, seed: int):
    grid2 = _grid_from(cfg, "grid", 2)
    f0 = _cgl.random_scalar_field(grid2, seed, max_mode=cfg["ic.max_mode"],
                                  amplitude=cfg["ic.amplitude"])
    n_steps = int(round(cfg["run.t_final"] / cfg["run.dt"]))
    eq = _cgl.CGLConfig(eps=cfg["cgl.eps"], k=cfg["cgl.k"], dt=cfg["run.dt"],
                        t_final=cfg["run.t_final"],
                        snapshot_stride=max(1, n_steps // 10),
                        diag_stride=n_steps)
    res = _cgl.cgl_commutation_check(f0, cfg["wave.c"], eq)
    checks = [
        ("commutation_mismatch", res["mismatch"] <= cfg["check.commute_tol"],
         res["mismatch"]),
        ("embed_roundtrip", res["roundtrip"] <= 1e-12, res["roundtrip"]),
    ]
    return checks, []


def _run_cgl_stability(cfg: dict, out: Path, seed: int):
    c, g2, pts3 = _stability_geometry(cfg)
    prof0 = _exp.ring_profile(g2, seed + 1, cfg["profile.mode_band"],
                              cfg["profile.amplitude"], components=1,
                              real=False)
    grid3 = canonical_box(g2, c, points=pts3)
    eps_eq, k_eq = cfg["cgl.eps"], cfg["cgl.k"]
    window = tuple(cfg["stability.window"])
    spec = _exp.BumpSpec(radius=cfg["stability.radius"],
                         core=cfg["stability.core"] or None)
    eq = _cgl.CGLConfig(eps=eps_eq, k=k_eq, dt=cfg["run.dt"],
                        t_final=cfg["stability.t_final"])
    rcfg = _cgl.CGLStabilityConfig(
        prof0=prof0, v0_spec=spec, eps=cfg["stability.eps"],
        delta=cfg["stability.delta"], T=cfg["stability.t_final"],
        grid3=grid3, window=window, dt=cfg["run.dt"], eq=eq, wave_speed=c,
        seed=seed, diag_stride=cfg["run.diag_stride"])
    vtraj, fits = _cgl.cgl_stability_run(rcfg)
    by_p = {float(f.p): f for f in fits}

    outputs = _save_diagnostics(out, vtraj)
    outputs.append(_write_fits_csv(out, fits))

    t_a, t_b = window
    t_box = _exp.finite_box_time(grid3, spec.radius, nu=eps_eq)
    t_b_eff = min(t_b, t_box) if t_box > 0 else t_b
    span = t_b_eff / t_a
    checks = [("fit_window_span", True, span)]
    f6 = by_p.get(6.0)
    if span >= 10.0 and f6 is not None:
        checks.append(("slope_p6",
                       abs(f6.slope - f6.theory_slope) <= cfg["check.p6_tol"],
                       f6.slope))
    else:
        g = _envelope_growth(vtraj, 6.0, (t_a, t_b_eff))
        checks.append(("envelope_p6", g <= 1.05, g))
    guard = max(row.lp[3.0] for row in vtraj.diagnostics) / rcfg.eps
    checks.append(("l3_growth_guard", guard <= 10.0, guard))

    n_prof = int(round(cfg["stability.t_final"] / cfg["run.dt"]))
    prof_run = _cgl.cgl_evolve(prof0, eq.replace(
        snapshot_stride=max(1, n_prof // 40), diag_stride=n_prof))
    dec = np.diff(np.asarray(prof_run.step_energies))
    checks.append(("profile_l2_decreasing", bool((dec < 0).all()),
                   float(dec.max())))
    for p in (2.0, 4.0, np.inf):
        taus, vals = [], []
        for t, state in zip(prof_run.times, prof_run.states):
            if t <= 0:
                continue
            taus.append(t)
            vals.append(t ** (0.5 - (0.0 if np.isinf(p) else 1.0 / p))
                        * lp_norm(state, p))
        g = _halves_growth(taus, vals)
        checks.append((f"profile_envelope_p{p:g}", g <= 1.05, g))
    return checks, outputs


_RUNNERS = {
    "simulate2d": _run_simulate2d,
    "simulate3d": _run_simulate3d,
    "planewave-check": _run_planewave_check,
    "picard": _run_picard,
    "stability": _run_stability,
    "heatdecay": _run_heatdecay,
    "contraction": _run_contraction,
    "scan": _run_scan,
    "cgl": _run_cgl,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nswave",
        description="Pseudo-spectral runs for plane-wave solutions and "
                    "their perturbations.")
    sub = parser.add_subparsers(dest="subcommand", required=True,
                                metavar="subcommand")
    for name in SCHEMAS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", default=None,
                       help="config file, or a manifest.json to reproduce")
        p.add_argument("--out", default=None,
                       help="output directory (default nswave-<subcommand>)")
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (default 0, or the manifest's)")
        p.add_argument("--threads", type=int, default=None,
                       help="FFT worker threads (default 1)")
    args = parser.parse_args(argv)
    name = args.subcommand

    seed, threads = args.seed, args.threads
    try:
        if args.config:
            text = Path(args.config).read_text(encoding="utf-8")
            if text.lstrip().startswith("{"):
                doc = json.loads(text)
                if seed is None:
                    seed = int(doc.get("seed", 0))
                if threads is None:
                    threads = int(doc.get("threads", 1))
            cfg = config_from_file(name, args.config)
        else:
            cfg = resolve_config(name)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    seed = 0 if seed is None else seed
    threads = 1 if threads is None else threads

    out = Path(args.out) if args.out else Path(f"nswave-{name}")
    out.mkdir(parents=True, exist_ok=True)
    set_fft_workers(threads)
    manifest = RunManifest(out / "manifest.json", name, cfg, seed, threads,
                           __version__)
    manifest.start()
    try:
        checks, outputs = _RUNNERS[name](cfg, out, seed)
    except Exception as exc:
        detail = f"{type(exc).__name__}: {exc}"
        (out / "error.txt").write_text(traceback.format_exc(),
                                       encoding="utf-8")
        checks = [("run_completed", False, detail)]
        manifest.finalize("error", checks,
                          ["manifest.json", "summary.txt", "error.txt"])
        lines = _summary_lines(checks)
        (out / "summary.txt").write_text("\n".join(lines) + "\n",
                                         encoding="utf-8")
        print("\n".join(lines))
        return 2

    all_ok = all(ok for _, ok, _ in checks)
    outputs = ["manifest.json", "summary.txt"] + outputs
    manifest.finalize("passed" if all_ok else "failed", checks, outputs)
    lines = _summary_lines(checks)
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return 0 if all_ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
