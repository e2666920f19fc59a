"""Release gate: every check runs at full size with fixed seeds.

Each test covers one acceptance item and prints a single PASS/FAIL line
with the measured numbers. The whole file is slow by design (roughly
25 minutes on one core); the heavy stability runs dominate. Bounds are
stated inline next to each check, and every quoted tolerance is either
an identity (closed forms, roundoff scale) or was frozen from probe
runs before this file was written.
"""

import json
import time
from fractions import Fraction

import numpy as np

from nswave import cgl
from nswave import experiments as exp
from nswave.cli import main
from nswave.grid import GridSpec
from nswave.operators import l2_norm_spectral, lp_norm, random_div_free
from nswave.picard import PicardConfig, picard_solve
from nswave.planewave import (WaveProfile, canonical_box, commutation_check,
                              wave_scale)
from nswave.solver import (SolverConfig, duhamel_residual, evolve,
                           evolve_perturbation)

TWO_PI = 2.0 * np.pi


def _report(tag: str, ok: bool, detail: str) -> None:
    print(f"{tag}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{tag}: {detail}"


def _envelope_growth(vtraj, p: float, window: tuple) -> float:
    """Max of tau^{(1-3/p)/2} ||v||_p over the window, over its start."""
    alpha = (1.0 - 3.0 / p) / 2.0
    ws = [(row.t - vtraj.t0) ** alpha * row.lp[p]
          for row in vtraj.diagnostics
          if window[0] <= row.t - vtraj.t0 <= window[1]]
    return float(max(ws) / ws[0])


def test_a01_vortex_closed_form_to_t1():
    # 128^2 run over 1000 steps: field and energy must track the exact
    # decaying vortex to 1e-8 (measured 1e-14 and 2e-14), under 30 s.
    grid = GridSpec.cube(128, TWO_PI, dim=2)
    u0 = exp.taylor_green(grid)
    cfg = SolverConfig(dt=1e-3, t_final=1.0, snapshot_stride=0,
                       diag_stride=10)
    t0 = time.monotonic()
    traj = evolve(u0, cfg)
    wall = time.monotonic() - t0

    ref = exp.taylor_green(grid, t=1.0)
    rel = l2_norm_spectral(traj.final_state - ref) / l2_norm_spectral(ref)
    rows = traj.diagnostics
    e0 = rows[0].energy
    en_err = max(abs(r.energy - e0 * np.exp(-4.0 * r.t))
                 / (e0 * np.exp(-4.0 * r.t)) for r in rows)
    ok = rel <= 1e-8 and en_err <= 1e-8 and wall <= 30.0
    _report("vortex closed form", ok,
            f"rel_l2={rel:.3e} energy={en_err:.3e} wall={wall:.1f}s")


def test_a02_embedding_commutes_with_the_flow():
    # For three wave speeds, evolving the embedded profile in 3D must
    # match embedding the 2D evolution, to 1e-6 relative L2 on 64^3.
    # Construction-exact, so the mismatch is roundoff (measured 3e-16);
    # the three runs together must stay under 5 minutes.
    g2 = GridSpec.cube(64, TWO_PI, dim=2)
    h = exp.ring_profile(g2, 21, (2, 6), 0.5, components=2)
    cfg = SolverConfig(dt=1e-2, t_final=0.5, snapshot_stride=0,
                       diag_stride=10)
    t0 = time.monotonic()
    worst = 0.0
    for c in (0, 1, Fraction(1, 2)):
        prof = WaveProfile(h, c).divergence_free()
        grid3 = canonical_box(g2, prof.c, points=(64, 64, 64))
        worst = max(worst, commutation_check(prof, cfg, grid3))
    wall = time.monotonic() - t0
    ok = worst <= 1e-6 and wall <= 300.0
    _report("embedding commutes", ok,
            f"max_mismatch={worst:.3e} wall={wall:.1f}s")


def test_a03_stored_states_stay_divergence_free():
    # Dense 3D run with snapshots at every step: the spectral divergence
    # residual of every stored state stays at the projection floor.
    grid = GridSpec.cube(24, TWO_PI, dim=3)
    u0 = random_div_free(grid, 5, 3, 0.3)
    cfg = SolverConfig(dt=5e-3, t_final=0.5, snapshot_stride=1,
                       diag_stride=1)
    traj = evolve(u0, cfg)
    div = traj.max_divergence_residual()
    ok = div <= 1e-12 and len(traj.states) == 101
    _report("divergence preserved", ok,
            f"max_residual={div:.3e} states={len(traj.states)}")


def test_a04_heat_smoothing_rates_on_gaussian_data():
    # Closed-form Gaussian data: the smoothing ratios and their gradient
    # analogs must be flat within 1% over the last decade of [0.1, 100].
    combos = ((2.0, np.inf, 3), (3.0, 3.0, 3), (3.0, 6.0, 3), (2.0, 2.0, 2))
    reps = [exp.heat_estimate_check(q, p, d) for q, p, d in combos]
    ok = all(rep.passed for rep in reps)
    detail = " ".join(
        f"q{rep.q:g}p{rep.p:g}d{rep.d}={'ok' if rep.passed else 'BAD'}"
        for rep in reps)
    _report("heat smoothing rates", ok, detail)


def test_a05_picard_iteration_contracts_and_matches():
    # 32^3 with a moderate background (M <= 2) and small data: all eight
    # increment ratios stay under 0.6 and the fixed point agrees with
    # the direct perturbation run to 1e-6 relative sup-L2. Frozen probe:
    # M=0.73, max ratio 0.014, fp error 1.3e-7, 58 s.
    c = Fraction(1, 2)
    g2 = GridSpec(2, (32, 32), (TWO_PI, TWO_PI), dealias_fraction=2 / 3)
    h = exp.ring_profile(g2, 31, (1, 3), 0.25, components=2)
    prof = WaveProfile(h, c).divergence_free()
    grid3 = canonical_box(g2, c, points=(32, 32, 32))

    scfg = SolverConfig(dt=2e-3, t_final=0.5, snapshot_stride=1,
                        diag_stride=1)
    traj2 = evolve(prof.h, scfg)
    traj2.wave_speed = prof.c
    v0 = random_div_free(grid3, 30, 3, 1.0)
    v0 = exp.rescale_lp(v0, 3.0, 0.02)

    pcfg = PicardConfig(T_star=0.5, max_iter=8, eps=0.05)
    ptraj, rep = picard_solve(v0, traj2, pcfg, scfg)
    direct = evolve_perturbation(v0, traj2, scfg)
    denom = max(l2_norm_spectral(s) for s in direct.states)
    fp_err = max(l2_norm_spectral(a - b)
                 for a, b in zip(ptraj.states, direct.states)) / denom

    div = max(ptraj.max_divergence_residual(),
              direct.max_divergence_residual())
    ok = (rep.M <= 2.0 and rep.eps_ok and not rep.diverged
          and len(rep.ratios) == 8 and max(rep.ratios) <= 0.6
          and fp_err <= 1e-6 and div <= 1e-12)
    _report("picard contraction", ok,
            f"M={rep.M:.3f} max_ratio={max(rep.ratios):.4f} "
            f"fp_err={fp_err:.3e} div={div:.1e}")


def test_a06_small_data_stays_small_to_t1():
    # ||v0||_3 = 0.05 against a 48^2 profile background: after one time
    # unit on 48^3 the perturbation must still satisfy ||v(1)||_3 <= 0.1.
    # Frozen probe: final norm 0.0057, 118 s.
    eps = 0.05
    c = Fraction(1, 2)
    g2 = GridSpec(2, (48, 48), (TWO_PI, TWO_PI), dealias_fraction=2 / 3)
    h = exp.ring_profile(g2, 43, (1, 3), 0.25, components=2)
    prof = WaveProfile(h, c).divergence_free()
    grid3 = canonical_box(g2, c, points=(48, 48, 48))

    scfg = SolverConfig(dt=2e-3, t_final=1.0, snapshot_stride=0,
                        diag_stride=25)
    traj2 = evolve(prof.h, scfg.replace(snapshot_stride=1, diag_stride=1))
    traj2.wave_speed = prof.c
    v0 = random_div_free(grid3, 42, 3, 1.0)
    v0 = exp.rescale_lp(v0, 3.0, eps)
    vtraj = evolve_perturbation(v0, traj2, scfg)

    start = lp_norm(v0, 3.0)
    final = lp_norm(vtraj.final_state, 3.0)
    div = vtraj.max_divergence_residual()
    ok = (abs(start - eps) <= 1e-12 * eps and final <= 2.0 * eps
          and div <= 1e-12)
    _report("local smallness to T=1", ok,
            f"start={start:.4f} final={final:.4f} bound={2 * eps:.3f} "
            f"div={div:.1e}")


def test_a07_large_box_perturbation_decay():
    # Full 128^3 stability run, box 8 pi per side (16x the bump radius),
    # wave speed 1, dt 0.025 to T=3. The usable window (0.35, 2.45)
    # spans a factor of 7 < 10, so the check degrades to the bounded
    # weighted-envelope form: for p in {3, 6, inf} the envelope
    # t^{(1-3/p)/2} ||v||_p may not grow past 1.05x its start inside the
    # window. Frozen run at seed 7: growth 1.000 for all three p, max
    # divergence residual 2.9e-16, 13.1 minutes. Budget 30 minutes.
    c = 1
    per = 4.0 * TWO_PI
    s = wave_scale(c)
    g2 = GridSpec(2, (128, 128), (per / s, per), dealias_fraction=2 / 3)
    h = exp.ring_profile(g2, 8, (4, 8), 0.3, components=2)
    prof = WaveProfile(h, c)
    grid3 = canonical_box(g2, prof.c, points=(128, 128, 128))
    spec = exp.BumpSpec(radius=np.pi / 2.0)
    window = (0.35, 2.45)
    rcfg = exp.StabilityRunConfig(
        prof0=prof, v0_spec=spec, eps=0.05, delta=0.05, T=3.0,
        grid3=grid3, window=window, dt=0.025, seed=7, diag_stride=2)

    t0 = time.monotonic()
    vtraj, fits = exp.stability_run(rcfg)
    wall = time.monotonic() - t0

    t_box = exp.finite_box_time(grid3, spec.radius)
    t_b_eff = min(window[1], t_box) if t_box > 0 else window[1]
    span = t_b_eff / window[0]
    assert span < 10.0, "window grew past a decade; slope branch applies"

    growth = {p: _envelope_growth(vtraj, p, (window[0], t_b_eff))
              for p in (3.0, 6.0, np.inf)}
    guard = max(row.lp[3.0] for row in vtraj.diagnostics) / rcfg.eps
    div = vtraj.max_divergence_residual()
    slopes_finite = len(fits) == 3 and all(np.isfinite(f.slope)
                                           for f in fits)
    ok = (all(g <= 1.05 for g in growth.values()) and guard <= 10.0
          and div <= 1e-12 and slopes_finite and wall <= 1800.0)
    _report("large-box decay envelopes", ok,
            f"span={span:.1f} growth_p3={growth[3.0]:.4f} "
            f"p6={growth[6.0]:.4f} pinf={growth[np.inf]:.4f} "
            f"guard={guard:.2f} div={div:.1e} wall={wall:.0f}s")


def test_a08_perturbation_map_contracts_on_pairs():
    # 20 random curve pairs inside the small ball: the empirical
    # Lipschitz ratio of the perturbation map must stay at or below 0.5.
    # Frozen probe: max ratio 6.6e-4 over 20 pairs, 137 s.
    c = Fraction(1, 2)
    g2 = GridSpec(2, (32, 32), (TWO_PI, TWO_PI), dealias_fraction=2 / 3)
    h = exp.ring_profile(g2, 31, (1, 3), 0.25, components=2)
    prof = WaveProfile(h, c).divergence_free()
    grid3 = canonical_box(g2, c, points=(32, 32, 32))
    rcfg = exp.StabilityRunConfig(
        prof0=prof,
        v0_spec=exp.BumpSpec(radius=min(grid3.period_per_axis) / 32.0),
        eps=0.02, delta=0.05, T=0.5, grid3=grid3,
        window=(0.125, 0.25), dt=2e-3, seed=30)
    rep = exp.phi_contraction_check(rcfg, 20, max_mode=3)
    ok = (rep.max_ratio <= 0.5 and len(rep.ratios) == 20
          and not rep.failures)
    _report("perturbation map contracts", ok,
            f"max_ratio={rep.max_ratio:.3e} pairs={len(rep.ratios)} "
            f"failures={len(rep.failures)}")


def test_a09_trajectories_satisfy_the_integral_form():
    # Densely stored dt=1e-3 runs must satisfy the integral (Duhamel)
    # reconstruction to 1e-6: an exact-nonlinearity 2D vortex and a
    # generic 3D field. Frozen probe: 1.8e-16 and 1.9e-8.
    cfg = SolverConfig(dt=1e-3, t_final=0.1, snapshot_stride=1,
                       diag_stride=1)
    g2 = GridSpec.cube(64, TWO_PI, dim=2)
    u0 = exp.taylor_green(g2)
    r2 = duhamel_residual(evolve(u0, cfg), u0)

    g3 = GridSpec.cube(16, TWO_PI, dim=3)
    w0 = random_div_free(g3, 5, 3, 0.3)
    traj3 = evolve(w0, cfg)
    r3 = duhamel_residual(traj3, w0)
    div = traj3.max_divergence_residual()
    ok = r2 <= 1e-6 and r3 <= 1e-6 and div <= 1e-12
    _report("integral form residual", ok,
            f"res_2d={r2:.3e} res_3d={r3:.3e} div={div:.1e}")


def test_a10_cgl_analog():
    # Four checks on the complex Ginzburg-Landau analog: the constant
    # mode tracks its closed-form ODE to 1e-8; the per-step energy
    # identity defect stays under 1e-6 (frozen 4.9e-7); plane-wave
    # commutation holds to 1e-6 (construction-exact); and the 96^3
    # stability run fits a p=6 decay slope within 0.10 of -0.25
    # (frozen -0.287 at seed 11, window span 11).
    t_all = time.monotonic()

    # Constant mode against the explicit amplitude/phase solution.
    g_small = GridSpec.cube(16, TWO_PI, dim=2, dealias_fraction=0.5)
    a0 = 0.8 + 0.3j
    f0 = cgl.cgl_field(g_small, np.full(g_small.shape, a0,
                                        dtype=np.complex128))
    ccfg = cgl.CGLConfig(eps=1.0, k=1.0, dt=1e-3, t_final=1.0,
                         snapshot_stride=100, diag_stride=100)
    ctraj = cgl.cgl_evolve(f0, ccfg)
    rho0 = abs(a0) ** 2
    ode_err = 0.0
    for t, state in zip(ctraj.times, ctraj.states):
        grow = 1.0 + 2.0 * 1.0 * rho0 * t
        ref = a0 * grow ** -0.5 * np.exp(1j * np.log(grow) / 2.0)
        ode_err = max(ode_err,
                      float(np.abs(state.to_physical() - ref).max()))

    # Energy identity on a generic band-limited run.
    g_en = GridSpec.cube(64, TWO_PI, dim=2, dealias_fraction=0.5)
    f_en = cgl.random_scalar_field(g_en, 7, max_mode=2, amplitude=0.3)
    ecfg = cgl.CGLConfig(eps=0.2, k=1.0, dt=1e-3, t_final=0.5)
    erep = cgl.cgl_energy_identity_check(cgl.cgl_evolve(f_en, ecfg),
                                         0.2, 1.0)

    # Embedding commutes with the scalar flow.
    res = cgl.cgl_commutation_check(f_en, Fraction(1, 2),
                                    ecfg.replace(snapshot_stride=50,
                                                 diag_stride=500))

    # Large-box decay slope at p=6.
    c = Fraction(0)
    g2 = GridSpec(2, (96, 96), (4.0 * TWO_PI, 4.0 * TWO_PI),
                  dealias_fraction=0.5)
    prof0 = exp.ring_profile(g2, 12, (4, 8), 0.3, components=1,
                             real=False)
    grid3 = canonical_box(g2, c, points=(96, 96, 96))
    eq = cgl.CGLConfig(eps=1.0, k=1.0, dt=0.01, t_final=2.4)
    rcfg = cgl.CGLStabilityConfig(
        prof0=prof0, v0_spec=exp.BumpSpec(radius=TWO_PI, core=np.pi / 4.0),
        eps=0.05, delta=0.05, T=2.4, grid3=grid3, window=(0.2, 2.2),
        dt=0.01, eq=eq, wave_speed=c, seed=11, diag_stride=2)
    vtraj, fits = cgl.cgl_stability_run(rcfg)
    t_box = exp.finite_box_time(grid3, TWO_PI, nu=1.0)
    span = min(2.2, t_box) / 0.2
    assert span >= 10.0, "window shrank below a decade; fit not meaningful"
    f6 = next(f for f in fits if f.p == 6.0)

    wall = time.monotonic() - t_all
    ok = (ode_err <= 1e-8 and erep.max_step_defect <= 1e-6
          and erep.max_instant_defect <= 1e-10
          and res["mismatch"] <= 1e-6 and res["roundtrip"] <= 1e-12
          and abs(f6.slope - (-0.25)) <= 0.10)
    _report("cgl analog", ok,
            f"ode={ode_err:.3e} step_defect={erep.max_step_defect:.3e} "
            f"commute={res['mismatch']:.3e} slope_p6={f6.slope:.4f} "
            f"wall={wall:.0f}s")


def test_a11_manifest_reruns_are_bit_identical(tmp_path):
    # Two single-threaded runs from the same manifest must produce
    # byte-identical diagnostics and snapshots.
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text(
        "grid.points = 12\nrun.dt = 0.005\nrun.t_final = 0.03\n"
        "ic.kind = random\nic.amplitude = 0.2\nic.max_mode = 2\n"
        "run.snapshot_stride = 3\n")
    first = tmp_path / "r1"
    rc1 = main(["simulate3d", "--config", str(cfgfile), "--seed", "9",
                "--out", str(first)])
    second = tmp_path / "r2"
    rc2 = main(["simulate3d", "--config", str(first / "manifest.json"),
                "--out", str(second)])

    diag_same = (first / "diagnostics.csv").read_bytes() \
        == (second / "diagnostics.csv").read_bytes()
    s1 = sorted((first / "snapshots").glob("*.f64"))
    s2 = sorted((second / "snapshots").glob("*.f64"))
    snaps_same = ([p.name for p in s1] == [p.name for p in s2]
                  and all(a.read_bytes() == b.read_bytes()
                          for a, b in zip(s1, s2)))
    seed_kept = json.loads(
        (second / "manifest.json").read_text())["seed"] == 9
    ok = rc1 == 0 and rc2 == 0 and diag_same and snaps_same and seed_kept
    _report("manifest reruns identical", ok,
            f"rc=({rc1},{rc2}) diagnostics_same={diag_same} "
            f"snapshots_same={snaps_same} files={len(s1)}")
