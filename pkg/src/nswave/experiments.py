"""Quantitative harness: stability runs, decay fits, heat-kernel ratios,
the Duhamel-map contraction diagnostic, and the smallness scan.

The decay statements being probed live on the whole space; on a periodic
box they hold only in an intermediate window, after the perturbation has
begun its self-similar spreading and before it feels the boundary. The
fit windows, the finite-box time estimate and the generous slope
tolerances in the callers all encode that caveat.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import operators as ops
from .field import SpectralField, _fftn, _ifftn
from .grid import GridSpec
from .picard import _phi_nodes
from .planewave import WaveProfile
from .solver import SolverConfig, SolverError, Trajectory, evolve, \
    evolve_perturbation, _leray_raw

DEFAULT_STABILITY_P_SET = (3.0, 6.0, np.inf)


def taylor_green(grid: GridSpec, t: float = 0.0, nu: float = 1.0) -> SpectralField:
    """Closed-form decaying vortex array on a 2D box of period 2 pi n.

    u = (cos x sin y, -sin x cos y) exp(-2 nu t) solves the viscous
    equations exactly: the nonlinear term is a pure gradient, so the
    velocity only feels the heat flow. Useful as an exact reference.
    """
    if grid.dim != 2:
        raise ValueError("the vortex array solution is two-dimensional")
    for per in grid.period_per_axis:
        if abs(per / (2.0 * np.pi) - round(per / (2.0 * np.pi))) > 1e-12:
            raise ValueError("periods must be multiples of 2 pi for unit modes")
    x, y = grid.meshgrid()
    decay = np.exp(-2.0 * nu * t)
    vals = np.stack([np.cos(x) * np.sin(y), -np.sin(x) * np.cos(y)]) * decay
    return SpectralField.from_physical(grid, vals)


# ---------------------------------------------------------------------------
# Closed-form heat evolution of a Gaussian profile.

def gaussian_lp_norm(p: float, t: float, *, sigma: float, amplitude: float,
                     d: int, nu: float = 1.0) -> float:
    """L^p norm of e^{nu t Lap} applied to A exp(-|x|^2 / (2 sigma^2)) on R^d."""
    s2 = sigma**2 + 2.0 * nu * t
    amp = amplitude * (sigma**2 / s2) ** (d / 2.0)
    if np.isinf(p):
        return amp
    return amp * (2.0 * np.pi * s2 / p) ** (d / (2.0 * p))


def gaussian_grad_lp_norm(p: float, t: float, *, sigma: float, amplitude: float,
                          d: int, nu: float = 1.0) -> float:
    """L^p norm of the spatial gradient of the heat-evolved Gaussian."""
    s2 = sigma**2 + 2.0 * nu * t
    amp = amplitude * (sigma**2 / s2) ** (d / 2.0)
    if np.isinf(p):
        # |grad u| = (r/s^2) u peaks at r = s.
        return amp * math.exp(-0.5) / math.sqrt(s2)
    # integral of r^p exp(-alpha r^2) over R^d in polar form
    alpha = p / (2.0 * s2)
    log_sphere = math.log(2.0) + (d / 2.0) * math.log(math.pi) - gammaln(d / 2.0)
    log_radial = gammaln((p + d) / 2.0) - math.log(2.0) \
        - ((p + d) / 2.0) * math.log(alpha)
    return (amp / s2) * math.exp((log_sphere + log_radial) / p)


@dataclass
class HeatEstimateReport:
    """Smoothing-estimate ratios for Gaussian data, literal and same-time.

    The literal ratio t^{(d/q-d/p)/2} ||u(t)||_p / ||u0||_q is bounded but
    decays for fixed Gaussian data (its constant is saturated only in the
    limit of concentrating data), so flatness is judged on the same-time
    ratio t^{exp} ||u(t)||_p / ||u(t)||_q, the scaling-invariant form of
    the identical estimate, which stabilizes to a constant.
    """

    q: float
    p: float
    d: int
    exponent: float
    grad_exponent: float
    times: np.ndarray
    ratio: np.ndarray
    ratio_same_time: np.ndarray
    grad_ratio: np.ndarray
    grad_ratio_same_time: np.ndarray
    bounded_ok: bool
    flat_ok: bool
    grad_bounded_ok: bool
    grad_flat_ok: bool
    contraction_ok: bool | None
    flat_tol: float

    @property
    def passed(self) -> bool:
        core = self.bounded_ok and self.flat_ok \
            and self.grad_bounded_ok and self.grad_flat_ok
        return core and self.contraction_ok is not False


def _last_decade_flat(times: np.ndarray, series: np.ndarray, tol: float) -> bool:
    late = series[times >= times[-1] / 10.0]
    mean = late.mean()
    if mean <= 0 or not np.isfinite(late).all():
        return False
    return float(late.max() - late.min()) / mean <= tol


def _no_late_growth(times: np.ndarray, series: np.ndarray) -> bool:
    if not np.isfinite(series).all():
        return False
    late = series[times >= times[-1] / 10.0]
    return float(late.max()) <= float(series.max()) * (1.0 + 1e-12)


def heat_estimate_check(q: float, p: float, d: int, *, t_min: float = 0.1,
                        t_max: float = 100.0, num: int = 241,
                        sigma: float = 0.3, amplitude: float = 1.0,
                        flat_tol: float = 0.01) -> HeatEstimateReport:
    """Verify the L^q -> L^p smoothing rates on closed-form Gaussian data.

    The plain family carries exponent (d/q - d/p)/2 and the gradient
    family (1 + d/q - d/p)/2. Each ratio is checked to be bounded (no
    late-time growth of the literal form) and flat within flat_tol over
    the last decade (same-time form); for q = p the literal ratio must
    additionally sit below 1 and decrease, the contraction property.
    """
    if not 1.0 < q <= p:
        raise ValueError(f"need 1 < q <= p, got q={q}, p={p}")
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    times = np.geomspace(t_min, t_max, num)
    beta = 0.5 * (d / q - d / p)
    beta_g = 0.5 * (1.0 + d / q - d / p)
    kw = dict(sigma=sigma, amplitude=amplitude, d=d)
    q0 = gaussian_lp_norm(q, 0.0, **kw)
    lp_t = np.array([gaussian_lp_norm(p, t, **kw) for t in times])
    lq_t = np.array([gaussian_lp_norm(q, t, **kw) for t in times])
    glp_t = np.array([gaussian_grad_lp_norm(p, t, **kw) for t in times])
    ratio = times**beta * lp_t / q0
    ratio_st = times**beta * lp_t / lq_t
    grad_ratio = times**beta_g * glp_t / q0
    grad_ratio_st = times**beta_g * glp_t / lq_t
    contraction = None
    if q == p:
        contraction = bool(np.all(ratio <= 1.0 + 1e-12)
                           and np.all(np.diff(ratio) <= 1e-12))
    return HeatEstimateReport(
        q=q, p=p, d=d, exponent=beta, grad_exponent=beta_g, times=times,
        ratio=ratio, ratio_same_time=ratio_st, grad_ratio=grad_ratio,
        grad_ratio_same_time=grad_ratio_st,
        bounded_ok=_no_late_growth(times, ratio),
        flat_ok=_last_decade_flat(times, ratio_st, flat_tol),
        grad_bounded_ok=_no_late_growth(times, grad_ratio),
        grad_flat_ok=_last_decade_flat(times, grad_ratio_st, flat_tol),
        contraction_ok=contraction, flat_tol=flat_tol)


# ---------------------------------------------------------------------------
# Decay-exponent fitting.

@dataclass
class DecayFit:
    """Log-log least-squares slope of a norm series against t."""

    p: float
    slope: float
    theory_slope: float
    residual: float
    window: tuple

    def within(self, tol: float) -> bool:
        return abs(self.slope - self.theory_slope) <= tol


def theory_decay_slope(p: float) -> float:
    """-(1 - 3/p)/2, the perturbation decay rate at exponent p."""
    return -(1.0 - 3.0 / p) / 2.0


def fit_decay(times, values, window, p: float) -> DecayFit:
    """Least-squares slope of log(value) against log(t) inside window.

    Requires at least 8 samples with positive values in the window.
    """
    t_a, t_b = window
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = (times >= t_a * (1 - 1e-12)) & (times <= t_b * (1 + 1e-12))
    ts, vs = times[sel], values[sel]
    if ts.size < 8:
        raise ValueError(f"need at least 8 samples in window, got {ts.size}")
    if np.any(vs <= 0):
        raise ValueError("nonpositive values in fit window")
    x, y = np.log(ts), np.log(vs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return DecayFit(p=p, slope=float(slope), theory_slope=theory_decay_slope(p),
                    residual=resid, window=(float(t_a), float(t_b)))


# ---------------------------------------------------------------------------
# Compact perturbation bump and the stability run.

@dataclass(frozen=True)
class BumpSpec:
    """Smooth compactly supported perturbation shape.

    With core unset the shape is the plain polynomial bump
    (1 - (rho/radius)^2)^exponent inside rho < radius. Setting core to a
    small inner scale layers the shape so the built field's magnitude
    falls off like 1/rho between core and radius: every dyadic shell then
    contributes comparably to the L^3 norm, which is what makes the
    critical decay rates visible in a finite window (a plain bump is far
    more integrable than L^3 demands and decays at its faster rates).
    """

    radius: float
    amplitude: float = 1.0
    center: tuple | None = None
    exponent: int = 8
    core: float | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")
        if self.exponent < 2:
            raise ValueError("bump exponent must be at least 2 for smoothness")
        if self.core is not None and not 0.0 < self.core < self.radius:
            raise ValueError("bump core must lie strictly inside the radius")


#: Layered bumps stay untouched out to this fraction of the radius; the
#: smooth cutoff lives entirely in the remaining outer shell.
LAYER_PLATEAU = 0.7


def _bump_cutoff(grid: GridSpec, spec: BumpSpec):
    """Minimum-image squared distance from the center, and the cutoff.

    Plain bumps use the polynomial window (1 - (rho/R)^2)^exponent. For
    layered bumps the window must not eat into the scaling range, so it
    is 1 out to LAYER_PLATEAU * radius and then glued to zero at the
    radius with the standard smooth partition exp(-1/x) construction.
    """
    center = spec.center or tuple(p / 2.0 for p in grid.period_per_axis)
    rho2 = np.zeros(grid.shape)
    for ax in range(grid.dim):
        delta = grid.axes_physical()[ax] - center[ax]
        per = grid.period_per_axis[ax]
        delta = (delta + per / 2.0) % per - per / 2.0
        shape = [1] * grid.dim
        shape[ax] = grid.points_per_axis[ax]
        rho2 = rho2 + delta.reshape(shape) ** 2
    if spec.core is None:
        arg = 1.0 - rho2 / spec.radius**2
        cut = np.where(arg > 0, arg, 0.0) ** spec.exponent
    else:
        r1 = LAYER_PLATEAU * spec.radius
        s = (np.sqrt(rho2) - r1) / (spec.radius - r1)
        s = np.clip(s, 0.0, 1.0)

        def h(x):
            return np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)

        cut = h(1.0 - s) / (h(1.0 - s) + h(s) + 1e-300)
    return rho2, cut


def bump_velocity(grid: GridSpec, spec: BumpSpec) -> SpectralField:
    """Divergence-free compact bump velocity on a 3D grid (not rescaled).

    The velocity is the curl of (0, 0, psi), hence exactly solenoidal and
    mean-free. Plain shape: psi is the polynomial bump. Layered shape
    (core set): psi is the bump times log((core^2+radius^2)/(core^2+rho^2))/2,
    whose gradient magnitude scales like 1/rho between core and radius.
    """
    if grid.dim != 3:
        raise ValueError("bump_velocity builds 3D fields")
    rho2, cut = _bump_cutoff(grid, spec)
    if spec.core is None:
        psi = spec.amplitude * cut
    else:
        c2 = spec.core**2
        psi = spec.amplitude * cut * 0.5 * np.log(
            (c2 + spec.radius**2) / (c2 + rho2))
    psi_hat = _fftn(psi.astype(np.complex128)[np.newaxis], grid)[0]
    kx, ky, _ = grid.k_vectors
    coeffs = np.stack([1j * ky * psi_hat, -1j * kx * psi_hat,
                       np.zeros_like(psi_hat)])
    return SpectralField(grid, coeffs * grid.dealias_mask, real_space=True)


def ring_profile(grid2: GridSpec, seed: int, mode_band: tuple = (4, 8),
                 amplitude: float = 0.3, components: int = 2,
                 real: bool = True) -> SpectralField:
    """Random 2D profile supported on a ring of integer modes.

    Modes with lo^2 <= m1^2 + m2^2 <= hi^2 (band = (lo, hi)) receive
    independent complex normal coefficients; real = True keeps only the
    real part of the physical field. Two-component profiles are made
    solenoidal in the profile plane. The result is rescaled to the
    requested sup norm, the quantity the background bound M measures.
    """
    if grid2.dim != 2:
        raise ValueError("ring_profile builds 2D profiles")
    lo, hi = int(mode_band[0]), int(mode_band[1])
    if not 0 < lo <= hi:
        raise ValueError("mode band must satisfy 0 < lo <= hi")
    rng = np.random.default_rng(seed)
    coeffs = np.zeros((components, *grid2.shape), dtype=np.complex128)
    for m1 in range(-hi, hi + 1):
        for m2 in range(-hi, hi + 1):
            if lo * lo <= m1 * m1 + m2 * m2 <= hi * hi:
                coeffs[:, m1, m2] = (rng.normal(size=components)
                                     + 1j * rng.normal(size=components))
    h = SpectralField(grid2, coeffs * grid2.num_points, real_space=False)
    if real:
        h = SpectralField.from_physical(grid2, _ifftn(h.coeffs, grid2).real)
    h = ops.dealias(h)
    if components == grid2.dim:
        h = ops.leray_project(h)
    h = ops.zero_mean(h)
    sup = ops.lp_norm(h, np.inf)
    if sup > 0:
        h = h * (amplitude / sup)
    return h


def rescale_lp(f: SpectralField, p: float, target: float) -> SpectralField:
    """Scale f so its L^p norm equals target exactly (zero stays zero)."""
    size = ops.lp_norm(f, p)
    if size == 0.0:
        return f.copy()
    return f * (target / size)


def finite_box_time(grid: GridSpec, radius: float, nu: float = 1.0) -> float:
    """Diffusive time for support of the given radius to feel the boundary."""
    gap = min(grid.period_per_axis) / 2.0 - radius
    if gap <= 0:
        return 0.0
    return gap**2 / (4.0 * nu)


@dataclass(frozen=True)
class StabilityRunConfig:
    """Plan for a perturbed-wave decay experiment.

    The profile is first relaxed alone until its L^2 norm drops below
    delta; the perturbation (a compact bump rescaled to ||v0||_3 = eps)
    is injected at that moment and evolved against the moving background
    for time T. Fits of ||v(t)||_p happen inside window (in time since
    injection), clamped by the finite-box estimate.
    """

    prof0: WaveProfile
    v0_spec: BumpSpec
    eps: float
    delta: float
    T: float
    grid3: GridSpec
    window: tuple
    dt: float
    p_set: tuple = DEFAULT_STABILITY_P_SET
    seed: int = 0
    diag_stride: int = 1
    snapshot_stride: int = 0
    max_t_delta: float = 200.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.dt <= 0 or self.T <= 0:
            raise ValueError("dt and T must be positive")
        t_a, t_b = self.window
        if not 0.0 < t_a < t_b <= self.T * (1 + 1e-12):
            raise ValueError("fit window must satisfy 0 < t_a < t_b <= T")
        if any(float(p) < 3.0 for p in self.p_set):
            raise ValueError("stability exponents must be >= 3")
        diam = 2.0 * self.v0_spec.radius
        if diam > min(self.grid3.period_per_axis) / 8.0 * (1 + 1e-12):
            raise ValueError("bump support diameter must not exceed box/8")


def _decay_profile_to_delta(prof0: WaveProfile, dt: float, delta: float,
                            max_t: float, nu: float = 1.0):
    """Relax the profile alone until ||h(t)||_2 < delta; return (state, t)."""
    h = prof0.h
    if ops.l2_norm_spectral(h) < delta:
        return h, 0.0
    e_thr = 0.5 * delta**2
    n_chunk = max(1, round(1.0 / dt))
    chunk = n_chunk * dt
    cfg = SolverConfig(dt=dt, t_final=chunk, nu=nu,
                       snapshot_stride=0, diag_stride=0)
    t_acc = 0.0
    while t_acc < max_t:
        traj = evolve(h, cfg)
        below = np.nonzero(traj.step_energies < e_thr)[0]
        if below.size:
            k = int(below[0])
            if k == n_chunk:
                state = traj.final_state
            else:
                part = SolverConfig(dt=dt, t_final=k * dt, nu=nu,
                                    snapshot_stride=0, diag_stride=0)
                state = evolve(h, part).final_state
            return state, t_acc + k * dt
        h = traj.final_state
        t_acc += chunk
    raise RuntimeError(
        f"profile L2 norm failed to reach delta={delta:g} within t={max_t:g}")


def profile_window(prof0: WaveProfile, delta: float, T: float, dt: float, *,
                   nu: float = 1.0, max_t_delta: float = 200.0) -> Trajectory:
    """Dense profile trajectory over [t_delta, t_delta + T] with wave speed."""
    h_d, t_delta = _decay_profile_to_delta(prof0, dt, delta, max_t_delta, nu)
    cfg = SolverConfig(dt=dt, t_final=T, nu=nu,
                       snapshot_stride=1, diag_stride=1)
    traj = evolve(h_d, cfg, t0=t_delta)
    traj.wave_speed = prof0.c
    return traj


def decay_envelope(traj: Trajectory, p: float, window: tuple | None = None) -> float:
    """sup over samples of tau^{(1-3/p)/2} ||v||_p, tau measured from t0."""
    alpha = (1.0 - 3.0 / p) / 2.0
    best = 0.0
    for row in traj.diagnostics:
        tau = row.t - traj.t0
        if tau <= 0:
            continue
        if window is not None and not window[0] <= tau <= window[1]:
            continue
        val = row.lp.get(float(p))
        if val is not None:
            best = max(best, tau**alpha * val)
    return best


def stability_run(cfg: StabilityRunConfig):
    """Evolve a rescaled bump against the relaxed wave; fit its decay.

    Returns (v trajectory, list of DecayFit, one per exponent in p_set).
    Fits are skipped (empty list) when the perturbation is identically
    zero. Growth of ||v(t)||_3 past 10x its initial size aborts with a
    smallness-violated error.
    """
    prof_traj = profile_window(cfg.prof0, cfg.delta, cfg.T, cfg.dt,
                               max_t_delta=cfg.max_t_delta)
    t_delta = prof_traj.t0
    v0 = bump_velocity(cfg.grid3, cfg.v0_spec)
    v0 = SpectralField(cfg.grid3, _leray_raw(cfg.grid3, v0.coeffs),
                       real_space=True)
    v0 = rescale_lp(v0, 3.0, cfg.eps)
    p_run = tuple(sorted(set(float(p) for p in cfg.p_set) | {3.0}))
    run_cfg = SolverConfig(dt=cfg.dt, t_final=cfg.T, nu=1.0,
                           snapshot_stride=cfg.snapshot_stride,
                           diag_stride=cfg.diag_stride, p_set=p_run)
    vtraj = evolve_perturbation(v0, prof_traj, run_cfg)

    eps0 = ops.lp_norm(v0, 3.0)
    if eps0 > 0:
        for row in vtraj.diagnostics:
            if row.lp[3.0] > 10.0 * eps0:
                raise SolverError(
                    f"smallness violated: ||v||_3 = {row.lp[3.0]:.3g} exceeds "
                    f"10 x initial {eps0:.3g}", row.t)

    taus = np.array([row.t - t_delta for row in vtraj.diagnostics])
    fits = []
    if eps0 > 0:
        t_box = finite_box_time(cfg.grid3, cfg.v0_spec.radius)
        t_a, t_b = cfg.window
        t_b_eff = min(t_b, t_box)
        if t_b_eff <= t_a:
            raise ValueError(
                f"fit window [{t_a:g}, {t_b:g}] lies beyond the finite-box "
                f"time {t_box:g}")
        for p in cfg.p_set:
            vals = np.array([row.lp[float(p)] for row in vtraj.diagnostics])
            fits.append(fit_decay(taus, vals, (t_a, t_b_eff), float(p)))
    return vtraj, fits


# ---------------------------------------------------------------------------
# Contraction diagnostic for the Duhamel map.

@dataclass
class ContractionReport:
    """Empirical Lipschitz ratios of one Duhamel-map application.

    Pairs of random curves in the weighted-norm ball are pushed through
    the integral map against the relaxed background; ratios >= 1 are
    collected as failures rather than raised.
    """

    ratios: list
    max_ratio: float
    failures: list
    seed: int
    m_bound: float
    delta: float
    t_delta: float
    ball_radius: float
    p_set: tuple

    @property
    def contractive(self) -> bool:
        return not self.failures and bool(self.ratios)


def _curve_weights(p_set, taus):
    return {float(p): taus ** ((1.0 - 3.0 / float(p)) / 2.0) for p in p_set}


def phi_contraction_check(cfg: StabilityRunConfig, trial_pairs: int, *,
                          ball_radius: float | None = None,
                          max_mode: int = 3) -> ContractionReport:
    """Measure d(Phi v, Phi w)/d(v, w) over random curve pairs.

    Curves have the closed form e^{t Lap}a + sin(omega t) e^{t Lap}b with
    band-limited divergence-free a, b, rescaled into the ball of radius
    ball_radius (default 2 eps) of the norm
    max_p sup_t t^{(1-3/p)/2} ||.||_p. The map Phi shares one fixed
    initial datum across the ball, so only the integral term enters the
    differences. Ratios at or above 1 are recorded as failures.
    """
    if trial_pairs < 1:
        raise ValueError("trial_pairs must be positive")
    prof_traj = profile_window(cfg.prof0, cfg.delta, cfg.T, cfg.dt,
                               max_t_delta=cfg.max_t_delta)
    grid = cfg.grid3
    dt = cfg.dt
    n_steps = int(round(cfg.T / dt))
    phis, m_bound = _phi_nodes(prof_traj, grid, n_steps, dt)
    taus = dt * np.arange(n_steps + 1, dtype=float)
    wts = _curve_weights(cfg.p_set, taus)
    ps = sorted(float(p) for p in cfg.p_set)
    radius = 2.0 * cfg.eps if ball_radius is None else ball_radius
    E = np.exp(-grid.k_squared * dt)
    rng = np.random.default_rng(cfg.seed)

    def n_slope(coeffs, j):
        w_phys = _ifftn(coeffs, grid).real
        ph = phis[j]
        if ph is not None:
            w_phys = w_phys + ph
        return -_leray_raw(grid, ops._sym_tensor_divergence(grid, w_phys, ph))

    def curve_norm(a, b, omega):
        ha, hb = a.copy(), b.copy()
        best = 0.0
        for j in range(n_steps + 1):
            if j:
                ha, hb = E * ha, E * hb
            v = SpectralField(grid, ha + np.sin(omega * taus[j]) * hb,
                              real_space=True)
            lp = ops.lp_norms_bundle(v, ps)
            for p in ps:
                best = max(best, wts[p][j] * lp[p])
        return best

    ratios = []
    failures = []
    for idx in range(trial_pairs):
        fields = []
        omegas = []
        scales = []
        for _ in range(2):
            a = ops.random_div_free(grid, seed=int(rng.integers(2**63)),
                                    max_mode=max_mode).coeffs
            b = ops.random_div_free(grid, seed=int(rng.integers(2**63)),
                                    max_mode=max_mode).coeffs
            omega = rng.uniform(1.0, 10.0)
            size = curve_norm(a, b, omega)
            target = radius * rng.uniform(0.3, 1.0)
            fields.append((a * (target / size), b * (target / size)))
            omegas.append(omega)
        (a1, b1), (a2, b2) = fields
        ha, hb, hc, hd = a1.copy(), b1.copy(), a2.copy(), b2.copy()
        integ = np.zeros_like(a1)
        d_in = 0.0
        d_out = 0.0
        n_prev = None
        for j in range(n_steps + 1):
            if j:
                ha, hb = E * ha, E * hb
                hc, hd = E * hc, E * hd
            vA = ha + np.sin(omegas[0] * taus[j]) * hb
            vB = hc + np.sin(omegas[1] * taus[j]) * hd
            diff = SpectralField(grid, vA - vB, real_space=True)
            lp = ops.lp_norms_bundle(diff, ps)
            for p in ps:
                d_in = max(d_in, wts[p][j] * lp[p])
            n_here = n_slope(vA, j) - n_slope(vB, j)
            if j:
                integ = E * (integ + (0.5 * dt) * n_prev) + (0.5 * dt) * n_here
                out = SpectralField(grid, integ, real_space=True)
                lp_out = ops.lp_norms_bundle(out, ps)
                for p in ps:
                    d_out = max(d_out, wts[p][j] * lp_out[p])
            n_prev = n_here
        ratio = 0.0 if d_in == 0.0 else d_out / d_in
        ratios.append(float(ratio))
        if ratio >= 1.0:
            failures.append({"pair": idx, "d_in": float(d_in),
                             "d_out": float(d_out)})
    return ContractionReport(
        ratios=ratios, max_ratio=max(ratios), failures=failures,
        seed=cfg.seed, m_bound=m_bound, delta=cfg.delta,
        t_delta=prof_traj.t0, ball_radius=radius,
        p_set=tuple(float(p) for p in cfg.p_set))


# ---------------------------------------------------------------------------
# Smallness frontier scan.

@dataclass
class KatoRow:
    amplitude: float
    bounded: bool
    aborted: bool
    note: str
    times: np.ndarray
    envelope: np.ndarray


@dataclass
class KatoScanReport:
    """Exploratory record of which L^3 sizes keep t^{1/2}||u||_inf tame.

    Never asserts blow-up; large amplitudes just show their growth.
    """

    rows: list
    frontier: float
    seed: int


def kato_smallness_scan(grid3: GridSpec, amplitudes, *, dt: float = 2e-3,
                        t_final: float = 2.0, seed: int = 0,
                        max_mode: int = 4,
                        diag_stride: int = 10) -> KatoScanReport:
    """Run band-limited random data at each L^3 amplitude to a fixed horizon.

    An amplitude counts as bounded when the run finishes and the envelope
    t^{1/2}||u(t)||_inf over the second half never exceeds 1.05x its value
    at the midpoint (transients excluded). The frontier is the largest
    amplitude below which every tested amplitude stayed bounded.
    """
    base = ops.random_div_free(grid3, seed=seed, max_mode=max_mode)
    base = rescale_lp(base, 3.0, 1.0)
    rows = []
    for amp in amplitudes:
        amp = float(amp)
        if amp == 0.0:
            rows.append(KatoRow(amp, True, False, "zero data",
                                np.array([]), np.array([])))
            continue
        cfg = SolverConfig(dt=dt, t_final=t_final, nu=1.0, snapshot_stride=0,
                           diag_stride=diag_stride, p_set=(3.0, np.inf))
        try:
            traj = evolve(base * amp, cfg)
        except SolverError as err:
            rows.append(KatoRow(amp, False, True, str(err),
                                np.array([]), np.array([])))
            continue
        ts = np.array([r.t for r in traj.diagnostics if r.t > 0])
        env = np.array([np.sqrt(r.t) * r.lp[np.inf]
                        for r in traj.diagnostics if r.t > 0])
        mid = len(env) // 2
        ok = bool(env.size >= 4 and np.all(env[mid:] <= 1.05 * env[mid]))
        rows.append(KatoRow(amp, ok, False, "", ts, env))
    frontier = 0.0
    for row in sorted(rows, key=lambda r: r.amplitude):
        if not row.bounded:
            break
        frontier = row.amplitude
    return KatoScanReport(rows=rows, frontier=frontier, seed=seed)
