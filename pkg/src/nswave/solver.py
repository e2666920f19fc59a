"""Time integration for the incompressible equations in spectral form.

The stepper is an integrating-factor RK4: the heat semigroup is applied
exactly through multipliers and the classical RK4 tableau integrates the
projected nonlinearity in the transformed variable. Perturbation runs
advance the background wave and the perturbation as one coupled system,
so splitting a run into background plus perturbation reproduces the
unsplit run to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import operators as ops
from .field import SpectralField, _fftn, _ifftn
from .grid import GridSpec

SCHEMES = ("integrating-factor-RK4",)

DEFAULT_P_SET = (3.0, 6.0, np.inf)


class SolverError(RuntimeError):
    """Raised when a run cannot continue; carries the failing time."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t = {t:.6g}")
        self.t = t


@dataclass(frozen=True)
class SolverConfig:
    """Stepping parameters. nu is kept at 1 for all headline runs."""

    dt: float
    t_final: float
    nu: float = 1.0
    scheme: str = "integrating-factor-RK4"
    snapshot_stride: int = 1
    diag_stride: int = 1
    cfl_factor: float = 0.5
    enforce_cfl: bool = True
    p_set: tuple = DEFAULT_P_SET
    hs_index: float = 1.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final <= 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.nu <= 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; options: {SCHEMES}")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("t_final must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def replace(self, **kw) -> "SolverConfig":
        from dataclasses import replace as _replace

        return _replace(self, **kw)


@dataclass
class DiagnosticsRow:
    t: float
    lp: dict
    hs: float
    energy: float
    div_resid: float
    m_bound: float

    def as_dict(self) -> dict:
        out = {"t": self.t}
        for p, val in self.lp.items():
            key = "lp_pinf" if np.isinf(p) else f"lp_p{p:g}"
            out[key] = val
        out["hs"] = self.hs
        out["energy"] = self.energy
        out["div_resid"] = self.div_resid
        out["M_bound"] = self.m_bound
        return out


def diagnostics_for(state: SpectralField, t: float, p_set=DEFAULT_P_SET,
                    hs_index: float = 1.0) -> DiagnosticsRow:
    lp = ops.lp_norms_bundle(state, p_set)
    sup = lp.get(np.inf)
    if sup is None:
        sup = ops.lp_norm(state, np.inf)
    return DiagnosticsRow(
        t=t,
        lp=lp,
        hs=ops.hs_norm(state, hs_index),
        energy=0.5 * ops.l2_norm_spectral(state) ** 2,
        div_resid=ops.divergence_residual(state) if state.components == state.grid.dim else 0.0,
        m_bound=sup + ops.sup_norm_gradient(state),
    )


@dataclass
class Trajectory:
    """Stored samples of a run: states at snapshot stride, diagnostics at
    diag stride, and the per-step energy series for monotonicity checks."""

    grid: GridSpec
    nu: float
    dt: float
    times: list
    states: list
    diagnostics: list
    step_times: np.ndarray
    step_energies: np.ndarray
    wave_speed: Fraction | None = None
    unforced: bool = True

    @property
    def t0(self) -> float:
        return self.step_times[0]

    @property
    def final_time(self) -> float:
        return self.step_times[-1]

    @property
    def final_state(self) -> SpectralField:
        return self.states[-1]

    def state_at(self, t: float) -> SpectralField:
        for tj, s in zip(self.times, self.states):
            if abs(tj - t) <= 1e-9 * max(1.0, abs(t)):
                return s
        raise KeyError(f"no stored state at t = {t:.6g}")

    def is_dense(self) -> bool:
        """True when states are stored at every micro-step."""
        if len(self.times) != len(self.step_times):
            return False
        return bool(np.allclose(self.times, self.step_times, rtol=0, atol=1e-9))

    def norm_series(self, p: float) -> tuple[np.ndarray, np.ndarray]:
        ts, vs = [], []
        for row in self.diagnostics:
            val = row.lp.get(p)
            if val is not None:
                ts.append(row.t)
                vs.append(val)
        return np.asarray(ts), np.asarray(vs)

    def energy_monotone(self, rtol: float = 1e-12) -> bool:
        e = self.step_energies
        scale = max(e.max(), 1e-300)
        return bool(np.all(np.diff(e) <= rtol * scale))

    def max_divergence_residual(self) -> float:
        vals = [ops.divergence_residual(s) for s in self.states
                if s.components == s.grid.dim]
        return max(vals) if vals else 0.0


def _linear_factors(grid: GridSpec, dt: float, nu: float):
    lam = -nu * grid.k_squared
    return np.exp(lam * dt), np.exp(lam * dt * 0.5)


def ifrk4_step(state: np.ndarray, E: np.ndarray, E2: np.ndarray, dt: float, nonlin):
    """One integrating-factor RK4 step on raw coefficients.

    nonlin(a, stage) returns the nonlinear part of the right-hand side for
    stage value a; stages are at offsets (0, dt/2, dt/2, dt) in time.
    """
    k1 = nonlin(state, 0)
    a2 = E2 * (state + (0.5 * dt) * k1)
    k2 = nonlin(a2, 1)
    a3 = E2 * state + (0.5 * dt) * k2
    k3 = nonlin(a3, 2)
    a4 = E * state + dt * (E2 * k3)
    k4 = nonlin(a4, 3)
    return E * state + (dt / 6.0) * (E * k1 + 2.0 * (E2 * (k2 + k3)) + k4)


def ifrk4_stages(state: np.ndarray, E: np.ndarray, E2: np.ndarray, dt: float, nonlin):
    """The four stage values of ifrk4_step, for lockstep co-evolution."""
    k1 = nonlin(state, 0)
    a2 = E2 * (state + (0.5 * dt) * k1)
    k2 = nonlin(a2, 1)
    a3 = E2 * state + (0.5 * dt) * k2
    k3 = nonlin(a3, 2)
    a4 = E * state + dt * (E2 * k3)
    return (state, a2, a3, a4), (k1, k2, k3)


def _ns_nonlin(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """-P div(u (x) u) on raw coefficients (symmetric product path)."""
    u_phys = _ifftn(coeffs, grid).real
    div = ops._sym_tensor_divergence(grid, u_phys, None)
    return -_leray_raw(grid, div)


def _leray_raw(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    ks = grid.k_vectors
    k_dot = np.zeros(grid.shape, dtype=np.complex128)
    for i in range(grid.dim):
        k_dot += ks[i] * coeffs[i]
    k_dot *= grid.inv_k_squared
    out = np.empty_like(coeffs)
    for i in range(grid.dim):
        out[i] = coeffs[i] - ks[i] * k_dot
    return out


def _check_initial(u0: SpectralField, what: str = "initial data") -> SpectralField:
    if u0.components != u0.grid.dim:
        raise ValueError(f"{what} must have one component per axis")
    if ops.divergence_residual(u0) > 1e-6:
        raise ValueError(f"{what} is not divergence-free (project it first)")
    if np.abs(u0.mean_value()).max() > 1e-10 * max(1.0, np.abs(u0.coeffs).max() / u0.grid.num_points):
        raise ValueError(f"{what} must have zero mean")
    cleaned = SpectralField(u0.grid, _leray_raw(u0.grid, u0.coeffs * u0.grid.dealias_mask),
                            real_space=u0.real_space)
    return cleaned


class _Recorder:
    def __init__(self, grid, cfg, t0, real_space=True):
        self.grid, self.cfg, self.t0 = grid, cfg, t0
        self.real_space = real_space
        self.times, self.states, self.diag = [], [], []
        self.step_times, self.step_energies = [], []

    def record(self, j, coeffs, n_steps):
        t = self.t0 + j * self.cfg.dt
        self.step_times.append(t)
        w = self.grid.volume / self.grid.num_points**2
        self.step_energies.append(0.5 * w * float(np.sum(np.abs(coeffs) ** 2)))
        last = j == n_steps
        snap = self.cfg.snapshot_stride
        diag = self.cfg.diag_stride
        want_state = last or j == 0 or (snap > 0 and j % snap == 0)
        want_diag = last or j == 0 or (diag > 0 and j % diag == 0)
        if want_state or want_diag:
            f = SpectralField(self.grid, coeffs.copy(), real_space=self.real_space)
            if want_state:
                self.times.append(t)
                self.states.append(f)
            if want_diag:
                self.diag.append(diagnostics_for(f, t, self.cfg.p_set, self.cfg.hs_index))

    def finish(self, nu, dt, wave_speed=None, unforced=True) -> Trajectory:
        return Trajectory(
            grid=self.grid, nu=nu, dt=dt,
            times=self.times, states=self.states, diagnostics=self.diag,
            step_times=np.asarray(self.step_times),
            step_energies=np.asarray(self.step_energies),
            wave_speed=wave_speed, unforced=unforced,
        )


def _guard_state(coeffs: np.ndarray, t: float) -> None:
    if not np.isfinite(coeffs).all():
        raise SolverError("solution lost finiteness (NaN/Inf)", t)


def _guard_cfl(grid, cfg, sup_speed: float, t: float) -> None:
    if cfg.enforce_cfl and sup_speed > 0:
        bound = cfg.cfl_factor * grid.dx_min / sup_speed
        if cfg.dt > bound:
            raise SolverError(
                f"CFL violation: dt = {cfg.dt:.3g} exceeds {bound:.3g} "
                f"(|u|_max = {sup_speed:.3g})", t)


def step(u: SpectralField, cfg: SolverConfig) -> SpectralField:
    """Advance one dt. Input must be divergence-free."""
    grid = u.grid
    E, E2 = _linear_factors(grid, cfg.dt, cfg.nu)
    sup = ops.lp_norm(u, np.inf)
    _guard_cfl(grid, cfg, sup, 0.0)
    nonlin = lambda a, stage: _ns_nonlin(grid, a)
    out = ifrk4_step(u.coeffs, E, E2, cfg.dt, nonlin)
    _guard_state(out, cfg.dt)
    return SpectralField(grid, out, real_space=True)


def evolve(u0: SpectralField, cfg: SolverConfig, *, t0: float = 0.0,
           linear_only: bool = False) -> Trajectory:
    """Unforced run from divergence-free, zero-mean data."""
    u0 = _check_initial(u0)
    grid = u0.grid
    E, E2 = _linear_factors(grid, cfg.dt, cfg.nu)
    rec = _Recorder(grid, cfg, t0)
    n = cfg.n_steps
    state = u0.coeffs.copy()
    rec.record(0, state, n)
    zero = np.zeros_like(state)
    for j in range(n):
        t = t0 + j * cfg.dt
        if linear_only:
            nonlin = lambda a, stage: zero
        else:
            sup = [0.0]

            def nonlin(a, stage, sup=sup):
                u_phys = _ifftn(a, grid).real
                if stage == 0:
                    sup[0] = float(np.sqrt(np.sum(u_phys**2, axis=0).max()))
                return -_leray_raw(grid, ops._sym_tensor_divergence(grid, u_phys, None))

        state = ifrk4_step(state, E, E2, cfg.dt, nonlin)
        if not linear_only:
            _guard_cfl(grid, cfg, sup[0], t)
        _guard_state(state, t + cfg.dt)
        rec.record(j + 1, state, n)
    return rec.finish(cfg.nu, cfg.dt)


def perturbation_rhs(v: SpectralField, phi: SpectralField) -> SpectralField:
    """P div((v+phi)(x)(v+phi) - phi(x)phi), the perturbation nonlinearity."""
    if v.components != v.grid.dim or phi.components != phi.grid.dim:
        raise ValueError("perturbation_rhs expects vector fields")
    v._check_same(phi)
    grid = v.grid
    w_phys = _ifftn(v.coeffs + phi.coeffs, grid).real
    phi_phys = _ifftn(phi.coeffs, grid).real
    div = ops._sym_tensor_divergence(grid, w_phys, phi_phys)
    return SpectralField(grid, _leray_raw(grid, div), real_space=True)


class ZeroWave:
    """Background wave identically zero: perturbation run equals a plain run."""

    def __init__(self, grid: GridSpec):
        self.grid = grid

    def stage_physical(self, j):
        return (None, None, None, None)

    def advance(self, j):
        pass

    def m_bound(self) -> float:
        return 0.0


class StoredWave:
    """Background from a dense 3D trajectory; RK4 stage values are
    recomputed from each stored state so the coupled step matches the
    unsplit arithmetic exactly."""

    def __init__(self, traj: Trajectory, cfg: SolverConfig):
        if traj.grid.dim != 3 and traj.grid.dim != 2:
            raise ValueError("stored wave trajectory must be 2D or 3D")
        if not traj.is_dense():
            raise ValueError("dense-output wave trajectory required (snapshot_stride 1)")
        if abs(traj.dt - cfg.dt) > 1e-12 * cfg.dt:
            raise ValueError("wave trajectory dt must match the perturbation dt")
        if traj.final_time - traj.t0 + 1e-9 * cfg.dt < cfg.t_final:
            raise ValueError("horizon mismatch: wave trajectory shorter than t_final")
        self.traj = traj
        self.grid = traj.grid
        self.E, self.E2 = _linear_factors(self.grid, cfg.dt, cfg.nu)
        self.dt = cfg.dt

    def stage_physical(self, j):
        base = self.traj.states[j].coeffs
        nonlin = lambda a, stage: -_leray_raw(self.grid, ops._sym_tensor_divergence(
            self.grid, _ifftn(a, self.grid).real, None))
        stages, _ = ifrk4_stages(base, self.E, self.E2, self.dt, nonlin)
        return tuple(_ifftn(a, self.grid).real for a in stages)

    def advance(self, j):
        pass

    def m_bound(self) -> float:
        rows = self.traj.diagnostics
        if rows:
            return max(r.m_bound for r in rows)
        return 0.0


def evolve_perturbation(v0: SpectralField, phi_traj, cfg: SolverConfig) -> Trajectory:
    """Advance v_t = Lap v - P div((v+phi)(x)(v+phi) - phi(x)phi).

    phi_traj may be None (zero wave), a dense Trajectory on the same 3D
    grid, a dense 2D profile Trajectory carrying wave_speed (embedded on
    the fly), or any object with the wave-provider interface.
    """
    v0 = _check_initial(v0, "perturbation data")
    grid = v0.grid
    provider = _wave_provider(phi_traj, grid, cfg)
    t0 = getattr(phi_traj, "t0", 0.0) if isinstance(phi_traj, Trajectory) else 0.0
    E, E2 = _linear_factors(grid, cfg.dt, cfg.nu)
    rec = _Recorder(grid, cfg, t0)
    n = cfg.n_steps
    state = v0.coeffs.copy()
    rec.record(0, state, n)
    for j in range(n):
        t = t0 + j * cfg.dt
        phis = provider.stage_physical(j)
        sup = [0.0]

        def nonlin(a, stage, sup=sup):
            w_phys = _ifftn(a, grid).real
            phi_phys = phis[stage]
            if phi_phys is not None:
                w_phys = w_phys + phi_phys
            if stage == 0:
                sup[0] = float(np.sqrt(np.sum(w_phys**2, axis=0).max()))
            return -_leray_raw(grid, ops._sym_tensor_divergence(grid, w_phys, phi_phys))

        state = ifrk4_step(state, E, E2, cfg.dt, nonlin)
        _guard_cfl(grid, cfg, sup[0], t)
        _guard_state(state, t + cfg.dt)
        provider.advance(j)
        rec.record(j + 1, state, n)
    return rec.finish(cfg.nu, cfg.dt, unforced=False)


def _wave_provider(phi_traj, grid: GridSpec, cfg: SolverConfig):
    if phi_traj is None:
        return ZeroWave(grid)
    if isinstance(phi_traj, Trajectory):
        if phi_traj.grid.dim == 2 and grid.dim == 3:
            from .planewave import EmbeddedWave

            return EmbeddedWave(phi_traj, grid, cfg)
        if not phi_traj.grid.compatible(grid):
            raise ValueError("wave trajectory grid does not match the perturbation grid")
        return StoredWave(phi_traj, cfg)
    return phi_traj  # anything implementing the provider interface


def weighted_norm(traj: Trajectory, gamma: float, L: float) -> float:
    """sup over stored samples of e^(-L t) t^((1-gamma)/2) ||v(t)||_{3/gamma}.

    Time is measured from the trajectory start.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    p = 3.0 / gamma
    expo = (1.0 - gamma) / 2.0
    best = 0.0
    for t, state in zip(traj.times, traj.states):
        tau = t - traj.t0
        w = np.exp(-L * tau) * tau**expo
        if w == 0.0:
            continue
        best = max(best, w * ops.lp_norm(state, p))
    return best


def duhamel_residual(traj: Trajectory, u0: SpectralField) -> float:
    """Max relative L2 defect of the integral form over stored samples.

    u(t) is compared against e^{t Lap}u0 minus the trapezoid quadrature of
    e^{(t-s) Lap} P(u.grad u)(s) on the stored sample grid (which must be
    uniform).
    """
    if len(traj.times) < 2:
        return 0.0
    times = np.asarray(traj.times)
    hs = np.diff(times)
    h = hs[0]
    if not np.allclose(hs, h, rtol=1e-9, atol=0):
        raise ValueError("duhamel_residual requires uniformly spaced stored samples")
    grid = traj.grid
    E = np.exp(-traj.nu * grid.k_squared * h)
    w = grid.volume / grid.num_points**2

    def N(coeffs):
        u_phys = _ifftn(coeffs, grid).real
        return _leray_raw(grid, ops._sym_tensor_divergence(grid, u_phys, None))

    heat = u0.coeffs.copy()
    integral = np.zeros_like(heat)
    n_prev = N(traj.states[0].coeffs)
    worst = 0.0
    scale = max(np.sqrt(w * np.sum(np.abs(u0.coeffs) ** 2)), 1e-300)
    for j in range(1, len(times)):
        n_here = N(traj.states[j].coeffs)
        integral = E * (integral + (0.5 * h) * n_prev) + (0.5 * h) * n_here
        heat = E * heat
        defect = traj.states[j].coeffs - (heat - integral)
        num = np.sqrt(w * np.sum(np.abs(defect) ** 2))
        den = max(np.sqrt(w * np.sum(np.abs(traj.states[j].coeffs) ** 2)), 1e-3 * scale)
        worst = max(worst, float(num / den))
        n_prev = n_here
    return worst
