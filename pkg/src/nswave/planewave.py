"""Plane-wave fields constant along one horizontal direction.

A 2D profile h(w, z) on a (w, z) torus embeds into a 3D box as

    phi = (h1/s, -c h1/s, h2) at w = (x - c y)/s,   s = sqrt(1 + c^2).

For rational wave speed c = m/n and a commensurable box, every 2D lattice
mode maps to exactly one 3D lattice mode, so the embedding is exact on the
torus: no interpolation enters, wavevector lengths are preserved, and the
projection, the heat multipliers, and dealiased products all commute with
the map. The 3D evolution of an embedded profile therefore tracks the 2D
evolution of the profile to roundoff on matched grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import operators as ops
from . import solver
from .field import SpectralField, _ifftn
from .grid import GridSpec

OFF_LATTICE_TOL = 1e-10


class CommensurabilityError(ValueError):
    pass


class PlaneWaveError(ValueError):
    """Input field is not a plane wave; carries the off-lattice fraction."""

    def __init__(self, message: str, fraction: float):
        super().__init__(message)
        self.fraction = fraction


def as_speed(c) -> Fraction:
    """Wave speeds are exact rationals; floats are accepted only when exact."""
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    f = Fraction(c)
    if f.denominator > 1024:
        raise ValueError(
            f"wave speed {c!r} is not an exact small rational; pass a Fraction or 'm/n' string")
    return f


def wave_scale(c) -> float:
    cf = float(as_speed(c))
    return math.sqrt(1.0 + cf * cf)


@dataclass
class WaveProfile:
    """2D two-component profile plus its wave speed.

    sobolev_index is the regularity used when reporting profile norms.
    """

    h: SpectralField
    c: Fraction
    sobolev_index: float = 1.0

    def __post_init__(self):
        if self.h.grid.dim != 2 or self.h.components != 2:
            raise ValueError("profile must be a 2-component field on a 2D grid")
        self.c = as_speed(self.c)

    @property
    def speed(self) -> float:
        return float(self.c)

    @property
    def scale(self) -> float:
        return wave_scale(self.c)

    def norm(self) -> float:
        return ops.hs_norm(self.h, self.sobolev_index)

    def divergence_free(self) -> "WaveProfile":
        cleaned = ops.zero_mean(ops.leray_project(ops.dealias(self.h)))
        return WaveProfile(cleaned, self.c, self.sobolev_index)


def _int_ratio(x: float, what: str) -> int:
    r = round(x)
    if r < 1 or abs(x - r) > 1e-9 * max(1.0, abs(x)):
        raise CommensurabilityError(
            f"{what} = {x:.12g} must be a positive integer: for c = m/n the box must "
            "satisfy L_x = r_x sqrt(1+c^2) P_w and L_y = r_y (n/m) sqrt(1+c^2) P_w "
            "(L_y free for c = 0) with integer r_x, r_y, and L_z an integer multiple "
            "of the profile z-period")
    return r


class ModeMap:
    """Exact lattice correspondence between a 2D profile grid and a 3D box.

    2D mode (a, b) maps to 3D mode (r_x a, -sign(c) r_y a, r_z b); the map
    is an isometry of wavevectors.
    """

    def __init__(self, grid2: GridSpec, grid3: GridSpec, c):
        if grid2.dim != 2 or grid3.dim != 3:
            raise ValueError("ModeMap needs a 2D profile grid and a 3D box grid")
        self.grid2, self.grid3 = grid2, grid3
        self.c = as_speed(c)
        self.c_float = float(self.c)
        self.s = wave_scale(self.c)
        lw, lz = grid2.period_per_axis
        lx, ly, lz3 = grid3.period_per_axis
        self.r_x = _int_ratio(lx / (self.s * lw), "L_x/(sqrt(1+c^2) P_w)")
        if self.c != 0:
            m, n = self.c.numerator, self.c.denominator
            self.r_y = _int_ratio(ly * abs(m) / (n * self.s * lw),
                                  "L_y |m|/(n sqrt(1+c^2) P_w)")
            self.q_sign = -1 if m > 0 else 1
        else:
            self.r_y = 0
            self.q_sign = 0
        self.r_z = _int_ratio(lz3 / lz, "L_z/P_z")
        nw, nz = grid2.points_per_axis
        nx, ny, nz3 = grid3.points_per_axis
        a = grid2.mode_indices(0)[:, None] * np.ones((1, nz), dtype=np.int64)
        b = np.ones((nw, 1), dtype=np.int64) * grid2.mode_indices(1)[None, :]
        p = self.r_x * a
        q = self.q_sign * self.r_y * a
        r = self.r_z * b
        valid = (
            (p >= -(nx // 2)) & (p <= nx // 2 - 1)
            & (q >= -(ny // 2)) & (q <= ny // 2 - 1)
            & (r >= -(nz3 // 2)) & (r <= nz3 // 2 - 1)
        )
        self.valid = valid
        self.src = np.nonzero(valid)
        self.dst = (p[valid] % nx, q[valid] % ny, r[valid] % nz3)
        self.amp = grid3.num_points / grid2.num_points
        self.lattice_mask = np.zeros(grid3.shape, dtype=bool)
        self.lattice_mask[self.dst] = True

    @property
    def transverse_length(self) -> float:
        """Box extent along the invariant direction; the embedding scales
        L^2 norms by its square root (times sqrt(r_z))."""
        lx, ly, _ = self.grid3.period_per_axis
        return lx * ly / self.grid2.period_per_axis[0]

    def _check_source(self, coeffs2: np.ndarray) -> None:
        lost = coeffs2[:, ~self.valid]
        if lost.size:
            scale = max(np.abs(coeffs2).max(), 1e-300)
            if np.abs(lost).max() > 1e-13 * scale:
                raise PlaneWaveError(
                    "profile has energy at modes the 3D grid cannot represent",
                    float(np.sum(np.abs(lost) ** 2) / np.sum(np.abs(coeffs2) ** 2)))

    def embed_vector(self, coeffs2: np.ndarray) -> np.ndarray:
        """(2, Nw, Nz) profile coefficients -> (3, Nx, Ny, Nz) coefficients."""
        self._check_source(coeffs2)
        out = np.zeros((3, *self.grid3.shape), dtype=np.complex128)
        h1 = coeffs2[0][self.src] * (self.amp / self.s)
        out[0][self.dst] = h1
        out[1][self.dst] = -self.c_float * h1
        out[2][self.dst] = coeffs2[1][self.src] * self.amp
        return out

    def embed_scalar(self, coeffs2: np.ndarray) -> np.ndarray:
        self._check_source(coeffs2)
        out = np.zeros((coeffs2.shape[0], *self.grid3.shape), dtype=np.complex128)
        for comp in range(coeffs2.shape[0]):
            out[comp][self.dst] = coeffs2[comp][self.src] * self.amp
        return out

    def extract_vector(self, coeffs3: np.ndarray) -> tuple[np.ndarray, float]:
        """Least-squares profile plus the relative energy the map cannot explain."""
        h = np.zeros((2, *self.grid2.shape), dtype=np.complex128)
        p1 = coeffs3[0][self.dst]
        p2 = coeffs3[1][self.dst]
        p3 = coeffs3[2][self.dst]
        cf, s = self.c_float, self.s
        h[0][self.src] = s * (p1 - cf * p2) / ((1.0 + cf * cf) * self.amp)
        h[1][self.src] = p3 / self.amp
        re = self.embed_vector(h)
        total = float(np.sum(np.abs(coeffs3) ** 2))
        if total == 0.0:
            return h, 0.0
        off = float(np.sum(np.abs(coeffs3 - re) ** 2)) / total
        return h, off

    def extract_scalar(self, coeffs3: np.ndarray) -> tuple[np.ndarray, float]:
        h = np.zeros((coeffs3.shape[0], *self.grid2.shape), dtype=np.complex128)
        for comp in range(coeffs3.shape[0]):
            h[comp][self.src] = coeffs3[comp][self.dst] / self.amp
        re = self.embed_scalar(h)
        total = float(np.sum(np.abs(coeffs3) ** 2))
        if total == 0.0:
            return h, 0.0
        off = float(np.sum(np.abs(coeffs3 - re) ** 2)) / total
        return h, off


def canonical_box(grid2: GridSpec, c, *, points=None) -> GridSpec:
    """Smallest commensurable 3D box: L_x = s P_w, L_y = (n/m) s P_w
    (L_y = L_x for c = 0), L_z = P_z. Matched point counts by default,
    which is what makes discrete 2D/3D evolutions commute exactly."""
    c = as_speed(c)
    s = wave_scale(c)
    lw, lz = grid2.period_per_axis
    lx = s * lw
    if c != 0:
        ly = Fraction(c.denominator, abs(c.numerator)) * 1.0 * s * lw
    else:
        ly = lx
    nw, nz = grid2.points_per_axis
    if points is None:
        points = (nw, nw, nz)
    return GridSpec(3, tuple(points), (lx, float(ly), lz),
                    dealias_fraction=grid2.dealias_fraction)


def embed_W(prof: WaveProfile, grid3: GridSpec) -> SpectralField:
    """The plane-wave field W[h] on a commensurable 3D box."""
    mm = ModeMap(prof.h.grid, grid3, prof.c)
    return SpectralField(grid3, mm.embed_vector(prof.h.coeffs),
                         real_space=prof.h.real_space)


def off_lattice_fraction(phi: SpectralField, c, grid2: GridSpec | None = None) -> float:
    mm = _map_for(phi, c, grid2)
    _, off = mm.extract_vector(phi.coeffs)
    return off


def _map_for(phi: SpectralField, c, grid2: GridSpec | None) -> ModeMap:
    if phi.grid.dim != 3:
        raise ValueError("expected a 3D field")
    if grid2 is None:
        s = wave_scale(c)
        lx, _, lz = phi.grid.period_per_axis
        nx, _, nz = phi.grid.points_per_axis
        grid2 = GridSpec(2, (nx, nz), (lx / s, lz),
                         dealias_fraction=phi.grid.dealias_fraction)
    return ModeMap(grid2, phi.grid, c)


def extract_profile(phi: SpectralField, c, grid2: GridSpec | None = None,
                    tol: float = OFF_LATTICE_TOL) -> WaveProfile:
    """Left inverse of embed_W; rejects fields that are not plane waves."""
    if phi.components != 3:
        raise ValueError("expected a 3-component field")
    mm = _map_for(phi, c, grid2)
    h, off = mm.extract_vector(phi.coeffs)
    if off > tol:
        raise PlaneWaveError(
            f"field is not a c = {as_speed(c)} plane wave: off-lattice energy "
            f"fraction {off:.3g} exceeds {tol:.1g}", off)
    return WaveProfile(SpectralField(mm.grid2, h, real_space=phi.real_space), c)


def embed_scalar(f2: SpectralField, c, grid3: GridSpec) -> SpectralField:
    mm = ModeMap(f2.grid, grid3, c)
    return SpectralField(grid3, mm.embed_scalar(f2.coeffs), real_space=f2.real_space)


def extract_scalar(phi: SpectralField, c, grid2: GridSpec | None = None,
                   tol: float = OFF_LATTICE_TOL) -> SpectralField:
    if phi.grid.dim != 3:
        raise ValueError("expected a 3D field")
    if grid2 is None:
        s = wave_scale(c)
        lx, _, lz = phi.grid.period_per_axis
        nx, _, nz = phi.grid.points_per_axis
        grid2 = GridSpec(2, (nx, nz), (lx / s, lz),
                         dealias_fraction=phi.grid.dealias_fraction)
    mm = ModeMap(grid2, phi.grid, c)
    h, off = mm.extract_scalar(phi.coeffs)
    if off > tol:
        raise PlaneWaveError(
            f"field is not a c = {as_speed(c)} scalar plane wave: off-lattice "
            f"fraction {off:.3g}", off)
    return SpectralField(grid2, h, real_space=phi.real_space)


def change_of_variables_g_to_h(g0: SpectralField, c) -> WaveProfile:
    """Profile from a 3-component ansatz field g(xi, z), xi = x - c y.

    h1 = (g1 - c g2)/s with the xi-axis period relabeled to P_xi/s (a pure
    change of independent variable, so coefficients move unchanged); h2 = g3.
    """
    if g0.grid.dim != 2 or g0.components != 3:
        raise ValueError("expected a 3-component field on the (xi, z) grid")
    c = as_speed(c)
    s = wave_scale(c)
    lxi, lz = g0.grid.period_per_axis
    grid_w = GridSpec(2, g0.grid.points_per_axis, (lxi / s, lz),
                      dealias_fraction=g0.grid.dealias_fraction)
    h = np.empty((2, *grid_w.shape), dtype=np.complex128)
    h[0] = (g0.coeffs[0] - float(c) * g0.coeffs[1]) / s
    h[1] = g0.coeffs[2]
    return WaveProfile(SpectralField(grid_w, h, real_space=g0.real_space), c)


def profile_to_g(prof: WaveProfile) -> SpectralField:
    """The slaved ansatz field g(xi, z) whose plane wave equals W[h]."""
    s = prof.scale
    lw, lz = prof.h.grid.period_per_axis
    grid_xi = GridSpec(2, prof.h.grid.points_per_axis, (s * lw, lz),
                       dealias_fraction=prof.h.grid.dealias_fraction)
    g = np.empty((3, *grid_xi.shape), dtype=np.complex128)
    g[0] = prof.h.coeffs[0] / s
    g[1] = -prof.speed * prof.h.coeffs[0] / s
    g[2] = prof.h.coeffs[1]
    return SpectralField(grid_xi, g, real_space=prof.h.real_space)


@dataclass
class XcsDecomposition:
    """Helmholtz split of a plane wave: solenoidal profile part plus the
    gradient of an embedded scalar potential."""

    solenoidal_profile: WaveProfile
    potential: SpectralField  # scalar Psi on the profile grid

    def reembed(self, grid3: GridSpec) -> SpectralField:
        sol = embed_W(self.solenoidal_profile, grid3)
        psi3 = embed_scalar(self.potential, self.solenoidal_profile.c, grid3)
        grad = ops.gradient(psi3)
        return sol + grad


def decompose_Xcs(phi: SpectralField, c) -> XcsDecomposition:
    prof = extract_profile(phi, c)
    h = prof.h
    grid2 = h.grid
    ks = grid2.k_vectors
    k_dot = np.zeros(grid2.shape, dtype=np.complex128)
    for i in range(2):
        k_dot += ks[i] * h.coeffs[i]
    psi_hat = (-1j * k_dot * grid2.inv_k_squared)[np.newaxis]
    sol = ops.leray_project(h)
    return XcsDecomposition(
        solenoidal_profile=WaveProfile(sol, prof.c, prof.sobolev_index),
        potential=SpectralField(grid2, psi_hat, real_space=h.real_space),
    )


class EmbeddedWave:
    """Wave provider for perturbation runs: 2D profile stages are computed
    in the profile grid and embedded, so the background costs 2D work."""

    def __init__(self, profile_traj: solver.Trajectory, grid3: GridSpec,
                 cfg: solver.SolverConfig):
        if profile_traj.grid.dim != 2:
            raise ValueError("EmbeddedWave needs a 2D profile trajectory")
        if profile_traj.wave_speed is None:
            raise ValueError("profile trajectory must carry its wave speed")
        if not profile_traj.is_dense():
            raise ValueError("dense-output profile trajectory required (snapshot_stride 1)")
        if abs(profile_traj.dt - cfg.dt) > 1e-12 * cfg.dt:
            raise ValueError("profile trajectory dt must match the perturbation dt")
        if profile_traj.final_time - profile_traj.t0 + 1e-9 * cfg.dt < cfg.t_final:
            raise ValueError("horizon mismatch: profile trajectory shorter than t_final")
        self.traj = profile_traj
        self.map = ModeMap(profile_traj.grid, grid3, profile_traj.wave_speed)
        self.grid2 = profile_traj.grid
        self.grid3 = grid3
        g2 = self.grid2
        self.E, self.E2 = solver._linear_factors(g2, cfg.dt, cfg.nu)
        self.dt = cfg.dt

    def _nonlin2d(self, a, stage):
        g2 = self.grid2
        u_phys = _ifftn(a, g2).real
        return -solver._leray_raw(g2, ops._sym_tensor_divergence(g2, u_phys, None))

    def stage_physical(self, j):
        base = self.traj.states[j].coeffs
        stages, _ = solver.ifrk4_stages(base, self.E, self.E2, self.dt, self._nonlin2d)
        return tuple(_ifftn(self.map.embed_vector(a), self.grid3).real for a in stages)

    def advance(self, j):
        pass

    def m_bound(self) -> float:
        # sup and gradient-sup norms of the embedding equal those of the
        # profile pointwise, so the 2D diagnostic is the 3D value.
        rows = self.traj.diagnostics
        return max(r.m_bound for r in rows) if rows else 0.0


def commutation_check(prof0: WaveProfile, cfg: solver.SolverConfig,
                      grid3: GridSpec) -> float:
    """Max relative L2 distance between evolve-then-embed and
    embed-then-evolve over the stored sample times."""
    prof0 = prof0.divergence_free()
    traj2 = solver.evolve(prof0.h, cfg)
    phi0 = embed_W(prof0, grid3)
    traj3 = solver.evolve(phi0, cfg)
    mm = ModeMap(prof0.h.grid, grid3, prof0.c)
    worst = 0.0
    for (t2, s2), (t3, s3) in zip(zip(traj2.times, traj2.states),
                                  zip(traj3.times, traj3.states)):
        if abs(t2 - t3) > 1e-9:
            raise RuntimeError("sample grids diverged between the two runs")
        emb = mm.embed_vector(s2.coeffs)
        num = np.sqrt(np.sum(np.abs(s3.coeffs - emb) ** 2))
        den = np.sqrt(np.sum(np.abs(s3.coeffs) ** 2))
        if den > 0:
            worst = max(worst, float(num / den))
    return worst


@dataclass
class ProfileDecayReport:
    monotone: bool
    delta: float
    t_delta: float | None
    envelope_max: float | None  # sup of ||h||_inf sqrt(t - t_delta) / (2 delta)
    envelope_ok: bool
    times: np.ndarray
    l2: np.ndarray
    sup: np.ndarray


def profile_l2_decay_check(prof0: WaveProfile, cfg: solver.SolverConfig,
                           delta: float) -> ProfileDecayReport:
    """Evolve the profile; find when ||h||_2 drops below delta and compare
    the subsequent sup norm against the diffusive envelope 2 delta/sqrt(t-t0)."""
    prof0 = prof0.divergence_free()
    traj = solver.evolve(prof0.h, cfg)
    times = np.array([r.t for r in traj.diagnostics])
    l2 = np.sqrt(2.0 * np.array([r.energy for r in traj.diagnostics]))
    sup = np.array([r.lp[np.inf] for r in traj.diagnostics])
    monotone = traj.energy_monotone()
    below = np.nonzero(l2 < delta)[0]
    if below.size == 0:
        return ProfileDecayReport(monotone, delta, None, None, False, times, l2, sup)
    i0 = int(below[0])
    t_delta = float(times[i0])
    later = times > t_delta
    if later.any():
        ratio = sup[later] * np.sqrt(times[later] - t_delta) / (2.0 * delta)
        env_max = float(ratio.max())
    else:
        env_max = 0.0
    return ProfileDecayReport(monotone, delta, t_delta, env_max, env_max <= 1.0,
                              times, l2, sup)
