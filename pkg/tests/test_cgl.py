"""Ginzburg-Landau flow: constant-mode closed form, gauge symmetry, the
two-sided energy identity, plane-wave commutation, and perturbations."""

import numpy as np
import pytest

from nswave import (
    BumpSpec,
    CGLConfig,
    CGLStabilityConfig,
    GridSpec,
    SpectralField,
    canonical_box,
    cgl_commutation_check,
    cgl_energy_identity_check,
    cgl_evolve,
    cgl_evolve_perturbation,
    cgl_field,
    cgl_semigroup,
    cgl_stability_run,
    gauge_covariance_defect,
    random_scalar_field,
    scalar_bump,
)
from nswave import operators as ops
from nswave.cgl import cgl_profile_envelope

TWO_PI = 2.0 * np.pi


def _grid2(n=32, period=TWO_PI):
    return GridSpec.cube(n, period, dim=2, dealias_fraction=0.5)


def _constant_reference(a0, eps, k, t):
    """Closed form for spatially constant data: the cubic ODE
    a' = (i - k)|a|^2 a integrates to a known amplitude and phase."""
    rho0 = abs(a0) ** 2
    grow = 1.0 + 2.0 * k * rho0 * t
    return a0 * grow**-0.5 * np.exp(1j * np.log(grow) / (2.0 * k))


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            CGLConfig(eps=0.0, k=1.0, dt=1e-2, t_final=0.1)
        with pytest.raises(ValueError):
            CGLConfig(eps=1.0, k=-1.0, dt=1e-2, t_final=0.1)
        with pytest.raises(ValueError):
            CGLConfig(eps=1.0, k=1.0, dt=1e-2, t_final=0.105)
        with pytest.raises(ValueError):
            CGLConfig(eps=1.0, k=1.0, dt=1e-2, t_final=0.1, snapshot_stride=0)

    def test_replace_and_step_count(self):
        cfg = CGLConfig(eps=1.0, k=2.0, dt=1e-2, t_final=0.5)
        assert cfg.n_steps == 50
        assert cfg.replace(t_final=1.0).n_steps == 100


class TestCubicDealiasRule:
    def test_default_grid_is_rejected(self):
        grid = GridSpec.cube(16, TWO_PI, dim=2)  # 2/3 rule
        f0 = random_scalar_field(grid, seed=0, max_mode=2)
        with pytest.raises(ValueError):
            cgl_evolve(f0, CGLConfig(eps=1.0, k=1.0, dt=1e-2, t_final=0.1))

    def test_half_rule_accepted(self):
        f0 = random_scalar_field(_grid2(16), seed=0, max_mode=2, amplitude=0.1)
        traj = cgl_evolve(f0, CGLConfig(eps=1.0, k=1.0, dt=1e-2, t_final=0.1))
        assert np.isfinite(traj.step_energies).all()


class TestConstantMode:
    def test_matches_the_cubic_ode(self):
        grid = _grid2(8)
        a0 = 0.8 + 0.3j
        f0 = cgl_field(grid, np.full(grid.shape, a0))
        eps, k, t_final = 1.0, 1.0, 1.0
        traj = cgl_evolve(f0, CGLConfig(eps=eps, k=k, dt=1e-3, t_final=t_final))
        a_num = traj.final_state.coeffs[0, 0, 0] / grid.num_points
        a_ref = _constant_reference(a0, eps, k, t_final)
        assert abs(a_num - a_ref) <= 1e-8 * abs(a_ref)

    def test_damping_strength_enters(self):
        grid = _grid2(8)
        a0 = 1.0 + 0.0j
        f0 = cgl_field(grid, np.full(grid.shape, a0))
        traj = cgl_evolve(f0, CGLConfig(eps=1.0, k=4.0, dt=1e-3, t_final=0.5))
        a_num = traj.final_state.coeffs[0, 0, 0] / grid.num_points
        a_ref = _constant_reference(a0, 1.0, 4.0, 0.5)
        assert abs(a_num - a_ref) <= 1e-8 * abs(a_ref)


class TestLinearFlow:
    def test_semigroup_multiplier(self):
        grid = _grid2(16)
        coeffs = np.zeros((1, 16, 16), dtype=np.complex128)
        coeffs[0, 2, 1] = 3.0 - 1.0j
        f = SpectralField(grid, coeffs, real_space=False)
        out = cgl_semigroup(f, 0.3, eps=0.5)
        k2 = 2.0**2 + 1.0**2
        expected = (3.0 - 1.0j) * np.exp(-(0.5 + 1j) * k2 * 0.3)
        assert out.coeffs[0, 2, 1] == pytest.approx(expected, rel=1e-14)
        assert abs(out.coeffs).sum() == pytest.approx(abs(expected), rel=1e-14)

    def test_backward_time_rejected(self):
        f = random_scalar_field(_grid2(8), seed=1)
        with pytest.raises(ValueError):
            cgl_semigroup(f, -0.1, eps=1.0)

    def test_linear_only_run_is_the_semigroup(self):
        f0 = random_scalar_field(_grid2(16), seed=2, max_mode=3)
        cfg = CGLConfig(eps=0.7, k=1.0, dt=1e-2, t_final=0.2)
        traj = cgl_evolve(f0, cfg, linear_only=True)
        ref = cgl_semigroup(f0, 0.2, eps=0.7)
        diff = ops.l2_norm_spectral(traj.final_state - ref)
        assert diff <= 1e-13 * ops.l2_norm_spectral(ref)


class TestEnergyIdentity:
    def test_instant_defect_is_roundoff(self):
        f0 = random_scalar_field(_grid2(), seed=3, max_mode=2, amplitude=0.2)
        cfg = CGLConfig(eps=0.2, k=1.0, dt=1e-3, t_final=0.25)
        traj = cgl_evolve(f0, cfg)
        rep = cgl_energy_identity_check(traj, 0.2, 1.0)
        assert rep.max_instant_defect <= 1e-10
        assert rep.gradient_term_squared

    def test_step_defect_scales_with_dt_squared(self):
        f0 = random_scalar_field(_grid2(), seed=3, max_mode=2, amplitude=0.2)
        coarse = cgl_evolve(f0, CGLConfig(eps=0.2, k=1.0, dt=4e-3, t_final=0.24))
        fine = cgl_evolve(f0, CGLConfig(eps=0.2, k=1.0, dt=1e-3, t_final=0.24))
        d_coarse = cgl_energy_identity_check(coarse, 0.2, 1.0).max_step_defect
        d_fine = cgl_energy_identity_check(fine, 0.2, 1.0).max_step_defect
        assert d_fine <= 1e-6
        ratio = d_coarse / d_fine
        assert 8.0 <= ratio <= 32.0

    def test_linear_only_variant(self):
        f0 = random_scalar_field(_grid2(16), seed=4, max_mode=2)
        cfg = CGLConfig(eps=1.0, k=1.0, dt=1e-3, t_final=0.1)
        traj = cgl_evolve(f0, cfg, linear_only=True)
        rep = cgl_energy_identity_check(traj, 1.0, 1.0, linear_only=True)
        assert rep.max_instant_defect <= 1e-10
        assert rep.max_step_defect <= 5e-5

    def test_energy_never_grows(self):
        f0 = random_scalar_field(_grid2(), seed=5, max_mode=3, amplitude=0.5)
        traj = cgl_evolve(f0, CGLConfig(eps=1.0, k=1.0, dt=2e-3, t_final=0.2))
        assert traj.energy_monotone(rtol=1e-12)


class TestGaugeSymmetry:
    def test_constant_phase_commutes_with_the_flow(self):
        f0 = random_scalar_field(_grid2(), seed=6, max_mode=3, amplitude=0.4)
        cfg = CGLConfig(eps=1.0, k=1.0, dt=2e-3, t_final=0.2)
        assert gauge_covariance_defect(f0, cfg, 0.7) <= 1e-12


class TestPlaneWaveCommutation:
    @pytest.mark.parametrize("c", ["0", "1", "1/2"])
    def test_embedding_commutes_with_evolution(self, c):
        grid2 = _grid2(32)
        g0 = random_scalar_field(grid2, seed=7, max_mode=3, amplitude=0.3)
        cfg = CGLConfig(eps=1.0, k=1.0, dt=5e-3, t_final=0.2)
        out = cgl_commutation_check(g0, c, cfg)
        assert out["mismatch"] <= 1e-6
        assert out["roundtrip"] <= 1e-12


class TestPerturbation:
    def test_zero_background_reduces_to_plain_run(self):
        v0 = random_scalar_field(_grid2(), seed=8, max_mode=3, amplitude=0.3)
        cfg = CGLConfig(eps=1.0, k=1.0, dt=2e-3, t_final=0.1)
        plain = cgl_evolve(v0, cfg).final_state
        pert = cgl_evolve_perturbation(v0, None, cfg).final_state
        assert ops.l2_norm_spectral(pert - plain) <= 1e-13 * ops.l2_norm_spectral(plain)

    def test_splitting_off_a_background_is_exact(self):
        grid = _grid2()
        g0 = random_scalar_field(grid, seed=9, max_mode=2, amplitude=0.5)
        v0 = random_scalar_field(grid, seed=10, max_mode=3, amplitude=0.05)
        cfg = CGLConfig(eps=1.0, k=1.0, dt=2e-3, t_final=0.1)
        whole = cgl_evolve(g0 + v0, cfg).final_state
        gtraj = cgl_evolve(g0, cfg)
        vtraj = cgl_evolve_perturbation(v0, gtraj, cfg)
        recombined = gtraj.final_state + vtraj.final_state
        assert ops.l2_norm_spectral(recombined - whole) \
            <= 1e-11 * ops.l2_norm_spectral(whole)

    def test_profile_background_matches_stored_3d_run(self):
        # Lifting the 2D background stage by stage must agree with
        # storing the full 3D background trajectory.
        grid2 = _grid2(16)
        g0 = random_scalar_field(grid2, seed=11, max_mode=2, amplitude=0.3)
        box = canonical_box(grid2, 0)
        cfg = CGLConfig(eps=1.0, k=1.0, dt=5e-3, t_final=0.05)
        traj2 = cgl_evolve(g0, cfg)
        traj2.wave_speed = 0
        from nswave.cgl import cgl_embed_planewave

        traj3 = cgl_evolve(cgl_embed_planewave(g0, 0, box), cfg)
        v0 = random_scalar_field(box, seed=12, max_mode=2, amplitude=0.05)
        a = cgl_evolve_perturbation(v0, traj2, cfg).final_state
        b = cgl_evolve_perturbation(v0, traj3, cfg).final_state
        assert ops.l2_norm_spectral(a - b) <= 1e-11 * ops.l2_norm_spectral(b)

    def test_multi_component_data_rejected(self):
        grid = _grid2(8)
        bad = SpectralField.zeros(grid, components=2)
        cfg = CGLConfig(eps=1.0, k=1.0, dt=1e-2, t_final=0.1)
        with pytest.raises(ValueError):
            cgl_evolve_perturbation(bad, None, cfg)


class TestProfileEnvelope:
    def test_matches_hand_computation(self):
        f0 = random_scalar_field(_grid2(16), seed=13, max_mode=2)
        traj = cgl_evolve(f0, CGLConfig(eps=1.0, k=1.0, dt=1e-2, t_final=0.1))
        env = cgl_profile_envelope(traj, ps=(2.0, np.inf))
        expected = 0.0
        for t, s in zip(traj.times, traj.states):
            if t > 0:
                expected = max(expected, t**0.5 * ops.lp_norm(s, np.inf))
        assert env[np.inf] == pytest.approx(expected, rel=1e-12)

    def test_needs_a_2d_trajectory(self):
        grid3 = GridSpec.cube(8, TWO_PI, dim=3, dealias_fraction=0.5)
        f0 = random_scalar_field(grid3, seed=14, max_mode=1, amplitude=0.1)
        traj = cgl_evolve(f0, CGLConfig(eps=1.0, k=1.0, dt=1e-2, t_final=0.05))
        with pytest.raises(ValueError):
            cgl_profile_envelope(traj)


class TestScalarBump:
    def test_zero_mean_and_band_limited(self):
        grid = GridSpec.cube(32, TWO_PI, dim=3, dealias_fraction=0.5)
        f = scalar_bump(grid, BumpSpec(radius=np.pi / 4))
        assert abs(f.coeffs[0, 0, 0, 0]) == 0.0
        assert np.abs(f.coeffs * (1.0 - grid.dealias_mask)).max() == 0.0

    def test_layered_shells_carry_equal_l3_mass(self):
        grid = GridSpec.cube(48, 8 * np.pi, dim=3, dealias_fraction=0.5)
        core = np.pi / 16
        f = scalar_bump(grid, BumpSpec(radius=np.pi / 2, core=core))
        mag = np.abs(f.to_physical()[0])
        r2 = np.zeros(grid.shape)
        for ax in range(3):
            per = grid.period_per_axis[ax]
            d = (grid.axes_physical()[ax] - per / 2.0 + per / 2.0) % per - per / 2.0
            shape = [1, 1, 1]
            shape[ax] = grid.points_per_axis[ax]
            r2 = r2 + d.reshape(shape) ** 2
        r = np.sqrt(r2)
        w = grid.volume / grid.num_points

        def shell_mass(lo, hi):
            sel = (r >= lo) & (r < hi)
            return (np.sum(mag[sel] ** 3) * w) ** (1.0 / 3.0)

        inner = shell_mass(2 * core, 4 * core)
        outer = shell_mass(4 * core, 8 * core)
        assert 0.6 <= inner / outer <= 1.6


class TestStabilityProtocol:
    def test_small_run_completes_with_endpoint_storage(self):
        grid2 = _grid2(24)
        from nswave import ring_profile

        prof0 = ring_profile(grid2, seed=15, mode_band=(2, 4), amplitude=0.3,
                             components=1, real=False)
        box = canonical_box(grid2, 0)
        spec = BumpSpec(radius=np.pi / 8, core=0.3 * np.pi / 8)
        cfg = CGLStabilityConfig(
            prof0=prof0, v0_spec=spec, eps=0.05, delta=0.05, T=0.6,
            grid3=box, window=(0.1, 0.5), dt=1e-2, seed=16, diag_stride=2)
        vtraj, fits = cgl_stability_run(cfg)
        # Memory rule: only the endpoints of the 3D run are kept.
        assert len(vtraj.states) == 2
        assert [f.p for f in fits] == [3.0, 6.0, np.inf]
        assert all(np.isfinite(f.slope) for f in fits)
        l3 = [row.lp[3.0] for row in vtraj.diagnostics]
        assert max(l3) <= 10.0 * 0.05

    def test_profile_must_fit_cubic_rule(self):
        grid2 = GridSpec.cube(16, TWO_PI, dim=2)  # 2/3 rule
        prof0 = random_scalar_field(grid2, seed=0, max_mode=2)
        box = GridSpec.cube(16, TWO_PI, dim=3, dealias_fraction=0.5)
        cfg = CGLStabilityConfig(
            prof0=prof0, v0_spec=BumpSpec(radius=np.pi / 8), eps=0.05,
            delta=0.05, T=0.2, grid3=box, window=(0.05, 0.15), dt=1e-2)
        with pytest.raises(ValueError):
            cgl_stability_run(cfg)
