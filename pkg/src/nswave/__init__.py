"""Pseudo-spectral toolkit for incompressible flow on periodic boxes.

The core objects are a grid specification (`GridSpec`), spectral fields
on it (`SpectralField`), and an integrating-factor RK4 stepper for the
viscous equations (`evolve`). On top of those sit plane-wave solutions
built from 2D profiles (`planewave`), a weighted-norm Picard iteration
for perturbations (`picard`), decay-rate and contraction experiments
(`experiments`), and the complex Ginzburg-Landau analog (`cgl`).
"""

__version__ = "0.1.0"

from .grid import GridSpec, set_fft_workers
from .field import SpectralField
from .operators import (
    band_limit,
    dealias,
    divergence_residual,
    heat_semigroup,
    inner_product_l2,
    l2_norm_spectral,
    leray_project,
    lp_norm,
    lp_norms_bundle,
    nonlinear_term,
    random_div_free,
    zero_mean,
)
from .solver import (
    SolverConfig,
    SolverError,
    Trajectory,
    duhamel_residual,
    evolve,
    evolve_perturbation,
)
from .planewave import (
    ModeMap,
    WaveProfile,
    canonical_box,
    commutation_check,
    embed_W,
    extract_profile,
    off_lattice_fraction,
)
from .picard import PicardConfig, PicardReport, picard_solve
from .experiments import (
    BumpSpec,
    DecayFit,
    StabilityRunConfig,
    bump_velocity,
    decay_envelope,
    finite_box_time,
    fit_decay,
    heat_estimate_check,
    kato_smallness_scan,
    phi_contraction_check,
    rescale_lp,
    ring_profile,
    stability_run,
    taylor_green,
    theory_decay_slope,
)
from .cgl import (
    CGLConfig,
    CGLStabilityConfig,
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
from .fieldio import read_field, write_diagnostics_csv, write_field
from .config import RunManifest, SCHEMAS, config_from_file, resolve_config

__all__ = [
    "__version__",
    "GridSpec",
    "set_fft_workers",
    "SpectralField",
    "band_limit",
    "dealias",
    "divergence_residual",
    "heat_semigroup",
    "inner_product_l2",
    "l2_norm_spectral",
    "leray_project",
    "lp_norm",
    "lp_norms_bundle",
    "nonlinear_term",
    "random_div_free",
    "zero_mean",
    "SolverConfig",
    "SolverError",
    "Trajectory",
    "duhamel_residual",
    "evolve",
    "evolve_perturbation",
    "ModeMap",
    "WaveProfile",
    "canonical_box",
    "commutation_check",
    "embed_W",
    "extract_profile",
    "off_lattice_fraction",
    "PicardConfig",
    "PicardReport",
    "picard_solve",
    "BumpSpec",
    "DecayFit",
    "StabilityRunConfig",
    "bump_velocity",
    "decay_envelope",
    "finite_box_time",
    "fit_decay",
    "heat_estimate_check",
    "kato_smallness_scan",
    "phi_contraction_check",
    "rescale_lp",
    "ring_profile",
    "stability_run",
    "taylor_green",
    "theory_decay_slope",
    "CGLConfig",
    "CGLStabilityConfig",
    "cgl_commutation_check",
    "cgl_energy_identity_check",
    "cgl_evolve",
    "cgl_evolve_perturbation",
    "cgl_field",
    "cgl_semigroup",
    "cgl_stability_run",
    "gauge_covariance_defect",
    "random_scalar_field",
    "scalar_bump",
    "read_field",
    "write_diagnostics_csv",
    "write_field",
    "RunManifest",
    "SCHEMAS",
    "config_from_file",
    "resolve_config",
]
