"""Fourier-multiplier operators: projection, heat semigroup, nonlinearities, norms.

All operators act on SpectralField values and return new fields; inputs are
never mutated. Pointwise products are formed pseudo-spectrally and truncated
with the grid's dealias rule before any further use.
"""

from __future__ import annotations

import numpy as np

from .field import PressureField, SpectralField, _fftn, _ifftn
from .grid import GridSpec

DIV_FREE_TOL = 1e-10


def _require_vector(f: SpectralField) -> None:
    if f.components != f.grid.dim:
        raise ValueError(
            f"expected {f.grid.dim}-component field on a {f.grid.dim}D grid, got {f.components}"
        )


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * f.grid.dealias_mask, real_space=f.real_space)


def leray_project(f: SpectralField) -> SpectralField:
    """Multiplier projection I - k k^T/|k|^2 onto divergence-free fields.

    The k = 0 (mean) mode is left unchanged; gradients are annihilated.
    """
    _require_vector(f)
    grid = f.grid
    ks = grid.k_vectors
    inv_k2 = grid.inv_k_squared
    k_dot = np.zeros(grid.shape, dtype=np.complex128)
    for i in range(grid.dim):
        k_dot += ks[i] * f.coeffs[i]
    k_dot *= inv_k2
    out = np.empty_like(f.coeffs)
    for i in range(grid.dim):
        out[i] = f.coeffs[i] - ks[i] * k_dot
    return SpectralField(grid, out, real_space=f.real_space)


def heat_semigroup(f: SpectralField, t: float, nu: float = 1.0) -> SpectralField:
    """Apply exp(t nu Laplacian): every mode scaled by exp(-nu |k|^2 t)."""
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    if nu <= 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    factor = np.exp(-nu * f.grid.k_squared * t)
    return SpectralField(f.grid, f.coeffs * factor, real_space=f.real_space)


def heat_semigroup_projected(f: SpectralField, t: float, nu: float = 1.0) -> SpectralField:
    """Projected heat flow; equals the plain semigroup on divergence-free input."""
    return heat_semigroup(leray_project(f), t, nu)


def divergence(f: SpectralField) -> SpectralField:
    _require_vector(f)
    ks = f.grid.k_vectors
    out = np.zeros(f.grid.shape, dtype=np.complex128)
    for i in range(f.grid.dim):
        out += 1j * ks[i] * f.coeffs[i]
    return SpectralField(f.grid, out[np.newaxis], real_space=f.real_space)


def divergence_residual(f: SpectralField) -> float:
    """Relative spectral divergence: ||k . f_hat|| / || |k| |f_hat| ||."""
    _require_vector(f)
    ks = f.grid.k_vectors
    div = np.zeros(f.grid.shape, dtype=np.complex128)
    for i in range(f.grid.dim):
        div += ks[i] * f.coeffs[i]
    num = np.linalg.norm(div)
    den = np.sqrt(np.sum(f.grid.k_squared * np.sum(np.abs(f.coeffs) ** 2, axis=0)))
    return float(num / den) if den > 0 else 0.0


def gradient(f: SpectralField) -> SpectralField:
    """Spectral gradient; components ordered (comp, axis) flattened row-major."""
    ks = f.grid.k_vectors
    out = np.empty((f.components * f.grid.dim, *f.grid.shape), dtype=np.complex128)
    idx = 0
    for c in range(f.components):
        for ax in range(f.grid.dim):
            out[idx] = 1j * ks[ax] * f.coeffs[c]
            idx += 1
    return SpectralField(f.grid, out, real_space=f.real_space)


def _physical(f: SpectralField) -> np.ndarray:
    vals = _ifftn(f.coeffs, f.grid)
    return vals.real if f.real_space else vals


def _ensure_div_free(u: SpectralField) -> SpectralField:
    if divergence_residual(u) > DIV_FREE_TOL:
        return leray_project(u)
    return u


def nonlinear_term(u: SpectralField) -> SpectralField:
    """Projected convective term P((u.grad)u), computed pseudo-spectrally.

    Inverse transform, pointwise products u_j d_j u_i, forward transform,
    dealias, project.
    """
    _require_vector(u)
    u = _ensure_div_free(u)
    grid = u.grid
    d = grid.dim
    ks = grid.k_vectors
    u_phys = _ifftn(u.coeffs, grid).real
    adv = np.empty((d, *grid.shape))
    for i in range(d):
        acc = np.zeros(grid.shape)
        for j in range(d):
            du_ij = _ifftn(1j * ks[j] * u.coeffs[i], grid).real
            acc += u_phys[j] * du_ij
        adv[i] = acc
    out = _fftn(adv.astype(np.complex128), grid)
    out *= grid.dealias_mask
    return leray_project(SpectralField(grid, out, real_space=True))


def _sym_tensor_divergence(grid: GridSpec, w_phys: np.ndarray, sub_phys: np.ndarray | None) -> np.ndarray:
    """Spectral coefficients of div(w (x) w - sub (x) sub) for real fields.

    Exploits the symmetry of the outer products: d(d+1)/2 forward
    transforms instead of d^2.
    """
    d = grid.dim
    ks = grid.k_vectors
    mask = grid.dealias_mask
    pairs = [(i, j) for i in range(d) for j in range(i, d)]
    t_hat = {}
    for (i, j) in pairs:
        prod = w_phys[i] * w_phys[j]
        if sub_phys is not None:
            prod = prod - sub_phys[i] * sub_phys[j]
        t_hat[(i, j)] = _fftn(prod.astype(np.complex128), grid) * mask
    out = np.zeros((d, *grid.shape), dtype=np.complex128)
    for j in range(d):
        for i in range(d):
            key = (i, j) if i <= j else (j, i)
            out[j] += 1j * ks[i] * t_hat[key]
    return out


def tensor_nonlinearity(a: SpectralField, b: SpectralField) -> SpectralField:
    """P div(a (x) b) in divergence form, (div T)_j = d_i (a_i b_j).

    For divergence-free a = b this coincides with nonlinear_term(a) up to
    roundoff on the dealiased band.
    """
    _require_vector(a)
    _require_vector(b)
    a._check_same(b)
    grid = a.grid
    d = grid.dim
    ks = grid.k_vectors
    mask = grid.dealias_mask
    a_phys = _ifftn(a.coeffs, grid).real
    b_phys = a_phys if b is a else _ifftn(b.coeffs, grid).real
    out = np.zeros((d, *grid.shape), dtype=np.complex128)
    if b is a or np.array_equal(a.coeffs, b.coeffs):
        out = _sym_tensor_divergence(grid, a_phys, None)
    else:
        for j in range(d):
            for i in range(d):
                t_ij = _fftn((a_phys[i] * b_phys[j]).astype(np.complex128), grid) * mask
                out[j] += 1j * ks[i] * t_ij
    return leray_project(SpectralField(grid, out, real_space=True))


def lp_norm(f: SpectralField, p: float) -> float:
    """Physical-space L^p norm by grid quadrature.

    Vector fields use the pointwise Euclidean magnitude; p = inf returns
    the maximum of that magnitude.
    """
    if p < 1:
        raise ValueError(f"L^p norm requires p >= 1, got {p}")
    vals = _physical(f)
    mag2 = np.sum(np.abs(vals) ** 2, axis=0)
    if np.isinf(p):
        return float(np.sqrt(mag2.max()))
    w = f.grid.cell_volume
    if p == 2.0:
        return float(np.sqrt(w * mag2.sum()))
    return float((w * np.sum(mag2 ** (p / 2.0))) ** (1.0 / p))


def l2_norm_spectral(f: SpectralField) -> float:
    """L^2 norm straight from coefficients (Parseval), no transform."""
    w = f.grid.volume / f.grid.num_points**2
    return float(np.sqrt(w * np.sum(np.abs(f.coeffs) ** 2)))


def inner_product_l2(f: SpectralField, g: SpectralField) -> float:
    """Real L^2 pairing sum_i <f_i, g_i> via Parseval."""
    f._check_same(g)
    w = f.grid.volume / f.grid.num_points**2
    return float(w * np.sum(np.conj(f.coeffs) * g.coeffs).real)


def hs_norm(f: SpectralField, s: float) -> float:
    """Sobolev H^s norm: (sum_k (1+|k|^2)^s |f_hat|^2 with Parseval weight)^(1/2)."""
    if s < 0:
        raise ValueError(f"Sobolev index must be nonnegative, got {s}")
    grid = f.grid
    w = grid.volume / grid.num_points**2
    mult = (1.0 + grid.k_squared) ** s
    return float(np.sqrt(w * np.sum(mult * np.sum(np.abs(f.coeffs) ** 2, axis=0))))


def lp_norms_bundle(f: SpectralField, p_list) -> dict[float, float]:
    """Several L^p norms from a single inverse transform."""
    vals = _physical(f)
    mag2 = np.sum(np.abs(vals) ** 2, axis=0)
    w = f.grid.cell_volume
    out = {}
    for p in p_list:
        if np.isinf(p):
            out[p] = float(np.sqrt(mag2.max()))
        else:
            out[p] = float((w * np.sum(mag2 ** (p / 2.0))) ** (1.0 / p))
    return out


def sup_norm_gradient(f: SpectralField) -> float:
    """Max pointwise Frobenius magnitude of the gradient tensor."""
    grid = f.grid
    ks = grid.k_vectors
    mag2 = np.zeros(grid.shape)
    for c in range(f.components):
        for ax in range(grid.dim):
            dvals = _ifftn(1j * ks[ax] * f.coeffs[c], grid)
            dvals = dvals.real if f.real_space else dvals
            mag2 += np.abs(dvals) ** 2
    return float(np.sqrt(mag2.max()))


def lp_norm_gradient(f: SpectralField, p: float) -> float:
    """L^p norm of the full gradient tensor (Frobenius magnitude pointwise)."""
    if p < 1:
        raise ValueError(f"L^p norm requires p >= 1, got {p}")
    grid = f.grid
    ks = grid.k_vectors
    mag2 = np.zeros(grid.shape)
    for c in range(f.components):
        for ax in range(grid.dim):
            dvals = _ifftn(1j * ks[ax] * f.coeffs[c], grid)
            dvals = dvals.real if f.real_space else dvals
            mag2 += np.abs(dvals) ** 2
    if np.isinf(p):
        return float(np.sqrt(mag2.max()))
    w = grid.cell_volume
    return float((w * np.sum(mag2 ** (p / 2.0))) ** (1.0 / p))


def reconstruct_pressure(u: SpectralField) -> PressureField:
    """Pressure from Delta p = div((u.grad)u), zero mean.

    Sign follows the momentum balance with the pressure gradient on the
    right-hand side, so p = +(cos 2x + cos 2y)/4 for the standard 2D
    cellular vortex at unit amplitude.
    """
    _require_vector(u)
    u = _ensure_div_free(u)
    grid = u.grid
    d = grid.dim
    ks = grid.k_vectors
    u_phys = _ifftn(u.coeffs, grid).real
    adv_hat = np.empty((d, *grid.shape), dtype=np.complex128)
    for i in range(d):
        acc = np.zeros(grid.shape)
        for j in range(d):
            du_ij = _ifftn(1j * ks[j] * u.coeffs[i], grid).real
            acc += u_phys[j] * du_ij
        adv_hat[i] = _fftn(acc.astype(np.complex128), grid) * grid.dealias_mask
    div_n = np.zeros(grid.shape, dtype=np.complex128)
    for i in range(d):
        div_n += 1j * ks[i] * adv_hat[i]
    p_hat = -div_n * grid.inv_k_squared
    return PressureField(grid, p_hat)


def zero_mean(f: SpectralField) -> SpectralField:
    out = f.coeffs.copy()
    zero = (slice(None),) + (0,) * f.grid.dim
    out[zero] = 0.0
    return SpectralField(f.grid, out, real_space=f.real_space)


def band_limit(f: SpectralField, max_mode: int) -> SpectralField:
    """Zero every mode whose index magnitude exceeds max_mode on any axis."""
    grid = f.grid
    keep = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.dim):
        m = np.abs(grid.mode_indices(ax))
        shape = [1] * grid.dim
        shape[ax] = grid.points_per_axis[ax]
        keep &= (m <= max_mode).reshape(shape)
    return SpectralField(grid, f.coeffs * keep, real_space=f.real_space)


def random_div_free(grid: GridSpec, seed: int, max_mode: int = 4, amplitude: float = 1.0,
                    components: int | None = None) -> SpectralField:
    """Band-limited, zero-mean, divergence-free random field.

    Drawn in physical space from the seeded generator, then band-limited,
    projected, de-meaned, and rescaled to the requested L^2 norm.
    """
    rng = np.random.default_rng(seed)
    comps = grid.dim if components is None else components
    vals = rng.standard_normal((comps, *grid.shape))
    f = SpectralField.from_physical(grid, vals)
    f = band_limit(f, max_mode)
    if comps == grid.dim:
        f = leray_project(f)
    f = zero_mean(f)
    norm = l2_norm_spectral(f)
    if norm > 0:
        f = f * (amplitude / norm)
    return f
