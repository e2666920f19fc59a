"""Successive approximations for the perturbation integral form.

The perturbation v of a background wave phi solves

    v(t) = e^{t Lap} v0 - int_0^t e^{(t-s) Lap}
           P div((v+phi)(x)(v+phi) - phi(x)phi)(s) ds,

and the solution is built as the limit of v_{n+1} = v1 + G v_n starting
from the bare heat flow v1 = e^{t Lap} v0.  This module runs that
iteration with trapezoid quadrature on the stepping grid, tracks the
exponentially weighted norms K_n (velocity, sup over the gamma list),
K'_n (gradient) and W_n (increments), and fits the constant of the
K-recurrence from the measured sequence rather than assuming one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .field import SpectralField, _ifftn
from .grid import GridSpec
from .solver import (SolverConfig, Trajectory, _check_initial, _leray_raw,
                     diagnostics_for)

DEFAULT_GAMMAS = (0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class PicardConfig:
    """Knobs of the weighted-norm iteration.

    Parameters
    ----------
    T_star : float
        Horizon of the iteration; must be an integer multiple of the
        stepping dt.
    L : float or None
        Exponential weight rate (1/time).  None defers to the rule
        4 * M * (1 + T_star) with M the measured bound of the background
        wave (falling back to 1 when the background is zero).
    gammas : tuple of float
        Finite stand-in for the sup over gamma in (0, 1]; each gamma
        contributes the weight e^{-L t} t^{(1-gamma)/2} on the L^{3/gamma}
        norm.
    holder_p : float
        The exponent p > 2 whose conjugate p' enters the fitted
        recurrence bracket.
    max_iter : int
        Number of applications of the integral map G; the run produces
        iterates v_1 .. v_{1+max_iter} unless stopped earlier.
    eps : float
        Smallness threshold on ||v0||_3 below which contraction is
        expected; recorded in the report, not enforced.
    stop_ratio_tol : float or None
        When set, stop once two consecutive increment ratios agree to
        this relative tolerance.
    """

    T_star: float
    L: float | None = None
    gammas: tuple = DEFAULT_GAMMAS
    holder_p: float = 4.0
    max_iter: int = 8
    eps: float = 0.05
    stop_ratio_tol: float | None = None

    def __post_init__(self):
        if self.T_star <= 0:
            raise ValueError("T_star must be positive")
        if self.L is not None and self.L <= 0:
            raise ValueError("L must be positive")
        gs = tuple(float(g) for g in self.gammas)
        if not gs or any(not 0.0 < g <= 1.0 for g in gs):
            raise ValueError("gammas must lie in (0, 1]")
        object.__setattr__(self, "gammas", gs)
        if self.holder_p <= 2.0:
            raise ValueError("holder_p must exceed 2")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


@dataclass
class PicardReport:
    """Measured norms of the iteration and the fitted recurrence constant.

    K[n-1], K_grad[n-1] and W[n-1] belong to the n-th iterate, counting
    v_1 (the heat flow) as n = 1.  Increments are taken against v_0 = 0,
    so W_1 is the weighted size of v_1 itself and ratios[n-1] is
    W_{n+1} / W_n.  fitted_C is the smallest constant making

        K_{n+1} <= K_1 + C * (e^{L T*} K_n K'_n
                              + T*^{(2-p')/(2p')} (pL)^{-1/p} M K'_n
                              + T*^{1/p'} (pL)^{-1/p} M K_n)

    hold for every measured n; constant_is_fitted flags that it comes
    from the data, not from the analysis.  recurrence_gap is the largest
    violation of that inequality with the fitted constant (nonpositive
    up to roundoff by construction).
    """

    L: float
    T_star: float
    gammas: tuple
    holder_p: float
    eps: float
    M: float
    v0_l3: float
    K: list
    K_grad: list
    W: list
    ratios: list
    fitted_C: float
    recurrence_gap: float
    diverged: bool
    constant_is_fitted: bool = True

    @property
    def eps_ok(self) -> bool:
        return self.v0_l3 <= self.eps

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    def contraction_ok(self, bound: float = 0.6) -> bool:
        return bool(self.ratios) and not self.diverged and self.max_ratio <= bound

    def as_dict(self) -> dict:
        return {
            "L": self.L, "T_star": self.T_star, "gammas": list(self.gammas),
            "holder_p": self.holder_p, "eps": self.eps, "M": self.M,
            "v0_l3": self.v0_l3, "K": list(self.K), "K_grad": list(self.K_grad),
            "W": list(self.W), "ratios": list(self.ratios),
            "fitted_C": self.fitted_C, "recurrence_gap": self.recurrence_gap,
            "diverged": self.diverged, "constant_is_fitted": self.constant_is_fitted,
        }


def recurrence_bracket(K: float, K_grad: float, M: float, L: float,
                       T_star: float, holder_p: float) -> float:
    """The n-dependent factor multiplying the constant in the K-recurrence."""
    p = holder_p
    pc = p / (p - 1.0)
    fac = (p * L) ** (-1.0 / p)
    return (np.exp(L * T_star) * K * K_grad
            + T_star ** ((2.0 - pc) / (2.0 * pc)) * fac * M * K_grad
            + T_star ** (1.0 / pc) * fac * M * K)


def _phi_nodes(phi_traj, grid: GridSpec, n_steps: int, dt: float):
    """Physical node values of the background wave and its measured bound M.

    Accepts None (zero background), a dense trajectory on the same grid,
    or a dense 2D profile trajectory carrying wave_speed, embedded here.
    """
    if phi_traj is None:
        return [None] * (n_steps + 1), 0.0
    if not isinstance(phi_traj, Trajectory):
        raise TypeError("background must be None or a Trajectory")
    if not phi_traj.is_dense():
        raise ValueError("dense-output wave trajectory required (snapshot_stride 1)")
    if abs(phi_traj.dt - dt) > 1e-12 * dt:
        raise ValueError("wave trajectory dt must match the iteration dt")
    if phi_traj.final_time - phi_traj.t0 + 1e-9 * dt < n_steps * dt:
        raise ValueError("horizon mismatch: wave trajectory shorter than T_star")
    src = phi_traj.states[: n_steps + 1]
    if phi_traj.grid.dim == 2 and grid.dim == 3:
        from .planewave import ModeMap

        mm = ModeMap(phi_traj.grid, grid, phi_traj.wave_speed)
        nodes = [_ifftn(mm.embed_vector(s.coeffs), grid).real for s in src]
    elif phi_traj.grid.compatible(grid):
        nodes = [_ifftn(s.coeffs, grid).real for s in src]
    else:
        raise ValueError("wave trajectory grid does not match the iteration grid")
    m_bound = max(ops.lp_norm(s, np.inf) + ops.sup_norm_gradient(s) for s in src)
    return nodes, float(m_bound)


def _weight_tables(pcfg: PicardConfig, L: float, taus: np.ndarray):
    vel = {g: np.exp(-L * taus) * taus ** ((1.0 - g) / 2.0)
           for g in pcfg.gammas}
    grad = np.exp(-L * taus) * np.sqrt(taus)
    return vel, grad


def _iterate_norms(grid, states, prev, wtab, wgrad, ps):
    """One pass over the nodes: K and K' of `states`, W of states - prev."""
    K = 0.0
    Kp = 0.0
    W = 0.0
    for j, c in enumerate(states):
        f = SpectralField(grid, c, real_space=True)
        lp = ops.lp_norms_bundle(f, ps)
        g3 = ops.lp_norm_gradient(f, 3.0)
        for g, wt in wtab.items():
            K = max(K, wt[j] * lp[3.0 / g])
        Kp = max(Kp, wgrad[j] * g3)
        if prev is None:
            for g, wt in wtab.items():
                W = max(W, wt[j] * lp[3.0 / g])
        else:
            d = SpectralField(grid, c - prev[j], real_space=True)
            lpd = ops.lp_norms_bundle(d, ps)
            for g, wt in wtab.items():
                W = max(W, wt[j] * lpd[3.0 / g])
    return float(K), float(Kp), float(W)


def picard_solve(v0: SpectralField, phi_traj, pcfg: PicardConfig,
                 cfg: SolverConfig) -> tuple[Trajectory, PicardReport]:
    """Run the successive-approximation scheme for the perturbation.

    Computes v1 = e^{t Lap} v0 on the stepping grid of `cfg`, then
    repeatedly applies the Duhamel map with trapezoid quadrature (the
    t = s endpoint uses the semigroup at zero, i.e. the identity, with
    the freshly evaluated nonlinearity).  Divergence of the increments
    is reported in the result, never raised.

    Returns the final iterate packaged as a dense Trajectory together
    with the PicardReport of weighted norms.
    """
    v0 = _check_initial(v0, "perturbation data")
    grid = v0.grid
    ratio = pcfg.T_star / cfg.dt
    n_steps = int(round(ratio))
    if n_steps < 1 or abs(ratio - n_steps) > 1e-9 * max(1.0, n_steps):
        raise ValueError("T_star must be a positive integer multiple of dt")
    dt = cfg.dt
    t0 = phi_traj.t0 if isinstance(phi_traj, Trajectory) else 0.0
    phis, m_bound = _phi_nodes(phi_traj, grid, n_steps, dt)
    if pcfg.L is not None:
        L = pcfg.L
    else:
        L = 4.0 * m_bound * (1.0 + pcfg.T_star)
        if L <= 0.0:
            L = 1.0
    E = np.exp(-cfg.nu * grid.k_squared * dt)
    taus = dt * np.arange(n_steps + 1, dtype=float)
    wtab, wgrad = _weight_tables(pcfg, L, taus)
    ps = sorted({3.0 / g for g in pcfg.gammas} | {3.0})
    v0_l3 = ops.lp_norm(v0, 3.0)

    def n_slope(coeffs, j):
        w_phys = _ifftn(coeffs, grid).real
        ph = phis[j]
        if ph is not None:
            w_phys = w_phys + ph
        return -_leray_raw(grid, ops._sym_tensor_divergence(grid, w_phys, ph))

    # Iterate 1: the bare heat flow.
    cur = [v0.coeffs.copy()]
    for _ in range(n_steps):
        cur.append(E * cur[-1])
    K1, Kp1, _ = _iterate_norms(grid, cur, None, wtab, wgrad, ps)
    K_list, Kp_list, W_list = [K1], [Kp1], [K1]

    diverged = False
    for _ in range(pcfg.max_iter):
        if W_list[-1] == 0.0:
            break
        nxt = [v0.coeffs.copy()]
        heat = v0.coeffs.copy()
        integ = np.zeros_like(heat)
        n_prev = n_slope(cur[0], 0)
        for j in range(1, n_steps + 1):
            heat = E * heat
            n_here = n_slope(cur[j], j)
            integ = E * (integ + (0.5 * dt) * n_prev) + (0.5 * dt) * n_here
            nxt.append(heat + integ)
            n_prev = n_here
        if not all(np.isfinite(c).all() for c in nxt):
            diverged = True
            break
        K, Kp, W = _iterate_norms(grid, nxt, cur, wtab, wgrad, ps)
        K_list.append(K)
        Kp_list.append(Kp)
        W_list.append(W)
        cur = nxt
        if len(W_list) >= 3 and W_list[-1] > W_list[-2] > W_list[-3]:
            diverged = True
            break
        if pcfg.stop_ratio_tol is not None and len(W_list) >= 3 \
                and W_list[-2] > 0 and W_list[-3] > 0:
            r_new = W_list[-1] / W_list[-2]
            r_old = W_list[-2] / W_list[-3]
            if abs(r_new - r_old) <= pcfg.stop_ratio_tol * max(r_new, r_old, 1e-300):
                break

    ratios = [W_list[i + 1] / W_list[i]
              for i in range(len(W_list) - 1) if W_list[i] > 0]

    fitted_c = 0.0
    gap = 0.0
    for n in range(1, len(K_list)):
        br = recurrence_bracket(K_list[n - 1], Kp_list[n - 1], m_bound, L,
                                pcfg.T_star, pcfg.holder_p)
        if br > 0:
            fitted_c = max(fitted_c, (K_list[n] - K_list[0]) / br)
    for n in range(1, len(K_list)):
        br = recurrence_bracket(K_list[n - 1], Kp_list[n - 1], m_bound, L,
                                pcfg.T_star, pcfg.holder_p)
        gap = max(gap, K_list[n] - (K_list[0] + fitted_c * br))

    times = [t0 + j * dt for j in range(n_steps + 1)]
    states = [SpectralField(grid, c, real_space=True) for c in cur]
    diag = [diagnostics_for(s, t, cfg.p_set, cfg.hs_index)
            for s, t in zip(states, times)]
    w_par = grid.volume / grid.num_points**2
    energies = np.array([0.5 * w_par * float(np.sum(np.abs(c)**2)) for c in cur])
    traj = Trajectory(grid=grid, nu=cfg.nu, dt=dt, times=times, states=states,
                      diagnostics=diag, step_times=np.asarray(times),
                      step_energies=energies, wave_speed=None, unforced=False)
    report = PicardReport(
        L=L, T_star=pcfg.T_star, gammas=pcfg.gammas, holder_p=pcfg.holder_p,
        eps=pcfg.eps, M=m_bound, v0_l3=v0_l3, K=K_list, K_grad=Kp_list,
        W=W_list, ratios=ratios, fitted_C=fitted_c, recurrence_gap=gap,
        diverged=diverged)
    return traj, report
