r"""Direct march for the time-domain self-consistency equation

    tau f(tau) = int_0^tau dtau1 int_0^(tau-tau1) dtau2
                 f(tau1) W(tau - tau1 - tau2) f(tau2),

with W(sigma) = sigma K(sigma) the once-weighted memory kernel. Both f and W
are power-law singular at the origin, so the equation is solved for the
regular unknown g(tau) = f(tau) tau^(alpha+1/2). Substituting
tau1 = tau xi zeta, tau2 = tau xi (1 - zeta) turns the double convolution
into a fixed, tau-independent weighted integral

    g(tau) = C_W int_0^1 dxi (1-xi)^(alpha-1/2) xi^(-2 alpha)
             int_0^1 dzeta (zeta (1-zeta))^(-alpha-1/2)
             g(tau xi zeta) g(tau xi (1-zeta)),

(every tau power cancels; C_W = W(1)) which a tensor Gauss-Jacobi rule
integrates with the endpoint singularities built into the weights. The
march walks a graded grid, seeding the first nodes from the short-time
expansion and resolving each later node by a few fixed-point sweeps.
"""
from __future__ import annotations

import numpy as np
from scipy.special import roots_jacobi

from .amplitude import BoundaryData, asymptotic_coefficients
from .model import ModelParams, Regime, kernel_K

__all__ = ["InstabilityError", "TimeGrid", "default_grading", "volterra_march"]


class InstabilityError(RuntimeError):
    """Grid refinement moved node values by more than the declared tolerance."""


def default_grading(params: ModelParams) -> float:
    """Grading exponent: enough clustering to resolve the tau^(1/2-alpha)
    cusp of g near 0 (gamma (1/2-alpha) >= 1), between 2 and 10."""
    return float(min(10.0, max(2.0, 2.0 / (0.5 - params.alpha))))


class TimeGrid:
    """Graded grid tau_j = tau_max (j/M)^gamma, j = 1..M.

    gamma >= 2 is required; whether gamma resolves the short-time power of a
    particular model (gamma (1/2-alpha) >= 1) is checked by the march, which
    knows alpha. With doubled M the old nodes are a subset of the new ones
    ((2j/2M) = (j/M)), which is what makes refinement comparisons exact.
    """

    def __init__(self, tau_max: float, M: int, gamma: float = 4.0):
        tau_max = float(tau_max)
        if not tau_max > 0.0:
            raise ValueError("tau_max must be positive")
        M = int(M)
        if M < 8:
            raise ValueError("M must be at least 8")
        gamma = float(gamma)
        if gamma < 2.0:
            raise ValueError("grading exponent gamma must be >= 2")
        self.tau_max = tau_max
        self.M = M
        self.gamma = gamma
        self.nodes = tau_max * (np.arange(1, M + 1) / M) ** gamma

    def refined(self) -> "TimeGrid":
        return TimeGrid(self.tau_max, 2 * self.M, self.gamma)


def _interp_complex(x, xp, fp):
    return np.interp(x, xp, fp.real) + 1j * np.interp(x, xp, fp.imag)


def volterra_march(params: ModelParams, boundary: BoundaryData, grid: TimeGrid,
                   seed_fn=None, seed_frac: float = 0.01, n_jacobi: int = 24,
                   sweeps: int = 3, refine_tol: float | None = None):
    """March the self-consistency equation along ``grid``; returns f at the
    grid nodes (complex array, same length as ``grid.nodes``).

    Nodes with tau <= seed_frac * tau_max (at least the first two) are pinned
    to the seed; by default the seed is the two-term short-time kernel
    a1 tau^(-alpha-1/2) + a2 tau^(-2 alpha). ``seed_fn``, if given, is a
    vectorized tau -> f(tau) override used for the pinned nodes (the series
    partial sum is the usual choice when the two-term error at the seed edge
    matters).

    c1 = 0 kills the memory kernel, so the equation degenerates and the
    seed values are returned unchanged; an explicit ``seed_fn`` is required
    then, because the default two-term seed involves b1, which is undefined
    without a coupling. ``refine_tol`` reruns at 2M and raises
    :class:`InstabilityError` if any shared node moves by more than
    refine_tol relative to the solution scale there.
    """
    if params.regime() is not Regime.NONLOCAL:
        raise ValueError("the march applies to the nonlocal regime (alpha < 1/2)")
    if grid.gamma * (0.5 - params.alpha) < 1.0:
        raise ValueError(
            f"grading gamma = {grid.gamma:g} leaves the tau^({0.5 - params.alpha:g}) "
            "short-time power unresolved; need gamma (1/2 - alpha) >= 1")

    al = params.alpha
    tau = grid.nodes

    if params.c1 == 0.0:
        if seed_fn is None:
            raise ValueError("c1 = 0 march needs an explicit seed_fn "
                             "(the default two-term seed is undefined at c1 = 0)")
        return np.asarray(seed_fn(tau), dtype=np.complex128)

    b1, b2, a1, a2 = asymptotic_coefficients(params, boundary.b2)

    if seed_fn is None:
        def seed_fn(x):
            x = np.asarray(x, dtype=float)
            return a1 * x ** (-al - 0.5) + a2 * x ** (-2.0 * al)

    def march_on(nodes):
        cw = kernel_K(1.0, params)  # W(1) = 1 * K(1)

        # g carries a tau^(1/2-al) cusp (the a2 term), so the xi and zeta
        # integrands have v^(1/2-al) endpoint cusps that a rule built for
        # the weight alone resolves only algebraically (the error then
        # never responds to grid refinement). Substituting xi = v^ms with
        # ms = 1/(1/2-al) turns xi^(1/2-al) into v exactly, and the
        # leftover weight exponent is exactly 1 for every al:
        #   int_0^1 xi^(-2al)(1-xi)^(al-1/2) F dxi
        #     = ms int_0^1 v (1-v)^(al-1/2) Q(v)^(al-1/2) F(v^ms) dv,
        #   Q(v) = (1-v^ms)/(1-v) smooth and positive.
        ms = 1.0 / (0.5 - al)
        x1, w1 = roots_jacobi(n_jacobi, al - 0.5, 1.0)
        v = 0.5 * (1.0 + x1)
        q_smooth = -np.expm1(ms * np.log(v)) / (1.0 - v)
        xi = v ** ms
        wxi = w1 * ms * 2.0 ** (-al - 1.5) * q_smooth ** (al - 0.5)
        # zeta: the integrand is symmetric under zeta -> 1-zeta, so fold
        # onto [0, 1/2] and substitute zeta = u^ms/2: the u-weight exponent
        # is exactly 0 (plain Legendre), the cusp is linear in u, and the
        # (1-zeta)^(-al-1/2) factor stays smooth on the half interval.
        x2, w2 = roots_jacobi(n_jacobi, 0.0, 0.0)
        u = 0.5 * (1.0 + x2)
        zeta = 0.5 * u ** ms
        wzeta = w2 * ms * 2.0 ** (al - 0.5) * (1.0 - zeta) ** (-al - 0.5)

        arg1 = xi[:, None] * zeta[None, :]
        arg2 = xi[:, None] * (1.0 - zeta[None, :])

        m = nodes.size
        n_seed = max(2, int(np.searchsorted(nodes, seed_frac * grid.tau_max, side="right")))
        n_seed = min(n_seed, m - 1)
        gexp = al + 0.5
        vals = np.empty(m, dtype=np.complex128)
        vals[:n_seed] = np.asarray(seed_fn(nodes[:n_seed])) * nodes[:n_seed] ** gexp

        # interpolation table for g; g(0+) = a1 anchors the left end
        table_tau = np.concatenate(([0.0], nodes))
        table_g = np.empty(m + 1, dtype=np.complex128)
        table_g[0] = a1
        table_g[1:n_seed + 1] = vals[:n_seed]

        for j in range(n_seed, m):
            t1 = nodes[j] * arg1
            t2 = nodes[j] * arg2
            guess = table_g[j]  # previous node, then sweep to self-consistency
            for _ in range(sweeps):
                table_g[j + 1] = guess
                xp = table_tau[:j + 2]
                fp = table_g[:j + 2]
                p = _interp_complex(t1, xp, fp) * _interp_complex(t2, xp, fp)
                guess = cw * (wxi @ p @ wzeta)
            vals[j] = guess
            table_g[j + 1] = guess
        return vals

    g_coarse = march_on(tau)
    if refine_tol is not None:
        g_fine = march_on(grid.refined().nodes)
        shared = g_fine[1::2]  # node 2j of the fine grid is node j of the coarse
        scale = np.maximum(np.abs(shared), np.max(np.abs(shared)) * 1e-6)
        moved = np.max(np.abs(g_coarse - shared) / scale)
        if moved > refine_tol:
            raise InstabilityError(
                f"refinement M = {grid.M} -> {2 * grid.M} moved node values by "
                f"{moved:.3e} relative (> {refine_tol:g})")
    return g_coarse * tau ** (-(al + 0.5))
