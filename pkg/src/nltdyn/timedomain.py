r"""Time-domain interaction kernel f(tau), the series for the reduced
transition kernel, and the transform bridge back to the frequency side.

In the nonlocal regime the kernel near tau -> 0+ is the two-term power law

    f(tau) = a1 tau^(-alpha-1/2) + a2 tau^(-2 alpha)

and the reduced transition kernel is the full power series

    ttilde(tau) = sum_n a_n tau^(s_n - 1),   s_n = n(1/2 - alpha),

whose term-wise transform i sum_n a_n Gamma(s_n) (-i z)^(-s_n) telescopes to
the geometric expansion of N(z): that identity ("the bridge") is the check
that the series coefficients and the branch convention agree.

In the local regime the kernel is a delta concentration: it is carried
symbolically as ``delta_strength`` = -2 i lambda and never sampled.
"""
from __future__ import annotations

import warnings

import numpy as np

from .amplitude import (BoundaryData, ReducedAmplitude, asymptotic_coefficients,
                        b1_coefficient, lambda_from_boundary)
from .model import ModelParams, Regime
from .specfun import complex_gamma, principal_power

__all__ = [
    "TruncationWarning",
    "SeriesDivergenceError",
    "TimeKernel",
    "f_tau",
    "ttilde_series",
    "laplace_bridge",
    "bridge_terms_for_tolerance",
]


class TruncationWarning(UserWarning):
    """The last retained series term is not negligible against the sum."""


class SeriesDivergenceError(ArithmeticError):
    """The transform series is outside its region of convergence."""


class TimeKernel:
    """Series data for one (params, boundary) pair.

    Nonlocal: stores (b1, b2, a1, a2) and serves series terms up to
    ``n_max``. Local: stores the delta strength -2 i lambda; the regular
    part of f is identically zero and the series operations are undefined.

    Causality is structural: evaluation at tau < 0 is exactly 0.
    """

    def __init__(self, params: ModelParams, boundary: BoundaryData, n_max: int = 512):
        self.params = params
        self.boundary = boundary
        self.n_max = int(n_max)
        if params.regime() == Regime.NONLOCAL:
            self.b1, self.b2, self.a1, self.a2 = asymptotic_coefficients(params, boundary.b2)
            self.delta_strength = None
        else:
            lam = lambda_from_boundary(ReducedAmplitude(params, boundary))
            self.b1 = b1_coefficient(params) if params.c1 != 0.0 else None
            self.b2 = None
            self.a1 = None
            self.a2 = None
            self.delta_strength = -2.0j * lam

    def exponent(self, n: int) -> float:
        """s_n = n (1/2 - alpha)."""
        return n * (0.5 - self.params.alpha)

    def is_nonlocal(self) -> bool:
        return self.params.regime() == Regime.NONLOCAL


def f_tau(tau, kernel: TimeKernel):
    """Interaction kernel at duration tau.

    tau < 0 returns exactly 0 (causality); tau = 0 is rejected (the kernel
    is not pointwise-defined there). Nonlocal: the two-term power law.
    Local: the regular part, identically zero; the delta concentration is
    ``kernel.delta_strength``, never a function value.
    """
    tau = float(tau)
    if tau < 0.0:
        return 0.0 + 0.0j
    if tau == 0.0:
        raise ValueError("f_tau: tau = 0 is not pointwise-defined")
    if not kernel.is_nonlocal():
        return 0.0 + 0.0j
    al = kernel.params.alpha
    return kernel.a1 * tau ** (-al - 0.5) + kernel.a2 * tau ** (-2.0 * al)


def _term_ratio_factors(kernel: TimeKernel, n_terms: int):
    # term_{n+1} = term_n * rho_n * x^(1/2-alpha) for the running variable x;
    # rho_n = q (b2/b1) Gamma(s_n)/Gamma(s_{n+1}) stays the same for the
    # tau-series and for the z-bridge (only x differs), so both reuse this.
    al = kernel.params.alpha
    q = np.exp(1j * np.pi * (0.5 - al) / 2.0)
    base = q * (kernel.b2 / kernel.b1)
    return np.array([base * complex_gamma(kernel.exponent(n)) / complex_gamma(kernel.exponent(n + 1))
                     for n in range(1, n_terms)])


def ttilde_series(tau, kernel: TimeKernel, n_terms: int, with_estimate: bool = False):
    """Partial sum sum_{n=1..N} a_n tau^(s_n - 1) of the transition kernel.

    a_n = a2^(n-1) a1^(2-n) Gamma(1-2 alpha)^(n-1) Gamma(1/2-alpha)^(2-n)
    / Gamma(n(1/2-alpha)); terms are built by a stable ratio recurrence
    rather than from that product directly. Accepts scalar or array tau > 0.

    Emits :class:`TruncationWarning` when the last retained term exceeds
    1e-10 of the partial sum (the series decays only after its terms peak,
    so a large last term means the value shown has not converged).
    With ``with_estimate=True`` also returns |last term| as the truncation
    estimate (max over the tau array).
    """
    if not kernel.is_nonlocal():
        raise ValueError("the transition-kernel series exists in the nonlocal regime only")
    n_terms = int(n_terms)
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    if n_terms > kernel.n_max:
        raise ValueError(f"n_terms = {n_terms} exceeds this kernel's n_max = {kernel.n_max}")
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr <= 0.0):
        raise ValueError("ttilde_series: tau must be positive")
    al = kernel.params.alpha
    term = kernel.a1 * tau_arr ** (0.5 - al - 1.0)  # n = 1
    total = np.array(term, dtype=np.complex128, copy=True)
    if n_terms > 1:
        ratios = _term_ratio_factors(kernel, n_terms)
        step = tau_arr ** (0.5 - al)
        for n in range(1, n_terms):
            term = term * ratios[n - 1] * step
            total = total + term
    last = np.max(np.abs(term))
    scale = np.max(np.abs(total))
    if scale > 0.0 and last > 1e-10 * scale:
        warnings.warn(
            f"series truncated at n = {n_terms} with last term {last:.3e} "
            f"vs partial sum {scale:.3e}; the value has not converged",
            TruncationWarning, stacklevel=2)
    if total.ndim == 0:
        total = complex(total)
    if with_estimate:
        return total, float(last)
    return total


def _bridge_rho(z, kernel: TimeKernel):
    w = principal_power(-complex(z), 0.5 - kernel.params.alpha)
    return kernel.b2 / (kernel.b1 * w)


def laplace_bridge(z, kernel: TimeKernel, n_terms: int):
    """Term-wise transform i sum_{n<=N} a_n Gamma(s_n) (-i z)^(-s_n).

    Converges to N(z) geometrically with ratio rho = b2/(b1 (-z)^(1/2-alpha));
    outside |rho| < 1 the series diverges and
    :class:`SeriesDivergenceError` is raised.
    """
    if not kernel.is_nonlocal():
        raise ValueError("the transform bridge exists in the nonlocal regime only")
    z = complex(z)
    if z.imag == 0.0 and z.real >= 0.0:
        raise ValueError("laplace_bridge: z on the spectrum [0, inf)")
    n_terms = int(n_terms)
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    rho = _bridge_rho(z, kernel)
    if abs(rho) >= 1.0:
        raise SeriesDivergenceError(
            f"|b2| = {abs(kernel.b2):.6g} >= |b1 (-z)^(1/2-alpha)| = "
            f"{abs(kernel.b1) * abs(principal_power(-z, 0.5 - kernel.params.alpha)):.6g}: "
            "the transform series diverges at this z")
    al = kernel.params.alpha
    s1 = kernel.exponent(1)
    # i * a1 Gamma(s1) (-iz)^(-s1); A1 = a1 Gamma(s1) = -i q b1
    q = np.exp(1j * np.pi * (0.5 - al) / 2.0)
    term = 1j * (-1j * q * kernel.b1) * principal_power(-1j * z, -s1)
    total = term
    step = principal_power(-1j * z, -(0.5 - al))
    qb = q * (kernel.b2 / kernel.b1)
    for _ in range(1, n_terms):
        term = term * qb * step
        total = total + term
    return total


def bridge_terms_for_tolerance(z, kernel: TimeKernel, rel_tol: float) -> int:
    """Smallest N with geometric remainder bound |rho|^N/(1-|rho|) <= rel_tol
    relative to the resummed value (so the N-term bridge meets rel_tol)."""
    r = abs(_bridge_rho(z, kernel))
    if r >= 1.0:
        raise SeriesDivergenceError("series diverges at this z; no N reaches the tolerance")
    if r == 0.0:
        return 1
    # remainder/|N(z)| = |rho|^N |1-rho|/(1-|rho|); bound |1-rho| <= 1+|rho|
    n = int(np.ceil(np.log(rel_tol * (1.0 - r) / (1.0 + r)) / np.log(r)))
    return max(n, 1)
