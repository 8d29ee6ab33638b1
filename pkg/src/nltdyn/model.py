r"""Model parameters, the power-law form factor, and the momentum integrals.

The interaction is separable with form factor phi(k) = c1 * k^(-alpha) and
free dispersion E_k = k^2 / (2 mu), hbar = 1. Everything downstream consumes
four integrals of |phi|^2 against resolvent-type kernels:

    I1(z)       = int d^3k |phi(k)|^2 / (z - E_k)
    I2(z)       = int d^3k |phi(k)|^2 / (z - E_k)^2
    I11(z1,z2)  = int d^3k |phi(k)|^2 / ((z1 - E_k)(z2 - E_k))
    K(sigma)    = int d^3k |phi(k)|^2 exp(-i E_k sigma)

All four reduce to radial integrals with the 4 pi k^2 dk measure. Closed
forms are the default; an adaptive-quadrature path stays available behind
``method="quad"`` and the tests cross-validate the two.

Averaging the resolvent against a gridded state is :func:`overlap_g`.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import quad

from .specfun import complex_gamma, principal_power

__all__ = [
    "Regime",
    "ModelParams",
    "form_factor",
    "loop_integral_I1",
    "loop_integral_I2",
    "loop_integral_I11",
    "kernel_K",
    "overlap_g",
]


class Regime:
    LOCAL = "local"
    NONLOCAL = "nonlocal-in-time"


class ModelParams:
    """Physical inputs: exponent alpha, coupling scale c1, reduced mass mu.

    alpha must lie in (0, 3/2) and differ from 1/2: the dynamics changes
    character across alpha = 1/2 and both families of closed forms blow up
    exactly there. alpha < 1/2 is the nonlocal-in-time regime, alpha > 1/2
    the local one. The upper bound 3/2 keeps I1 infrared-finite.
    """

    __slots__ = ("alpha", "c1", "mu")

    def __init__(self, alpha: float, c1: float, mu: float):
        alpha = float(alpha)
        c1 = float(c1)
        mu = float(mu)
        if not (0.0 < alpha < 1.5):
            raise ValueError(f"alpha must be in (0, 3/2), got {alpha}")
        if alpha == 0.5:
            raise ValueError("alpha = 1/2 is excluded (regime boundary)")
        if c1 < 0.0:
            raise ValueError(f"c1 must be nonnegative, got {c1}")
        if mu <= 0.0:
            raise ValueError(f"mu must be positive, got {mu}")
        self.alpha = alpha
        self.c1 = c1
        self.mu = mu

    def regime(self) -> str:
        return Regime.LOCAL if self.alpha > 0.5 else Regime.NONLOCAL

    def energy(self, k):
        """Free dispersion E_k = k^2/(2 mu), elementwise."""
        k = np.asarray(k, dtype=float)
        out = k * k / (2.0 * self.mu)
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"ModelParams(alpha={self.alpha}, c1={self.c1}, mu={self.mu})"

    def __eq__(self, other):
        return (isinstance(other, ModelParams)
                and (self.alpha, self.c1, self.mu) == (other.alpha, other.c1, other.mu))

    def __hash__(self):
        return hash((self.alpha, self.c1, self.mu))


def form_factor(k, params: ModelParams):
    """phi(k) = c1 * k^(-alpha) for k > 0, elementwise.

    k = 0 is rejected: the singularity there is integrable under the
    4 pi k^2 dk measure and is only ever handled inside quadratures.
    """
    karr = np.asarray(k, dtype=float)
    if np.any(karr <= 0.0):
        raise ValueError("form_factor: k must be positive")
    out = params.c1 * karr ** (-params.alpha)
    return float(out) if out.ndim == 0 else out


def _check_off_cut(z):
    z = complex(z)
    if z.imag == 0.0 and z.real >= 0.0:
        raise ValueError(f"z = {z} lies on the spectrum [0, inf); "
                         "evaluate as a limit from Im z > 0 instead")
    return z


def _i1_continued(z, params: ModelParams):
    # -(-z)^(1/2-alpha) / b1 ; for alpha < 1/2 this is the analytic
    # continuation of the (there divergent) integral, used only internally.
    a = params.alpha
    b1 = -0.5 * np.cos(a * np.pi) / (np.pi ** 2 * params.c1 ** 2) * (2.0 * params.mu) ** (a - 1.5)
    return -principal_power(-z, 0.5 - a) / b1


def loop_integral_I1(z, params: ModelParams, method: str = "closed"):
    """I1(z) = int d^3k |phi|^2/(z - E_k). Requires alpha > 1/2 (convergence).

    The closed form is 2 pi^2 c1^2 (2 mu)^(3/2-alpha) (-z)^(1/2-alpha)/cos(alpha pi),
    derived by reducing to the elementary integral int_0^inf u^(m-1)/(1+u^2) du;
    it is analytic in the cut plane and continuous up to the cut from above.
    """
    if params.c1 == 0.0:
        _check_off_cut(z)
        return 0.0 + 0.0j
    if params.alpha <= 0.5:
        raise ValueError("loop_integral_I1 diverges for alpha <= 1/2 "
                         "(use I11/I2, which stay finite there)")
    z = _check_off_cut(z)
    if method == "closed":
        return _i1_continued(z, params)
    if method == "quad":
        return _i1_quad(z, params)
    raise ValueError(f"unknown method {method!r}")


def _radial_tail_cutoff(z, params):
    # quadrature cutoff past the resolvent's momentum scale
    return max(60.0, 10.0 * np.sqrt(abs(z) * 2.0 * params.mu))


def _i1_quad(z, params):
    a, c1, tm = params.alpha, params.c1, 2.0 * params.mu
    K = _radial_tail_cutoff(z, params)

    def f(k):
        return c1 * c1 * k ** (2.0 - 2.0 * a) / (z - k * k / tm)

    re, _ = quad(lambda k: f(k).real, 0.0, K, limit=400)
    im, _ = quad(lambda k: f(k).imag, 0.0, K, limit=400)
    # algebraic tail: 1/(z-E) = -(tm/k^2)(1 + z tm/k^2 + (z tm/k^2)^2 + ...)
    p = 2.0 - 2.0 * a
    tail = (-tm * K ** (p - 1.0) / (1.0 - p)
            - tm * tm * z * K ** (p - 3.0) / (3.0 - p)
            - tm ** 3 * z * z * K ** (p - 5.0) / (5.0 - p))
    return 4.0 * np.pi * (re + 1j * im + c1 * c1 * tail)


def loop_integral_I2(z, params: ModelParams, method: str = "closed"):
    """I2(z) = int d^3k |phi|^2/(z - E_k)^2, convergent for all alpha in (0, 3/2).

    Differentiating I1 under the integral gives d/dz (z-E)^-1 = -(z-E)^-2,
    so I2(z) = -d I1/dz; the closed form below is that derivative continued
    to the whole alpha range (where the double pole makes the integral
    converge even though I1 alone does not).
    """
    if params.c1 == 0.0:
        _check_off_cut(z)
        return 0.0 + 0.0j
    z = _check_off_cut(z)
    if method == "closed":
        a = params.alpha
        b1 = -0.5 * np.cos(a * np.pi) / (np.pi ** 2 * params.c1 ** 2) * (2.0 * params.mu) ** (a - 1.5)
        return (a - 0.5) * principal_power(-z, -0.5 - a) / b1
    if method == "quad":
        return _i2_quad(z, params)
    raise ValueError(f"unknown method {method!r}")


def _i2_quad(z, params):
    a, c1, tm = params.alpha, params.c1, 2.0 * params.mu
    K = _radial_tail_cutoff(z, params)

    def f(k):
        return c1 * c1 * k ** (2.0 - 2.0 * a) / (z - k * k / tm) ** 2

    re, _ = quad(lambda k: f(k).real, 0.0, K, limit=400)
    im, _ = quad(lambda k: f(k).imag, 0.0, K, limit=400)
    p = 2.0 - 2.0 * a
    # (z-E)^-2 = (tm/k^2)^2 (1 + 2 z tm/k^2 + ...)
    tail = (tm ** 2 * K ** (p - 3.0) / (3.0 - p)
            + 2.0 * z * tm ** 3 * K ** (p - 5.0) / (5.0 - p))
    return 4.0 * np.pi * (re + 1j * im + c1 * c1 * tail)


def loop_integral_I11(z1, z2, params: ModelParams, method: str = "closed"):
    """I11 = int d^3k |phi|^2/((z1-E_k)(z2-E_k)), any alpha in (0, 3/2), z1 != z2.

    For alpha > 1/2 this equals (I1(z1) - I1(z2))/(z2 - z1) by partial
    fractions; for alpha < 1/2 the two-denominator combination converges on
    its own and equals the same difference of analytically continued closed
    forms (the continuations' divergent pieces cancel in the difference).
    """
    z1 = _check_off_cut(z1)
    z2 = _check_off_cut(z2)
    if z1 == z2:
        raise ValueError("loop_integral_I11: z1 == z2 (confluent point; use loop_integral_I2)")
    if params.c1 == 0.0:
        return 0.0 + 0.0j
    if method == "closed":
        return (_i1_continued(z1, params) - _i1_continued(z2, params)) / (z2 - z1)
    if method == "quad":
        return _i11_quad(z1, z2, params)
    raise ValueError(f"unknown method {method!r}")


def _i11_quad(z1, z2, params):
    a, c1, tm = params.alpha, params.c1, 2.0 * params.mu
    K = max(_radial_tail_cutoff(z1, params), _radial_tail_cutoff(z2, params))

    def f(k):
        E = k * k / tm
        return c1 * c1 * k ** (2.0 - 2.0 * a) / ((z1 - E) * (z2 - E))

    re, _ = quad(lambda k: f(k).real, 0.0, K, limit=400)
    im, _ = quad(lambda k: f(k).imag, 0.0, K, limit=400)
    p = 2.0 - 2.0 * a
    tail = (tm ** 2 * K ** (p - 3.0) / (3.0 - p)
            + (z1 + z2) * tm ** 3 * K ** (p - 5.0) / (5.0 - p))
    return 4.0 * np.pi * (re + 1j * im + c1 * c1 * tail)


def kernel_K(sigma, params: ModelParams, method: str = "closed"):
    """K(sigma) = int d^3k |phi|^2 exp(-i E_k sigma) for sigma > 0.

    Fresnel-type closed form: 2 pi c1^2 (2 mu)^(3/2-alpha) Gamma(3/2-alpha)
    (i sigma)^(alpha-3/2), on the principal branch. The quadrature path uses
    a Gaussian regulator exp(-eta k^2) extrapolated eta -> 0+ (Richardson);
    it is an independent check, accurate to ~1e-6, not a production path.
    """
    sigma = float(sigma)
    if sigma <= 0.0:
        raise ValueError("kernel_K: sigma must be positive (causal kernel)")
    if params.c1 == 0.0:
        return 0.0 + 0.0j
    a, c1, mu = params.alpha, params.c1, params.mu
    if method == "closed":
        pref = 2.0 * np.pi * c1 * c1 * (2.0 * mu) ** (1.5 - a) * complex_gamma(1.5 - a)
        return pref * principal_power(1j * sigma, a - 1.5)
    if method == "quad":
        return _kernel_quad(sigma, params)
    raise ValueError(f"unknown method {method!r}")


def _kernel_quad(sigma, params):
    a, c1, tm = params.alpha, params.c1, 2.0 * params.mu

    def reg(eta):
        kmax = max(40.0, 9.0 / np.sqrt(eta))

        def f(k):
            return c1 * c1 * k ** (2.0 - 2.0 * a) * np.exp(-eta * k * k - 1j * k * k * sigma / tm)

        re, _ = quad(lambda k: f(k).real, 0.0, kmax, limit=3000)
        im, _ = quad(lambda k: f(k).imag, 0.0, kmax, limit=3000)
        return 4.0 * np.pi * (re + 1j * im)

    etas = [0.05 * 2.0 ** (-j) for j in range(7)]
    vals = [reg(e) for e in etas]
    # Richardson in eta (leading error linear, then higher orders)
    for order in range(1, 5):
        vals = [(2.0 ** order * vals[i + 1] - vals[i]) / (2.0 ** order - 1.0)
                for i in range(len(vals) - 1)]
    return vals[-1]


def overlap_g(z, psi, params: ModelParams):
    """int d^3k phi(k) psi(k)/(z - E_k) on the state's grid.

    psi provides ``k_nodes`` and ``values``; the measure is 4 pi k^2 dk and
    the grid rule is the trapezoid on the stored nodes (the state's own
    interpolation convention). Vectorized over an array of z values.
    """
    zarr = np.asarray(z, dtype=np.complex128)
    bad = (zarr.imag == 0.0) & (zarr.real >= 0.0)
    if np.any(bad):
        raise ValueError("overlap_g: z on the spectrum [0, inf)")
    k = psi.k_nodes
    w = _trapezoid_weights(k) * 4.0 * np.pi * k * k
    num = w * form_factor(k, params) * psi.values
    E = params.energy(k)
    if zarr.ndim == 0:
        return complex(np.sum(num / (complex(zarr) - E)))
    # one z-row at a time keeps memory flat for big z grids
    return num @ (1.0 / (zarr[..., None] - E)).T if zarr.ndim == 1 else np.array(
        [overlap_g(zi, psi, params) for zi in zarr.ravel()]).reshape(zarr.shape)


def _trapezoid_weights(x):
    w = np.empty_like(x)
    w[0] = 0.5 * (x[1] - x[0])
    w[-1] = 0.5 * (x[-1] - x[-2])
    w[1:-1] = 0.5 * (x[2:] - x[:-2])
    return w
