r"""Reduced scalar amplitudes t(z) and N(z), boundary data, and the flow path.

The separable interaction makes the full transition operator factorize as
T(z) = phi (x) phi^* times a scalar. That scalar is what this module
evaluates:

* local regime (alpha > 1/2): t pinned by a reference pair (a, g_a) on the
  negative real axis, t(z) = g_a / (1 + g_a (z - a) I11(z, a));
* nonlocal-in-time regime (alpha < 1/2): N(z) = b1^2 / (b1 (-z)^(1/2-alpha) - b2)
  pinned by the real asymptotic parameter b2 (b1 is fixed by the model).

A Riccati flow dt/dz = -t^2 I2(z) provides an independent integration path,
and :func:`unitarity_residual` measures the resolvent-difference identity
that both closed forms satisfy exactly.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .model import (ModelParams, Regime, loop_integral_I1, loop_integral_I2,
                    loop_integral_I11)
from .specfun import complex_gamma, principal_power

__all__ = [
    "PoleError",
    "StepFailureError",
    "BoundaryData",
    "ReducedAmplitude",
    "b1_coefficient",
    "asymptotic_coefficients",
    "asymptotic_seed",
    "t_closed",
    "lambda_from_boundary",
    "bound_state_energy",
    "unitarity_residual",
    "hermiticity_residual",
    "riccati_solve",
    "riccati_flow",
]


class PoleError(ArithmeticError):
    """The amplitude's denominator vanished within tolerance at this z."""


class StepFailureError(RuntimeError):
    """The integration path ran into the cut or a pole of t."""


class BoundaryData:
    """Data selecting a unique solution of the dynamics.

    Two variants: ``reference(a, g_a)`` gives the value t(a) = g_a at a
    negative real energy a (local regime); ``asymptotic(b2)`` gives the
    subleading large-|z| coefficient b2, which must be real (hermitian
    analyticity fails otherwise).
    """

    LOCAL = "reference"
    NONLOCAL = "asymptotic"

    def __init__(self, kind, a=None, g_a=None, b2=None):
        self.kind = kind
        if kind == self.LOCAL:
            a = float(a)
            if a >= 0.0:
                raise ValueError(f"reference energy a must be negative, got {a}")
            self.a = a
            self.g_a = float(g_a)
        elif kind == self.NONLOCAL:
            if isinstance(b2, complex):
                if b2.imag != 0.0:
                    raise ValueError("b2 must be real (hermitian analyticity)")
                b2 = b2.real
            self.b2 = float(b2)
        else:
            raise ValueError(f"unknown boundary kind {kind!r}")

    @classmethod
    def reference(cls, a, g_a):
        return cls(cls.LOCAL, a=a, g_a=g_a)

    @classmethod
    def asymptotic(cls, b2):
        return cls(cls.NONLOCAL, b2=b2)

    def __repr__(self):
        if self.kind == self.LOCAL:
            return f"BoundaryData.reference(a={self.a}, g_a={self.g_a})"
        return f"BoundaryData.asymptotic(b2={self.b2})"


def b1_coefficient(params: ModelParams) -> float:
    """b1 = -(1/2) cos(alpha pi) pi^-2 c1^-2 (2 mu)^(alpha-3/2).

    Fixed by the model alone; positive in the local regime, negative in the
    nonlocal one.
    """
    if params.c1 == 0.0:
        raise ValueError("b1_coefficient undefined at c1 = 0")
    a = params.alpha
    return -0.5 * np.cos(a * np.pi) / (np.pi ** 2 * params.c1 ** 2) * (2.0 * params.mu) ** (a - 1.5)


def asymptotic_coefficients(params: ModelParams, b2: float):
    """(b1, b2, a1, a2): frequency-domain asymptotics -> time-domain powers.

    The time kernel behaves as f(tau) = a1 tau^(-alpha-1/2) + a2 tau^(-2 alpha)
    for tau -> 0+. Inverting the term-wise transform
    i int_0^inf e^{i z tau} tau^(s-1) dtau = i Gamma(s) (-i z)^(-s)
    under the package's principal branch gives

        a1 = -i b1 Gamma(1/2-alpha)^-1 exp(+i pi (1/2-alpha)/2)
        a2 =    b2 Gamma(1-2 alpha)^-1 exp(-i alpha pi)

    such that i * Laplace[f](z) reproduces b1|z|^(alpha-1/2) + b2|z|^(2alpha-1)
    as z -> -inf. The coefficients are cross-validated against a numerical
    Laplace transform in the test suite.
    """
    if params.regime() != Regime.NONLOCAL:
        raise ValueError("asymptotic coefficients are defined in the nonlocal regime only")
    al = params.alpha
    b1 = b1_coefficient(params)
    q = np.exp(1j * np.pi * (0.5 - al) / 2.0)
    a1 = -1j * b1 * q / complex_gamma(0.5 - al)
    a2 = b2 * np.exp(-1j * al * np.pi) / complex_gamma(1.0 - 2.0 * al)
    return b1, float(b2), complex(a1), complex(a2)


def asymptotic_seed(z, params: ModelParams, b2: float):
    """Two-term large-|z| value b1|z|^(alpha-1/2) + b2|z|^(2 alpha - 1).

    Seeds the Riccati flow at large negative z and supplies the large-|a|
    approximation of g_a used by the reference-point-independence check.
    """
    b1 = b1_coefficient(params)
    az = abs(z)
    al = params.alpha
    return b1 * az ** (al - 0.5) + b2 * az ** (2.0 * al - 1.0)


class ReducedAmplitude:
    """Memoized evaluator of the scalar amplitude for one (params, boundary).

    Scalar evaluations are cached by the exact bit pattern of z (contour
    quadratures revisit nodes); the cache is fill-once and idempotent, so
    concurrent readers see a pure function.
    """

    def __init__(self, params: ModelParams, boundary: BoundaryData):
        regime = params.regime()
        if regime == Regime.LOCAL and boundary.kind != BoundaryData.LOCAL:
            raise ValueError("local regime (alpha > 1/2) needs reference boundary data (a, g_a)")
        if regime == Regime.NONLOCAL and boundary.kind != BoundaryData.NONLOCAL:
            raise ValueError("nonlocal regime (alpha < 1/2) needs asymptotic boundary data (b2)")
        self.params = params
        self.boundary = boundary
        self._memo = {}

    def t(self, z):
        z = complex(z)
        key = (z.real, z.imag)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        val = t_closed(z, self)
        self._memo[key] = val
        return val

    def t_many(self, zs):
        """Vectorized closed-form evaluation (no memo traffic)."""
        zs = np.asarray(zs, dtype=np.complex128)
        if self.params.c1 == 0.0 or self._g_a_is_zero():
            return np.zeros_like(zs)
        if self.boundary.kind == BoundaryData.NONLOCAL:
            b1 = b1_coefficient(self.params)
            w = principal_power(-zs, 0.5 - self.params.alpha)
            den = b1 * w - self.boundary.b2
            return b1 * b1 / den
        # local: g_a / (1 + g_a (I1(a) - I1(z))) via the continued power
        b1 = b1_coefficient(self.params)
        a, g_a = self.boundary.a, self.boundary.g_a
        i1a = -principal_power(-a + 0.0j, 0.5 - self.params.alpha) / b1
        i1z = -principal_power(-zs, 0.5 - self.params.alpha) / b1
        return g_a / (1.0 + g_a * (i1a - i1z))

    def _g_a_is_zero(self):
        return self.boundary.kind == BoundaryData.LOCAL and self.boundary.g_a == 0.0

    def __repr__(self):
        return f"ReducedAmplitude({self.params!r}, {self.boundary!r})"


def t_closed(z, amp: ReducedAmplitude):
    """Closed-form amplitude at one z off the spectrum.

    Local: t(z) = g_a / (1 + g_a (z - a) I11(z, a)). Nonlocal:
    N(z) = b1^2 / (b1 (-z)^(1/2-alpha) - b2). Raises :class:`PoleError`
    when the denominator vanishes within 1e-12 of its natural scale
    (a bound state or resonance sits there; it is reported, not masked).
    """
    z = complex(z)
    params = amp.params
    if z.imag == 0.0 and z.real >= 0.0:
        raise ValueError("t_closed: z on the spectrum [0, inf)")
    if params.c1 == 0.0:
        # no form factor: the amplitude carries no interaction
        if amp.boundary.kind == BoundaryData.LOCAL:
            return complex(amp.boundary.g_a)
        return 0.0 + 0.0j
    if amp.boundary.kind == BoundaryData.NONLOCAL:
        b1 = b1_coefficient(params)
        b2 = amp.boundary.b2
        w = principal_power(-z, 0.5 - params.alpha)
        den = b1 * w - b2
        scale = max(abs(b1 * w), abs(b2), 1e-300)
        if abs(den) < 1e-12 * scale:
            raise PoleError(f"N(z) pole within tolerance at z = {z}")
        return b1 * b1 / den
    a, g_a = amp.boundary.a, amp.boundary.g_a
    if g_a == 0.0:
        return 0.0 + 0.0j
    if z == a:
        return complex(g_a)
    corr = g_a * (z - a) * loop_integral_I11(z, a, params)
    den = 1.0 + corr
    if abs(den) < 1e-12 * max(1.0, abs(corr)):
        raise PoleError(f"t(z) pole within tolerance at z = {z}")
    return g_a / den


def t_from_anchor(z, a, g_a, params: ModelParams):
    """Amplitude anchored at t(a) = g_a, valid in both regimes.

    Uses only I11, which converges for every alpha in (0, 3/2); in the
    nonlocal regime this is the anchored representation whose a -> -inf
    limit recovers N(z).
    """
    z = complex(z)
    if g_a == 0.0:
        return 0.0 + 0.0j
    den = 1.0 + g_a * (z - a) * loop_integral_I11(z, complex(a), params)
    if abs(den) < 1e-12:
        raise PoleError(f"anchored amplitude pole at z = {z}")
    return g_a / den


def lambda_from_boundary(amp: ReducedAmplitude) -> float:
    """Coupling lambda = g_a / (1 + g_a I1(a)) of the equivalent separable
    potential (local regime only). With this lambda,
    t(z) = lambda / (1 - lambda I1(z)) identically."""
    if amp.boundary.kind != BoundaryData.LOCAL:
        raise ValueError("lambda is defined for the local regime only")
    a, g_a = amp.boundary.a, amp.boundary.g_a
    if g_a == 0.0:
        return 0.0
    i1a = loop_integral_I1(a + 0.0j, amp.params).real
    den = 1.0 + g_a * i1a
    if abs(den) < 1e-12 * max(1.0, abs(g_a * i1a)):
        raise PoleError("1 + g_a I1(a) vanishes; lambda undefined at this boundary")
    return g_a / den


def bound_state_energy(amp: ReducedAmplitude):
    """Real negative pole of the amplitude, or None if there is none.

    Local: solves 1 - lambda I1(z) = 0. Nonlocal: solves
    b1 (-z)^(1/2-alpha) = b2 (a pole exists only for b2 < 0 there, since
    b1 < 0 when alpha < 1/2).
    """
    params = amp.params
    if params.c1 == 0.0:
        return None
    al = params.alpha
    b1 = b1_coefficient(params)
    if amp.boundary.kind == BoundaryData.NONLOCAL:
        ratio = amp.boundary.b2 / b1
        if ratio <= 0.0:
            return None
        return -float(ratio ** (1.0 / (0.5 - al)))
    lam = lambda_from_boundary(amp)
    if lam == 0.0:
        return None
    w = -b1 / lam
    if w <= 0.0:
        return None
    return -float(w ** (1.0 / (0.5 - al)))


def unitarity_residual(amp: ReducedAmplitude, z1, z2):
    """r = t(z1) - t(z2) - (z2 - z1) t(z2) t(z1) I11(z1, z2).

    Vanishes identically for the closed forms; the numerical value measures
    roundoff plus any branch-convention mistake.
    """
    z1, z2 = complex(z1), complex(z2)
    if z1 == z2:
        raise ValueError("unitarity_residual: z1 == z2")
    t1 = amp.t(z1)
    t2 = amp.t(z2)
    i11 = loop_integral_I11(z1, z2, amp.params)
    return t1 - t2 - (z2 - z1) * t2 * t1 * i11


def hermiticity_residual(amp: ReducedAmplitude, z):
    """h = t(conj z) - conj(t(z)); zero for hermitian-analytic amplitudes
    (real boundary data), nonzero when b2 has been given an imaginary part."""
    z = complex(z)
    return amp.t(z.conjugate()) - amp.t(z).conjugate()


# ---------------------------------------------------------------------------
# Riccati flow


def _segment_ray_clearance(za, zb, n=2001):
    """Min distance from segment [za, zb] to the ray [0, inf) x {0}."""
    s = np.linspace(0.0, 1.0, n)
    pts = za + s * (zb - za)
    d = np.where(pts.real >= 0.0, np.abs(pts.imag), np.abs(pts))
    return float(np.min(d))


def _segment_point_clearance(za, zb, p):
    dz = zb - za
    L2 = abs(dz) ** 2
    if L2 == 0.0:
        return abs(za - p)
    s = np.clip(((p - za) * np.conj(dz)).real / L2, 0.0, 1.0)
    return abs(za + s * dz - p)


def _plan_legs(amp, z_start, z_end, lift_height):
    """Straight segment, or a rectangular detour when it would pass near the
    cut or a real-axis pole of t. Endpoints are never moved."""
    z_start, z_end = complex(z_start), complex(z_end)
    pole = bound_state_energy(amp)
    near = _segment_ray_clearance(z_start, z_end) < 0.05
    if pole is not None:
        near = near or _segment_point_clearance(z_start, z_end, pole + 0.0j) < 0.2
    if not near:
        return [(z_start, z_end)]
    h = lift_height if (z_start.imag >= 0.0 and z_end.imag >= 0.0) else -lift_height
    legs = []
    if z_start.imag != h:
        legs.append((z_start, complex(z_start.real, h)))
    legs.append((complex(z_start.real, h), complex(z_end.real, h)))
    if z_end.imag != h:
        legs.append((complex(z_end.real, h), z_end))
    return legs


def _check_leg(amp, za, zb):
    if _segment_ray_clearance(za, zb) < 1e-6:
        raise StepFailureError(f"integration path [{za}, {zb}] touches the spectrum [0, inf)")
    pole = bound_state_energy(amp)
    if pole is not None and _segment_point_clearance(za, zb, pole + 0.0j) < 1e-6:
        raise StepFailureError(f"integration path [{za}, {zb}] passes through the pole at {pole}")


def _integrate_leg(amp, za, zb, t0, rtol, atol):
    dz = zb - za

    def rhs(s, y):
        z = za + s * dz
        return [-y[0] * y[0] * loop_integral_I2(z, amp.params) * dz]

    def blowup(s, y):
        return abs(y[0]) - 1e8

    blowup.terminal = True
    sol = solve_ivp(rhs, (0.0, 1.0), [complex(t0)], method="DOP853",
                    rtol=rtol, atol=atol, events=blowup)
    if sol.status == 1:
        raise StepFailureError(f"|t| blew up along [{za}, {zb}]; the path crosses a pole")
    if not sol.success:
        raise StepFailureError(f"step control failed along [{za}, {zb}]: {sol.message}")
    return complex(sol.y[0, -1])


def riccati_solve(amp: ReducedAmplitude, z_start, z_end, t_start,
                  lift=True, lift_height=0.5, rtol=1e-10, atol=1e-12):
    """Integrate dt/dz = -t^2 I2(z) from z_start to z_end, seeded by t_start.

    The nominal path is the straight segment; with ``lift=True`` (default) a
    segment passing near the spectrum or near a real-axis pole of t is
    replaced by a rectangular detour at Im z = lift_height (the flow is
    path-independent above the cut). A path that still touches the cut or a
    pole within 1e-6 raises :class:`StepFailureError`, as does observed
    blow-up of |t| along the way.
    """
    if complex(t_start) == 0.0:
        return 0.0 + 0.0j  # fixed point of the flow
    legs = (_plan_legs(amp, z_start, z_end, lift_height)
            if lift else [(complex(z_start), complex(z_end))])
    t = complex(t_start)
    for za, zb in legs:
        _check_leg(amp, za, zb)
        t = _integrate_leg(amp, za, zb, t, rtol, atol)
    return t


def riccati_flow(amp: ReducedAmplitude, z_points, t_start, **kw):
    """Chain :func:`riccati_solve` through a sequence of z targets.

    Returns the flow value at each point of ``z_points`` (the first entry is
    the seed location and maps to t_start itself).
    """
    zs = [complex(z) for z in z_points]
    out = [complex(t_start)]
    t = complex(t_start)
    for za, zb in zip(zs[:-1], zs[1:]):
        t = riccati_solve(amp, za, zb, t, **kw)
        out.append(t)
    return out
