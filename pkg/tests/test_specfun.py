"""Branch convention and gamma accuracy.

Reference digits were frozen from mpmath at 50-digit working precision;
the assertions here only trust the first 12-13.
"""
import numpy as np
import pytest

from hypothesis import given
from hypothesis import strategies as st

from nltdyn.specfun import complex_gamma, phi1, principal_log, principal_power

# mpmath.gamma, mp.dps = 50
GAMMA_TABLE = [
    (0.3, 2.9915689876875907),
    (0.25, 3.6256099082219083),
    (0.75, 1.2254167024651776),
    (1.25, 0.9064024770554771),
    (0.5, 1.7724538509055160),
    (2.5 + 1.3j, 0.49165633901835104 + 0.7528259334850971j),
    (-1.7 + 0.4j, 1.1356438824316395 - 0.26890799072916943j),
]


@pytest.mark.parametrize("z, want", GAMMA_TABLE)
def test_complex_gamma_against_frozen_digits(z, want):
    got = complex_gamma(z)
    assert abs(got - want) <= 1e-12 * abs(want)


@pytest.mark.parametrize("z", [0.0, -1.0, -3.0, -17.0])
def test_complex_gamma_pole_raises(z):
    with pytest.raises(ValueError, match="pole"):
        complex_gamma(z)


@given(
    st.floats(min_value=-20.0, max_value=20.0),
    st.floats(min_value=0.05, max_value=20.0),
)
def test_gamma_recurrence(x, y):
    # Gamma(z + 1) = z Gamma(z), checked away from the real axis so the
    # reflection branch gets exercised too
    z = complex(x, y)
    lhs = complex_gamma(z + 1.0)
    rhs = z * complex_gamma(z)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))


def test_principal_log_negative_axis_lands_on_plus_pi():
    assert principal_log(-1.0) == pytest.approx(1j * np.pi)
    # -0.0 imaginary part must not flip to the lower edge
    assert principal_log(complex(-2.0, -0.0)).imag == pytest.approx(np.pi)


@given(st.floats(min_value=-50, max_value=50), st.floats(min_value=-50, max_value=50))
def test_principal_log_imag_range(x, y):
    w = complex(x, y)
    if w == 0:
        return
    im = principal_log(w).imag
    # mathematically the range is (-pi, pi]; in floats a tiny negative
    # imaginary part rounds the angle to -pi exactly, so test the closure
    assert -np.pi <= im <= np.pi
    if y == 0.0 and x < 0.0:
        assert im == pytest.approx(np.pi)


def test_principal_power_sqrt_of_minus_one_is_plus_i():
    assert principal_power(-1.0, 0.5) == pytest.approx(1j)


def test_principal_power_branch_jump_across_cut():
    above = principal_power(complex(-4.0, +1e-12), 0.25)
    below = principal_power(complex(-4.0, -1e-12), 0.25)
    # values on opposite edges differ by exp(2 pi i s)
    assert abs(above / below - np.exp(2j * np.pi * 0.25)) < 1e-9


def test_principal_power_zero_base():
    assert principal_power(0.0, 1.5) == 0.0
    with pytest.raises(ValueError, match="w = 0 with Re s <= 0"):
        principal_power(0.0, -0.5)
    with pytest.raises(ValueError):
        principal_power(np.array([1.0, 0.0]), -0.25)


def test_principal_power_array_matches_scalar():
    w = np.array([1.0 + 2.0j, -3.0, 0.5 - 0.5j])
    out = principal_power(w, 0.3 + 0.1j)
    for wi, oi in zip(w, out):
        assert oi == pytest.approx(principal_power(wi, 0.3 + 0.1j))


def test_phi1_series_matches_direct_across_threshold():
    # the implementation switches branches at |w| = 1e-6
    for w in [1e-6 * 1.01, 1e-6 * 0.99, 1e-7j, 2e-6 + 1e-6j]:
        want = np.expm1(np.real(w)) if np.imag(w) == 0 else np.exp(w) - 1.0
        want = want / w
        assert phi1(w) == pytest.approx(complex(want), rel=1e-9)


def test_phi1_at_zero_and_elementwise():
    assert phi1(0.0) == 1.0
    w = np.array([0.0, 1.0, 1j * np.pi])
    out = phi1(w)
    assert out[0] == 1.0
    assert out[1] == pytest.approx(np.e - 1.0)
    assert out[2] == pytest.approx((np.exp(1j * np.pi) - 1.0) / (1j * np.pi))
