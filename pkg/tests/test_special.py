import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbar_spectra import special


def _mp_j(p, x):
    return float(mp.besselj(p, x))


@pytest.mark.parametrize("p", [0, 1, 2, 5, 10, 20, 40])
def test_bessel_j_matches_mpmath(p):
    x = np.concatenate([np.linspace(0.01, 1, 7), np.linspace(1.3, 120, 41)])
    got = special.bessel_j(p, x)
    ref = np.array([_mp_j(p, t) for t in x])
    # relative error where the value is not in the tiny pre-turning-point tail
    scale = np.maximum(np.abs(ref), 1e-2 * np.max(np.abs(ref)))
    assert np.max(np.abs(got - ref) / scale) < 1e-12


@pytest.mark.parametrize("p", [0, 1, 3, 8])
def test_bessel_y_matches_mpmath(p):
    x = np.concatenate([np.linspace(0.05, 1, 5), np.linspace(1.5, 80, 30)])
    got = special.bessel_y(p, x)
    ref = np.array([float(mp.bessely(p, t)) for t in x])
    scale = np.maximum(np.abs(ref), 1e-2)
    assert np.max(np.abs(got - ref) / scale) < 1e-11


def test_negative_argument_parity():
    x = np.linspace(0.5, 30, 20)
    for p in range(5):
        assert np.allclose(special.bessel_j(p, -x), (-1) ** p * special.bessel_j(p, x),
                           rtol=0, atol=1e-15)


def test_orders_table_shape():
    x = np.linspace(0.1, 5, 12).reshape(3, 4)
    assert special.bessel_j_orders(6, x).shape == (7, 3, 4)
    assert special.bessel_y_orders(6, x).shape == (7, 3, 4)


# frozen from mpmath.besseljzero at 30 digits
ZEROS = {
    (0, 1): 2.40482555769577276862,
    (1, 1): 3.83170597020751231561,
    (2, 1): 5.13562230184068255630,
    (0, 2): 5.52007811028631064959,
    (5, 3): 15.7001740797116710375,
    (10, 7): 35.4999092053738509224,
}


@pytest.mark.parametrize("pk", sorted(ZEROS))
def test_zeros_frozen(pk):
    assert special.bessel_zero(*pk) == pytest.approx(ZEROS[pk], rel=2e-15)


def test_zeros_against_mpmath_table():
    for p in (0, 3, 7, 12):
        z = special.bessel_zeros(p, 30)
        ref = [float(mp.besseljzero(p, k)) for k in range(1, 31)]
        assert np.max(np.abs(z - ref) / ref) < 4e-15


def test_zeros_interlace():
    for p in range(8):
        a = special.bessel_zeros(p, 25)
        b = special.bessel_zeros(p + 1, 25)
        assert np.all(a[:-1] < b[:-1]) and np.all(b[:-1] < a[1:])


def test_mcmahon_guess_close():
    assert abs(special.mcmahon_guess(0, 20) - special.bessel_zero(0, 20)) < 1e-6


def test_zero_index_validation():
    with pytest.raises(ValueError):
        special.bessel_zero(0, 0)
    with pytest.raises(ValueError):
        special.bessel_zero(-1, 1)


def test_ratio_pole_error():
    z = special.bessel_zero(1, 2)
    with pytest.raises(special.PoleError):
        special.bessel_ratio(1, z)
    x = 2.0
    assert special.bessel_ratio(1, x) == pytest.approx(_mp_j(2, x) / _mp_j(1, x), rel=1e-13)


@settings(max_examples=60, deadline=None)
@given(p=st.integers(1, 25), x=st.floats(0.05, 150.0))
def test_three_term_recurrence(p, x):
    J = special.bessel_j_orders(p + 1, np.array([x]))[:, 0]
    lhs = J[p - 1] + J[p + 1]
    rhs = 2 * p / x * J[p]
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(J[p - 1]), abs(J[p + 1]), abs(rhs))


@settings(max_examples=60, deadline=None)
@given(p=st.integers(0, 12), x=st.floats(0.1, 100.0))
def test_wronskian(p, x):
    J = special.bessel_j_orders(p + 1, np.array([x]))[:, 0]
    Y = special.bessel_y_orders(p + 1, np.array([x]))[:, 0]
    w = J[p + 1] * Y[p] - J[p] * Y[p + 1]
    assert w == pytest.approx(2 / (math.pi * x), rel=1e-9)
