import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbar_spectra import analytic
from dbar_spectra.analytic import AnnulusSpec, DiskMode
from dbar_spectra.special import bessel_zero

# mpmath.findroot on x J_{j+1}(x) - (aR + shift R) J_j(x), 30 digits
DISK_ORACLE = [
    (DiskMode(0, 0, "+", 1.0), 1.0, 1.57699273080860672487),
    (DiskMode(0, 0, "+", 1.0), 0.5, 0.88504925399430685969),
    (DiskMode(0, 0, "+", 1.0), 5.0, 3.95936259891503719517),
    (DiskMode(1, 0, "-", 1.0), 1.0, 7.47815663315734657003),
    (DiskMode(2, 1, "+", 3.0), 5.0, 6.85225171651458796980),
    (DiskMode(3, 2, "-", 2.0), 0.7, 34.4315028333056933093),
]


@pytest.mark.parametrize("mode,a,ref", DISK_ORACLE)
def test_disk_branch_frozen(mode, a, ref):
    assert analytic.disk_branch_eigenvalue(mode, a) == pytest.approx(ref, rel=1e-13)


def test_disk_branch_live_mpmath():
    mode = DiskMode(4, 1, "+", 1.5)
    a = 2.3
    lo, hi = analytic.disk_branch_bracket(mode)
    c = a * mode.R
    x = mp.findroot(lambda t: t * mp.besselj(5, t) - c * mp.besselj(4, t),
                    (lo + 1e-9, hi - 1e-9), solver="anderson")
    assert analytic.disk_branch_eigenvalue(mode, a) == pytest.approx(float(x / 1.5) ** 2, rel=1e-13)


def test_array_input_matches_scalar():
    mode = DiskMode(2, 0, "-", 1.0)
    a = np.array([0.1, 1.0, 10.0])
    vec = analytic.disk_branch_eigenvalue(mode, a)
    assert np.allclose(vec, [analytic.disk_branch_eigenvalue(mode, x) for x in a], rtol=1e-14)


@pytest.mark.parametrize("mode", [DiskMode(0, 0, "+"), DiskMode(1, 0, "+"), DiskMode(1, 0, "-"),
                                  DiskMode(2, 1, "+"), DiskMode(2, 1, "-"), DiskMode(0, 2, "+")])
def test_limits_reached(mode):
    lo, hi = analytic.disk_branch_limits(mode)
    assert analytic.disk_branch_eigenvalue(mode, 1e9) == pytest.approx(hi, rel=1e-7)
    assert abs(analytic.disk_branch_eigenvalue(mode, 1e-9) - lo) < 1e-7 * max(1.0, lo)


def test_minus_branch_zero_limit_is_lower_order_zero():
    lo, _ = analytic.disk_branch_limits(DiskMode(3, 1, "-", 1.0))
    assert lo == pytest.approx(bessel_zero(2, 2) ** 2, rel=1e-15)


def test_residual_vanishes():
    for mode, a, _ in DISK_ORACLE:
        mu = analytic.disk_branch_eigenvalue(mode, a)
        assert abs(analytic.disk_residual(mode, a, mu)) < 1e-11 * max(1.0, mu)


def test_minus_above_plus():
    for j in range(1, 6):
        p = analytic.disk_branch_eigenvalue(DiskMode(j, 0, "+"), 1.0)
        m = analytic.disk_branch_eigenvalue(DiskMode(j, 0, "-"), 1.0)
        assert m > p


def test_ordered_spectrum_matches_brute_force_merge():
    s = analytic.disk_ordered_spectrum(1.0, 1.0, 10)
    brute = sorted(analytic.disk_branch_eigenvalue(DiskMode(j, k, sg, 1.0), 1.0)
                   for j in range(20) for k in range(4) for sg in "+-" if j or sg == "+")
    assert np.allclose(s.values, brute[:10], rtol=1e-14)
    assert s.values[0] == pytest.approx(DISK_ORACLE[0][2], rel=1e-13)
    assert s.labels[0] == DiskMode(0, 0, "+", 1.0)


def test_ordered_spectrum_truncation_error():
    with pytest.raises(analytic.TruncationError):
        analytic.disk_ordered_spectrum(1.0, 50.0, 30, j_max=1)


def test_slope_three_routes():
    mode = DiskMode(1, 1, "-", 2.0)
    a = 0.8
    quad = analytic.disk_boundary_interior_ratio(mode, a)
    closed = float(analytic._disk_slope_closed(mode, np.array([a]))[0])
    h = 1e-5 * a
    fd = (analytic.disk_branch_eigenvalue(mode, a + h) - analytic.disk_branch_eigenvalue(mode, a - h)) / (2 * h)
    assert closed == pytest.approx(quad, rel=1e-10)
    assert fd == pytest.approx(quad, rel=1e-7)


def test_small_a_slope_is_perimeter_over_area():
    # constant eigenfunction limit: slope -> |boundary| / |domain| = 2/R
    for R in (1.0, 3.0):
        assert analytic.disk_boundary_interior_ratio(DiskMode(0, 0, "+", R), 1e-7) == pytest.approx(2 / R, rel=1e-6)


def test_eigenfunction_satisfies_boundary_condition():
    mode = DiskMode(2, 0, "-", 1.0)
    a = 1.7
    phi = 0.4
    h = 1e-5
    u = lambda r, p: analytic.disk_eigenfunction(mode, a, r, p)
    ur = (u(1.0, phi) - u(1.0 - h, phi)) / h
    up = (u(1.0, phi + h) - u(1.0, phi - h)) / (2 * h)
    bc = ur + 1j * up + a * u(1.0, phi)
    assert abs(bc) < 1e-4
    with pytest.raises(ValueError):
        analytic.disk_eigenfunction(mode, a, 1.5, 0.0)


@settings(max_examples=40, deadline=None)
@given(j=st.integers(0, 6), k=st.integers(0, 4), sign=st.sampled_from("+-"),
       a1=st.floats(1e-3, 1e3), f=st.floats(1.01, 10.0))
def test_branch_strictly_increasing_and_in_bracket(j, k, sign, a1, f):
    mode = DiskMode(j, k, sign, 1.0)
    m1 = analytic.disk_branch_eigenvalue(mode, a1)
    m2 = analytic.disk_branch_eigenvalue(mode, a1 * f)
    lo, hi = analytic.disk_branch_limits(mode)
    assert m1 < m2
    assert lo <= m1 <= hi


def test_branch_curves_shapes_and_monotone():
    a = np.geomspace(0.01, 60, 50)
    modes, vals, slopes = analytic.disk_branch_curves(3.0, a, 12)
    assert vals.shape == slopes.shape == (50, 12)
    assert np.all(np.diff(vals, axis=0) > 0)
    assert np.all(slopes > 0)


def test_negative_a_scan_frozen():
    roots = analytic.disk_negative_a_scan(3.0, 0, "+", -1.0, 5.0)
    assert np.allclose(roots[:2], [1.0895, 4.8418], rtol=1e-4)
    with pytest.raises(ValueError):
        analytic.disk_negative_a_scan(3.0, 0, "+", 1.0, 5.0)


# ------------------------------------------------------------------ annulus

def _mp_annulus_det(Ri, Ro, j, sign, a, k):
    """Boundary operator applied to J_j and Y_j with numerical derivatives."""
    s = 1 if sign == "+" else -1

    def bc(C, r, outer):
        f = lambda t: C(j, k * t)
        val, der = f(r), mp.diff(f, r)
        ang = s * j / r  # d/dphi e^{i s j phi} = i s j
        if outer:   # u_r + i (1/r) u_phi + a u
            return der - ang * val + a * val
        return -der + ang * val + a * val  # normal -e_r, tangent -e_phi

    return (bc(mp.besselj, Ro, True) * bc(mp.bessely, Ri, False)
            - bc(mp.bessely, Ro, True) * bc(mp.besselj, Ri, False))


@pytest.mark.parametrize("j,sign,a", [(0, "+", 1.0), (1, "-", 0.3), (2, "+", 4.0), (3, "-", 2.0)])
def test_annulus_roots_against_mpmath_determinant(j, sign, a):
    spec = AnnulusSpec(1.0, math.sqrt(10.0))
    mp.mp.dps = 25
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        roots = analytic.annulus_branch_eigenvalues(spec, j, sign, a, 12.0)
    assert len(roots) >= 2
    for mu in roots[:3]:
        k = mp.findroot(lambda t: _mp_annulus_det(1.0, math.sqrt(10.0), j, sign, a, t),
                        mp.sqrt(mu))
        assert float(k) ** 2 == pytest.approx(mu, rel=1e-10)


def test_annulus_large_a_reaches_dirichlet_cross_roots():
    spec = AnnulusSpec(1.0, 2.0)
    mu_inf = analytic.annulus_branch_eigenvalues(spec, 2, "+", 1e9, 60.0)
    for mu in mu_inf:
        k = math.sqrt(mu)
        ref = float(mp.findroot(lambda t: mp.besselj(2, t) * mp.bessely(2, 2 * t)
                                - mp.besselj(2, 2 * t) * mp.bessely(2, t), k)) ** 2
        assert mu == pytest.approx(ref, rel=1e-7)


def test_annulus_small_hole_approaches_disk():
    spec = AnnulusSpec(1e-6, 1.0)
    mu = analytic.annulus_branch_eigenvalues(spec, 0, "+", 1.0, 30.0)
    disk = [analytic.disk_branch_eigenvalue(DiskMode(0, k, "+", 1.0), 1.0) for k in range(2)]
    assert mu[0] == pytest.approx(disk[0], rel=1e-4)
    assert mu[1] == pytest.approx(disk[1], rel=1e-4)


def test_annulus_lowest_root_collapses_as_a_to_zero():
    spec = AnnulusSpec(1.0, math.sqrt(10.0))
    for j, sign in [(0, "+"), (2, "+"), (2, "-")]:
        r = analytic.annulus_branch_eigenvalues(spec, j, sign, np.array([1e-4, 1e-6]), 10.0)
        assert r[1][0] < r[0][0] < 1e-2


def test_annulus_slope_against_difference():
    spec = AnnulusSpec(1.0, math.sqrt(10.0))
    a, h = 0.7, 1e-5
    mu = analytic.annulus_branch_eigenvalues(spec, 1, "-", a, 10.0)[1]
    up = analytic.annulus_branch_eigenvalues(spec, 1, "-", a + h, 10.0)[1]
    dn = analytic.annulus_branch_eigenvalues(spec, 1, "-", a - h, 10.0)[1]
    hf = analytic.annulus_boundary_interior_ratio(spec, 1, "-", a, mu)
    assert hf == pytest.approx((up - dn) / (2 * h), rel=1e-6)


def test_annulus_curves_upper_family_has_convex_region():
    spec = AnnulusSpec(1.0, math.sqrt(10.0))
    a = np.geomspace(0.01, 10, 40)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        labels, vals, _ = analytic.annulus_branch_curves(spec, a, 8, family="upper",
                                                         with_slopes=False)
    assert all(i >= 1 for _, _, i in labels)
    w = (a[2:] - a[1:-1]) / (a[2:] - a[:-2])
    sd = 2 * (w[:, None] * vals[:-2] + (1 - w[:, None]) * vals[2:] - vals[1:-1])
    assert sd.max() > 1e-6
    assert np.all(np.diff(vals, axis=0) > 0)


def test_annulus_spec_validation():
    with pytest.raises(ValueError):
        AnnulusSpec(2.0, 1.0)
