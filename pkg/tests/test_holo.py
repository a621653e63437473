import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbar_spectra import fem, holo, mesh


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0, 3.0])
def test_disk_levels_are_2k_over_R(R):
    b = holo.HolomorphicBasis(mesh.DomainSpec.disk(R))
    lev = holo.hardy_steklov_levels(b, 10)
    np.testing.assert_allclose(lev, 2 * np.arange(1, 11) / R, rtol=1e-10)


def test_orthonormal_gram_is_identity():
    b = holo.HolomorphicBasis(mesh.DomainSpec.ellipse(1.2, 1 / 1.2), n_max=20)
    assert np.abs(b.orthonormal_gram() - np.eye(len(b))).max() < 1e-9


def test_levels_stable_under_basis_growth():
    spec = mesh.DomainSpec.ellipse(1.2, 1 / 1.2)
    lo = holo.hardy_steklov_levels(holo.HolomorphicBasis(spec, n_max=25), 6)
    hi = holo.hardy_steklov_levels(holo.HolomorphicBasis(spec, n_max=30), 6)
    np.testing.assert_allclose(lo, hi, rtol=1e-9)


def test_first_level_is_perimeter_over_area_bound():
    # constants give oint 1 / int 1 = |boundary| / |Omega|; the minimum is below
    spec = mesh.DomainSpec.ellipse(1.2, 1 / 1.2)
    b = holo.HolomorphicBasis(spec)
    (z, dz), = spec.boundary_nodes(2048)
    per = float(np.sum(np.abs(dz)))
    assert holo.hardy_steklov_levels(b, 1)[0] <= per / spec.area() + 1e-12


def test_basis_rejections():
    with pytest.raises(ValueError):
        holo.HolomorphicBasis(mesh.DomainSpec.annulus(1.0, 2.0))
    with pytest.raises(ValueError):
        holo.HolomorphicBasis(mesh.DomainSpec.disk(1.0), n_max=31)
    with pytest.raises(holo.IllConditionedError):
        holo.HolomorphicBasis(mesh.DomainSpec.ellipse(3.0, 0.5))
    b = holo.HolomorphicBasis(mesh.DomainSpec.disk(1.0), n_max=10)
    with pytest.raises(ValueError):
        holo.hardy_steklov_levels(b, 7)


def test_evaluate_is_orthonormal_under_quadrature():
    spec = mesh.DomainSpec.disk(1.0)
    b = holo.HolomorphicBasis(spec, n_max=6)
    # polar Gauss-trapezoid quadrature on the unit disk
    g, w = np.polynomial.legendre.leggauss(20)
    r = 0.5 * (g + 1)
    th = 2 * math.pi * np.arange(64) / 64
    z = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    wt = (0.5 * w[:, None] * r[:, None] * (2 * math.pi / 64) * np.ones(64)).ravel()
    V = b.evaluate(z)
    G = V.conj().T @ (wt[:, None] * V)
    assert np.abs(G - np.eye(7)).max() < 1e-12


@pytest.mark.parametrize("n", range(0, 9))
def test_cauchy_reproduces_monomials(n):
    spec = mesh.DomainSpec.disk(1.0)
    (xi, dxi), = spec.boundary_nodes(256)
    rng = np.random.default_rng(n)
    z = 0.8 * np.sqrt(rng.random(10)) * np.exp(2j * math.pi * rng.random(10))
    val = holo.cauchy_integral(xi ** n, xi, dxi, z)
    assert np.abs(val - z ** n).max() < 1e-9


def test_cauchy_kills_antiholomorphic_boundary_data():
    # conj(xi)^n = xi^{-n} on the unit circle extends holomorphically outside
    spec = mesh.DomainSpec.disk(1.0)
    (xi, dxi), = spec.boundary_nodes(256)
    z = np.array([0.1 + 0.2j, -0.5j, 0.3])
    for n in (1, 2, 5):
        assert np.abs(holo.cauchy_integral(np.conj(xi) ** n, xi, dxi, z)).max() < 1e-12


def test_cauchy_scalar_and_proximity_warning():
    (xi, dxi), = mesh.DomainSpec.disk(1.0).boundary_nodes(64)
    v = holo.cauchy_integral(np.ones(64), xi, dxi, 0.0)
    assert isinstance(v, complex) and abs(v - 1) < 1e-14
    with pytest.warns(holo.ProximityWarning):
        holo.cauchy_integral(np.ones(64), xi, dxi, 0.99)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.6, 1.6), st.floats(0.6, 1.6), st.integers(0, 6))
def test_cauchy_reproduction_on_ellipses(a, b, n):
    spec = mesh.DomainSpec.ellipse(a, b)
    (xi, dxi), = spec.boundary_nodes(512)
    z = 0.3 * min(a, b) * np.array([1, 1j, -0.5 - 0.5j])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        val = holo.cauchy_integral(xi ** n, xi, dxi, z)
    assert np.abs(val - z ** n).max() < 1e-8 * max(1.0, max(a, b) ** n)


def test_bergman_keeps_discrete_holomorphic_vectors(disk_forms):
    z = disk_forms.mesh.complex_nodes
    for u in (np.ones_like(z), z, 2 - 3j * z):
        Pu, perp = holo.bergman_project(disk_forms, u)
        assert np.abs(perp).max() < 1e-13 * np.abs(u).max()
        assert np.abs(Pu - u).max() < 1e-13 * np.abs(u).max()


def _rel(forms, x, y):
    M = forms.M[: forms.n_p1, : forms.n_p1]
    d = x - y
    return math.sqrt(np.vdot(d, M @ d).real / np.vdot(y, M @ y).real)


def test_bergman_conj_z_is_orthogonal(disk_forms, disk_forms_fine):
    errs = []
    for f in (disk_forms, disk_forms_fine):
        zb = np.conj(f.mesh.complex_nodes)
        Pu, perp = holo.bergman_project(f, zb)
        errs.append(_rel(f, perp, zb))
    assert errs[1] < errs[0] < 0.2


def test_bergman_modulus_squared_projects_to_half(disk_forms, disk_forms_fine):
    errs = []
    for f in (disk_forms, disk_forms_fine):
        z = f.mesh.complex_nodes
        Pu, _ = holo.bergman_project(f, np.abs(z) ** 2)
        errs.append(_rel(f, Pu, np.full(f.n_p1, 0.5 + 0j)))
    assert errs[1] < errs[0] < 0.2


def test_bergman_nearly_idempotent(disk_forms, disk_forms_fine):
    errs = []
    for f in (disk_forms, disk_forms_fine):
        z = f.mesh.complex_nodes
        u = np.cos(3 * z.real) * z.imag + 1j * np.abs(z) ** 3
        Pu, _ = holo.bergman_project(f, u)
        PPu, _ = holo.bergman_project(f, Pu)
        errs.append(_rel(f, PPu, Pu))
    assert errs[1] < 0.6 * errs[0]


def test_bergman_rejects_wrong_length(disk_forms):
    with pytest.raises(ValueError):
        holo.bergman_project(disk_forms, np.zeros(3))


def test_sharp_constant_close_to_bound(disk_forms, disk_forms_fine):
    r0 = holo.sharp_constant_probe(disk_forms)
    r1 = holo.sharp_constant_probe(disk_forms_fine)
    for r in (r0, r1):
        assert abs(r["ratio"] / r["bound"] - 1) < 0.05
    assert abs(r1["ratio"] / r1["bound"] - 1) < abs(r0["ratio"] / r0["bound"] - 1)


def test_random_projected_ratios_respect_bound(disk_forms):
    ratios, bound = holo.random_ratio_check(disk_forms, count=20, seed=4)
    assert len(ratios) == 20 and np.all(np.isfinite(ratios))
    assert np.all(ratios <= 1.05 * bound)


def test_steklov_csv(tmp_path):
    p = tmp_path / "s.csv"
    holo.write_steklov_csv(p, [1.0, 2.0, 3.0])
    lines = p.read_text().splitlines()
    assert lines == ["a,S_1,S_2,S_3", "0.0,1.0,2.0,3.0"]


def test_bergman_projection_is_m_self_adjoint(disk_forms):
    f = disk_forms
    z = f.mesh.complex_nodes
    u = np.abs(z) ** 2 + 1j * z.real ** 3
    v = np.cos(2 * z.imag) + np.conj(z) ** 2
    Pu, _ = holo.bergman_project(f, u)
    Pv, _ = holo.bergman_project(f, v)
    d = abs(np.vdot(v, f.M @ Pu) - np.vdot(Pv, f.M @ u))
    assert d <= 1e-12 * f.mnorm(u) * f.mnorm(v)


def test_dbar_of_projection_decreases_under_refinement(disk_forms, disk_forms_fine):
    out = []
    for f in (disk_forms, disk_forms_fine):
        z = f.mesh.complex_nodes
        u = np.abs(z) ** 2 + np.conj(z) * z.real
        Pu, _ = holo.bergman_project(f, u)
        out.append(holo._dbar_norm(f, Pu) / holo._mnorm_p1(f, u))
    assert out[1] < 0.8 * out[0]
