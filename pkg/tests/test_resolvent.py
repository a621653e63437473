import numpy as np
import pytest
import scipy.linalg as sla

from dbar_spectra import fem, mesh, resolvent


@pytest.fixture(scope="module")
def small_forms():
    return fem.assemble(mesh.triangulate(mesh.DomainSpec.disk(1.0), 0.3))


def _dense_T(forms, kind, a, lam):
    A, Me, P = fem.operator_matrix(forms, kind, a)
    P = P.toarray()
    M = forms.M.toarray()
    return P @ np.linalg.solve(A.toarray() - lam * Me.toarray(), P.T @ M)


def _mnorm(forms, W):
    Mh = sla.sqrtm(forms.M.toarray())
    return float(np.linalg.norm(Mh @ W @ np.linalg.inv(Mh), 2))


@pytest.mark.parametrize("op1,op2", [
    (("dbar-robin", 2.0), ("dbar-robin", 1.0)),
    (("dbar-robin", 50.0), "dirichlet"),
    (("robin", 1.0), ("dbar-robin", 1.0)),
])
def test_power_iteration_matches_dense_norm(small_forms, op1, op2):
    f = small_forms
    ref = _mnorm(f, _dense_T(f, *(op1 if isinstance(op1, tuple) else (op1, 0.0)), 1j)
                 - _dense_T(f, *(op2 if isinstance(op2, tuple) else (op2, 0.0)), 1j))
    got = resolvent.resolvent_diff_norm(f, op1, op2, 1j, tol=1e-10)
    assert got == pytest.approx(ref, rel=1e-6)


def test_projected_norm_matches_dense(small_forms):
    f = small_forms
    V = resolvent.kernel_projector(f)
    Q = np.eye(f.dof_count) - V @ V.conj().T @ f.M.toarray()
    W = Q @ (_dense_T(f, "dbar-robin", 0.01, 1j) - _dense_T(f, "dbar-neumann", 0.0, 1j))
    got = resolvent.resolvent_diff_norm(f, ("dbar-robin", 0.01), "dbar-neumann", 1j, V, tol=1e-10)
    assert got == pytest.approx(_mnorm(f, W), rel=1e-6)


def test_kernel_projector_spans_constants_and_z(small_forms):
    f = small_forms
    V = resolvent.kernel_projector(f)
    assert V.shape[1] == 2
    z = f.mesh.complex_nodes
    for u in (np.ones_like(z), z):
        r = u - V @ (V.conj().T @ (f.M @ u))
        assert f.mnorm(r) < 1e-8 * f.mnorm(u)
    assert np.abs(V.conj().T @ (f.M @ V) - np.eye(2)).max() < 1e-10


def test_kernel_projector_enriched(enriched_disk_forms):
    V = resolvent.kernel_projector(enriched_disk_forms)
    assert V.shape[1] == enriched_disk_forms.enrichment["degree"] + 1


def test_symmetry_and_zero(small_forms):
    f = small_forms
    x = resolvent.resolvent_diff_norm(f, ("dbar-robin", 3.0), ("dbar-robin", 1.0), tol=1e-10)
    y = resolvent.resolvent_diff_norm(f, ("dbar-robin", 1.0), ("dbar-robin", 3.0), tol=1e-10)
    assert x == pytest.approx(y, rel=1e-8)
    assert resolvent.resolvent_diff_norm(f, ("dbar-robin", 1.0), ("dbar_robin", 1.0)) == 0.0
    assert resolvent.resolvent_continuity(f, 1.0, [0.0]) == [0.0]


def test_resolvent_norm_bounded_by_inverse_distance(small_forms):
    for op in ("dirichlet", ("dbar-robin", 1.0), "dbar-neumann"):
        n = resolvent.resolvent_norm(small_forms, op, 1j, tol=1e-10)
        assert n <= 1.0 + 1e-8
    # dbar-neumann has a kernel, so the distance to the spectrum is exactly 1
    assert resolvent.resolvent_norm(small_forms, "dbar-neumann", 1j, tol=1e-10) == \
        pytest.approx(1.0, rel=1e-6)


def test_difference_bounded_by_two_over_imag(small_forms):
    for a in (0.1, 10.0):
        d = resolvent.resolvent_diff_norm(small_forms, ("dbar-robin", a), "dirichlet", 2j)
        assert d <= 2 / 2 + 1e-8


def test_dirichlet_difference_decays_like_one_over_a(disk_forms):
    a = np.array([10.0, 100.0, 1000.0])
    n = [resolvent.resolvent_diff_norm(disk_forms, ("dbar-robin", x), "dirichlet") for x in a]
    assert -1.15 <= resolvent.fit_loglog_slope(a, n) <= -0.85


def test_continuity_is_linear_in_delta(small_forms):
    d = [1e-3, 1e-2]
    n = resolvent.resolvent_continuity(small_forms, 1.0, d, tol=1e-10)
    assert resolvent.fit_loglog_slope(d, n) == pytest.approx(1.0, abs=0.02)


def test_fit_loglog_slope_exact():
    x = np.array([1.0, 10.0, 100.0])
    assert resolvent.fit_loglog_slope(x, 3 * x ** -1.5) == pytest.approx(-1.5, abs=1e-12)


def test_zero_limit_report(small_forms, tmp_path):
    rows = resolvent.unprojected_zero_limit_report(small_forms, [1e-3, 1e-2], 1j)
    assert [r["a"] for r in rows] == [1e-3, 1e-2]
    for r in rows:
        assert r["norm_projected"] <= r["norm_unprojected"] + 1e-12
    assert 0.85 <= rows[0]["fitted_slope"] <= 1.15
    p = tmp_path / "r.csv"
    resolvent.write_resolvent_csv(p, rows)
    lines = p.read_text().splitlines()
    assert lines[0] == "a,norm_projected,norm_unprojected,fitted_slope"
    assert float(lines[1].split(",")[0]) == 1e-3


def test_input_validation(small_forms):
    with pytest.raises(ValueError):
        resolvent.ResolventHandle(small_forms, "dirichlet", 2.0)
    with pytest.raises(ValueError):
        resolvent.resolvent_continuity(small_forms, 0.0, [0.1])
    with pytest.raises(ValueError):
        resolvent.unprojected_zero_limit_report(small_forms, [0.0, 0.1])


def test_stagnation_error(small_forms):
    with pytest.raises(resolvent.StagnationError):
        resolvent.resolvent_diff_norm(small_forms, ("dbar-robin", 2.0), "dirichlet",
                                      tol=1e-16, maxiter=3)


def test_factor_residual_small(small_forms):
    h = resolvent.ResolventHandle(small_forms, ("dbar-robin", 1.0), 1j)
    assert h.factor_residual() < 1e-12
