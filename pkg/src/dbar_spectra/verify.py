"""Self-check suite run by ``dbar-spectra verify``.

Every check returns ``(ok, detail)``; ``run_checks`` collects the results in
a fixed order so repeated runs print identical reports.
"""
import math
import time
import warnings

import numpy as np

from . import analytic, fem, holo, mesh, resolvent, special, spectra

__all__ = ["CHECKS", "bundled_domains", "run_checks"]


def bundled_domains():
    """Named domains used by the CLI defaults and the checks."""
    return {
        "disk": mesh.DomainSpec.disk(1.0),
        "annulus": mesh.DomainSpec.annulus(1.0, math.sqrt(10.0)),
        "ellipse": mesh.DomainSpec.ellipse(1.2, 1 / 1.2),
        "ellipse-1.5": mesh.DomainSpec.ellipse(1.5, 1 / 1.5),
        "smoothed-square": mesh.smoothed_square(),
        "square": mesh.DomainSpec.polygon([(-1, -1), (1, -1), (1, 1), (-1, 1)]),
    }


_FORMS = {}


def _forms(name, h, degree=0):
    key = (name, h, degree)
    if key not in _FORMS:
        m = mesh.triangulate(bundled_domains()[name], h)
        _FORMS[key] = fem.assemble(m, holomorphic_degree=degree)
    return _FORMS[key]


def _close(x, y, rtol):
    return abs(x - y) <= rtol * max(abs(y), 1e-300)


# ------------------------------------------------------------------ special

def check_bessel_identities(level):
    x = np.linspace(0.1, 60, 400)
    J = special.bessel_j_orders(12, x)
    Y = special.bessel_y_orders(12, x)
    rec = max(float(np.max(np.abs(J[p - 1] + J[p + 1] - 2 * p / x * J[p]))) for p in range(1, 12))
    wr = float(np.max(np.abs((J[1:] * Y[:-1] - J[:-1] * Y[1:]) * x * math.pi / 2 - 1)))
    return rec < 1e-12 and wr < 1e-10, f"recurrence {rec:.1e}, Wronskian {wr:.1e}"


def check_bessel_zeros(level):
    worst = 0.0
    for p in range(6):
        z = special.bessel_zeros(p, 20)
        worst = max(worst, float(np.max(np.abs(special.bessel_j(p, z)))))
        nxt = special.bessel_zeros(p + 1, 20)
        if not (np.all(z[:-1] < nxt[:-1]) and np.all(nxt[:-1] < z[1:])):
            return False, f"interlacing fails at order {p}"
    return worst < 1e-13, f"max |J_p(zero)| {worst:.1e}"


# ----------------------------------------------------------------- analytic

def check_disk_branches(level):
    a = np.geomspace(0.01, 60, 60)
    modes, vals, _ = analytic.disk_branch_curves(3.0, a, 12)
    mono = bool(np.all(np.diff(vals, axis=0) > 0))
    res = max(abs(analytic.disk_residual(m, 1.0, analytic.disk_branch_eigenvalue(m, 1.0)))
              for m in modes)
    return mono and res < 1e-10, f"monotone {mono}, residual {res:.1e}"


def check_disk_slope(level):
    m = analytic.DiskMode(0, 0, "+", 1.0)
    hf = analytic.disk_boundary_interior_ratio(m, 1.0)
    fd = (analytic.disk_branch_eigenvalue(m, 1 + 1e-5) - analytic.disk_branch_eigenvalue(m, 1 - 1e-5)) / 2e-5
    return _close(hf, fd, 1e-5), f"HF {hf:.10f} FD {fd:.10f}"


def check_annulus_dirichlet_limit(level):
    s = analytic.AnnulusSpec(1.0, math.sqrt(10.0))
    big = analytic.annulus_branch_eigenvalues(s, 1, "+", 1e7, 6.0)
    ref = analytic.annulus_branch_eigenvalues(s, 1, "+", 1e12, 6.0)
    err = float(np.max(np.abs(np.asarray(big) - np.asarray(ref)) / np.asarray(ref)))
    return err < 1e-5, f"relative change {err:.1e}"


# --------------------------------------------------------------------- mesh

def check_meshes(level):
    h = 0.2 if level == "quick" else 0.1
    details = []
    for name, spec in bundled_domains().items():
        m = mesh.triangulate(spec, h)
        mesh.validate_mesh(m)
        r = mesh.refine(m)
        mesh.validate_mesh(r)
        if not m.h <= 1.5 * h:
            return False, f"{name}: h {m.h:.3f} above 1.5 h_target"
        ratio = r.n_triangles / m.n_triangles
        if abs(ratio - 4) > 0.4:
            return False, f"{name}: refinement ratio {ratio}"
        details.append(name)
    return True, "valid: " + ", ".join(details)


def check_boundary_quadrature(level):
    m = mesh.triangulate(mesh.DomainSpec.disk(1.0), 0.1)
    pts, w, nrm = mesh.boundary_quadrature(m, 2)
    per = float(np.sum(w))
    out = bool(np.all(np.sum(nrm * pts, axis=1) > 0))
    return abs(per - 2 * math.pi) < 0.01 and out, f"perimeter {per:.5f}, outward {out}"


# ---------------------------------------------------------------------- fem

def check_forms(level):
    f = _forms("ellipse", 0.1)
    herm = max(float(abs(X - X.getH()).max()) for X in (f.K, f.B, f.M, f.K_z))
    wirt = float(abs(f.K + f.K_z - 2 * f.K_grad).max())
    z = f.nodal(f.mesh.complex_nodes)
    one = f.nodal(np.ones(f.n_p1))
    hol = max(f.dbar_energy(z) / f.mnorm(z) ** 2, f.dbar_energy(one) / f.mnorm(one) ** 2)
    ok = herm < 1e-13 and wirt < 1e-12 and hol <= 1e-20
    return ok, f"hermitian {herm:.1e}, wirtinger {wirt:.1e}, holomorphic {hol:.1e}"


def check_enriched_forms(level):
    f = _forms("disk", 0.1, 12)
    wirt = float(abs(f.K + f.K_z - 2 * f.K_grad).max())
    v = np.zeros(f.dof_count, dtype=complex)
    v[f.n_p1 + 3] = 1.0
    m = float(np.real(np.vdot(v, f.M @ v)))
    # independent route: collapsed Gauss on every triangle
    bary, w = fem.triangle_rule(8)
    zt = f.mesh.complex_nodes[f.mesh.triangles]
    zq = (zt[:, None, :] * bary[None]).sum(axis=2)
    zeta = (zq - f.enrichment["center"]) / f.enrichment["scale"]
    ref = float(np.sum(f.mesh.areas[:, None] * w[None] * np.abs(zeta) ** 10))
    return wirt < 1e-12 and _close(m, ref, 1e-10), f"wirtinger {wirt:.1e}, |z^5|^2 {m:.12f}"


# ------------------------------------------------------------------ spectra

def check_spectrum_invariants(level):
    f = _forms("disk", 0.1)
    s = spectra.solve_operator(f, "dbar-robin", 1.0, 8)
    X = s.vectors
    orth = float(np.max(np.abs(X.conj().T @ (f.M @ X) - np.eye(8))))
    d = spectra.solve_operator(f, "dirichlet", 0.0, 8)
    gap = bool(np.all(s.values < d.values)) and s.values[0] > 0
    ok = orth < 1e-10 and float(s.residuals.max()) < 1e-9 and gap
    return ok, f"orthonormality {orth:.1e}, residual {s.residuals.max():.1e}, gap {gap}"


def check_dirichlet_gap(level):
    names = ["disk", "ellipse"] if level == "quick" else list(bundled_domains())
    h = 0.2 if level == "quick" else 0.1
    for name in names:
        f = _forms(name, h)
        lam = spectra.solve_operator(f, "dirichlet", 0.0, 8).values
        for a in (0.1, 1.0, 10.0, 100.0):
            mu = spectra.solve_operator(f, "dbar-robin", a, 8).values
            if not np.all(mu < lam):
                return False, f"{name} a={a}: mu {mu} vs Lambda {lam}"
    return True, f"{len(names)} domains, k <= 8"


def check_sweep(level):
    f = _forms("disk", 0.2 if level == "quick" else 0.1)
    a = np.geomspace(1e-2, 1e3, 30)
    c = spectra.sweep_curves(f, a, 6)
    rep = spectra.concavity_report(c, 1)
    return c.is_monotone() and rep.verdict == "concave", \
        f"monotone {c.is_monotone()}, mu_1 {rep.verdict} (max {rep.max_second_difference:.1e})"


def check_slope(level):
    f = _forms("disk", 0.1)
    hf, fd = spectra.slope_check(f, 1.0, 1)
    return _close(hf, fd, 1e-6), f"HF {hf:.10f}, FD {fd:.10f}"


def check_robin_comparison(level):
    f = _forms("ellipse-1.5", 0.1)
    d, r = spectra.robin_comparison(f, 1.0)
    return d <= r + 1e-10, f"d-bar Robin {d:.8f} <= Robin {r:.8f}"


# --------------------------------------------------------------------- holo

def check_steklov(level):
    b = holo.HolomorphicBasis(mesh.DomainSpec.disk(2.0), 30)
    s = holo.hardy_steklov_levels(b, 10)
    err = float(np.max(np.abs(s - np.arange(1, 11))))
    return err < 1e-8, f"max |S_k - k| on disk(2): {err:.1e}"


def check_cauchy(level):
    (xi, dxi), = mesh.DomainSpec.disk(1.0).boundary_nodes(256)
    rng = np.random.default_rng(1)
    r = 0.8 * np.sqrt(rng.random(10))
    z = r * np.exp(2j * math.pi * rng.random(10))
    err = max(float(np.max(np.abs(holo.cauchy_integral(xi ** n, xi, dxi, z) - z ** n)))
              for n in range(9))
    return err < 1e-9, f"max reproduction error {err:.1e}"


def check_bergman(level):
    f = _forms("disk", 0.1)
    z = f.mesh.complex_nodes
    _, perp = holo.bergman_project(f, z)
    p_bar, _ = holo.bergman_project(f, np.conj(z))
    n = lambda v: f.mnorm(f.nodal(v))
    e1 = n(perp) / n(z)
    e2 = n(p_bar) / n(z)
    return e1 < 1e-2 and e2 < 3e-2, f"P_perp z {e1:.1e}, P conj(z) {e2:.1e}"


def check_sharp_constant(level):
    f = _forms("disk", 0.1)
    r = holo.sharp_constant_probe(f)
    ratios, bound = holo.random_ratio_check(f, 20, lambda_1=r["lambda_1"])
    ok = abs(r["ratio"] / r["bound"] - 1) < 0.05 and np.nanmax(ratios) <= 1.05 * bound
    return ok, f"equality ratio {r['ratio'] / r['bound']:.4f}, random max {np.nanmax(ratios) / bound:.4f}"


# ---------------------------------------------------------------- resolvent

def check_resolvent_bound(level):
    f = _forms("disk", 0.2 if level == "quick" else 0.1)
    norms = [resolvent.resolvent_norm(f, ("dbar-robin", a)) for a in (0.0, 1.0, 10.0)]
    s1 = resolvent.resolvent_diff_norm(f, ("dbar-robin", 10.0), "dirichlet")
    s2 = resolvent.resolvent_diff_norm(f, "dirichlet", ("dbar-robin", 10.0))
    ok = max(norms) <= 1 + 1e-9 and abs(s1 - s2) <= 1e-8 * max(s1, 1e-300) * 1e2
    return ok, f"max ||T|| {max(norms):.6f}, symmetry {abs(s1 - s2):.1e}"


def check_resolvent_rate(level):
    f = _forms("disk", 0.1, 0 if level == "quick" else 20)
    a = [10.0, 30.0, 100.0, 300.0, 1000.0]
    n = [resolvent.resolvent_diff_norm(f, ("dbar-robin", x), "dirichlet") for x in a]
    s = resolvent.fit_loglog_slope(a, n)
    return -1.15 <= s <= -0.85, f"Dirichlet-limit slope {s:.4f}"


CHECKS = [
    ("special.bessel_identities", check_bessel_identities, "quick"),
    ("special.bessel_zeros", check_bessel_zeros, "quick"),
    ("analytic.disk_branches", check_disk_branches, "quick"),
    ("analytic.disk_slope", check_disk_slope, "quick"),
    ("analytic.annulus_dirichlet_limit", check_annulus_dirichlet_limit, "full"),
    ("mesh.validity", check_meshes, "quick"),
    ("mesh.boundary_quadrature", check_boundary_quadrature, "quick"),
    ("fem.forms", check_forms, "quick"),
    ("fem.enriched_forms", check_enriched_forms, "quick"),
    ("spectra.invariants", check_spectrum_invariants, "quick"),
    ("spectra.dirichlet_gap", check_dirichlet_gap, "quick"),
    ("spectra.sweep", check_sweep, "quick"),
    ("spectra.slope", check_slope, "quick"),
    ("spectra.robin_comparison", check_robin_comparison, "full"),
    ("holo.steklov", check_steklov, "quick"),
    ("holo.cauchy", check_cauchy, "quick"),
    ("holo.bergman", check_bergman, "quick"),
    ("holo.sharp_constant", check_sharp_constant, "full"),
    ("resolvent.bound_symmetry", check_resolvent_bound, "quick"),
    ("resolvent.dirichlet_rate", check_resolvent_rate, "full"),
]


def run_checks(level="quick", out=print):
    """Run the checks of ``level`` ("quick" or "full"); return (passed, results)."""
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    results = []
    for name, fn, lvl in CHECKS:
        if level == "quick" and lvl == "full":
            continue
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                ok, detail = fn(level)
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail} ({time.perf_counter() - t0:.1f}s)")
    _FORMS.clear()
    return all(r[1] for r in results), results
