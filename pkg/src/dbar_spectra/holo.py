"""Holomorphic subspaces: Bergman projection, Cauchy integral and
boundary-to-interior (Hardy-Steklov) levels."""
import math
import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .spectra import solve_operator, write_curve_csv

__all__ = [
    "N_MAX",
    "GRAM_COND_MAX",
    "IllConditionedError",
    "ProximityWarning",
    "HolomorphicBasis",
    "hardy_steklov_levels",
    "bergman_project",
    "cauchy_integral",
    "sharp_constant_probe",
    "random_ratio_check",
    "write_steklov_csv",
]

N_MAX = 30
GRAM_COND_MAX = 1e12


class IllConditionedError(ValueError):
    """Raw monomial Gram matrix is too ill-conditioned to orthonormalize."""


class ProximityWarning(UserWarning):
    """Evaluation point too close to the boundary for the quadrature."""


def _domain_center(spec, n):
    """Area centroid via (1/2i) oint |z|^2 dz = int z dA."""
    tot = 0j
    for z, dz in spec.boundary_nodes(n):
        tot += np.sum(np.abs(z) ** 2 * dz)
    c = tot / 2j / spec.area()
    return complex(round(c.real, 14), round(c.imag, 14))


class HolomorphicBasis:
    """L2-orthonormalized holomorphic polynomials on a simply connected domain.

    Monomials zeta^p, p = 0..n_max, with zeta = (z - c)/rho (c the centroid,
    rho the largest boundary distance from c), are Gram-Schmidt
    orthonormalized through a Cholesky factor of their interior Gram matrix.
    Both Gram matrices are computed from boundary quadrature: the interior
    one by int F dA = (1/2i) oint Phi dz with dbar Phi = F.

    Attributes
    ----------
    interior_gram, boundary_gram : ndarray
        Raw monomial Gram matrices in L2(Omega) and L2(boundary).
    coefficients : ndarray
        Column j holds the monomial coefficients of the j-th orthonormal
        polynomial.
    condition : float
        Condition number of the raw interior Gram matrix.
    """

    def __init__(self, spec, n_max=N_MAX, n_quad=1024):
        if spec.kind == "annulus":
            raise ValueError("polynomials are not dense in the Bergman space of an annulus")
        if not 0 <= n_max <= N_MAX:
            raise ValueError(f"n_max must lie in [0, {N_MAX}]")
        self.spec = spec
        self.n_max = int(n_max)
        self.center = _domain_center(spec, n_quad)
        (z, dz), = spec.boundary_nodes(n_quad)
        self.scale = float(np.max(np.abs(z - self.center)))
        zeta = (z - self.center) / self.scale
        P = zeta[None, :] ** np.arange(self.n_max + 2)[:, None]
        cP = np.conj(P)
        ds = np.abs(dz)
        nb = self.n_max + 1
        G = np.empty((nb, nb), dtype=complex)
        for p in range(nb):
            phi = self.scale * cP[p + 1] / (p + 1)
            G[p] = (P[:nb] * (phi * dz)[None, :]).sum(axis=1) / 2j
        Gb = (cP[:nb] * ds[None, :]) @ P[:nb].T
        self.interior_gram = 0.5 * (G + G.conj().T)
        self.boundary_gram = 0.5 * (Gb + Gb.conj().T)
        self.condition = float(np.linalg.cond(self.interior_gram))
        if self.condition > GRAM_COND_MAX:
            raise IllConditionedError(
                f"monomial Gram condition {self.condition:.2e} exceeds {GRAM_COND_MAX:.0e}")
        L = np.linalg.cholesky(self.interior_gram)
        self.coefficients = sla.solve_triangular(L, np.eye(nb), lower=True).conj().T

    def __len__(self):
        return self.n_max + 1

    def orthonormal_gram(self):
        C = self.coefficients
        return C.conj().T @ self.interior_gram @ C

    def evaluate(self, z):
        """Values of the orthonormal polynomials at points ``z`` (shape (len(z), n))."""
        zeta = (np.asarray(z, dtype=complex) - self.center) / self.scale
        V = zeta[:, None] ** np.arange(self.n_max + 1)[None, :]
        return V @ self.coefficients


def hardy_steklov_levels(basis, count):
    """Ascending levels S_k of oint |u|^2 / int |u|^2 over the basis span."""
    if count > len(basis) - 5:
        raise ValueError(f"count must be at most basis size - 5 = {len(basis) - 5}")
    C = basis.coefficients
    Bo = C.conj().T @ basis.boundary_gram @ C
    vals = sla.eigh(0.5 * (Bo + Bo.conj().T), eigvals_only=True)
    return np.sort(vals.real)[:count]


def _p1_blocks(forms):
    n = forms.n_p1
    return forms.K_grad[:n, :n].tocsr(), forms.M[:n, :n].tocsc()


def _elementwise_to_p1(forms, g, Mlu):
    """M-orthogonal projection of an elementwise constant field onto P1."""
    t = forms.mesh.triangles
    rhs = np.zeros(forms.n_p1, dtype=complex)
    w = forms.mesh.areas / 3.0
    for k in range(3):
        np.add.at(rhs, t[:, k], w * g)
    return Mlu.solve(rhs)


class _Factors:
    def __init__(self, forms):
        Kg, M = _p1_blocks(forms)
        inner = np.nonzero(~forms.mesh.boundary_mask)[0]
        self.inner = inner
        self.Klu = spla.splu(Kg[inner][:, inner].tocsc().astype(complex))
        self.Mlu = spla.splu(M.astype(complex))


_FACTOR_CACHE = {}


def _factors(forms):
    key = id(forms)
    hit = _FACTOR_CACHE.get(key)
    if hit is None or hit[0] is not forms:
        hit = (forms, _Factors(forms))
        _FACTOR_CACHE.clear()
        _FACTOR_CACHE[key] = hit
    return hit[1]


def bergman_project(forms, u):
    """Split a nodal P1 vector into discrete holomorphic and orthogonal parts.

    The orthogonal part is dz w, where w in H1_0 solves the discrete problem
    Laplace(w) = 4 dbar(u); dz w is elementwise constant and is brought back
    to P1 by M-orthogonal projection.

    Returns
    -------
    (Pu, P_perp_u) : nodal vectors of length ``forms.n_p1``
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (forms.n_p1,):
        raise ValueError(f"u must have length {forms.n_p1}")
    f = _factors(forms)
    d = forms.dbar_elements(u)
    t = forms.mesh.triangles
    load = np.zeros(forms.n_p1, dtype=complex)
    w3 = forms.mesh.areas / 3.0
    for k in range(3):
        np.add.at(load, t[:, k], w3 * d)
    # -int grad w . grad phi = 4 int dbar(u) phi
    w = np.zeros(forms.n_p1, dtype=complex)
    w[f.inner] = f.Klu.solve(-4 * load[f.inner])
    perp = _elementwise_to_p1(forms, forms.dz_elements(w), f.Mlu)
    return u - perp, perp


def cauchy_integral(f, xi, dxi, z):
    """(1 / 2 pi i) sum f(xi) dxi / (xi - z) for interior points ``z``.

    ``xi`` and ``dxi`` are boundary nodes and complex weights, e.g. from
    ``DomainSpec.boundary_nodes``; the trapezoid rule on a smooth closed
    curve is spectrally accurate away from the boundary.
    """
    f = np.asarray(f, dtype=complex)
    xi = np.asarray(xi, dtype=complex)
    dxi = np.asarray(dxi, dtype=complex)
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    spacing = float(np.max(np.abs(np.diff(np.append(xi, xi[0])))))
    dist = np.min(np.abs(zz[:, None] - xi[None, :]), axis=1)
    if np.any(dist < 3 * spacing):
        warnings.warn("evaluation point within 3 quadrature spacings of the boundary",
                      ProximityWarning, stacklevel=2)
    vals = ((f * dxi)[None, :] / (xi[None, :] - zz[:, None])).sum(axis=1) / (2j * math.pi)
    return vals if np.ndim(z) else complex(vals[0])


def _dbar_norm(forms, u):
    return math.sqrt(float(np.sum(forms.mesh.areas * np.abs(forms.dbar_elements(u)) ** 2)))


def _mnorm_p1(forms, u):
    M = forms.M[: forms.n_p1, : forms.n_p1]
    return math.sqrt(max(float(np.real(np.vdot(u, M @ u))), 0.0))


def sharp_constant_probe(forms, dirichlet=None):
    """Ratio ||u|| / ||dbar u|| for u = dz U_1 against the bound 2/sqrt(Lambda_1).

    U_1 is the discrete Dirichlet ground state and Lambda_1 its eigenvalue.
    Returns a dict with ``ratio``, ``bound`` and ``lambda_1``.
    """
    if dirichlet is None:
        dirichlet = solve_operator(forms, "dirichlet", 0.0, 1)
    lam = float(dirichlet.values[0])
    U = dirichlet.vectors[: forms.n_p1, 0]
    f = _factors(forms)
    u = _elementwise_to_p1(forms, forms.dz_elements(U), f.Mlu)
    ratio = _mnorm_p1(forms, u) / _dbar_norm(forms, u)
    return {"ratio": ratio, "bound": 2 / math.sqrt(lam), "lambda_1": lam}


def random_ratio_check(forms, count=20, seed=0, lambda_1=None):
    """Ratios ||u_perp|| / ||dbar u_perp|| for Bergman-projected random vectors.

    Returns ``(ratios, bound)``; vectors whose orthogonal part vanishes
    (relative M-norm below 1e-12) are reported as NaN.
    """
    if lambda_1 is None:
        lambda_1 = float(solve_operator(forms, "dirichlet", 0.0, 1).values[0])
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        u = rng.standard_normal(forms.n_p1) + 1j * rng.standard_normal(forms.n_p1)
        _, perp = bergman_project(forms, u)
        nu = _mnorm_p1(forms, u)
        npp = _mnorm_p1(forms, perp)
        if npp <= 1e-12 * nu:
            out.append(float("nan"))
            continue
        out.append(npp / _dbar_norm(forms, perp))
    return np.array(out), 2 / math.sqrt(lambda_1)


def write_steklov_csv(path, levels):
    """Steklov levels in the curve CSV layout: one row, columns S_1..S_K.

    The ``a`` column is 0 since the levels do not depend on a boundary
    parameter.
    """
    write_curve_csv(path, [0.0], np.asarray(levels)[None, :], value_name="S")
