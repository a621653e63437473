"""Galerkin matrices of the d-bar Robin form and its comparison operators.

The discrete space is conforming P1 on a triangulation, optionally enriched
by the holomorphic monomials zeta^2, ..., zeta^N with zeta = (z - c)/rho.
Quadratic forms are read as v^H A v, so

    K[i, j]      = 4 int conj(dbar phi_i) dbar phi_j
    K_z[i, j]    = 4 int conj(dz phi_i) dz phi_j
    K_grad[i, j] = int grad phi_i . grad phi_j
    M[i, j]      = int conj(phi_i) phi_j
    B[i, j]      = int_boundary conj(phi_i) phi_j

and K + K_z = 2 K_grad.

Plain P1 has only span{1, z} as discretely holomorphic functions, so the
Bergman-space part of the spectrum (eigenvalues of order a) is invisible on
it; the enrichment adds exactly holomorphic functions and keeps the space
conforming.  Enrichment integrals are computed exactly: interior products with
hat functions by collapsed Gauss rules on each triangle, products of two
monomials through the boundary identity int_Omega F dA = (1/2i) oint Phi dz
with dbar Phi = F.
"""
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

__all__ = [
    "AssembledForms",
    "AssemblyError",
    "assemble",
    "operator_matrix",
    "normalize_kind",
    "export_coordinate",
    "read_coordinate",
    "triangle_rule",
]


class AssemblyError(ValueError):
    """Raised for degenerate triangles or inconsistent inputs."""


_KIND_ALIASES = {
    "dbar_robin": "dbar-robin", "dbar-robin": "dbar-robin",
    "robin": "robin",
    "dbar_neumann": "dbar-neumann", "dbar-neumann": "dbar-neumann",
    "dirichlet": "dirichlet",
}


def normalize_kind(kind):
    try:
        return _KIND_ALIASES[kind]
    except KeyError:
        raise ValueError(f"unknown operator kind {kind!r}") from None


@dataclass
class AssembledForms:
    """Sparse matrices of one discretization plus element data.

    Attributes
    ----------
    K, K_z, K_grad, B, M : sparse matrices over all DOFs
    mesh : Mesh
    n_p1 : int
        Number of nodal (P1) DOFs; enrichment DOFs follow them.
    boundary_dof : ndarray of bool
        True for DOFs that do not vanish on the boundary (boundary nodes and
        every enrichment function).
    dbar_coef, dz_coef : ndarray (m, 3) complex
        Elementwise dbar / dz of the three hat functions of each triangle.
    enrichment : dict
        ``degree``, ``center`` and ``scale`` of the holomorphic enrichment.
    """

    K: sps.csr_matrix
    K_z: sps.csr_matrix
    K_grad: sps.csr_matrix
    B: sps.csr_matrix
    M: sps.csr_matrix
    mesh: object
    n_p1: int
    boundary_dof: np.ndarray
    dbar_coef: np.ndarray
    dz_coef: np.ndarray
    enrichment: dict = field(default_factory=dict)

    @property
    def dof_count(self):
        return self.M.shape[0]

    @property
    def interior_dofs(self):
        return np.nonzero(~self.boundary_dof)[0]

    def nodal(self, values):
        """Embed nodal values (length n_p1) into the full DOF vector."""
        v = np.zeros(self.dof_count, dtype=complex)
        v[: self.n_p1] = values
        return v

    def dbar_elements(self, v):
        """Elementwise constant dbar of the P1 part of ``v`` (shape (m,))."""
        t = self.mesh.triangles
        return np.sum(self.dbar_coef * np.asarray(v)[: self.n_p1][t], axis=1)

    def dz_elements(self, v):
        """Elementwise constant dz of the P1 part of ``v`` (shape (m,))."""
        t = self.mesh.triangles
        return np.sum(self.dz_coef * np.asarray(v)[: self.n_p1][t], axis=1)

    def dbar_energy(self, v):
        """4 ||dbar v||^2 summed triangle by triangle.

        Equals v^H K v but avoids the cancellation of the global quadratic
        form, so exactly holomorphic vectors give values at roundoff level.
        """
        return float(4 * np.sum(self.mesh.areas * np.abs(self.dbar_elements(v)) ** 2))

    def mnorm(self, v):
        v = np.asarray(v)
        return math.sqrt(max(float(np.real(np.vdot(v, self.M @ v))), 0.0))


def triangle_rule(q):
    """Collapsed Gauss rule on a triangle.

    Returns barycentric points (q*q, 3) and weights summing to 1, exact for
    polynomials of total degree <= 2q - 2.
    """
    g, w = np.polynomial.legendre.leggauss(q)
    u = 0.5 * (g + 1)
    wu = 0.5 * w
    # Duffy: (s, t) = (u, v (1 - u)), Jacobian (1 - u)
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu) * (1 - uu)
    s, t = uu.ravel(), (vv * (1 - uu)).ravel()
    bary = np.column_stack([1 - s - t, s, t])
    return bary, 2.0 * ww.ravel()


def _p1_element_data(mesh):
    p = mesh.nodes[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
                  - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    if np.any(area <= 1e-14 * mesh.h**2):
        raise AssemblyError("singular triangle (area below 1e-14 of the mesh scale)")
    # gradient of the hat at vertex k: rotated opposite edge over 2 * area
    gx = np.column_stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]]) / (2 * area[:, None])
    gy = np.column_stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]]) / (2 * area[:, None])
    return area, gx, gy


def _scatter(tri, vals, n):
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return sps.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _edge_mass(mesh, n):
    b = mesh.boundary_edges
    length = np.linalg.norm(mesh.nodes[b[:, 1]] - mesh.nodes[b[:, 0]], axis=1)
    loc = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    vals = length[:, None, None] * loc[None]
    rows = np.repeat(b, 2, axis=1).ravel()
    cols = np.tile(b, (1, 2)).ravel()
    return sps.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _hermitize(A):
    return ((A + A.getH()) * 0.5).tocsr()


def assemble(mesh, holomorphic_degree=0, center=None, scale=None):
    """Assemble K, K_z, K_grad, B and M on ``mesh``.

    Parameters
    ----------
    mesh : Mesh
    holomorphic_degree : int
        Highest monomial degree N of the enrichment; 0 or 1 means plain P1
        (1 and zeta are already in P1).
    center, scale : optional
        Center c (complex) and scale rho of zeta = (z - c)/rho.  Defaults: the
        area centroid of the mesh and the largest |z - c| over the nodes.
    """
    n = mesh.n_nodes
    tri = mesh.triangles
    area, gx, gy = _p1_element_data(mesh)
    db = 0.5 * (gx + 1j * gy)
    dz = 0.5 * (gx - 1j * gy)
    a3 = area[:, None, None]
    K = _scatter(tri, 4 * a3 * db.conj()[:, :, None] * db[:, None, :], n)
    Kz = _scatter(tri, 4 * a3 * dz.conj()[:, :, None] * dz[:, None, :], n)
    Kg = _scatter(tri, a3 * (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :]), n)
    Me = a3 * (np.ones((3, 3)) + np.eye(3))[None] / 12.0
    M = _scatter(tri, Me, n)
    B = _edge_mass(mesh, n)
    bmask = mesh.boundary_mask.copy()
    enrich = {"degree": 0, "center": None, "scale": None}
    N = int(holomorphic_degree)
    if N >= 2:
        zc = mesh.complex_nodes
        if center is None:
            cent = mesh.nodes[tri].mean(axis=1)
            center = complex(np.sum(area * (cent[:, 0] + 1j * cent[:, 1])) / np.sum(area))
        if scale is None:
            scale = float(np.max(np.abs(zc - center)))
        blocks = _enrichment_blocks(mesh, area, dz, N, complex(center), float(scale))
        K = sps.bmat([[K, None], [None, sps.csr_matrix((N - 1, N - 1))]], format="csr")
        Kz = sps.bmat([[Kz, blocks["Kz_pe"]], [blocks["Kz_pe"].conj().T, blocks["Kz_ee"]]],
                      format="csr")
        M = sps.bmat([[M, blocks["M_pe"]], [blocks["M_pe"].conj().T, blocks["M_ee"]]],
                     format="csr")
        B = sps.bmat([[B, blocks["B_pe"]], [blocks["B_pe"].conj().T, blocks["B_ee"]]],
                     format="csr")
        # Wirtinger identity |grad u|^2 = 2|dz u|^2 + 2|dbar u|^2 on the new blocks
        Kg_pe = 0.5 * blocks["Kz_pe"]
        Kg = sps.bmat([[Kg, Kg_pe], [Kg_pe.conj().T, 0.5 * blocks["Kz_ee"]]], format="csr")
        bmask = np.concatenate([bmask, np.ones(N - 1, dtype=bool)])
        enrich = {"degree": N, "center": complex(center), "scale": float(scale)}
    forms = AssembledForms(
        K=_hermitize(K.astype(complex)),
        K_z=_hermitize(Kz.astype(complex)),
        K_grad=_hermitize(Kg) if N < 2 else _hermitize(Kg.astype(complex)),
        B=_hermitize(B),
        M=_hermitize(M),
        mesh=mesh,
        n_p1=n,
        boundary_dof=bmask,
        dbar_coef=db,
        dz_coef=dz,
        enrichment=enrich,
    )
    return forms


def _monomial_gram(mesh, N, c, rho):
    """G[p, q] = int_Omega conj(zeta^p) zeta^q dA for p, q = 0..N.

    Uses int_Omega F dA = (1/2i) oint Phi dz with
    Phi = rho conj(zeta)^{p+1} zeta^q / (p+1) on the polygonal mesh boundary
    (Gauss-Legendre per edge, exact for these polynomials), and the same
    edge rule for the boundary Gram Gb[p, q] = oint conj(zeta^p) zeta^q ds.
    """
    b = mesh.boundary_edges
    z0 = mesh.complex_nodes[b[:, 0]]
    z1 = mesh.complex_nodes[b[:, 1]]
    g, w = np.polynomial.legendre.leggauss(N + 2)
    t = 0.5 * (g + 1)
    zq = z0[:, None] + (z1 - z0)[:, None] * t[None, :]
    dzq = (z1 - z0)[:, None] * (0.5 * w)[None, :]
    dsq = np.abs(z1 - z0)[:, None] * (0.5 * w)[None, :]
    zeta = ((zq - c) / rho).ravel()
    dzq, dsq = dzq.ravel(), dsq.ravel()
    pw = zeta[None, :] ** np.arange(N + 2)[:, None]
    cpw = np.conj(pw)
    G = np.empty((N + 1, N + 1), dtype=complex)
    Gb = np.empty((N + 1, N + 1), dtype=complex)
    for p in range(N + 1):
        phi = rho * cpw[p + 1] / (p + 1)
        G[p] = (pw[: N + 1] * (phi * dzq)[None, :]).sum(axis=1) / 2j
        Gb[p] = (pw[: N + 1] * (cpw[p] * dsq)[None, :]).sum(axis=1)
    return 0.5 * (G + G.conj().T), 0.5 * (Gb + Gb.conj().T)


def _enrichment_blocks(mesh, area, dz, N, c, rho):
    n = mesh.n_nodes
    tri = mesh.triangles
    powers = np.arange(2, N + 1)
    # interior products with hats: degree <= N + 1 on each triangle
    q = (N + 4) // 2 + 1
    bary, wts = triangle_rule(q)
    M_pe = np.zeros((n, N - 1), dtype=complex)
    Kz_pe = np.zeros((n, N - 1), dtype=complex)
    zc = mesh.complex_nodes
    chunk = max(1, 200000 // len(wts))
    for s in range(0, len(tri), chunk):
        t = tri[s: s + chunk]
        ar = area[s: s + chunk]
        zq = (zc[t][:, None, :] * bary[None, :, :]).sum(axis=2)
        zeta = (zq - c) / rho
        zp = zeta[:, :, None] ** np.arange(N + 1)[None, None, :]
        # int_T phi_k zeta^n = area * sum_q w_q bary_k zeta_q^n
        mloc = ar[:, None, None] * np.einsum("q,qk,tqn->tkn", wts, bary, zp[:, :, powers])
        # int_T zeta^{n-1} for the dz coupling, dz zeta^n = n zeta^{n-1} / rho
        low = ar[:, None] * np.einsum("q,tqn->tn", wts, zp[:, :, powers - 1])
        kz = 4 * dz[s: s + chunk].conj()[:, :, None] * (low * powers / rho)[:, None, :]
        for k in range(3):
            np.add.at(M_pe, t[:, k], mloc[:, k, :])
            np.add.at(Kz_pe, t[:, k], kz[:, k, :])
    G, Gb = _monomial_gram(mesh, N, c, rho)
    M_ee = G[2:, 2:]
    Kz_ee = 4 * np.outer(powers, powers) * G[1:N, 1:N] / rho**2
    # boundary coupling: hats are linear along edges, Gauss rule exact
    b = mesh.boundary_edges
    z0, z1 = zc[b[:, 0]], zc[b[:, 1]]
    L = np.abs(z1 - z0)
    g, w = np.polynomial.legendre.leggauss((N + 3) // 2 + 1)
    tt = 0.5 * (g + 1)
    zq = z0[:, None] + (z1 - z0)[:, None] * tt[None, :]
    zp = ((zq - c) / rho)[:, :, None] ** powers[None, None, :]
    wq = (0.5 * w)[None, :, None] * L[:, None, None]
    B_pe = np.zeros((n, N - 1), dtype=complex)
    np.add.at(B_pe, b[:, 0], np.sum(wq * (1 - tt)[None, :, None] * zp, axis=1))
    np.add.at(B_pe, b[:, 1], np.sum(wq * tt[None, :, None] * zp, axis=1))
    B_ee = Gb[2:, 2:]
    return {
        "M_pe": sps.csr_matrix(M_pe), "M_ee": sps.csr_matrix(M_ee),
        "B_pe": sps.csr_matrix(B_pe), "B_ee": sps.csr_matrix(B_ee),
        "Kz_pe": sps.csr_matrix(Kz_pe), "Kz_ee": sps.csr_matrix(Kz_ee),
    }


def operator_matrix(forms, kind, a=0.0):
    """Matrices (A, M_eff, P) of one operator on the assembled space.

    ``P`` maps the operator's DOFs to the full DOF set: the identity except
    for the Dirichlet Laplacian, which lives on interior DOFs and is
    prolonged by zero.
    """
    kind = normalize_kind(kind)
    n = forms.dof_count
    if kind in ("dbar-robin", "robin") and a < 0:
        raise ValueError("a must be non-negative")
    if kind == "dbar-robin":
        A = forms.K + a * forms.B if a != 0 else forms.K.copy()
        return A.tocsr(), forms.M, sps.identity(n, format="csr")
    if kind == "robin":
        return (forms.K_grad + a * forms.B).tocsr(), forms.M, sps.identity(n, format="csr")
    if kind == "dbar-neumann":
        return forms.K.copy(), forms.M, sps.identity(n, format="csr")
    inner = forms.interior_dofs
    P = sps.csr_matrix((np.ones(len(inner)), (inner, np.arange(len(inner)))),
                       shape=(n, len(inner)))
    A = forms.K_grad[inner][:, inner]
    Mi = forms.M[inner][:, inner]
    return A.tocsr(), Mi.tocsr(), P


def export_coordinate(matrix, path):
    """Write a sparse matrix as lines 'row col re im' (0-based)."""
    C = sps.coo_matrix(matrix)
    C.sum_duplicates()
    vals = C.data.astype(complex)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"% {C.shape[0]} {C.shape[1]} {C.nnz}\n")
        for r, c, v in zip(C.row.tolist(), C.col.tolist(), vals.tolist()):
            fh.write(f"{r} {c} {v.real!r} {v.imag!r}\n")


def read_coordinate(path):
    """Read a matrix written by ``export_coordinate``."""
    with open(path, encoding="ascii") as fh:
        head = fh.readline().split()
        shape = (int(head[1]), int(head[2]))
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sps.csr_matrix(shape, dtype=complex)
    return sps.coo_matrix((data[:, 2] + 1j * data[:, 3],
                           (data[:, 0].astype(int), data[:, 1].astype(int))),
                          shape=shape).tocsr()
