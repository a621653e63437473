"""Discrete eigenvalue problems, eigenvalue-curve sweeps and curve checks."""
import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment

from .analytic import DiskMode, disk_branch_eigenvalue
from .fem import assemble, operator_matrix, normalize_kind
from .mesh import refine, triangulate
from .results import MULTIPLICITY_RTOL, Spectrum

__all__ = [
    "SolverConvergenceError",
    "NearDegeneracyError",
    "EigenCurve",
    "ConcavityReport",
    "FaberKrahnRow",
    "CROSSING_OVERLAP",
    "GAP_TOL",
    "solve_spectrum",
    "solve_operator",
    "sweep_curves",
    "slope_check",
    "second_differences",
    "concavity_report",
    "faber_krahn_probe",
    "robin_comparison",
    "richardson",
    "write_curve_csv",
    "write_curve_json",
    "read_curve_csv",
    "thread_count",
]

CROSSING_OVERLAP = 0.5
GAP_TOL = 1e-8
CONCAVE_TOL = 1e-10
DENSE_LIMIT = 1200


class SolverConvergenceError(RuntimeError):
    """The iterative eigensolver did not converge.

    ``residuals`` holds the relative residuals that were achieved.
    """

    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals


class NearDegeneracyError(ValueError):
    """Eigenvalue is not separated from its neighbours by ``GAP_TOL``."""


def thread_count():
    """Worker count for parallel sweeps (env ``DBAR_SPECTRA_THREADS``)."""
    env = os.environ.get("DBAR_SPECTRA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def _is_real(A):
    return not np.iscomplexobj(A.data if sps.issparse(A) else A)


def _residuals(A, M, vals, vecs):
    AX = A @ vecs
    R = AX - (M @ vecs) * vals[None, :]
    den = np.maximum(np.linalg.norm(AX, axis=0), np.finfo(float).tiny)
    return np.linalg.norm(R, axis=0) / den


def _at_rounding_floor(A, M, vals, vecs, factor=1e3):
    """True where the normwise backward error is within ``factor`` * eps.

    For near-kernel pairs at tiny boundary parameters ||Ax|| sits far below
    ||A|| ||x||, and no floating point solver can push ||Ax - mu Mx|| under
    1e-9 ||Ax||; such pairs are accepted on their backward error instead.
    """
    nA = spla.norm(A, 1) if sps.issparse(A) else np.linalg.norm(A, 1)
    nM = spla.norm(M, 1) if sps.issparse(M) else np.linalg.norm(M, 1)
    R = A @ vecs - (M @ vecs) * vals[None, :]
    scale = (nA + np.abs(vals) * nM) * np.linalg.norm(vecs, axis=0)
    return np.linalg.norm(R, axis=0) <= factor * np.finfo(float).eps * scale


def solve_spectrum(A, M, count, kind="dbar-robin", sigma=None, seed=0, tol=0.0,
                   maxiter=None, param=None, check=True):
    """The ``count`` smallest eigenpairs of ``A x = mu M x``.

    Small problems are solved densely; larger ones by shift-invert Lanczos
    (ARPACK) with a seeded start vector, followed by a Rayleigh-Ritz step on
    the computed subspace, which restores M-orthonormality and Hermitian
    symmetry of the reduced problem.

    Parameters
    ----------
    A, M : sparse or dense
        Hermitian ``A`` and Hermitian positive definite ``M``.
    count : int
    sigma : float, optional
        Shift; defaults to slightly below zero (all operators here are PSD).
    seed : int
        Seed of the start vector; equal inputs give identical results.

    Returns
    -------
    Spectrum
    """
    n = A.shape[0]
    if not 1 <= count <= n:
        raise ValueError(f"count must lie in [1, {n}]")
    real = _is_real(A) and _is_real(M)
    dtype = float if real else complex
    if n <= DENSE_LIMIT or count >= n - 1:
        Ad = A.toarray() if sps.issparse(A) else np.asarray(A)
        Md = M.toarray() if sps.issparse(M) else np.asarray(M)
        Ad = 0.5 * (Ad + Ad.conj().T)
        Md = 0.5 * (Md + Md.conj().T)
        vals, vecs = sla.eigh(Ad.astype(dtype), Md.astype(dtype),
                              subset_by_index=[0, count - 1])
    else:
        A = sps.csc_matrix(A, dtype=dtype)
        M = sps.csc_matrix(M, dtype=dtype)
        if sigma is None:
            sigma = -1e-2
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        if not real:
            v0 = v0 + 1j * rng.standard_normal(n)
        lu = spla.splu((A - sigma * M).tocsc())
        op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=dtype)
        ncv = min(n, max(2 * count + 1, count + 20))
        try:
            _, vecs = spla.eigsh(A, k=count, M=M, sigma=sigma, which="LM", v0=v0,
                                 OPinv=op, tol=tol, maxiter=maxiter, ncv=ncv)
        except spla.ArpackNoConvergence as exc:
            ev = exc.eigenvectors
            res = None
            if ev is not None and ev.shape[1]:
                lam = np.real(exc.eigenvalues)
                res = _residuals(A, M, lam, ev)
            raise SolverConvergenceError("eigensolver did not converge", res) from exc
        # Rayleigh-Ritz on the converged subspace
        Q, _ = np.linalg.qr(vecs)
        Ar = Q.conj().T @ (A @ Q)
        Mr = Q.conj().T @ (M @ Q)
        vals, y = sla.eigh(0.5 * (Ar + Ar.conj().T), 0.5 * (Mr + Mr.conj().T))
        vecs = Q @ y
    vals = np.real(vals).astype(float)
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    res = _residuals(A, M, vals, vecs)
    if check and np.any(res > 1e-9) and not np.all(
            (res <= 1e-9) | _at_rounding_floor(A, M, vals, vecs)):
        raise SolverConvergenceError(f"residual {res.max():.2e} above 1e-9", res)
    return Spectrum(kind=kind, values=vals, vectors=vecs, residuals=res, param=param)


def solve_operator(forms, kind, a=0.0, count=6, **kw):
    """Assemble the operator ``kind`` on ``forms`` and solve for ``count`` pairs.

    Eigenvectors are returned on the full DOF set (Dirichlet vectors are
    prolonged by zero).
    """
    kind = normalize_kind(kind)
    A, Me, P = operator_matrix(forms, kind, a)
    spec = solve_spectrum(A, Me, count, kind=kind, param=a, **kw)
    if kind == "dirichlet":
        spec.vectors = P @ spec.vectors
    return spec


def richardson(coarse, fine, order=2):
    """One Richardson step for values computed at mesh sizes h and h/2."""
    f = 2.0**order
    return (f * np.asarray(fine) - np.asarray(coarse)) / (f - 1)


def _cluster_slopes(forms, spec):
    """Hellmann-Feynman slopes x^H B x / x^H M x, diagonalized inside clusters."""
    X = spec.vectors
    out = np.empty(len(spec.values))
    for g in spec.clusters():
        Xg = X[:, g]
        Bg = Xg.conj().T @ (forms.B @ Xg)
        Mg = Xg.conj().T @ (forms.M @ Xg)
        if len(g) == 1:
            out[g[0]] = float(np.real(Bg[0, 0] / Mg[0, 0]))
        else:
            out[g] = np.sort(np.real(sla.eigh(0.5 * (Bg + Bg.conj().T),
                                               0.5 * (Mg + Mg.conj().T), eigvals_only=True)))
    return out


@dataclass
class EigenCurve:
    """Eigenvalue curves sampled on an ``a`` grid.

    Attributes
    ----------
    a_grid : ndarray (n,)
    values : ndarray (n, count)
        Sorted eigenvalues per grid point.
    slopes : ndarray (n, count)
        Hellmann-Feynman slopes matching ``values``.
    branch_index : ndarray (n, count) of int
        ``branch_index[i, b]`` is the sorted index carrying continuation
        branch ``b`` at grid point ``i`` (branch b starts as sorted index b).
    crossings : list of dict
        ``{"a_index", "index", "overlap"}`` for sorted indices whose
        eigenvector overlap with the previous grid point falls below 0.5.
    """

    a_grid: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    branch_index: np.ndarray
    crossings: list = field(default_factory=list)
    kind: str = "dbar-robin"
    residuals: np.ndarray = None

    @property
    def count(self):
        return self.values.shape[1]

    def branch_values(self):
        """Values along continuation branches, shape (n, count)."""
        return np.take_along_axis(self.values, self.branch_index, axis=1)

    def branch_slopes(self):
        return np.take_along_axis(self.slopes, self.branch_index, axis=1)

    def is_monotone(self, tol=1e-12):
        d = np.diff(self.values, axis=0)
        return bool(np.all(d > -tol * np.maximum(1.0, np.abs(self.values[1:]))))


def _subspace_overlap(forms, Xp, Xc, clusters_prev):
    """overlap[p, q] = squared M-norm of the projection of Xc[:, q] onto the
    cluster of Xp containing p (Xp, Xc M-orthonormal)."""
    G = np.abs(Xp.conj().T @ (forms.M @ Xc)) ** 2
    out = np.empty_like(G)
    for g in clusters_prev:
        out[g, :] = G[g, :].sum(axis=0)[None, :]
    return G, out


def sweep_curves(forms, a_grid, count, kind="dbar-robin", extra=2, seed=0, threads=None):
    """Eigenvalue curves of ``kind`` over ``a_grid`` with overlap continuation.

    Grid points are solved independently (in a thread pool whose size comes
    from ``DBAR_SPECTRA_THREADS``) and merged in grid order.
    """
    a_grid = np.asarray(a_grid, dtype=float)
    if a_grid.ndim != 1 or len(a_grid) < 1:
        raise ValueError("a_grid must be a non-empty 1-D array")
    if np.any(a_grid <= 0) or np.any(np.diff(a_grid) <= 0):
        raise ValueError("a_grid must be positive and ascending")
    kind = normalize_kind(kind)
    m = min(count + extra, forms.dof_count)

    def job(a):
        return solve_operator(forms, kind, a, m, seed=seed)

    workers = threads or thread_count()
    if workers > 1 and len(a_grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            specs = list(ex.map(job, a_grid))
    else:
        specs = [job(a) for a in a_grid]
    n = len(a_grid)
    values = np.array([s.values[:count] for s in specs])
    slopes = np.array([_cluster_slopes(forms, s)[:count] for s in specs])
    resid = np.array([s.residuals[:count] for s in specs])
    branch = np.empty((n, count), dtype=int)
    branch[0] = np.arange(count)
    crossings = []
    for i in range(1, n):
        Xp, Xc = specs[i - 1].vectors, specs[i].vectors
        G, O = _subspace_overlap(forms, Xp, Xc, specs[i - 1].clusters())
        for k in range(count):
            if O[k, k] < CROSSING_OVERLAP:
                crossings.append({"a_index": i, "a": float(a_grid[i]), "index": k + 1,
                                  "overlap": float(O[k, k])})
        rows, cols = linear_sum_assignment(-G)
        perm = np.empty(m, dtype=int)
        perm[rows] = cols
        nxt = perm[branch[i - 1]]
        # branches leaving the tracked window keep their sorted slot
        bad = nxt >= count
        nxt[bad] = branch[i - 1][bad]
        if len(set(nxt.tolist())) < count:
            nxt = np.arange(count)
        branch[i] = nxt
        specs[i - 1] = None
    return EigenCurve(a_grid=a_grid, values=values, slopes=slopes, branch_index=branch,
                      crossings=crossings, kind=kind, residuals=resid)


def slope_check(forms, a, k, kind="dbar-robin", rel_step=1e-5):
    """Hellmann-Feynman slope of mu_k at ``a`` and its central difference.

    Returns ``(hf_slope, fd_slope)``.  Raises ``NearDegeneracyError`` when
    mu_k is within ``GAP_TOL`` of a neighbour.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    m = min(k + 1, forms.dof_count)
    spec = solve_operator(forms, kind, a, m)
    vals = spec.values
    i = k - 1
    gaps = []
    if i > 0:
        gaps.append(vals[i] - vals[i - 1])
    if i + 1 < len(vals):
        gaps.append(vals[i + 1] - vals[i])
    if gaps and min(gaps) <= GAP_TOL * max(1.0, vals[i]):
        raise NearDegeneracyError(f"mu_{k}({a}) is not simple (gap {min(gaps):.1e})")
    x = spec.vectors[:, i]
    hf = float(np.real(np.vdot(x, forms.B @ x) / np.vdot(x, forms.M @ x)))
    h = rel_step * a
    up = solve_operator(forms, kind, a + h, m).values[i]
    dn = solve_operator(forms, kind, a - h, m).values[i]
    return hf, float((up - dn) / (2 * h))


def second_differences(a, f):
    """Undivided second differences on a possibly non-uniform grid.

    At interior point i the value is 2 (chord_i - f_i), where chord_i is the
    straight line through the neighbours evaluated at a_i; on a uniform grid
    this is f[i-1] - 2 f[i] + f[i+1].  Positive values mean local convexity.
    """
    a = np.asarray(a, dtype=float)
    f = np.asarray(f, dtype=float)
    w = (a[2:] - a[1:-1]) / (a[2:] - a[:-2])
    chord = w * f[:-2] + (1 - w) * f[2:]
    return 2 * (chord - f[1:-1])


@dataclass
class ConcavityReport:
    points: list
    verdict: str
    noise_floor: float
    max_second_difference: float

    @property
    def convex_points(self):
        return [a for a, d in self.points if d > 10 * self.noise_floor]


def concavity_report(curve, k, branch=False, noise_floor=None):
    """Second differences of curve ``k`` (1-based) and a concavity verdict.

    ``curve`` is an ``EigenCurve`` or any object with ``a_grid`` and a
    ``values`` array of shape (n, count).  With ``branch=True`` the
    continuation-labelled branch is used instead of the sorted index.  The
    verdict is ``"concave"`` when every second difference is at most 1e-10,
    ``"has_convex_region"`` when one exceeds ten times the noise floor, and
    ``"flat"`` otherwise.
    """
    vals = curve.branch_values() if branch else np.asarray(curve.values)
    f = vals[:, k - 1]
    a = np.asarray(curve.a_grid)
    if len(a) < 3:
        raise ValueError("need at least three grid points")
    sd = second_differences(a, f)
    if noise_floor is None:
        noise_floor = 1e-12 * max(1.0, float(np.max(np.abs(f))))
    points = list(zip(a[1:-1].tolist(), sd.tolist()))
    smax = float(sd.max())
    if smax <= CONCAVE_TOL:
        verdict = "concave"
    elif smax > 10 * noise_floor:
        verdict = "has_convex_region"
    else:
        verdict = "flat"
    return ConcavityReport(points, verdict, float(noise_floor), smax)


@dataclass
class FaberKrahnRow:
    a: float
    mu_domain: float
    mu_disk: float
    margin: float
    error: float
    inconclusive: bool


def faber_krahn_probe(spec, a_samples, h=0.1, holomorphic_degree=0):
    """Compare mu_1 on ``spec`` with mu_1 on the disk of equal area.

    mu_1 on the domain comes from two meshes (h and one refinement) and one
    Richardson step; the discretization error estimate is the size of that
    correction.  Rows whose margin does not exceed the error are flagged
    inconclusive.
    """
    if spec.kind == "disk":
        raise ValueError("the probe compares a non-disk domain with a disk")
    a_samples = np.atleast_1d(np.asarray(a_samples, dtype=float))
    if np.any(a_samples <= 0):
        raise ValueError("a samples must be positive")
    m0 = triangulate(spec, h)
    meshes = [m0, refine(m0)]
    R = math.sqrt(spec.area() / math.pi)
    mode = DiskMode(0, 0, "+", R)
    rows = []
    forms = [assemble(m, holomorphic_degree) for m in meshes]
    for a in a_samples:
        mus = [solve_operator(f, "dbar-robin", a, 1).values[0] for f in forms]
        mu = float(richardson(mus[0], mus[1]))
        err = abs(mus[1] - mu)
        mu_d = float(disk_branch_eigenvalue(mode, a))
        margin = mu - mu_d
        rows.append(FaberKrahnRow(float(a), mu, mu_d, margin, err, bool(margin <= err)))
    return rows


def robin_comparison(forms, a):
    """First eigenvalues (d-bar Robin, Robin) on the same discretization."""
    if a <= 0:
        raise ValueError("a must be positive")
    mu_d = solve_operator(forms, "dbar-robin", a, 1).values[0]
    mu_r = solve_operator(forms, "robin", a, 1).values[0]
    return float(mu_d), float(mu_r)


# ---------------------------------------------------------------- output

def _fmt(x):
    return repr(float(x))


def write_curve_csv(path, a_grid, values, slopes=None, value_name="mu", extra=None):
    """Write curves as CSV with header a,mu_1..mu_K,slope_1..slope_K.

    ``extra`` maps further column names to arrays of length len(a_grid).
    Floats are written with ``repr`` so the file reads back bit-identically.
    """
    a_grid = np.asarray(a_grid, dtype=float)
    values = np.asarray(values, dtype=float).reshape(len(a_grid), -1)
    K = values.shape[1]
    header = ["a"] + [f"{value_name}_{k}" for k in range(1, K + 1)]
    cols = [values]
    if slopes is not None:
        slopes = np.asarray(slopes, dtype=float).reshape(len(a_grid), -1)
        header += [f"slope_{k}" for k in range(1, slopes.shape[1] + 1)]
        cols.append(slopes)
    extra = extra or {}
    for name in extra:
        header.append(name)
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, a in enumerate(a_grid):
            row = [_fmt(a)]
            for c in cols:
                row += [_fmt(x) for x in c[i]]
            row += [_fmt(extra[name][i]) for name in extra]
            w.writerow(row)


def read_curve_csv(path):
    """Read a CSV written by the writers of this package into a dict of arrays."""
    with open(path, newline="", encoding="ascii") as fh:
        r = csv.reader(fh)
        header = [h.strip() for h in next(r)]
        rows = [[float(x) for x in row] for row in r if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


def write_curve_json(path, a_grid, values, slopes=None, labels=None, crossings=None,
                     convex=None, meta=None):
    """JSON variant of the curve output, with crossing and convexity notes."""
    doc = {
        "a": [float(x) for x in a_grid],
        "mu": np.asarray(values, dtype=float).T.tolist(),
    }
    if slopes is not None:
        doc["slope"] = np.asarray(slopes, dtype=float).T.tolist()
    if labels is not None:
        doc["labels"] = [list(l) if isinstance(l, tuple) else l for l in labels]
    doc["crossings"] = crossings or []
    if convex is not None:
        doc["convex_regions"] = convex
    if meta:
        doc["meta"] = meta
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
