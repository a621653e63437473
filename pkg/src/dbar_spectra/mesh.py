"""Planar domains, triangulations, refinement and boundary quadrature.

Disks, ellipses and star-shaped domains are meshed by mapping a structured
ring-and-sector mesh of the unit disk, so boundary nodes sit on the exact
curve.  Annuli get a structured ring mesh; polygons go through a Delaunay
triangulation of boundary and lattice points.

Orientation convention: triangles are counterclockwise, the outer boundary
loop is counterclockwise and inner loops are clockwise, so the domain is
always on the left of a boundary edge and the outward normal of an edge with
tangent t is (t_y, -t_x)/|t|.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

__all__ = [
    "DomainSpec",
    "Mesh",
    "MeshError",
    "triangulate",
    "refine",
    "validate_mesh",
    "boundary_quadrature",
    "read_mesh",
    "write_mesh",
    "smoothed_square",
]


class MeshError(ValueError):
    """Invalid domain description or inconsistent triangulation."""


class DomainSpec:
    """Description of a bounded planar domain.

    Use the constructors ``disk``, ``annulus``, ``ellipse``, ``polygon`` and
    ``star``.  Star domains are given by positive radii sampled at equally
    spaced angles and interpolated by a trigonometric polynomial.
    """

    KINDS = ("disk", "annulus", "ellipse", "polygon", "star")

    def __init__(self, kind, **params):
        if kind not in self.KINDS:
            raise MeshError(f"unknown domain kind {kind!r}")
        self.kind = kind
        self.params = params
        self._check()
        if kind == "star":
            r = np.asarray(params["radii"], dtype=float)
            self._coef = np.fft.rfft(r) / len(r)

    # constructors -----------------------------------------------------------
    @classmethod
    def disk(cls, R=1.0):
        return cls("disk", R=float(R))

    @classmethod
    def annulus(cls, R_in, R_out):
        return cls("annulus", R_in=float(R_in), R_out=float(R_out))

    @classmethod
    def ellipse(cls, alpha, beta):
        return cls("ellipse", alpha=float(alpha), beta=float(beta))

    @classmethod
    def polygon(cls, vertices):
        return cls("polygon", vertices=np.asarray(vertices, dtype=float))

    @classmethod
    def star(cls, radii):
        return cls("star", radii=np.asarray(radii, dtype=float))

    def _check(self):
        p = self.params
        if self.kind == "disk" and not p["R"] > 0:
            raise MeshError("disk radius must be positive")
        if self.kind == "annulus" and not (0 < p["R_in"] < p["R_out"]):
            raise MeshError("annulus requires 0 < R_in < R_out")
        if self.kind == "ellipse" and not (p["alpha"] > 0 and p["beta"] > 0):
            raise MeshError("ellipse semi-axes must be positive")
        if self.kind == "star":
            r = p["radii"]
            if r.ndim != 1 or len(r) < 8 or np.any(~(r > 0)):
                raise MeshError("star radii must be a positive table of >= 8 samples")
        if self.kind == "polygon":
            v = p["vertices"]
            if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
                raise MeshError("polygon needs at least three (x, y) vertices")
            if _signed_area(v) <= 0:
                raise MeshError("polygon vertices must be counterclockwise")
            if not _is_simple(v):
                raise MeshError("polygon must be simple")

    def __repr__(self):
        if self.kind in ("polygon", "star"):
            key = "vertices" if self.kind == "polygon" else "radii"
            return f"DomainSpec.{self.kind}(<{len(self.params[key])} samples>)"
        args = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"DomainSpec.{self.kind}({args})"

    @property
    def analytic(self):
        """True when the boundary is an exact smooth curve (not a polygon)."""
        return self.kind != "polygon"

    @property
    def n_loops(self):
        return 2 if self.kind == "annulus" else 1

    # star radius ------------------------------------------------------------
    def radius(self, phi, derivative=0):
        """Trigonometric interpolant of the star radius table (or its derivative)."""
        phi = np.asarray(phi, dtype=float)
        c = self._coef
        n = len(self.params["radii"])
        m = np.arange(len(c))
        w = np.where((m == 0) | ((n % 2 == 0) & (m == n // 2)), 1.0, 2.0)
        e = np.exp(1j * np.multiply.outer(phi, m))
        fac = (1j * m) ** derivative
        return np.real(e @ (w * fac * c))

    # geometry ---------------------------------------------------------------
    def area(self):
        p = self.params
        if self.kind == "disk":
            return math.pi * p["R"] ** 2
        if self.kind == "annulus":
            return math.pi * (p["R_out"] ** 2 - p["R_in"] ** 2)
        if self.kind == "ellipse":
            return math.pi * p["alpha"] * p["beta"]
        if self.kind == "polygon":
            return _signed_area(p["vertices"])
        # 1/2 int r^2 dphi is integrated exactly by the trapezoid rule for a
        # trigonometric polynomial of the doubled degree
        n = 4 * len(p["radii"])
        phi = 2 * math.pi * np.arange(n) / n
        return 0.5 * float(np.mean(self.radius(phi) ** 2)) * 2 * math.pi

    def boundary_nodes(self, n):
        """Trapezoid nodes on each boundary loop.

        Returns a list (one entry per loop, domain on the left) of
        ``(z, dz)`` where ``z`` are complex boundary points and ``dz`` the
        complex weights dz/dt * (2 pi / n), so that sum f(z) dz approximates
        the contour integral of f dz.  Polygons use Gauss-Legendre points per
        side instead, which integrate polynomials exactly.
        """
        p = self.params
        t = 2 * math.pi * np.arange(n) / n
        dt = 2 * math.pi / n
        e = np.exp(1j * t)
        if self.kind == "disk":
            return [(p["R"] * e, 1j * p["R"] * e * dt)]
        if self.kind == "annulus":
            outer = (p["R_out"] * e, 1j * p["R_out"] * e * dt)
            ei = np.conj(e)
            inner = (p["R_in"] * ei, -1j * p["R_in"] * ei * dt)
            return [outer, inner]
        if self.kind == "ellipse":
            z = p["alpha"] * np.cos(t) + 1j * p["beta"] * np.sin(t)
            dz = -p["alpha"] * np.sin(t) + 1j * p["beta"] * np.cos(t)
            return [(z, dz * dt)]
        if self.kind == "star":
            r = self.radius(t)
            dr = self.radius(t, 1)
            return [(r * e, (dr + 1j * r) * e * dt)]
        v = p["vertices"]
        per_side = max(2, int(math.ceil(n / len(v))))
        g, w = np.polynomial.legendre.leggauss(per_side)
        zv = v[:, 0] + 1j * v[:, 1]
        a, b = zv, np.roll(zv, -1)
        z = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * g[None, :]
        dz = (0.5 * (b - a))[:, None] * w[None, :]
        return [(z.ravel(), dz.ravel())]

    def perimeter(self, n=4096):
        return float(sum(np.sum(np.abs(dz)) for _, dz in self.boundary_nodes(n)))

    def project(self, points, loop=0):
        """Map points near the boundary onto the exact boundary curve."""
        pts = np.asarray(points, dtype=float)
        x, y = pts[:, 0], pts[:, 1]
        p = self.params
        if self.kind == "polygon":
            return pts.copy()
        if self.kind in ("disk", "annulus"):
            R = p["R"] if self.kind == "disk" else (p["R_out"] if loop == 0 else p["R_in"])
            rho = np.hypot(x, y)
            return pts * (R / rho)[:, None]
        if self.kind == "ellipse":
            th = np.arctan2(y / p["beta"], x / p["alpha"])
            return np.column_stack([p["alpha"] * np.cos(th), p["beta"] * np.sin(th)])
        th = np.arctan2(y, x)
        r = self.radius(th)
        return np.column_stack([r * np.cos(th), r * np.sin(th)])

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        p = self.params
        if self.kind == "disk":
            return np.hypot(x, y) < p["R"]
        if self.kind == "annulus":
            r = np.hypot(x, y)
            return (r > p["R_in"]) & (r < p["R_out"])
        if self.kind == "ellipse":
            return (x / p["alpha"]) ** 2 + (y / p["beta"]) ** 2 < 1
        if self.kind == "star":
            return np.hypot(x, y) < self.radius(np.arctan2(y, x))
        return _point_in_polygon(pts, p["vertices"])

    # unit-disk map used by the structured mesher
    def _map_unit_disk(self, rho, theta):
        p = self.params
        c, s = np.cos(theta), np.sin(theta)
        if self.kind == "disk":
            return np.column_stack([p["R"] * rho * c, p["R"] * rho * s])
        if self.kind == "ellipse":
            return np.column_stack([p["alpha"] * rho * c, p["beta"] * rho * s])
        r = self.radius(theta)
        return np.column_stack([r * rho * c, r * rho * s])

    def _map_stretch(self):
        """Largest local stretch of the unit-disk map (edge-length factor)."""
        p = self.params
        if self.kind == "disk":
            return p["R"]
        if self.kind == "ellipse":
            return max(p["alpha"], p["beta"])
        th = np.linspace(0, 2 * math.pi, 2048, endpoint=False)
        return float(np.max(np.hypot(self.radius(th), self.radius(th, 1))))


def smoothed_square(n=64, p=4.0, area=math.pi):
    """Star domain r(phi) = (|cos|^p + |sin|^p)^(-1/p), scaled to ``area``."""
    phi = 2 * math.pi * np.arange(n) / n
    r = (np.abs(np.cos(phi)) ** p + np.abs(np.sin(phi)) ** p) ** (-1.0 / p)
    spec = DomainSpec.star(r)
    return DomainSpec.star(r * math.sqrt(area / spec.area()))


def _signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    return (orient(p1, p2, q1) * orient(p1, p2, q2) < 0
            and orient(q1, q2, p1) * orient(q1, q2, p2) < 0)


def _is_simple(v):
    n = len(v)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                return False
    return True


def _point_in_polygon(pts, v):
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x1, y1 = v[:, 0][None, :], v[:, 1][None, :]
    x2, y2 = np.roll(v[:, 0], -1)[None, :], np.roll(v[:, 1], -1)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = ((y1 > y) != (y2 > y)) & (x < (x2 - x1) * (y - y1) / (y2 - y1) + x1)
    return np.sum(cross, axis=1) % 2 == 1


@dataclass
class Mesh:
    """Triangulation with oriented boundary loops.

    Attributes
    ----------
    nodes : ndarray (n, 2)
    triangles : ndarray (m, 3)
        Counterclockwise node indices.
    boundary_edges : ndarray (l, 2)
        Directed edges, domain on the left, grouped by loop.
    loop_ids : ndarray (l,)
        Loop index of every boundary edge (0 = outer).
    spec : DomainSpec or None
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    loop_ids: np.ndarray
    spec: DomainSpec = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.boundary_edges = np.asarray(self.boundary_edges, dtype=np.int64)
        self.loop_ids = np.asarray(self.loop_ids, dtype=np.int64)
        for arr in (self.nodes, self.triangles, self.boundary_edges, self.loop_ids):
            arr.setflags(write=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def edges(self):
        """Unique undirected edges, shape (E, 2)."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def h(self):
        """Largest edge length."""
        e = self.edges
        return float(np.max(np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]], axis=1)))

    @property
    def areas(self):
        p = self.nodes[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self):
        return float(np.sum(self.areas))

    @property
    def perimeter(self):
        b = self.boundary_edges
        return float(np.sum(np.linalg.norm(self.nodes[b[:, 1]] - self.nodes[b[:, 0]], axis=1)))

    @property
    def boundary_mask(self):
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    @property
    def complex_nodes(self):
        return self.nodes[:, 0] + 1j * self.nodes[:, 1]

    def summary(self):
        return {
            "nodes": self.n_nodes,
            "triangles": self.n_triangles,
            "boundary_edges": len(self.boundary_edges),
            "loops": int(self.loop_ids.max()) + 1 if len(self.loop_ids) else 0,
            "h": self.h,
            "area": self.area,
            "perimeter": self.perimeter,
        }


def _boundary_from_triangles(triangles):
    """Directed boundary edges (domain on the left) chained into loops."""
    t = triangles
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if np.any(counts > 2):
        raise MeshError("non-manifold edge shared by more than two triangles")
    bnd = directed[counts[inv] == 1]
    nxt = {int(a): int(b) for a, b in bnd}
    if len(nxt) != len(bnd):
        raise MeshError("boundary vertex with more than one outgoing edge")
    loops = []
    seen = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = []
        v = start
        while v not in seen:
            seen.add(v)
            loop.append((v, nxt[v]))
            v = nxt[v]
            if v not in nxt:
                raise MeshError("open boundary chain")
        loops.append(loop)
    return loops


def _finish(nodes, triangles, spec, meta=None):
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    p = nodes[triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    flip = area < 0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    loops = _boundary_from_triangles(triangles)
    # outer loop first: the one with the largest enclosed signed area
    areas = [_signed_area(nodes[[e[0] for e in lp]]) for lp in loops]
    order = np.argsort(areas)[::-1]
    edges, ids = [], []
    for new_id, i in enumerate(order):
        edges.extend(loops[i])
        ids.extend([new_id] * len(loops[i]))
    mesh = Mesh(nodes, triangles, np.array(edges).reshape(-1, 2), np.array(ids), spec,
                dict(meta or {}))
    validate_mesh(mesh)
    return mesh


def validate_mesh(mesh):
    """Check orientation, loop closure and the Euler relation.

    Raises
    ------
    MeshError
        On the first violated invariant.
    """
    areas = mesh.areas
    scale = max(mesh.h, 1e-300) ** 2
    if np.any(areas <= 1e-14 * scale):
        raise MeshError("triangle with non-positive or degenerate area")
    b = mesh.boundary_edges
    n_loops = int(mesh.loop_ids.max()) + 1 if len(b) else 0
    for lp in range(n_loops):
        e = b[mesh.loop_ids == lp]
        if not np.array_equal(np.sort(e[:, 0]), np.sort(e[:, 1])):
            raise MeshError(f"boundary loop {lp} is not closed")
        sa = _loop_area(mesh.nodes, e)
        if lp == 0 and sa <= 0:
            raise MeshError("outer boundary loop must be counterclockwise")
        if lp > 0 and sa >= 0:
            raise MeshError("inner boundary loops must be clockwise")
    V, E, F = mesh.n_nodes, len(mesh.edges), mesh.n_triangles
    if V - E + F != 2 - n_loops:
        raise MeshError(f"Euler relation violated: V-E+F={V - E + F}, loops={n_loops}")
    used = np.zeros(V, dtype=bool)
    used[mesh.triangles.ravel()] = True
    if not np.all(used):
        raise MeshError("mesh has nodes not used by any triangle")
    return True


def _loop_area(nodes, edges):
    a, b = nodes[edges[:, 0]], nodes[edges[:, 1]]
    return 0.5 * float(np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))


def _zip_rings(inner, inner_th, outer, outer_th):
    """Triangulate the band between two closed rings of node indices."""
    tris = []
    if len(inner) == 1:
        for k in range(len(outer)):
            tris.append((inner[0], outer[k], outer[(k + 1) % len(outer)]))
        return tris
    ni, no = len(inner), len(outer)
    i = o = 0
    # walk both rings once, always advancing along the side whose next
    # node comes first in angle
    while i < ni or o < no:
        ti = inner_th[i + 1] if i + 1 < ni else inner_th[0] + 2 * math.pi
        to = outer_th[o + 1] if o + 1 < no else outer_th[0] + 2 * math.pi
        if (to <= ti and o < no) or i >= ni:
            tris.append((inner[i % ni], outer[o % no], outer[(o + 1) % no]))
            o += 1
        else:
            tris.append((inner[i % ni], outer[o % no], inner[(i + 1) % ni]))
            i += 1
    return tris


def _structured_disk(n_rings):
    """Unit-disk rings: ring i has 6i nodes; returns (rho, theta, triangles)."""
    rho = [0.0]
    theta = [0.0]
    rings = [np.array([0])]
    ring_th = [np.array([0.0])]
    idx = 1
    for i in range(1, n_rings + 1):
        m = 6 * i
        th = 2 * math.pi * np.arange(m) / m + (math.pi / m if i % 2 else 0.0)
        rho.extend([i / n_rings] * m)
        theta.extend(th.tolist())
        rings.append(np.arange(idx, idx + m))
        ring_th.append(th)
        idx += m
    tris = []
    for i in range(1, n_rings + 1):
        tris += _zip_rings(rings[i - 1], ring_th[i - 1], rings[i], ring_th[i])
    return np.array(rho), np.array(theta), np.array(tris)


def _mapped_disk_mesh(spec, h_target):
    stretch = spec._map_stretch()
    n_rings = max(2, int(math.ceil(1.2 * stretch / h_target)))
    while True:
        rho, th, tris = _structured_disk(n_rings)
        nodes = spec._map_unit_disk(rho, th)
        mesh = _finish(nodes, tris, spec, {"n_rings": n_rings, "h_target": h_target})
        if mesh.h <= 1.5 * h_target:
            return mesh
        n_rings = int(math.ceil(n_rings * mesh.h / (1.4 * h_target)))


def _annulus_mesh(spec, h_target):
    ri, ro = spec.params["R_in"], spec.params["R_out"]
    n_rad = max(2, int(math.ceil(1.2 * (ro - ri) / h_target)))
    n_sec = max(8, int(math.ceil(1.2 * 2 * math.pi * ro / h_target)))
    radii = np.linspace(ri, ro, n_rad + 1)
    nodes, rings, ring_th = [], [], []
    idx = 0
    for k, r in enumerate(radii):
        th = 2 * math.pi * np.arange(n_sec) / n_sec + (math.pi / n_sec if k % 2 else 0.0)
        nodes.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
        rings.append(np.arange(idx, idx + n_sec))
        ring_th.append(th)
        idx += n_sec
    tris = []
    for k in range(n_rad):
        tris += _zip_rings(rings[k], ring_th[k], rings[k + 1], ring_th[k + 1])
    return _finish(np.vstack(nodes), np.array(tris), spec,
                   {"n_rad": n_rad, "n_sec": n_sec, "h_target": h_target})


def _polygon_mesh(spec, h_target):
    spacing = 0.9 * h_target
    for _ in range(8):
        mesh = _polygon_mesh_once(spec, spacing)
        if mesh.h <= 1.5 * h_target:
            mesh.meta["h_target"] = h_target
            return mesh
        spacing *= 0.9
    raise MeshError("could not reach the requested mesh size")


def _polygon_mesh_once(spec, h_target):
    v = spec.params["vertices"]
    bpts = []
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / h_target)))
        t = np.arange(n) / n
        bpts.append(a[None, :] + t[:, None] * (b - a)[None, :])
    bpts = np.vstack(bpts)
    lo, hi = v.min(axis=0), v.max(axis=0)
    dy = h_target * math.sqrt(3) / 2
    ys = np.arange(lo[1], hi[1] + dy, dy)
    pts = []
    for k, y in enumerate(ys):
        xs = np.arange(lo[0], hi[0] + h_target, h_target) + (0.5 * h_target if k % 2 else 0.0)
        pts.append(np.column_stack([xs, np.full_like(xs, y)]))
    pts = np.vstack(pts)
    pts = pts[_point_in_polygon(pts, v)]
    # keep lattice points away from the boundary to avoid slivers
    d = np.min(np.linalg.norm(pts[:, None, :] - bpts[None, :, :], axis=2), axis=1)
    pts = pts[d > 0.55 * h_target]
    nodes = np.vstack([bpts, pts])
    tri = Delaunay(nodes).simplices
    cent = nodes[tri].mean(axis=1)
    tri = tri[_point_in_polygon(cent, v)]
    used = np.unique(tri)
    remap = -np.ones(len(nodes), dtype=np.int64)
    remap[used] = np.arange(len(used))
    mesh = _finish(nodes[used], remap[tri], spec, {"h_target": h_target})
    if len(mesh.boundary_edges) != len(bpts):
        raise MeshError("Delaunay triangulation did not recover the polygon boundary")
    return mesh


def triangulate(spec, h_target):
    """Triangulate ``spec`` with maximal edge length close to ``h_target``.

    The realized ``mesh.h`` is at most 1.5 * h_target.
    """
    if not h_target > 0:
        raise MeshError("h_target must be positive")
    if spec.kind in ("disk", "ellipse", "star"):
        return _mapped_disk_mesh(spec, h_target)
    if spec.kind == "annulus":
        return _annulus_mesh(spec, h_target)
    return _polygon_mesh(spec, h_target)


def refine(mesh):
    """Uniform midpoint refinement (each triangle split in four).

    New boundary midpoints are projected onto the exact boundary curve when
    the domain is analytic.
    """
    t = mesh.triangles
    n = mesh.n_nodes
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    m = len(t)
    m01, m12, m20 = (n + inv[:m], n + inv[m:2 * m], n + inv[2 * m:])
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    tris = np.concatenate([
        np.column_stack([a, m01, m20]),
        np.column_stack([m01, b, m12]),
        np.column_stack([m20, m12, c]),
        np.column_stack([m01, m12, m20]),
    ])
    nodes = np.vstack([mesh.nodes, mids])
    if mesh.spec is not None and mesh.spec.analytic:
        bkey = np.sort(mesh.boundary_edges, axis=1)
        pos = {tuple(k): i for i, k in enumerate(uniq)}
        for lp in np.unique(mesh.loop_ids):
            ids = np.array([pos[tuple(k)] for k in bkey[mesh.loop_ids == lp]])
            nodes[n + ids] = mesh.spec.project(nodes[n + ids], loop=int(lp))
    meta = dict(mesh.meta)
    meta["refinements"] = meta.get("refinements", 0) + 1
    return _finish(nodes, tris, mesh.spec, meta)


def boundary_quadrature(mesh, order=2):
    """Quadrature points, weights and outward normals on the boundary edges.

    ``order=1`` uses the edge midpoint (exact for linear functions) and
    ``order=2`` the two-point Gauss rule (exact up to cubics).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    b = mesh.boundary_edges
    p0, p1 = mesh.nodes[b[:, 0]], mesh.nodes[b[:, 1]]
    d = p1 - p0
    length = np.linalg.norm(d, axis=1)
    normal = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    if order == 1:
        ts, ws = np.array([0.5]), np.array([1.0])
    else:
        g = 0.5 / math.sqrt(3)
        ts, ws = np.array([0.5 - g, 0.5 + g]), np.array([0.5, 0.5])
    pts = (p0[:, None, :] + ts[None, :, None] * d[:, None, :]).reshape(-1, 2)
    wts = (length[:, None] * ws[None, :]).ravel()
    nrm = np.repeat(normal, len(ts), axis=0)
    return pts, wts, nrm


def write_mesh(mesh, path):
    """Write the plain-text mesh format (NODES / TRIANGLES / BOUNDARY)."""
    lines = [f"NODES {mesh.n_nodes}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    lines.append(f"TRIANGLES {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"BOUNDARY {len(mesh.boundary_edges)}")
    lines += [f"{lp} {i} {j}" for lp, (i, j) in zip(mesh.loop_ids.tolist(),
                                                    mesh.boundary_edges.tolist())]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path, spec=None):
    """Read a mesh written by ``write_mesh``; the result is validated."""
    with open(path, encoding="ascii") as fh:
        tokens = [ln.split() for ln in fh if ln.strip()]
    pos = 0

    def section(name, width, cast):
        nonlocal pos
        head = tokens[pos]
        if len(head) != 2 or head[0] != name:
            raise MeshError(f"expected section {name}, got {' '.join(head)!r}")
        count = int(head[1])
        rows = tokens[pos + 1: pos + 1 + count]
        if len(rows) != count or any(len(r) != width for r in rows):
            raise MeshError(f"malformed {name} section")
        pos += 1 + count
        return np.array([[cast(v) for v in r] for r in rows]).reshape(count, width)

    nodes = section("NODES", 2, float)
    tris = section("TRIANGLES", 3, int)
    bnd = section("BOUNDARY", 3, int)
    mesh = Mesh(nodes, tris, bnd[:, 1:], bnd[:, 0], spec)
    validate_mesh(mesh)
    return mesh
