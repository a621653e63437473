"""Exact eigenvalue branches on disks and annuli.

On the disk D_R the separated eigenfunctions are J_j(sqrt(mu) r) e^{+-ij phi}
and the boundary condition reduces to

    sign +:  a        = sqrt(mu) J_{j+1}(sqrt(mu) R) / J_j(sqrt(mu) R)
    sign -:  a + 2j/R = sqrt(mu) J_{j+1}(sqrt(mu) R) / J_j(sqrt(mu) R)

Roots are computed in the variable x = sqrt(mu) R.  The map
x -> x J_{j+1}(x)/J_j(x) is increasing on (0, z_{j,1}) and on each
(z_{j+1,k}, z_{j,k+1}), and sweeps (0, inf) there, so each (j, k, sign)
branch has exactly one root in a known bracket.

On an annulus both J_j and Y_j columns are kept and the eigenvalues are the
zeros of a 2x2 determinant; see ``annulus_matrix`` and the derivation in the
README.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .results import Spectrum
from .special import bessel_j_orders, bessel_y_orders, bessel_zeros

__all__ = [
    "DiskMode",
    "AnnulusSpec",
    "ScanResolutionWarning",
    "BracketError",
    "TruncationError",
    "disk_branch_bracket",
    "disk_branch_eigenvalue",
    "disk_branch_limits",
    "disk_residual",
    "disk_ordered_spectrum",
    "disk_eigenfunction",
    "disk_boundary_interior_ratio",
    "disk_lowest_modes",
    "disk_branch_curves",
    "annulus_matrix",
    "annulus_determinant",
    "annulus_dirichlet_cross",
    "annulus_branch_eigenvalues",
    "annulus_boundary_interior_ratio",
    "annulus_branch_curves",
    "disk_negative_a_scan",
]


class ScanResolutionWarning(RuntimeWarning):
    """A sign-change scan may have merged two roots in one grid cell."""


class BracketError(RuntimeError):
    """The residual did not change sign over a theoretical bracket."""


class TruncationError(RuntimeError):
    """Angular truncation j_max too small for the requested eigenvalues."""


def _sign_value(sign):
    if sign in ("+", 1, +1):
        return 1
    if sign in ("-", -1):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


@dataclass(frozen=True)
class DiskMode:
    """Label (j, k, sign) of one disk eigenvalue branch on D_R.

    ``sign`` is ``'+'`` or ``'-'``; for ``j = 0`` both signs give the same
    branch.
    """

    j: int
    k: int
    sign: str = "+"
    R: float = 1.0

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 0:
            raise ValueError("j must be a non-negative integer")
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("k must be a non-negative integer")
        object.__setattr__(self, "sign", "+" if _sign_value(self.sign) > 0 else "-")
        if not self.R > 0:
            raise ValueError("R must be positive")

    @property
    def shift(self):
        """Extra term 2j/R on the left-hand side of the eigen-equation."""
        return 2.0 * self.j / self.R if self.sign == "-" else 0.0

    def label(self):
        return f"j={self.j},k={self.k},{self.sign}"


@dataclass(frozen=True)
class AnnulusSpec:
    """Annulus R_in < |x| < R_out."""

    R_in: float
    R_out: float

    def __post_init__(self):
        if not (0 < self.R_in < self.R_out):
            raise ValueError("annulus requires 0 < R_in < R_out")


def disk_branch_bracket(mode):
    """Bracket (x_lo, x_hi) in x = sqrt(mu) R containing the branch root."""
    j, k = mode.j, mode.k
    if k == 0:
        return 0.0, float(bessel_zeros(j, 1)[0])
    return float(bessel_zeros(j + 1, k)[k - 1]), float(bessel_zeros(j, k + 1)[k])


def _ratio_lhs(j, x):
    """x J_{j+1}(x) / J_j(x), together with J_j and J_{j+1}."""
    js = bessel_j_orders(j + 1, x)
    return x * js[j + 1] / js[j], js[j], js[j + 1]


def _solve_branch_x(mode, a):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if np.any(~(a > 0)):
        raise ValueError("a must be positive")
    j = mode.j
    c = (a + mode.shift) * mode.R
    x_lo, x_hi = disk_branch_bracket(mode)
    lo = np.full_like(a, x_lo)
    hi = np.full_like(a, x_hi)
    x = 0.5 * (lo + hi)
    done = np.zeros(a.shape, dtype=bool)
    # Newton on f(x) = x J_{j+1} - c J_j, safeguarded by the bracket of the
    # increasing function x J_{j+1}/J_j - c; steps leaving it are bisections
    for _ in range(200):
        js = bessel_j_orders(j + 1, x)
        f = x * js[j + 1] - c * js[j]
        below = f * np.sign(js[j]) < 0
        lo = np.where(below & ~done, x, lo)
        hi = np.where(~below & ~done, x, hi)
        df = x * js[j] - j * js[j + 1] + c * js[j + 1] - (c * j / x) * js[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / df
        # a step at rounding level means x is already the root
        conv = (np.abs(step) <= 4e-15 * x) | (f == 0)
        xn = x - step
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        conv |= hi - lo <= 2e-15 * hi
        x = np.where(done | conv, x, xn)
        done |= conv
        if np.all(done):
            break
    if np.any(x <= x_lo) or np.any(x >= x_hi):
        raise BracketError(f"root escaped bracket for {mode.label()}")
    return x


def disk_branch_eigenvalue(mode, a):
    """Eigenvalue mu_k^{j,sign}(a) on D_R for a > 0 (scalar or array a)."""
    scalar = np.ndim(a) == 0
    x = _solve_branch_x(mode, a)
    mu = (x / mode.R) ** 2
    return float(mu[0]) if scalar else mu


def disk_branch_limits(mode):
    """Limits of the branch as a -> 0+ and a -> +inf.

    Returns
    -------
    (float, float)
        ``(mu(0+), mu(inf))``.  As a -> inf the root tends to the bracket top
        z_{j,k+1}.  As a -> 0+ the sign '+' equation becomes J_{j+1}(x) = 0
        (root 0 for k = 0, z_{j+1,k} otherwise), while for sign '-' with
        j >= 1 the identity x J_{j+1} = 2j J_j - x J_{j-1} turns it into
        J_{j-1}(x) = 0, with root z_{j-1,k+1}.
    """
    j, k, R = mode.j, mode.k, mode.R
    top = (bessel_zeros(j, k + 1)[k] / R) ** 2
    if mode.sign == "-" and j >= 1:
        bottom = (bessel_zeros(j - 1, k + 1)[k] / R) ** 2
    elif k == 0:
        bottom = 0.0
    else:
        bottom = (bessel_zeros(j + 1, k)[k - 1] / R) ** 2
    return float(bottom), float(top)


def disk_residual(mode, a, mu):
    """sqrt(mu) J_{j+1}(sqrt(mu) R) - (a + shift) J_j(sqrt(mu) R)."""
    s = np.sqrt(np.asarray(mu, dtype=float))
    js = bessel_j_orders(mode.j + 1, s * mode.R)
    return s * js[mode.j + 1] - (a + mode.shift) * js[mode.j]


def _modes_upto(R, j_max, k_max):
    modes = []
    for j in range(j_max + 1):
        for k in range(k_max + 1):
            modes.append(DiskMode(j, k, "+", R))
            if j > 0:
                modes.append(DiskMode(j, k, "-", R))
    return modes


def disk_ordered_spectrum(R, a, count, j_max=None):
    """Lowest ``count`` eigenvalues of the disk operator, merged over branches.

    Parameters
    ----------
    R : float
        Disk radius.
    a : float
        Boundary parameter, ``a > 0``.
    count : int
        Number of eigenvalues.
    j_max : int, optional
        Angular truncation; chosen automatically when omitted.

    Raises
    ------
    TruncationError
        If some branch with j > j_max could lie below the returned maximum.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    auto = j_max is None
    j_max = count if auto else int(j_max)
    while True:
        k_max = count
        modes = _modes_upto(R, j_max, k_max)
        vals = np.array([disk_branch_eigenvalue(m, a) for m in modes])
        order = np.argsort(vals, kind="stable")[:count]
        top = vals[order[-1]]
        # k=0 branch values increase with j, so the first excluded j bounds them
        excluded = min(
            disk_branch_eigenvalue(DiskMode(j_max + 1, 0, "+", R), a),
            (bessel_zeros(j_max + 2, 1)[0] / R) ** 2,
        )
        if excluded > top:
            break
        if not auto:
            raise TruncationError(
                f"j_max={j_max} too small: excluded branch {excluded:.6g} <= {top:.6g}")
        j_max *= 2
    return Spectrum("dbar-robin", vals[order], labels=[modes[i] for i in order],
                    param=float(a), meta={"R": R, "j_max": j_max})


def disk_eigenfunction(mode, a, r, phi):
    """J_j(sqrt(mu) r) exp(+-i j phi) with mu the branch eigenvalue."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > mode.R * (1 + 1e-12)):
        raise ValueError("r must lie in [0, R]")
    mu = disk_branch_eigenvalue(mode, a)
    s = 1 if mode.sign == "+" else -1
    radial = bessel_j_orders(mode.j, np.sqrt(mu) * r)[mode.j]
    return radial * np.exp(1j * s * mode.j * np.asarray(phi, dtype=float))


def disk_boundary_interior_ratio(mode, a):
    """Boundary-to-interior L2 ratio of the eigenfunction, i.e. d mu / d a.

    The radial integral is computed by adaptive quadrature.
    """
    mu = disk_branch_eigenvalue(mode, a)
    s, R, j = math.sqrt(mu), mode.R, mode.j
    edge = bessel_j_orders(j, s * R)[j] ** 2

    def integrand(r):
        return bessel_j_orders(j, s * r)[j] ** 2 * r

    interior, _ = integrate.quad(integrand, 0.0, R, epsabs=0.0, epsrel=1e-12, limit=200)
    return R * edge / interior


def disk_lowest_modes(R, count):
    """The ``count`` branches with the smallest a -> inf limits.

    j = 0 is counted once; for j >= 1 both signs share a limit and the '+'
    branch is listed first.
    """
    modes = _modes_upto(R, count, count)
    keys = [(disk_branch_limits(m)[1], m.j, m.k, m.sign != "+") for m in modes]
    order = sorted(range(len(modes)), key=lambda i: keys[i])
    return [modes[i] for i in order[:count]]


def disk_branch_curves(R, a_grid, count):
    """Values and slopes of the ``count`` lowest branches over ``a_grid``.

    Returns
    -------
    modes : list of DiskMode
    values : ndarray, shape (len(a_grid), count)
    slopes : ndarray, shape (len(a_grid), count)
    """
    a_grid = np.asarray(a_grid, dtype=float)
    modes = disk_lowest_modes(R, count)
    values = np.column_stack([disk_branch_eigenvalue(m, a_grid) for m in modes])
    slopes = np.column_stack([_disk_slope_closed(m, a_grid) for m in modes])
    return modes, values, slopes


def _disk_slope_closed(mode, a):
    """Hellmann-Feynman slope with the radial integral in closed form.

    int_0^R J_j(s r)^2 r dr = R^2/2 [J_j'(sR)^2 + (1 - j^2/(sR)^2) J_j(sR)^2].
    Used for dense sweeps; ``disk_boundary_interior_ratio`` is the
    quadrature route.
    """
    x = _solve_branch_x(mode, a)
    j, R = mode.j, mode.R
    js = bessel_j_orders(j + 1, x)
    jp = -js[j + 1] + (j / x) * js[j]
    interior = 0.5 * R**2 * (jp**2 + (1 - (j / x) ** 2) * js[j] ** 2)
    return R * js[j] ** 2 / interior


def _annulus_bessel(spec, j, k):
    """Bessel values J_j, J_{j+1}, Y_j, Y_{j+1} at k R_out and k R_in."""
    k = np.asarray(k, dtype=float)
    jo = bessel_j_orders(j + 1, k * spec.R_out)[j:]
    yo = bessel_y_orders(j + 1, k * spec.R_out)[j:]
    jn = bessel_j_orders(j + 1, k * spec.R_in)[j:]
    yn = bessel_y_orders(j + 1, k * spec.R_in)[j:]
    return jo, yo, jn, yn


def _annulus_coeffs(spec, j, sign, a):
    s = _sign_value(sign)
    return a + (j - s * j) / spec.R_out, a - (j - s * j) / spec.R_in


def _annulus_rows(k, c_out, c_in, tab):
    jo, yo, jn, yn = tab
    return (-k * jo[1] + c_out * jo[0], -k * yo[1] + c_out * yo[0],
            k * jn[1] + c_in * jn[0], k * yn[1] + c_in * yn[0])


def annulus_matrix(spec, j, sign, a, mu):
    """Boundary-condition matrix on the basis {J_j, Y_j}.

    Row 0 applies the boundary operator at r = R_out (normal +e_r, tangent
    +e_phi); row 1 applies it at r = R_in (normal -e_r, tangent -e_phi).
    Returns an array of shape mu.shape + (2, 2).
    """
    mu = np.asarray(mu, dtype=float)
    k = np.sqrt(mu)
    c_out, c_in = _annulus_coeffs(spec, j, sign, a)
    m00, m01, m10, m11 = _annulus_rows(k, c_out, c_in, _annulus_bessel(spec, j, k))
    out = np.empty(mu.shape + (2, 2))
    out[..., 0, 0], out[..., 0, 1] = m00, m01
    out[..., 1, 0], out[..., 1, 1] = m10, m11
    return out


def annulus_determinant(spec, j, sign, a, mu):
    """det of ``annulus_matrix``; a and mu broadcast against each other."""
    k = np.sqrt(np.asarray(mu, dtype=float))
    c_out, c_in = _annulus_coeffs(spec, j, sign, np.asarray(a, dtype=float))
    m00, m01, m10, m11 = _annulus_rows(k, c_out, c_in, _annulus_bessel(spec, j, k))
    return m00 * m11 - m01 * m10


def annulus_dirichlet_cross(spec, j, mu):
    """J_j(k R_in) Y_j(k R_out) - J_j(k R_out) Y_j(k R_in), k = sqrt(mu)."""
    k = np.sqrt(np.asarray(mu, dtype=float))
    jo = bessel_j_orders(j, k * spec.R_out)[j]
    yo = bessel_y_orders(j, k * spec.R_out)[j]
    jn = bessel_j_orders(j, k * spec.R_in)[j]
    yn = bessel_y_orders(j, k * spec.R_in)[j]
    return jn * yo - jo * yn


def _scan_grid(k_max, dk):
    near0 = np.geomspace(1e-7 * dk, dk, 40, endpoint=False)
    grid = np.concatenate([near0, np.arange(dk, k_max, dk)])
    return np.append(grid[grid < k_max], k_max)


def _bisect(func, lo, hi):
    """Vectorized bisection; func(x, idx) evaluates cell idx at x."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    if lo.size == 0:
        return lo
    idx = np.arange(lo.size)
    flo = func(lo, idx)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = func(mid, idx)
        same = np.sign(fm) == np.sign(flo)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same, hi, mid)
        if np.all(hi - lo <= 4e-16 * hi):
            break
    return 0.5 * (lo + hi)


def _scan_roots_multi(values_on_grid, func, grid):
    """Sign-change roots for several rows of samples over a common grid.

    ``values_on_grid`` has shape (n_rows, len(grid)); ``func(x, rows)``
    evaluates the same functions at points x for the given rows.
    Returns one ascending array of roots per row.
    """
    f = values_on_grid
    rows, cells = np.nonzero(np.sign(f[:, :-1]) * np.sign(f[:, 1:]) < 0)
    roots = [list(grid[np.nonzero(fr == 0)[0]]) for fr in f]
    # a cell whose |f| dips below both neighbours without a sign change may
    # hide a pair of roots: resample it
    af = np.abs(f)
    dip_r, dip_c = np.nonzero((af[:, 1:-1] < af[:, :-2]) & (af[:, 1:-1] < af[:, 2:])
                              & (np.sign(f[:, :-2]) == np.sign(f[:, 2:])))
    extra_r, extra_lo, extra_hi = [], [], []
    for r, c in zip(dip_r, dip_c + 1):
        sub = np.linspace(grid[c - 1], grid[c + 1], 33)
        fs = func(sub, np.full(sub.shape, r))
        sc = np.nonzero(np.sign(fs[:-1]) * np.sign(fs[1:]) < 0)[0]
        if len(sc):
            warnings.warn(f"two sign changes within one scan cell near {grid[c]:.6g}",
                          ScanResolutionWarning, stacklevel=3)
            extra_r += [r] * len(sc)
            extra_lo += list(sub[sc])
            extra_hi += list(sub[sc + 1])
    all_r = np.concatenate([rows, np.array(extra_r, dtype=int)])
    lo = np.concatenate([grid[cells], extra_lo])
    hi = np.concatenate([grid[cells + 1], extra_hi])
    x = _bisect(lambda t, i: func(t, all_r[i]), lo, hi)
    for r, v in zip(all_r, x):
        roots[r].append(v)
    return [np.sort(np.array(v, dtype=float)) for v in roots]


def _scan_step(R):
    # smallest gap between consecutive scaled zeros of low orders, halved twice
    gaps = [np.min(np.diff(np.concatenate([[0.0], bessel_zeros(p, 8)]))) for p in range(4)]
    return 0.25 * min(gaps) / R


def _annulus_roots(spec, j, sign, a, mu_max):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if np.any(~(a > 0)):
        raise ValueError("a must be positive")
    if not mu_max > 0:
        raise ValueError("mu_max must be positive")
    grid = _scan_grid(math.sqrt(mu_max), _scan_step(spec.R_out))
    tab = _annulus_bessel(spec, j, grid)
    c_out, c_in = _annulus_coeffs(spec, j, sign, a[:, None])
    m00, m01, m10, m11 = _annulus_rows(grid[None, :], c_out, c_in, tab)
    f = m00 * m11 - m01 * m10
    ks = _scan_roots_multi(f, lambda t, r: annulus_determinant(spec, j, sign, a[r], t * t), grid)
    return [k**2 for k in ks]


def annulus_branch_eigenvalues(spec, j, sign, a, mu_max):
    """Eigenvalues in (0, mu_max] of the annulus operator in the (j, sign) block.

    Roots of det M(mu) located by a sign-change scan in k = sqrt(mu) and
    refined by bisection.  ``a`` may be an array, in which case one array of
    roots per entry is returned.
    """
    out = _annulus_roots(spec, j, sign, a, mu_max)
    return out[0] if np.ndim(a) == 0 else out


def annulus_boundary_interior_ratio(spec, j, sign, a, mu):
    """Boundary-to-interior L2 ratio of the annulus eigenfunction at mu.

    ``a`` and ``mu`` may be arrays of equal shape.  The eigenfunction is
    alpha J_j + beta Y_j with (alpha, beta) spanning the null space of the
    better-scaled row of ``annulus_matrix``; the radial integral uses a fixed
    80-point Gauss-Legendre rule (the integrand is smooth on [R_in, R_out]).
    """
    scalar = np.ndim(mu) == 0
    a = np.atleast_1d(np.asarray(a, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    a = np.broadcast_to(a, mu.shape)
    m = annulus_matrix(spec, j, sign, a, mu)
    use0 = np.hypot(m[..., 0, 0], m[..., 0, 1]) >= np.hypot(m[..., 1, 0], m[..., 1, 1])
    row = np.where(use0[..., None], m[..., 0, :], m[..., 1, :])
    alpha, beta = row[..., 1], -row[..., 0]
    k = np.sqrt(mu)

    def u(r):
        x = k[..., None] * r
        return (alpha[..., None] * bessel_j_orders(j, x)[j]
                + beta[..., None] * bessel_y_orders(j, x)[j])

    ro, ri = np.array([spec.R_out]), np.array([spec.R_in])
    edge = spec.R_out * u(ro)[..., 0] ** 2 + spec.R_in * u(ri)[..., 0] ** 2
    t, w = np.polynomial.legendre.leggauss(80)
    half = 0.5 * (spec.R_out - spec.R_in)
    r = spec.R_in + half * (t + 1)
    interior = half * np.sum(w * u(r) ** 2 * r, axis=-1)
    ratio = edge / interior
    return float(ratio[0]) if scalar else ratio


def annulus_branch_curves(spec, a_grid, count, j_max=None, with_slopes=True,
                          family="all"):
    """Branch curves of the annulus, ranked by their value at the largest a.

    Within one (j, sign) block the i-th root is followed as one branch; the
    blocks are one-dimensional regular problems whose eigenvalues are simple,
    and roots only leave the scan window through its upper end as a grows.

    Parameters
    ----------
    family : {'all', 'upper'}
        ``'upper'`` drops the lowest root of every block.  That root belongs
        to the branch through z^j (sign '+') or z^{-j} (sign '-'), which is
        holomorphic on the annulus, so it collapses to 0 as a -> 0+; there is
        one such branch per block and they crowd the bottom of the spectrum.

    Returns
    -------
    labels : list of (j, sign, index)
    values : ndarray, shape (len(a_grid), count)
    slopes : ndarray or None
    """
    if family not in ("all", "upper"):
        raise ValueError("family must be 'all' or 'upper'")
    a_grid = np.asarray(a_grid, dtype=float)
    if j_max is None:
        j_max = count + 2
    first = 1 if family == "upper" else 0
    a_top = a_grid[-1]
    mu_cap = 4 * (bessel_zeros(0, count + 2)[-1] / (spec.R_out - spec.R_in)) ** 2
    trial = []
    j = 0
    while True:
        block = []
        for sign in (("+",) if j == 0 else ("+", "-")):
            roots = annulus_branch_eigenvalues(spec, j, sign, a_top, mu_cap)
            block.extend((mu, j, sign, i) for i, mu in enumerate(roots) if i >= first)
        trial.extend(block)
        trial.sort()
        # block roots grow with j, so stop once a whole block lies above the window
        if j >= j_max and len(trial) >= count and (
                not block or min(b[0] for b in block) > trial[count - 1][0]):
            break
        if j > 4 * j_max + 40:
            raise TruncationError("not enough annulus branches below the scan cap")
        j += 1
    chosen = trial[:count]
    mu_window = chosen[-1][0] * (1 + 1e-9)
    labels = [(j, s, i) for _, j, s, i in chosen]
    values = np.full((len(a_grid), count), np.nan)
    for key in sorted({(j, s) for j, s, _ in labels}):
        per_a = annulus_branch_eigenvalues(spec, key[0], key[1], a_grid, mu_window)
        for c, (j, s, i) in enumerate(labels):
            if (j, s) == key:
                values[:, c] = [r[i] if i < len(r) else np.nan for r in per_a]
    slopes = None
    if with_slopes:
        slopes = np.full_like(values, np.nan)
        for c, (j, s, _) in enumerate(labels):
            ok = np.isfinite(values[:, c])
            if np.any(ok):
                slopes[ok, c] = annulus_boundary_interior_ratio(
                    spec, j, s, a_grid[ok], values[ok, c])
    return labels, values, slopes


def disk_negative_a_scan(R, j, sign, a, mu_max):
    """Roots in (0, mu_max] of the disk eigen-equation for a < 0.

    The bracket structure of the a > 0 case does not apply, so the pole-free
    residual x J_{j+1}(x) - (a + shift) R J_j(x) is scanned for sign changes.
    """
    if not a < 0:
        raise ValueError("a must be negative")
    mode = DiskMode(j, 0, sign, R)
    c = (a + mode.shift) * R

    def resid(x, rows=None):
        js = bessel_j_orders(j + 1, x)
        return x * js[j + 1] - c * js[j]

    grid = _scan_grid(math.sqrt(mu_max) * R, _scan_step(1.0))
    xs = _scan_roots_multi(resid(grid)[None, :], resid, grid)[0]
    return (xs / R) ** 2
