"""Integer-order Bessel functions of the first and second kind.

The first kind is evaluated by its power series for small arguments and by
Miller's backward recurrence elsewhere.  The second kind of orders 0 and 1
comes from Neumann series over the same backward-recurrence sequence (small
and moderate arguments) or from the Hankel asymptotic expansion (large
arguments); higher orders follow by upward recurrence, which is stable for Y.

All evaluators accept scalars or arrays for ``x`` and return the same shape.
"""
import math
import threading

import numpy as np

__all__ = [
    "PoleError",
    "bessel_j",
    "bessel_j_orders",
    "bessel_j_derivative",
    "bessel_y",
    "bessel_y_orders",
    "bessel_zero",
    "bessel_zeros",
    "bessel_ratio",
    "mcmahon_guess",
    "POLE_TOL",
]

POLE_TOL = 1e-12

_EULER_GAMMA = 0.57721566490153286061
_SERIES_LIMIT = 1.0
_HANKEL_LIMIT = 25.0
_BIG = 1e250
_SMALL = 1e-250


class PoleError(ArithmeticError):
    """Raised when a quotient is evaluated at a zero of its denominator."""


def _as_array(x):
    x = np.asarray(x, dtype=float)
    return x, x.ndim == 0


def _series_orders(pmax, x):
    """J_0..J_pmax by the power series, for |x| <= ~1 (no cancellation)."""
    out = np.empty((pmax + 1,) + x.shape)
    q = -0.25 * x * x
    for p in range(pmax + 1):
        term = (0.5 * x) ** p / math.factorial(p)
        total = term.copy()
        for m in range(1, 40):
            term = term * q / (m * (m + p))
            total += term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        out[p] = total
    return out


def _miller_sequence(pmax, x):
    """Unnormalized backward recurrence values and the normalization sum.

    Returns (seq, norm) with seq[p] proportional to J_p(x) for p <= pmax and
    norm = J_0 + 2 sum J_2k in the same scale.  The extra terms needed by the
    Neumann series for Y_0, Y_1 are returned as well (see ``_miller_full``).
    """
    full, norm = _miller_full(pmax, x)
    return full[: pmax + 1], norm


def _miller_full(pmax, x):
    # start index well above both the order and the argument
    n = max(pmax, int(np.max(x))) + 1
    start = 2 * ((n + int(math.sqrt(60.0 * n)) + 20) // 2)
    seq = np.zeros((start + 2,) + x.shape)
    nxt = np.zeros_like(x)
    cur = np.full_like(x, 1e-300)
    norm = np.zeros_like(x)
    for k in range(start, 0, -1):
        prev = (2.0 * k / x) * cur - nxt
        nxt, cur = cur, prev
        seq[k - 1] = cur
        seq[k] = nxt
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * cur
        big = np.abs(cur) > _BIG
        if np.any(big):
            scale = np.where(big, 1.0 / _BIG, 1.0)
            cur = cur * scale
            nxt = nxt * scale
            norm = norm * scale
            seq[k - 1 :] *= scale
    norm += seq[0]
    return seq, norm


def bessel_j_orders(pmax, x):
    """Return J_0(x), ..., J_pmax(x) stacked along the first axis.

    Parameters
    ----------
    pmax : int
        Highest order, ``pmax >= 0``.
    x : float or ndarray
        Real arguments.

    Returns
    -------
    ndarray of shape (pmax + 1,) + x.shape
    """
    pmax = int(pmax)
    if pmax < 0:
        raise ValueError("order must be non-negative")
    x, scalar = _as_array(x)
    flat = np.atleast_1d(x).ravel()
    ax = np.abs(flat)
    out = np.zeros((pmax + 1, flat.size))
    small = ax <= _SERIES_LIMIT
    if np.any(small):
        out[:, small] = _series_orders(pmax, ax[small])
    big = ~small
    if np.any(big):
        seq, norm = _miller_full(pmax, ax[big])
        out[:, big] = seq[: pmax + 1] / norm
    # parity J_p(-x) = (-1)^p J_p(x)
    neg = flat < 0
    if np.any(neg):
        odd = (np.arange(pmax + 1) % 2 == 1)[:, None]
        out[:, neg] = np.where(odd, -out[:, neg], out[:, neg])
    out = out.reshape((pmax + 1,) + x.shape)
    return out


def bessel_j(p, x):
    """Bessel function of the first kind J_p(x) for integer p >= 0.

    Examples
    --------
    >>> float(bessel_j(0, 0.0))
    1.0
    """
    p = _check_order(p)
    x, scalar = _as_array(x)
    val = bessel_j_orders(p, x)[p]
    return float(val) if scalar else val


def bessel_j_derivative(p, x):
    """dJ_p/dx from the recurrence J_p' = -J_{p+1} + (p/x) J_p.

    At x = 0 the equivalent form (J_{p-1} - J_{p+1})/2 is used.
    """
    p = _check_order(p)
    x, scalar = _as_array(x)
    js = bessel_j_orders(p + 1, x)
    if p == 0:
        val = -js[1]
    else:
        jm = bessel_j_orders(p - 1, x)[p - 1]
        val = 0.5 * (jm - js[p + 1])
    return float(val) if scalar else val


def _hankel_pq(p, x):
    mu = 4.0 * p * p
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    term = np.ones_like(x)
    last = np.full_like(x, np.inf)
    for k in range(1, 60):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(term)
        if np.all((mag < 1e-17) | (mag > last)):
            break
        use = mag <= last
        sgn = (-1) ** (k // 2)
        if k % 2 == 0:
            P = P + np.where(use, sgn * term, 0.0)
        else:
            Q = Q + np.where(use, sgn * term, 0.0)
        last = np.where(use, mag, 0.0)
    return P, Q


def _y01(x):
    """Y_0 and Y_1 for x > 0."""
    y0 = np.empty_like(x)
    y1 = np.empty_like(x)
    far = x > _HANKEL_LIMIT
    if np.any(far):
        xf = x[far]
        amp = np.sqrt(2.0 / (np.pi * xf))
        for p, target in ((0, y0), (1, y1)):
            P, Q = _hankel_pq(p, xf)
            chi = xf - (0.5 * p + 0.25) * np.pi
            target[far] = amp * (P * np.sin(chi) + Q * np.cos(chi))
    near = ~far
    if np.any(near):
        xn = x[near]
        seq, norm = _miller_full(1, xn)
        js = seq / norm
        kmax = (js.shape[0] - 2) // 2
        lg = np.log(0.5 * xn) + _EULER_GAMMA
        s0 = np.zeros_like(xn)
        s1 = np.zeros_like(xn)
        for k in range(1, kmax):
            sg = -1.0 if k % 2 else 1.0
            s0 += sg * js[2 * k] / k
            s1 += sg * (js[2 * k - 1] - js[2 * k + 1]) / k
        y0[near] = (2.0 / np.pi) * (lg * js[0] - 2.0 * s0)
        y1[near] = (2.0 / np.pi) * (lg * js[1] - js[0] / xn + s1)
    return y0, y1


def bessel_y_orders(pmax, x):
    """Return Y_0(x), ..., Y_pmax(x) stacked along the first axis (x > 0)."""
    pmax = _check_order(pmax)
    x, scalar = _as_array(x)
    flat = np.atleast_1d(x).ravel()
    if np.any(~(flat > 0)):
        raise ValueError("Bessel Y requires x > 0")
    out = np.empty((pmax + 1, flat.size))
    y0, y1 = _y01(flat)
    out[0] = y0
    if pmax >= 1:
        out[1] = y1
    for p in range(1, pmax):
        out[p + 1] = (2.0 * p / flat) * out[p] - out[p - 1]
    return out.reshape((pmax + 1,) + x.shape)


def bessel_y(p, x):
    """Bessel function of the second kind Y_p(x) for integer p >= 0, x > 0."""
    p = _check_order(p)
    x, scalar = _as_array(x)
    val = bessel_y_orders(p, x)[p]
    return float(val) if scalar else val


def _check_order(p):
    if int(p) != p or p < 0:
        raise ValueError(f"order must be a non-negative integer, got {p!r}")
    return int(p)


def mcmahon_guess(p, k):
    """McMahon asymptotic estimate of the k-th positive zero of J_p."""
    mu = 4.0 * p * p
    b = (k + 0.5 * p - 0.25) * np.pi
    e = 8.0 * b
    return (b - (mu - 1) / e - 4 * (mu - 1) * (7 * mu - 31) / (3 * e**3)
            - 32 * (mu - 1) * (83 * mu**2 - 982 * mu + 3779) / (15 * e**5))


def _refine_zeros(p, lo, hi, guess):
    """Zeros of J_p, one per bracket (lo[i], hi[i]), by safeguarded Newton.

    Every bracket must contain exactly one sign change of J_p.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = bessel_j_orders(p, lo)[p]
    x = np.where((guess > lo) & (guess < hi), guess, 0.5 * (lo + hi))
    done = np.zeros(x.shape, dtype=bool)
    for _ in range(100):
        js = bessel_j_orders(p + 1, x)
        f = js[p]
        d = -js[p + 1] + (p / x) * f
        same = np.sign(f) == np.sign(flo)
        lo = np.where(same & ~done, x, lo)
        flo = np.where(same & ~done, f, flo)
        hi = np.where(~same & ~done, x, hi)
        step = np.where(d != 0, f / np.where(d != 0, d, 1.0), np.inf)
        xn = x - step
        conv = (np.abs(xn - x) <= 4e-15 * x) | (hi - lo <= 4e-15 * hi) | (f == 0)
        xn = np.where((xn >= lo) & (xn <= hi), xn, 0.5 * (lo + hi))
        x = np.where(done | (f == 0), x, xn)
        done |= conv
        if np.all(done):
            break
    return x


class _ZeroCache:
    """Lazily grown, lock-protected tables of zeros per order."""

    def __init__(self):
        self._tables = {}
        self._lock = threading.RLock()

    def get(self, p, count):
        table = self._tables.get(p)
        if table is not None and len(table) >= count:
            return table[:count]
        with self._lock:
            table = self._tables.get(p)
            if table is None or len(table) < count:
                have = 0 if table is None else len(table)
                table = self._fill(p, max(count, have + 8))
                self._tables[p] = table
            return table[:count]

    def _fill(self, p, count):
        # generous extension so curve sweeps rarely re-enter the lock
        count = max(count, 24)
        ks = np.arange(1, count + 1)
        guess = mcmahon_guess(p, ks)
        if p == 0:
            # McMahon is accurate to < 0.01 for every zero of J_0
            return _refine_zeros(0, guess - 0.5, guess + 0.5, guess)
        # interlacing: exactly one zero of J_p between consecutive zeros of J_{p-1}
        below = self.get(p - 1, count + 1)
        return _refine_zeros(p, below[:-1], below[1:], guess)


_ZEROS = _ZeroCache()


def bessel_zeros(p, count):
    """First ``count`` positive zeros of J_p in ascending order."""
    p = _check_order(p)
    if count < 0:
        raise ValueError("count must be non-negative")
    return _ZEROS.get(p, int(count)).copy()


def bessel_zero(p, k):
    """The k-th positive zero z_{p,k} of J_p (k >= 1).

    Zeros of J_0 come from McMahon's expansion polished by Newton; zeros of
    higher orders are bracketed by consecutive zeros of the previous order.
    """
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    return float(bessel_zeros(p, int(k))[int(k) - 1])


def bessel_ratio(p, x, reciprocal=False):
    """Quotient J_{p+1}(x)/J_p(x), or J_p(x)/J_{p+1}(x) if ``reciprocal``.

    Raises
    ------
    PoleError
        If some x lies within ``POLE_TOL`` of a zero of the denominator.
    """
    p = _check_order(p)
    x, scalar = _as_array(x)
    js = bessel_j_orders(p + 1, x)
    num, den = (js[p], js[p + 1]) if reciprocal else (js[p + 1], js[p])
    dp = p + 1 if reciprocal else p
    ax = np.abs(np.atleast_1d(x))
    if ax.size:
        need = int(np.max(ax) / np.pi + dp / 2 + 3)
        zs = bessel_zeros(dp, need)
        idx = np.searchsorted(zs, ax)
        d_hi = np.abs(zs[np.minimum(idx, len(zs) - 1)] - ax)
        d_lo = np.abs(ax - zs[np.maximum(idx - 1, 0)])
        near = np.minimum(d_hi, d_lo) <= POLE_TOL
        if reciprocal and dp > 0:
            near |= ax <= POLE_TOL
        if np.any(near):
            raise PoleError("argument within pole tolerance of a Bessel zero")
    val = num / den
    return float(val) if scalar else val
