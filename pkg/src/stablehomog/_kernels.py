"""Hot loops: generator-row quadrature and Markov-chain path simulation.

Each routine exists twice, a numba version (``*_nb``) and a vectorised numpy
version (``*_np``); the public wrappers dispatch on :data:`_accel.USE_NUMBA`.
Both versions consume identical inputs and agree to roundoff.

Row quadrature uses P1 (hat) interpolation of the unknown on intervals not
adjacent to the source node and a second-difference stencil on the two
adjacent intervals, with weight

    w = (int_{|z|<h} z^2 k(z) dz - e) / (2 h^2),

where ``e`` is the hat-interpolation error of ``z^2`` integrated against the
kernel over the far intervals. This makes the scheme exact on quadratics.
"""

import math

import numpy as np

from . import _accel, quadrature
from ._accel import njit

TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# kernel evaluation
# --------------------------------------------------------------------------

@njit
def _keval_nb(modes, x, y):
    s = 0.0
    for m in range(modes.shape[0]):
        ph = TWO_PI * (modes[m, 0] * x + modes[m, 1] * y)
        s += modes[m, 2] * math.cos(ph) + modes[m, 3] * math.sin(ph)
    return s


@njit
def _kbar_x_nb(modes, x):
    s = 0.0
    for m in range(modes.shape[0]):
        if modes[m, 1] == 0.0:
            ph = TWO_PI * modes[m, 0] * x
            s += modes[m, 2] * math.cos(ph) + modes[m, 3] * math.sin(ph)
    return s


def _keval_np(modes, x, y):
    phase = TWO_PI * (np.multiply.outer(x, modes[:, 0]) + np.multiply.outer(y, modes[:, 1]))
    return np.cos(phase) @ modes[:, 2] + np.sin(phase) @ modes[:, 3]


def _kbar_x_np(modes, x):
    sel = modes[:, 1] == 0.0
    return float(_keval_np(modes[sel], np.atleast_1d(float(x)), np.zeros(1))[0])


# --------------------------------------------------------------------------
# exterior (killing) integrals
# --------------------------------------------------------------------------

def exterior_panel_edges(delta, radius, growth, cap):
    """Panel edges on [delta, radius]: geometric growth, widths capped at ``cap``."""
    edges = [delta]
    r = delta
    while r < radius:
        r = min(r + min(growth * r, cap), radius)
        edges.append(r)
    return np.array(edges)


@njit
def _exterior_side_nb(modes, inv_eps, alpha, x, sign, delta, radius, growth, cap, et, ew):
    # int_{delta}^{radius} K(x/eps, (x + sign r)/eps) r^(-1-alpha) dr
    kx = x * inv_eps
    total = 0.0
    r0 = delta
    while r0 < radius:
        width = min(growth * r0, cap)
        r1 = min(r0 + width, radius)
        L = r1 - r0
        for q in range(et.shape[0]):
            r = r0 + L * et[q]
            y = x + sign * r
            total += L * ew[q] * _keval_nb(modes, kx, y * inv_eps) * r ** (-1.0 - alpha)
        r0 = r1
    return total


def _exterior_side_np(modes, inv_eps, alpha, x, sign, delta, radius, growth, cap, et, ew):
    edges = exterior_panel_edges(delta, radius, growth, cap)
    L = np.diff(edges)
    r = (edges[:-1, None] + L[:, None] * et[None, :]).ravel()
    wt = (L[:, None] * ew[None, :]).ravel()
    y = x + sign * r
    k = _keval_np(modes, np.full_like(y, x * inv_eps), y * inv_eps)
    return float(np.sum(wt * k * r ** (-1.0 - alpha)))


@njit
def _exterior_nb(modes, inv_eps, alpha, x, dl, dr, growth, cap, et, ew, span):
    tot = _exterior_side_nb(modes, inv_eps, alpha, x, -1.0, dl, dl + span, growth, cap, et, ew)
    tot += _exterior_side_nb(modes, inv_eps, alpha, x, 1.0, dr, dr + span, growth, cap, et, ew)
    return tot


def _exterior_np(modes, inv_eps, alpha, x, dl, dr, growth, cap, et, ew, span):
    tot = _exterior_side_np(modes, inv_eps, alpha, x, -1.0, dl, dl + span, growth, cap, et, ew)
    tot += _exterior_side_np(modes, inv_eps, alpha, x, 1.0, dr, dr + span, growth, cap, et, ew)
    return tot


def periodic_tails(modes, inv_eps, alpha, x, radius, sign, n_terms=24, order=32):
    """``int_{r > radius} K(x/eps, (x + sign r)/eps) r^(-1-alpha) dr`` for arrays
    ``x`` and ``radius``.

    The kernel's y-average gives ``K-bar(x/eps) radius^-alpha / alpha``; the
    mean-zero, eps-periodic remainder is summed period by period after
    expanding ``(q + m + t)^(-1-alpha)`` in ``t``, with ``q = radius/eps``,
    which turns each power into a Hurwitz zeta value. Requires ``q >~ 4``.
    """
    from scipy.special import zeta
    x = np.atleast_1d(np.asarray(x, dtype=float))
    radius = np.broadcast_to(np.asarray(radius, dtype=float), x.shape)
    eps = 1.0 / inv_eps
    kx = x * inv_eps
    sel = modes[:, 1] == 0.0
    kbar = np.cos(TWO_PI * np.multiply.outer(kx, modes[sel, 0])) @ modes[sel, 2] \
        + np.sin(TWO_PI * np.multiply.outer(kx, modes[sel, 0])) @ modes[sel, 3]
    total = kbar * radius ** (-alpha) / alpha
    if np.all(modes[:, 1] == 0.0):
        return total
    t, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    y = x[:, None] + sign * (radius[:, None] + eps * t[None, :])
    g = _keval_np(modes, np.repeat(kx, t.size), y.ravel() * inv_eps).reshape(y.shape) - kbar[:, None]
    q = radius * inv_eps
    osc = np.zeros_like(x)
    tj = np.ones_like(t)
    coef = quadrature.binomial_series(-1.0 - alpha, n_terms)
    for j in range(1, n_terms + 1):
        tj = tj * t
        mu = g @ (w * tj)
        osc += coef[j] * mu * zeta(1.0 + alpha + j, q)
    # the j = 0 term vanishes because g has zero mean over a period
    return total + eps ** (-alpha) * osc


def exterior_span(eps, settings_span):
    """Distance covered by panels before the periodic tail takes over."""
    return max(settings_span, 8.0 * eps)


def exterior_integral(modes, inv_eps, alpha, x, dist_left, dist_right, growth, cap,
                      et, ew, span):
    """``int_{y < x - dist_left or y > x + dist_right} K(x/eps, y/eps) |y - x|^(-1-alpha) dy``."""
    fn = _exterior_nb if _accel.USE_NUMBA else _exterior_np
    head = fn(modes, inv_eps, alpha, x, dist_left, dist_right, growth, cap, et, ew, span)
    tail = periodic_tails(modes, inv_eps, alpha, x, dist_left + span, -1.0)[0] \
        + periodic_tails(modes, inv_eps, alpha, x, dist_right + span, 1.0)[0]
    return head + tail


# --------------------------------------------------------------------------
# killed-domain rows
# --------------------------------------------------------------------------

@njit
def _domain_rows_nb(modes, inv_eps, alpha, a, h, n, ft, fw, nt, nw, band, jt, jw,
                    et, ew, growth, cap, span):
    nu = np.zeros((n, n))
    kill = np.zeros(n)
    wnear = np.zeros(n)
    b = a + (n + 1) * h
    for i in range(n):
        x = a + (i + 1) * h
        kx = x * inv_eps
        e = 0.0
        for k in range(n + 1):
            if k == i or k == i + 1:
                continue
            dk = k - i if k > i else i - k - 1
            if dk <= band:
                tq = nt
                wq = nw
            else:
                tq = ft
                wq = fw
            tl = a + k * h
            for q in range(tq.shape[0]):
                y = tl + h * tq[q]
                val = h * wq[q] * _keval_nb(modes, kx, y * inv_eps) * abs(y - x) ** (-1.0 - alpha)
                e += val * h * h * tq[q] * (1.0 - tq[q])
                left = val * (1.0 - tq[q])
                right = val * tq[q]
                if k >= 1:
                    nu[i, k - 1] += left
                else:
                    kill[i] += left
                if k + 1 <= n:
                    nu[i, k] += right
                else:
                    kill[i] += right
        J = 0.0
        for q in range(jt.shape[0]):
            z = h * jt[q]
            J += jw[q] * (_keval_nb(modes, kx, (x + z) * inv_eps)
                          + _keval_nb(modes, kx, (x - z) * inv_eps))
        J *= h ** (2.0 - alpha)
        w = (J - e) / (2.0 * h * h)
        if w < 0.0:
            w = 0.0
        wnear[i] = w
        if i >= 1:
            nu[i, i - 1] += w
        else:
            kill[i] += w
        if i + 1 <= n - 1:
            nu[i, i + 1] += w
        else:
            kill[i] += w
        kill[i] += _exterior_nb(modes, inv_eps, alpha, x, x - a, b - x, growth, cap, et, ew, span)
    return nu, kill, wnear


def _domain_rows_np(modes, inv_eps, alpha, a, h, n, ft, fw, nt, nw, band, jt, jw,
                    et, ew, growth, cap, span):
    nu = np.zeros((n, n))
    kill = np.zeros(n)
    wnear = np.zeros(n)
    b = a + (n + 1) * h
    ks = np.arange(n + 1)
    for i in range(n):
        x = a + (i + 1) * h
        kx = x * inv_eps
        e = 0.0
        for near in (True, False):
            dk = np.where(ks > i, ks - i, i - ks - 1)
            sel = (ks != i) & (ks != i + 1) & ((dk <= band) if near else (dk > band))
            kk = ks[sel]
            if kk.size == 0:
                continue
            tq, wq = (nt, nw) if near else (ft, fw)
            y = (a + kk * h)[:, None] + h * tq[None, :]
            kv = _keval_np(modes, np.full(y.size, kx), y.ravel() * inv_eps).reshape(y.shape)
            val = h * wq[None, :] * kv * np.abs(y - x) ** (-1.0 - alpha)
            e += float(np.sum(val * (h * h * tq * (1.0 - tq))[None, :]))
            left = val @ (1.0 - tq)
            right = val @ tq
            # left node k -> column k-1 (k >= 1); right node k+1 -> column k (k+1 <= n)
            mL = kk >= 1
            np.add.at(nu[i], kk[mL] - 1, left[mL])
            kill[i] += left[~mL].sum()
            mR = kk + 1 <= n
            np.add.at(nu[i], kk[mR], right[mR])
            kill[i] += right[~mR].sum()
        z = h * jt
        J = float(np.dot(jw, _keval_np(modes, np.full(z.size, kx), (x + z) * inv_eps)
                         + _keval_np(modes, np.full(z.size, kx), (x - z) * inv_eps)))
        J *= h ** (2.0 - alpha)
        w = max((J - e) / (2.0 * h * h), 0.0)
        wnear[i] = w
        if i >= 1:
            nu[i, i - 1] += w
        else:
            kill[i] += w
        if i + 1 <= n - 1:
            nu[i, i + 1] += w
        else:
            kill[i] += w
        kill[i] += _exterior_np(modes, inv_eps, alpha, x, x - a, b - x, growth, cap, et, ew, span)
    return nu, kill, wnear


def domain_rows(modes, inv_eps, alpha, a, h, n, ft, fw, nt, nw, band, jt, jw,
                et, ew, growth, cap, span):
    """Unsymmetrised off-diagonal rates, killing rates and near-field weights
    of the killed-domain generator (see module docstring)."""
    fn = _domain_rows_nb if _accel.USE_NUMBA else _domain_rows_np
    nu, kill, wnear = fn(modes, inv_eps, alpha, a, h, n, ft, fw, nt, nw, band, jt, jw,
                         et, ew, growth, cap, span)
    x = a + h * np.arange(1, n + 1)
    b = a + (n + 1) * h
    kill += periodic_tails(modes, inv_eps, alpha, x, x - a + span, -1.0)
    kill += periodic_tails(modes, inv_eps, alpha, x, b - x + span, 1.0)
    return nu, kill, wnear


# --------------------------------------------------------------------------
# torus rows
# --------------------------------------------------------------------------

@njit
def _torus_rows_nb(modes, alpha, n, M, ft, fw, nt, nw, band, jt, jw):
    h = 1.0 / n
    nu = np.zeros((n, n))
    wnear = np.zeros(n)
    tail = 2.0 * float(M) ** (-alpha) / alpha
    for i in range(n):
        x = i * h
        e = 0.0
        for k in range(-M * n, M * n):
            if k == 0 or k == -1:
                continue
            dk = k if k > 0 else -k - 1
            if dk <= band:
                tq = nt
                wq = nw
            else:
                tq = ft
                wq = fw
            jl = (i + k) % n
            jr = (i + k + 1) % n
            tl = x + k * h
            for q in range(tq.shape[0]):
                y = tl + h * tq[q]
                val = h * wq[q] * _keval_nb(modes, x, y) * abs(y - x) ** (-1.0 - alpha)
                e += val * h * h * tq[q] * (1.0 - tq[q])
                if jl != i:
                    nu[i, jl] += val * (1.0 - tq[q])
                if jr != i:
                    nu[i, jr] += val * tq[q]
        for j in range(n):
            if j != i:
                nu[i, j] += tail * h * _keval_nb(modes, x, j * h)
        J = 0.0
        for q in range(jt.shape[0]):
            z = h * jt[q]
            J += jw[q] * (_keval_nb(modes, x, x + z) + _keval_nb(modes, x, x - z))
        J *= h ** (2.0 - alpha)
        w = (J - e) / (2.0 * h * h)
        if w < 0.0:
            w = 0.0
        wnear[i] = w
        nu[i, (i + 1) % n] += w
        nu[i, (i - 1) % n] += w
    return nu, wnear


def _torus_rows_np(modes, alpha, n, M, ft, fw, nt, nw, band, jt, jw):
    h = 1.0 / n
    nu = np.zeros((n, n))
    wnear = np.zeros(n)
    tail = 2.0 * float(M) ** (-alpha) / alpha
    ks = np.arange(-M * n, M * n)
    ks = ks[(ks != 0) & (ks != -1)]
    dk = np.where(ks > 0, ks, -ks - 1)
    groups = [(ks[dk <= band], nt, nw), (ks[dk > band], ft, fw)]
    nodes = np.arange(n) * h
    for i in range(n):
        x = i * h
        e = 0.0
        row = np.zeros(n)
        for kk, tq, wq in groups:
            y = (x + kk * h)[:, None] + h * tq[None, :]
            kv = _keval_np(modes, np.full(y.size, x), y.ravel()).reshape(y.shape)
            val = h * wq[None, :] * kv * np.abs(y - x) ** (-1.0 - alpha)
            e += float(np.sum(val * (h * h * tq * (1.0 - tq))[None, :]))
            row += np.bincount((i + kk) % n, weights=val @ (1.0 - tq), minlength=n)
            row += np.bincount((i + kk + 1) % n, weights=val @ tq, minlength=n)
        row += tail * h * _keval_np(modes, np.full(n, x), nodes)
        row[i] = 0.0
        z = h * jt
        J = float(np.dot(jw, _keval_np(modes, np.full(z.size, x), x + z)
                         + _keval_np(modes, np.full(z.size, x), x - z)))
        J *= h ** (2.0 - alpha)
        w = max((J - e) / (2.0 * h * h), 0.0)
        wnear[i] = w
        row[(i + 1) % n] += w
        row[(i - 1) % n] += w
        nu[i] = row
    return nu, wnear


def torus_rows(*args):
    """Unsymmetrised off-diagonal rates of the torus generator and near weights."""
    fn = _torus_rows_nb if _accel.USE_NUMBA else _torus_rows_np
    return fn(*args)


# --------------------------------------------------------------------------
# counter-based RNG and CTMC paths
# --------------------------------------------------------------------------
# SplitMix64 finaliser used as a keyed hash: draw k of path p under master
# seed s is  U = mix(key_p + (k+1) * GOLDEN) >> 11, with key_p = mix(s ^ mix(p + GOLDEN)).
# Streams are therefore addressable by (seed, path, counter), independent of
# how paths are distributed over workers.

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit
def _mix_nb(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _mix_np(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def path_keys(seed, first_path, n_paths):
    """Per-path stream keys (numpy uint64 array)."""
    p = np.arange(first_path, first_path + n_paths, dtype=np.uint64)
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        return _mix_np(s ^ _mix_np(p + GOLDEN))


def uniforms(keys, counters):
    """Uniforms in (0, 1) for each ``(key, counter)`` pair (numpy reference)."""
    with np.errstate(over="ignore"):
        z = _mix_np(keys + (counters.astype(np.uint64) + np.uint64(1)) * GOLDEN)
    return ((z >> _S11).astype(np.float64) + 0.5) * _INV53


@njit
def _uniform_nb(key, counter):
    z = _mix_nb(key + np.uint64(counter + 1) * GOLDEN)
    return (float(z >> _S11) + 0.5) * _INV53


@njit
def _paths_nb(cum, rates, hvec, start, keys, fuse, occupation):
    # cum[i, :] is the cumulative jump distribution of state i over targets
    # 0..n-1 followed by the killing state n
    n = rates.shape[0]
    npaths = keys.shape[0]
    times = np.zeros(npaths)
    integrals = np.zeros(npaths)
    events = np.zeros(npaths, dtype=np.int64)
    for p in range(npaths):
        key = keys[p]
        s = start
        t = 0.0
        acc = 0.0
        c = 0
        while True:
            u1 = _uniform_nb(key, 2 * c)
            u2 = _uniform_nb(key, 2 * c + 1)
            hold = -math.log(u1) / rates[s]
            t += hold
            acc += hvec[s] * hold
            if occupation.shape[0] > 0:
                occupation[s] += hold
            c += 1
            # first index with cum >= u2
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) // 2
                if cum[s, mid] < u2:
                    lo = mid + 1
                else:
                    hi = mid
            if lo >= n or c >= fuse:
                break
            s = lo
        times[p] = t
        integrals[p] = acc
        events[p] = c
    return times, integrals, events


def _paths_np(cum, rates, hvec, start, keys, fuse, occupation):
    n = rates.shape[0]
    npaths = keys.shape[0]
    times = np.zeros(npaths)
    integrals = np.zeros(npaths)
    events = np.zeros(npaths, dtype=np.int64)
    state = np.full(npaths, start, dtype=np.int64)
    alive = np.arange(npaths)
    c = 0
    while alive.size:
        cc = np.full(alive.size, 2 * c, dtype=np.int64)
        u1 = uniforms(keys[alive], cc)
        u2 = uniforms(keys[alive], cc + 1)
        s = state[alive]
        hold = -np.log(u1) / rates[s]
        times[alive] += hold
        integrals[alive] += hvec[s] * hold
        if occupation.shape[0] > 0:
            np.add.at(occupation, s, hold)
        c += 1
        events[alive] = c
        nxt = np.empty(alive.size, dtype=np.int64)
        for st in np.unique(s):
            m = s == st
            nxt[m] = np.searchsorted(cum[st], u2[m], side="left")
        done = (nxt >= n) | (c >= fuse)
        state[alive[~done]] = nxt[~done]
        alive = alive[~done]
    return times, integrals, events


def simulate_paths(cum, rates, hvec, start, keys, fuse, occupation=None):
    """Run one killed CTMC path per key from ``start``.

    Returns per-path exit times, per-path integrals of ``hvec`` along the path,
    and per-path event counts. ``occupation`` (length-n array) accumulates
    holding times per state when given.
    """
    occ = np.zeros(0) if occupation is None else occupation
    fn = _paths_nb if _accel.USE_NUMBA else _paths_np
    return fn(np.ascontiguousarray(cum), np.ascontiguousarray(rates),
              np.ascontiguousarray(hvec, dtype=float), int(start), keys, int(fuse), occ)
