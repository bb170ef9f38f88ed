"""Gauss-Legendre / Gauss-Jacobi rules and composite integration with refinement."""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


class QuadratureError(RuntimeError):
    """Raised when successive refinements fail to agree."""


@lru_cache(maxsize=64)
def gauss_legendre(order):
    """Nodes and weights of the ``order``-point rule on [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (t + 1.0)
    weights = 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@lru_cache(maxsize=64)
def gauss_jacobi_power(order, power):
    """Rule for ``int_0^1 t**power g(t) dt`` (``power > -1``), nodes in (0, 1)."""
    # roots_jacobi uses weight (1-x)^a (1+x)^b on [-1, 1]
    x, w = roots_jacobi(order, 0.0, power)
    nodes = 0.5 * (x + 1.0)
    weights = w * 0.5 ** (power + 1.0)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def fixed_panels(func, edges, order):
    """Apply the Gauss-Legendre rule of ``order`` on every panel ``[edges[k], edges[k+1]]``.

    ``func`` must accept a 1-D array of abscissae.
    """
    edges = np.asarray(edges, dtype=float)
    t, w = gauss_legendre(order)
    widths = np.diff(edges)
    y = edges[:-1, None] + widths[:, None] * t[None, :]
    vals = np.asarray(func(y.ravel()), dtype=float).reshape(y.shape)
    return float(np.sum(vals * (widths[:, None] * w[None, :])))


def composite(func, a, b, order=8, rel_tol=1e-10, abs_tol=1e-14, min_panels=1,
              max_doublings=14):
    """Composite Gauss-Legendre on [a, b], doubling the panel count until two
    successive estimates agree to ``rel_tol`` (or ``abs_tol``).

    Returns ``(value, error_estimate)``.
    """
    if b == a:
        return 0.0, 0.0
    panels = max(1, int(min_panels))
    prev = fixed_panels(func, np.linspace(a, b, panels + 1), order)
    for _ in range(max_doublings):
        panels *= 2
        cur = fixed_panels(func, np.linspace(a, b, panels + 1), order)
        err = abs(cur - prev)
        if err <= max(rel_tol * abs(cur), abs_tol):
            return cur, err
        prev = cur
    raise QuadratureError(
        f"composite rule on [{a}, {b}] did not converge: last change {err:.3e} "
        f"with {panels} panels of order {order}")


def singular_left(func, a, b, power, order=24, rel_tol=1e-10, abs_tol=1e-14,
                  max_doublings=8):
    """Integrate ``(y - a)**power * func(y)`` over [a, b] for smooth ``func``.

    The first panel uses a Gauss-Jacobi rule absorbing the endpoint power;
    the rest of the interval is covered by composite Gauss-Legendre. The first
    panel is shrunk geometrically until the estimate stabilises.
    """
    length = b - a
    tj, wj = gauss_jacobi_power(order, power)

    def estimate(frac):
        c = a + frac * length
        head = c - a
        val = head ** (power + 1.0) * float(np.dot(wj, func(a + head * tj)))
        if frac < 1.0:
            def g(y):
                return (y - a) ** power * func(y)
            val += composite(g, c, b, order=order, rel_tol=rel_tol, abs_tol=abs_tol)[0]
        return val

    prev = estimate(1.0)
    frac = 1.0
    for _ in range(max_doublings):
        frac *= 0.5
        cur = estimate(frac)
        err = abs(cur - prev)
        if err <= max(rel_tol * abs(cur), abs_tol):
            return cur, err
        prev = cur
    raise QuadratureError(f"singular rule on [{a}, {b}] did not converge (change {err:.3e})")


def tensor_square(func, order=16, panels=1):
    """Tensor Gauss-Legendre over the unit square; ``func(x, y)`` is vectorised."""
    t, w = gauss_legendre(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    x = (edges[:-1, None] + np.diff(edges)[:, None] * t[None, :]).ravel()
    wx = (np.diff(edges)[:, None] * w[None, :]).ravel()
    X, Y = np.meshgrid(x, x, indexing="ij")
    vals = np.asarray(func(X, Y), dtype=float)
    return float(wx @ vals @ wx)


def binomial_series(a, n_terms):
    """Generalised binomial coefficients ``C(a, j)`` for ``j = 0..n_terms``.

    Built by recurrence so negative integer ``a`` works (scipy returns nan there).
    """
    c = np.empty(n_terms + 1)
    c[0] = 1.0
    for j in range(1, n_terms + 1):
        c[j] = c[j - 1] * (a - j + 1) / j
    return c
