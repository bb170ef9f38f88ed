"""Boundary cutoff and the two-scale corrector expansion ``v_eps``."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.interpolate import CubicSpline

from .cell import CellCorrectors, CellProblemError
from .dirichlet import write_columns
from .discretize import DomainGrid, GeneratorMatrix
from .kernel import ALPHA_ONE_TOL

# S(t) = t^5 sum_n C(4+n, n) C(9, 4-n) (-t)^n : degree 9, four vanishing
# derivatives at both ends, S(1 - t) = 1 - S(t)
_SMOOTHSTEP = np.array([math.comb(4 + n, n) * math.comb(9, 4 - n) * (-1) ** n for n in range(5)],
                       dtype=float)


def smoothstep9(t):
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    poly = np.polynomial.polynomial.polyval(t, _SMOOTHSTEP)
    return t ** 5 * poly


def _check_eps(eps, domain):
    a, b = domain
    # the sweep's largest eps sits exactly at the bound, so it is admitted
    if not 0.0 < eps <= (b - a) / 8.0:
        raise ValueError(f"eps={eps} outside (0, {(b - a) / 8.0}] for domain ({a}, {b})")


def eval_cutoff(x, eps, domain=(-1.0, 1.0)):
    """``eta_eps(x) = S(clamp((dist(x, boundary) - eps) / eps, 0, 1))``; zero outside."""
    _check_eps(eps, domain)
    a, b = domain
    x = np.asarray(x, dtype=float)
    dist = np.minimum(x - a, b - x)
    out = smoothstep9((dist - eps) / eps)
    out = np.where(dist > 0.0, out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class TwoScaleExpansion:
    """``v = truncated + gradient_term + zero_order_term`` on the domain nodes."""
    v: np.ndarray
    truncated: np.ndarray
    gradient_term: np.ndarray
    zero_order_term: np.ndarray
    eta: np.ndarray
    nodes: np.ndarray
    eps: float
    alpha: float

    def to_csv(self, path):
        write_columns(path, ["x", "u_bar_eps", "gradient_term", "zero_order_term", "v_eps"],
                      [self.nodes, self.truncated, self.gradient_term, self.zero_order_term,
                       self.v])


def periodic_sampler(nodes, values):
    """Periodic cubic interpolant of torus-grid values, evaluated mod 1."""
    xs = np.append(nodes, 1.0)
    ys = np.append(values, values[0])
    spline = CubicSpline(xs, ys, bc_type="periodic")
    return lambda y: spline(np.mod(y, 1.0))


def _centered_gradient(f, h):
    ext = np.concatenate(([0.0], f, [0.0]))
    return (ext[2:] - ext[:-2]) / (2.0 * h)


def assemble_v_eps(u_bar, correctors: CellCorrectors, alpha, eps, grid: DomainGrid,
                   homogenized_A: GeneratorMatrix):
    """Two-scale expansion built from the discrete homogenised solution ``u_bar``.

    The zero-order term carries ``eps**alpha`` (which is ``eps`` at alpha = 1).
    """
    u_bar = np.asarray(u_bar, dtype=float)
    if u_bar.shape != (grid.n_interior,) or homogenized_A.n != grid.n_interior:
        raise ValueError("u_bar, grid and homogenised generator sizes disagree")
    if homogenized_A.eps is not None:
        raise ValueError("expected the homogenised generator (eps=None)")
    if abs(correctors.alpha - alpha) > ALPHA_ONE_TOL:
        raise CellProblemError(f"correctors were computed for alpha={correctors.alpha}, not {alpha}")
    first = correctors.first_order(None if correctors.phi is not None else eps)
    x = grid.nodes
    eta = eval_cutoff(x, eps, (grid.a, grid.b))
    trunc = u_bar * eta
    grad = _centered_gradient(trunc, grid.spacing)
    lbar = homogenized_A.entries @ trunc
    phi_s = periodic_sampler(correctors.nodes, first)(x / eps)
    psi_s = periodic_sampler(correctors.nodes, correctors.psi)(x / eps)
    grad_term = eps * phi_s * grad
    zero_term = eps ** alpha / correctors.k_bar * psi_s * eta * lbar
    v = trunc + grad_term + zero_term
    return TwoScaleExpansion(v, trunc, grad_term, zero_term, eta, x, eps, alpha)
