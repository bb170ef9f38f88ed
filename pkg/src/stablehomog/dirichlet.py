"""Killed-domain Dirichlet solves, Green matrix and expected exit times."""

from dataclasses import dataclass, field
import csv
import functools
import logging
import math
import time
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.special import gamma

from . import quadrature
from .discretize import DomainGrid, GeneratorMatrix, assemble_domain_generator
from .kernel import DEFAULT_QUADRATURE, KernelSpec

log = logging.getLogger(__name__)

COND_LIMIT = 1e12


class DirichletError(RuntimeError):
    pass


@dataclass
class DirichletProblem:
    """``A u = h`` on the interior nodes, ``u = 0`` outside the domain.

    ``eps=None`` selects the homogenised problem with the constant kernel K-bar.
    """
    kernel: KernelSpec
    alpha: float
    grid: DomainGrid
    rhs: np.ndarray
    eps: Optional[float] = None
    settings: object = DEFAULT_QUADRATURE
    generator: Optional[GeneratorMatrix] = field(default=None, repr=False)

    def __post_init__(self):
        self.rhs = np.asarray(self.rhs, dtype=float)
        if self.rhs.shape != (self.grid.n_interior,):
            raise ValueError(f"rhs has shape {self.rhs.shape}, grid has {self.grid.n_interior} nodes")
        if not np.all(np.isfinite(self.rhs)):
            raise ValueError("rhs is not finite")

    def assemble(self):
        if self.generator is None:
            self.generator = assemble_domain_generator(self.kernel, self.eps, self.grid,
                                                       self.alpha, self.settings)
        return self.generator


@dataclass
class DirichletSolution:
    u: np.ndarray
    residual: float
    condition_estimate: float
    factor_seconds: float
    nodes: np.ndarray

    def to_csv(self, path):
        write_columns(path, ["x", "u"], [self.nodes, self.u])


def write_columns(path, header, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([f"{v:.11e}" for v in row])


def _factor(A: GeneratorMatrix):
    if A.kind != "killed-domain":
        raise DirichletError(f"expected a killed-domain generator, got {A.kind}")
    t0 = time.perf_counter()
    M = A.entries
    lu = scipy.linalg.lu_factor(M, check_finite=True)
    # 1-norm condition estimate from LAPACK gecon
    gecon = scipy.linalg.get_lapack_funcs("gecon", (M,))
    rcond, info = gecon(lu[0], np.linalg.norm(M, 1), norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if info != 0 or not cond < COND_LIMIT:
        raise DirichletError(f"generator is singular or ill-conditioned (cond ~ {cond:.3e}, "
                             f"n={A.n}, max|A|={A.max_abs:.3e})")
    return lu, cond, time.perf_counter() - t0


def solve_generator(A: GeneratorMatrix, h):
    """Solve ``A u = h`` with a dense LU factorisation."""
    h = A.check_vector(h)
    lu, cond, secs = _factor(A)
    u = scipy.linalg.lu_solve(lu, h)
    res = float(np.max(np.abs(A.entries @ u - h))) if h.size else 0.0
    if res > 1e-9 * max(float(np.max(np.abs(h))), 1e-300) and np.any(h):
        raise DirichletError(f"solve residual {res:.3e} exceeds 1e-9 |h|")
    return DirichletSolution(u, res, cond, secs, A.nodes)


def solve_dirichlet(problem: DirichletProblem):
    return solve_generator(problem.assemble(), problem.rhs)


def _check_unit_interval(grid):
    if grid is not None and (grid.a != -1.0 or grid.b != 1.0):
        raise ValueError(f"the closed form needs the domain (-1, 1), got ({grid.a}, {grid.b})")


def getoor_closed_form(alpha, k_bar=1.0):
    """``g`` with ``L-bar (1-x^2)_+^(alpha/2) = -g`` on (-1, 1).

    The fractional-Laplacian value 2^a Gamma(1+a/2) Gamma((1+a)/2)/sqrt(pi) is
    divided by the normalisation constant of the one-dimensional fractional
    Laplacian, leaving ``k_bar * pi / sin(pi alpha / 2)``.
    """
    a = float(alpha)
    c1a = a * 2.0 ** (a - 1.0) * gamma((1.0 + a) / 2.0) / (math.sqrt(math.pi) * gamma(1.0 - a / 2.0))
    lap = 2.0 ** a * gamma(1.0 + a / 2.0) * gamma((1.0 + a) / 2.0) / math.sqrt(math.pi)
    return k_bar * lap / c1a


def getoor_quadrature(alpha, k_bar=1.0):
    """``-p.v. int (u*(z) - u*(0)) k_bar |z|^(-1-alpha) dz`` by direct quadrature."""
    a = float(alpha)
    # symmetric: 2 * int_0^inf. Near 0 the integrand is z^(1-a) times a smooth
    # factor since 1 - (1-z^2)^(a/2) ~ (a/2) z^2; near z=1 it carries (1-z)^(a/2).

    def inner(z):
        return -np.expm1(0.5 * a * np.log1p(-z * z)) / (z * z)

    head = quadrature.singular_left(inner, 0.0, 0.5, 1.0 - a, order=24, rel_tol=1e-14,
                                    abs_tol=1e-16)[0]

    def tail_smooth(s):
        z = 1.0 - s
        # 1 - s^(a/2) (2-s)^(a/2) split as z^(-1-a) - s^(a/2) (2-s)^(a/2) z^(-1-a)
        return (2.0 - s) ** (0.5 * a) * z ** (-1.0 - a)

    reg = quadrature.composite(lambda s: (1.0 - s) ** (-1.0 - a), 0.0, 0.5, order=24,
                               rel_tol=1e-14)[0]
    sing = quadrature.singular_left(tail_smooth, 0.0, 0.5, 0.5 * a, order=24, rel_tol=1e-14,
                                    abs_tol=1e-16)[0]
    outside = 1.0 / a   # int_1^inf z^(-1-a) dz, u* = 0 there
    return 2.0 * k_bar * (head + reg - sing + outside)


@functools.lru_cache(maxsize=32)
def getoor_constant(alpha, k_bar=1.0, tol=1e-6):
    """Closed-form constant, accepted only after a quadrature check to ``tol``."""
    closed = getoor_closed_form(alpha, k_bar)
    direct = getoor_quadrature(alpha, k_bar)
    if abs(closed - direct) > tol * abs(direct):
        raise DirichletError(f"closed-form constant {closed!r} disagrees with quadrature "
                             f"{direct!r} at alpha={alpha}")
    return closed


def getoor_exact_solution(alpha, k_bar, grid: DomainGrid):
    """``(u*(nodes), g)`` with ``u* = (1-x^2)^(alpha/2)`` and ``L-bar u* = -g``."""
    _check_unit_interval(grid)
    x = grid.nodes
    u = np.power(np.clip(1.0 - x * x, 0.0, None), 0.5 * alpha)
    return u, getoor_constant(float(alpha), float(k_bar))


def green_matrix(A: GeneratorMatrix):
    """``G = (-A)^{-1} / h``, so that ``h * G @ f`` solves ``(-A) u = f``.

    With this scaling ``h * G.sum(axis=1)`` is the expected exit time.
    """
    lu, _, _ = _factor(A)
    G = scipy.linalg.lu_solve(lu, -np.eye(A.n)) / A.spacing
    return G


def expected_exit_time(A: GeneratorMatrix):
    """Solve ``(-A) t = 1``."""
    lu, _, _ = _factor(A)
    t = scipy.linalg.lu_solve(lu, -np.ones(A.n))
    if not np.all(t > 0):
        raise DirichletError("expected exit time is not positive at every node")
    log.debug("sup expected exit time %.6g", float(t.max()))
    return t
