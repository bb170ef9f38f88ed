"""Dense generator matrices on a torus grid and on a killed interval grid."""

from dataclasses import dataclass, field
import logging
from typing import Optional

import numpy as np

from . import _kernels, quadrature
from .kernel import DEFAULT_QUADRATURE, KernelSpec, constant_kernel

log = logging.getLogger(__name__)


class ResolutionError(ValueError):
    """Grid spacing does not resolve the oscillation scale."""


@dataclass(frozen=True)
class TorusGrid:
    n_points: int

    def __post_init__(self):
        if self.n_points < 8:
            raise ValueError(f"torus grid needs at least 8 points, got {self.n_points}")

    @property
    def spacing(self):
        return 1.0 / self.n_points

    @property
    def nodes(self):
        return np.arange(self.n_points) * self.spacing


@dataclass(frozen=True)
class DomainGrid:
    a: float
    b: float
    n_interior: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"empty interval ({self.a}, {self.b})")
        if self.n_interior < 8:
            raise ValueError(f"domain grid needs at least 8 interior nodes, got {self.n_interior}")

    @property
    def spacing(self):
        return (self.b - self.a) / (self.n_interior + 1)

    @property
    def nodes(self):
        return self.a + self.spacing * np.arange(1, self.n_interior + 1)

    @classmethod
    def with_spacing(cls, a, b, h):
        """Grid whose spacing is the largest value <= h that tiles (a, b)."""
        cells = int(np.ceil((b - a) / h - 1e-9))
        return cls(a, b, cells - 1)


@dataclass
class GeneratorMatrix:
    """Dense discretisation of a nonlocal generator.

    ``entries[i, j]`` (i != j) is the jump rate from node i to node j; the
    diagonal makes row i sum to ``-killing_rates[i]`` (zero on the torus).
    """
    entries: np.ndarray
    kind: str                     # "torus" | "killed-domain"
    alpha: float
    spacing: float
    nodes: np.ndarray
    eps: Optional[float] = None
    killing_rates: Optional[np.ndarray] = None
    symmetrized: bool = False
    kernel_name: str = ""
    near_weights: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.entries)))

    def check_vector(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n,):
            raise ValueError(f"vector of shape {f.shape} does not match generator of size {self.n}")
        return f


def _rules(settings, alpha):
    ft, fw = quadrature.gauss_legendre(settings.far_order)
    nt, nw = quadrature.gauss_legendre(settings.near_order)
    jt, jw = quadrature.gauss_jacobi_power(settings.jacobi_order, 1.0 - alpha)
    et, ew = quadrature.gauss_legendre(settings.exterior_order)
    return ft, fw, nt, nw, jt, jw, et, ew


def _oscillation_cap(kernel, eps):
    """Panel width limit for exterior integrals: a quarter of the period in y."""
    modes = kernel.require_modes()
    if np.all(modes[:, 1] == 0):
        return np.inf
    return 0.25 * (1.0 if eps is None else eps)


def _resolve_kernel(kernel, eps):
    """(kernel, 1/eps) actually integrated: eps=None means the constant K-bar kernel."""
    if eps is None:
        return constant_kernel(kernel.mean_value), 1.0
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return kernel, 1.0 / eps


def _symmetrize(nu):
    return 0.5 * (nu + nu.T)


def _with_diagonal(offdiag, kill):
    A = offdiag.copy()
    np.fill_diagonal(A, 0.0)
    diag = -A.sum(axis=1)
    if kill is not None:
        diag -= kill
    A[np.diag_indices_from(A)] = diag
    return A


def cell_jump_intensity(source, cell, kernel, eps, alpha, settings=DEFAULT_QUADRATURE):
    """``int_cell K(x/eps, y/eps) |y - x|^(-1-alpha) dy`` for a source x outside the cell.

    ``eps=None`` integrates the homogenised constant kernel K-bar.
    """
    lo, hi = float(cell[0]), float(cell[1])
    if not lo < hi:
        raise ValueError(f"degenerate cell {cell}")
    if lo <= source <= hi:
        raise ValueError(f"cell [{lo}, {hi}] contains the source node {source}")
    kern, inv_eps = _resolve_kernel(kernel, eps)
    kx = source * inv_eps

    def f(y):
        return kern.evaluate(np.full_like(y, kx), y * inv_eps) * np.abs(y - source) ** (-1.0 - alpha)

    # geometric panels toward the near end keep the rule accurate when the
    # cell is long compared with its distance from the source
    d_near = min(abs(lo - source), abs(hi - source))
    edges = _kernels.exterior_panel_edges(d_near, d_near + (hi - lo), settings.panel_growth,
                                          _oscillation_cap(kern, None if eps is None else eps))
    edges = source + edges if lo > source else source - edges[::-1]
    total = 0.0
    for e0, e1 in zip(edges[:-1], edges[1:]):
        total += quadrature.composite(f, e0, e1, order=settings.near_order,
                                      rel_tol=settings.rel_tol, abs_tol=0.0)[0]
    return total


def killing_rate(x, kernel, eps, alpha, domain, settings=DEFAULT_QUADRATURE):
    """Jump intensity from ``x`` into the complement of ``domain``."""
    a, b = domain
    if not a < x < b:
        raise ValueError(f"x={x} is not inside the domain ({a}, {b})")
    kern, inv_eps = _resolve_kernel(kernel, eps)
    et, ew = quadrature.gauss_legendre(settings.exterior_order)
    return _kernels.exterior_integral(kern.require_modes(), inv_eps, alpha, float(x),
                                      x - a, b - x, settings.panel_growth,
                                      _oscillation_cap(kern, eps), et, ew,
                                      _kernels.exterior_span(1.0 / inv_eps, settings.exterior_span))


def assemble_domain_generator(kernel: KernelSpec, eps, grid: DomainGrid, alpha,
                              settings=DEFAULT_QUADRATURE, guard_ratio=4.0):
    """Killed-domain generator of ``L_eps`` (``eps=None``: homogenised ``L-bar``).

    Rates between interior nodes come from hat-weighted interval quadrature;
    jumps landing outside (a, b) or onto the boundary nodes become killing.
    The rate matrix is symmetrised before the diagonal is set.
    """
    h = grid.spacing
    if eps is not None and h > eps / guard_ratio * (1 + 1e-12):
        raise ResolutionError(f"grid spacing h={h:.6g} does not resolve eps={eps:.6g}: "
                              f"need h <= eps/{guard_ratio:g} = {eps / guard_ratio:.6g}")
    kern, inv_eps = _resolve_kernel(kernel, eps)
    ft, fw, nt, nw, jt, jw, et, ew = _rules(settings, alpha)
    nu, kill, wnear = _kernels.domain_rows(
        kern.require_modes(), inv_eps, float(alpha), float(grid.a), h, grid.n_interior,
        ft, fw, nt, nw, settings.near_band, jt, jw, et, ew, settings.panel_growth,
        _oscillation_cap(kern, eps), _kernels.exterior_span(1.0 / inv_eps, settings.exterior_span))
    if np.any(wnear == 0.0):
        log.warning("near-field weight clipped at zero for alpha=%g", alpha)
    A = _with_diagonal(_symmetrize(nu), kill)
    return GeneratorMatrix(A, "killed-domain", float(alpha), h, grid.nodes, eps=eps,
                           killing_rates=kill, symmetrized=True, kernel_name=kern.name,
                           near_weights=wnear)


def assemble_torus_generator(kernel: KernelSpec, grid: TorusGrid, alpha,
                             image_cutoff=None, settings=DEFAULT_QUADRATURE):
    """Generator of the kernel's jump process folded onto the unit torus.

    Periodic images up to distance ``image_cutoff`` are integrated explicitly;
    the remainder is added with the kernel sampled at the nodes.
    """
    M = settings.image_cutoff if image_cutoff is None else int(image_cutoff)
    if M < 8:
        raise ValueError(f"image cutoff must be >= 8, got {M}")
    ft, fw, nt, nw, jt, jw, _, _ = _rules(settings, alpha)
    nu, wnear = _kernels.torus_rows(kernel.require_modes(), float(alpha), grid.n_points, M,
                                    ft, fw, nt, nw, settings.near_band, jt, jw)
    A = _with_diagonal(_symmetrize(nu), None)
    return GeneratorMatrix(A, "torus", float(alpha), grid.spacing, grid.nodes,
                           killing_rates=np.zeros(grid.n_points), symmetrized=True,
                           kernel_name=kernel.name, near_weights=wnear)


def apply_generator(A: GeneratorMatrix, f):
    return A.entries @ A.check_vector(f)


def quadratic_form(A: GeneratorMatrix, f):
    """Discrete Dirichlet form ``-h <f, A f>``."""
    f = A.check_vector(f)
    return float(-A.spacing * f @ (A.entries @ f))


def smallest_eigenvalue(A: GeneratorMatrix):
    """Smallest eigenvalue of ``-A`` (killed kind) or its spectral gap (torus kind)."""
    ev = np.linalg.eigvalsh(-A.entries)
    return float(ev[1] if A.kind == "torus" else ev[0])
