"""Periodic symmetric jump kernels and their torus averages and drifts.

Every built-in kernel is a real trigonometric polynomial

    K(x, y) = sum_m a_m cos 2pi(p_m x + q_m y) + b_m sin 2pi(p_m x + q_m y),

stored as a ``(n_modes, 4)`` array of rows ``(p, q, a, b)``. The mode array is
what the compiled assembly loops consume; ``KernelSpec.evaluate`` is the
vectorised numpy view of the same function.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Callable, Optional

import numpy as np
from scipy.special import zeta
from scipy.stats import qmc

from . import quadrature

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
ALPHA_ONE_TOL = 1e-14


class KernelError(ValueError):
    """A kernel definition violates symmetry, periodicity or ellipticity."""


@dataclass(frozen=True)
class QuadratureSettings:
    """Knobs shared by every integration routine.

    ``near_band`` intervals on each side of the source use ``near_order``
    points; the rest use ``far_order``. ``tail_radius`` is the distance beyond
    which the drift integrand is closed analytically, ``exterior_span`` the
    distance past the domain boundary covered by panels before the exterior
    tail is summed in closed form, ``image_cutoff`` the number of periodic
    images summed explicitly on the torus.
    """
    near_order: int = 16
    far_order: int = 6
    near_band: int = 8
    jacobi_order: int = 24
    exterior_order: int = 8
    panel_growth: float = 0.5
    tail_radius: float = 64.0
    exterior_span: float = 1.0
    image_cutoff: int = 64
    rel_tol: float = 1e-10


DEFAULT_QUADRATURE = QuadratureSettings()


def _modes_evaluate(modes):
    p, q, a, b = (modes[:, k] for k in range(4))

    def evaluate(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        phase = TWO_PI * (np.multiply.outer(x, p) + np.multiply.outer(y, q))
        return np.cos(phase) @ a + np.sin(phase) @ b

    return evaluate


def canonical_modes(modes):
    """Merge duplicate modes, fold ``(-p, -q)`` onto ``(p, q)`` and drop zeros."""
    merged = {}
    for p, q, a, b in np.asarray(modes, dtype=float).reshape(-1, 4):
        p, q = int(round(p)), int(round(q))
        if (p, q) < (0, 0):
            p, q, b = -p, -q, -b
        if p == 0 and q == 0:
            b = 0.0
        ca, cb = merged.get((p, q), (0.0, 0.0))
        merged[(p, q)] = (ca + a, cb + b)
    rows = [(p, q, a, b) for (p, q), (a, b) in sorted(merged.items())
            if abs(a) > 1e-15 or abs(b) > 1e-15]
    if not rows:
        rows = [(0, 0, 0.0, 0.0)]
    return np.array(rows, dtype=float)


def symmetrize_modes(modes):
    """Fourier modes of ``(K(x, y) + K(y, x)) / 2``."""
    modes = np.asarray(modes, dtype=float).reshape(-1, 4)
    swapped = modes[:, [1, 0, 2, 3]]
    both = np.vstack([modes, swapped])
    both[:, 2:] *= 0.5
    return canonical_modes(both)


@dataclass(frozen=True)
class KernelSpec:
    """A 1-periodic symmetric kernel with ``1/lambda_bound <= K <= lambda_bound``.

    ``modes`` is ``None`` only for ad-hoc callables (e.g. deliberately broken
    probes handed to :func:`validate_kernel`); such kernels cannot be used by
    the assembly routines.
    """
    evaluate: Callable
    lambda_bound: float
    name: str
    smoothness_order: int = 2
    modes: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def is_constant(self):
        return self.modes is not None and bool(np.all(self.modes[:, :2] == 0))

    @property
    def mean_value(self):
        """Closed-form double torus average (the constant Fourier mode)."""
        if self.modes is None:
            raise KernelError(f"kernel {self.name!r} has no Fourier representation")
        sel = (self.modes[:, 0] == 0) & (self.modes[:, 1] == 0)
        return float(self.modes[sel, 2].sum())

    def require_modes(self):
        if self.modes is None:
            raise KernelError(f"kernel {self.name!r} is not a trigonometric polynomial; "
                              "assembly needs Fourier modes")
        return self.modes

    def scaled(self, factor):
        """The kernel ``factor * K``."""
        modes = self.require_modes().copy()
        modes[:, 2:] *= factor
        return from_modes(modes, name=f"{factor:g}*{self.name}")


def from_modes(modes, name="fourier", symmetrize=True, smoothness_order=2):
    """Build a :class:`KernelSpec` from ``(p, q, a, b)`` rows."""
    modes = symmetrize_modes(modes) if symmetrize else canonical_modes(modes)
    evaluate = _modes_evaluate(modes)
    # the extrema of a trig polynomial: dense periodic sampling is enough for
    # the low orders used here; bounds are widened slightly for safety
    g = np.linspace(0.0, 1.0, 257)[:-1]
    vals = evaluate(g[:, None], g[None, :])
    kmin, kmax = float(vals.min()), float(vals.max())
    if kmin <= 0.0:
        raise KernelError(f"kernel {name!r} is not strictly positive (min {kmin:.4g})")
    lam = max(kmax, 1.0 / kmin, 1.0)
    return KernelSpec(evaluate=evaluate, lambda_bound=lam, name=name,
                      smoothness_order=smoothness_order, modes=modes)


def constant_kernel(value=1.0):
    return from_modes([(0, 0, value, 0.0)], name="constant" if value == 1.0
                      else f"constant({value:g})")


def additive_cosine():
    """K = 1 + 0.3 (cos 2pi x + cos 2pi y)."""
    return from_modes([(0, 0, 1.0, 0.0), (1, 0, 0.3, 0.0), (0, 1, 0.3, 0.0)],
                      name="additive-cosine")


def product_cosine():
    """K = 1 + 0.25 cos 2pi x cos 2pi y."""
    return from_modes([(0, 0, 1.0, 0.0), (1, 1, 0.125, 0.0), (1, -1, 0.125, 0.0)],
                      name="product-cosine")


BUILTIN_KERNELS = {
    "constant": constant_kernel,
    "additive-cosine": additive_cosine,
    "product-cosine": product_cosine,
}


def kernel_from_config(section):
    """Kernel from a config entry: a built-in name, or a mapping with
    ``fourier: [{p, q, amplitude[, sine]}...]`` (symmetrised automatically)."""
    if isinstance(section, str):
        try:
            return BUILTIN_KERNELS[section]()
        except KeyError:
            raise KernelError(f"unknown kernel {section!r}; "
                              f"built-ins are {sorted(BUILTIN_KERNELS)}") from None
    if "name" in section and "fourier" not in section:
        return kernel_from_config(section["name"])
    rows = []
    for term in section["fourier"]:
        rows.append((term["p"], term["q"], float(term.get("amplitude", 0.0)),
                     float(term.get("sine", 0.0))))
    return from_modes(rows, name=section.get("name", "fourier"))


@dataclass
class ValidationReport:
    name: str
    n_samples: int
    symmetry_defect: float
    periodicity_defect: float
    k_min: float
    k_max: float
    lambda_bound: float
    tol: float
    passed: bool

    def as_dict(self):
        return dict(self.__dict__)


def validate_kernel(spec, n_samples=1024, tol=1e-12):
    """Check symmetry, double periodicity and ellipticity on a Halton sample."""
    if n_samples < 16:
        raise ValueError("validate_kernel needs n_samples >= 16")
    pts = qmc.Halton(d=2, scramble=False).random(n_samples)
    # include the lattice corners so extrema at grid points are not missed
    g = np.linspace(0.0, 1.0, 17)
    gx, gy = np.meshgrid(g, g)
    pts = np.vstack([pts, np.column_stack([gx.ravel(), gy.ravel()])])
    x, y = pts[:, 0], pts[:, 1]
    k = np.asarray(spec.evaluate(x, y), dtype=float)
    sym = float(np.max(np.abs(k - spec.evaluate(y, x))))
    per = float(max(np.max(np.abs(spec.evaluate(x + 1.0, y) - k)),
                    np.max(np.abs(spec.evaluate(x, y + 1.0) - k))))
    kmin, kmax = float(k.min()), float(k.max())
    lam = spec.lambda_bound
    ok = (sym <= tol and per <= tol and kmin >= 1.0 / lam - tol and kmax <= lam + tol)
    return ValidationReport(spec.name, int(len(x)), sym, per, kmin, kmax, lam, tol, bool(ok))


def k_bar(spec, order=16, rel_tol=1e-10, max_doublings=8):
    """Double torus integral of ``K`` by tensor Gauss-Legendre with panel doubling."""
    panels = 1
    prev = quadrature.tensor_square(spec.evaluate, order, panels)
    for _ in range(max_doublings):
        panels *= 2
        cur = quadrature.tensor_square(spec.evaluate, order, panels)
        if abs(cur - prev) <= rel_tol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    raise quadrature.QuadratureError(
        f"k_bar for {spec.name!r} did not converge (change {abs(cur - prev):.3e})")


def k_bar_of_x(spec, x, order=16, rel_tol=1e-10):
    """``int_0^1 K(x, y) dy``; ``x`` may be an array."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for i, xi in enumerate(xs):
        out[i] = quadrature.composite(lambda y: spec.evaluate(np.full_like(y, xi), y),
                                      0.0, 1.0, order=order, rel_tol=rel_tol)[0]
    return out if np.ndim(x) else float(out[0])


def _odd_difference(spec, x):
    """z -> K(x, x+z) - K(x, x-z)."""
    def g(z):
        xs = np.full_like(z, x)
        return spec.evaluate(xs, xs + z) - spec.evaluate(xs, xs - z)
    return g


def _drift_head(spec, alpha, x, settings):
    """``int_0^1 z^-alpha (K(x,x+z) - K(x,x-z)) dz`` with the z^(1-alpha) factor
    absorbed into a Gauss-Jacobi rule."""
    g = _odd_difference(spec, x)
    return quadrature.singular_left(lambda z: g(z) / z, 0.0, 1.0, 1.0 - alpha,
                                    order=settings.jacobi_order,
                                    rel_tol=settings.rel_tol)[0]


def _periodic_tail(g, alpha, start, n_terms=12, order=48):
    """``int_start^inf z^-alpha g(z) dz`` for 1-periodic, mean-zero ``g`` and
    integer ``start``: expand ``(m + t)^-alpha`` in ``t`` and sum each power of
    ``m`` with the Hurwitz zeta function."""
    t, w = quadrature.gauss_legendre(order)
    gt = g(t)
    coef = quadrature.binomial_series(-alpha, n_terms)
    total = 0.0
    for j in range(1, n_terms + 1):
        mu = float(np.dot(w, t ** j * gt))
        total += coef[j] * mu * zeta(alpha + j, start)
    return total


def _check_alpha(alpha, lo, hi, closed_hi, what):
    ok = lo < alpha < hi or (closed_hi and abs(alpha - hi) <= ALPHA_ONE_TOL)
    if not ok:
        interval = f"({lo}, {hi}]" if closed_hi else f"({lo}, {hi})"
        raise ValueError(f"{what} requires alpha in {interval}, got {alpha}")


def drift_F(spec, alpha, x, settings=DEFAULT_QUADRATURE):
    """Drift ``F(x) = (1/2) p.v. int z (K(x,x+z) - K(x,x-z)) |z|^(-1-alpha) dz``,
    alpha in (1, 2). ``x`` may be an array."""
    _check_alpha(alpha, 1.0, 2.0, False, "drift_F")
    Z = int(round(settings.tail_radius))
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for i, xi in enumerate(xs):
        g = _odd_difference(spec, xi)
        head = _drift_head(spec, alpha, xi, settings)
        body = quadrature.fixed_panels(lambda z: z ** -alpha * g(z),
                                       np.arange(1.0, Z + 0.5), 2 * settings.near_order)
        out[i] = head + body + _periodic_tail(g, alpha, Z)
    return out if np.ndim(x) else float(out[0])


def drift_F_eps(spec, alpha, eps, x, settings=DEFAULT_QUADRATURE):
    """Truncated drift ``p.v. int_{|z| <= 1/eps} z K(x,x+z) |z|^(-1-alpha) dz``,
    alpha in (0, 1]."""
    _check_alpha(alpha, 0.0, 1.0, True, "drift_F_eps")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    R = 1.0 / eps
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    edges = np.append(np.arange(1.0, R, 0.5), R)
    for i, xi in enumerate(xs):
        g = _odd_difference(spec, xi)
        head = _drift_head(spec, alpha, xi, settings)
        body = 0.0
        if R > 1.0:
            body = quadrature.fixed_panels(lambda z: z ** -alpha * g(z), edges,
                                           settings.near_order)
        out[i] = head + body
    return out if np.ndim(x) else float(out[0])


def drift_F_fourier(spec, alpha, x):
    """Closed-form drift for a trig-polynomial kernel (independent check of
    :func:`drift_F`): ``int_0^inf z^-alpha sin(2 pi q z) dz`` has a Gamma-function
    value for alpha in (1, 2)."""
    from scipy.special import gamma
    modes = spec.require_modes()
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    mu = 1.0 - alpha
    for p, q, a, b in modes:
        if q == 0:
            continue
        s = math.copysign(1.0, q)
        sine_int = gamma(mu) * math.sin(math.pi * mu / 2.0) / (TWO_PI * abs(q)) ** mu
        theta = TWO_PI * (p + q) * x
        out += s * sine_int * (-2.0 * a * np.sin(theta) + 2.0 * b * np.cos(theta))
    return out
