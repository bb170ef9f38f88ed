"""Torus cell problems: mean-zero solutions of ``L psi = -f``."""

from dataclasses import dataclass, field
import logging
from typing import Dict, Optional

import numpy as np
import scipy.linalg

from . import kernel as kmod
from .dirichlet import write_columns
from .discretize import GeneratorMatrix, TorusGrid, assemble_torus_generator
from .kernel import ALPHA_ONE_TOL, DEFAULT_QUADRATURE

log = logging.getLogger(__name__)

MEAN_TOL = 1e-9
MEAN_WARN = 1e-6


class CellProblemError(ValueError):
    pass


@dataclass
class CellCorrectors:
    """Correctors on the torus grid.

    ``phi`` is set for alpha in (1, 2); ``phi_eps`` maps each requested eps to
    its corrector for alpha in (0, 1].
    """
    alpha: float
    nodes: np.ndarray
    psi: np.ndarray
    k_bar: float
    residual_psi: float
    phi: Optional[np.ndarray] = None
    residual_phi: Optional[float] = None
    phi_eps: Dict[float, np.ndarray] = field(default_factory=dict)
    residual_phi_eps: Dict[float, float] = field(default_factory=dict)
    rhs: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    gradient_norm: Optional[float] = None

    def first_order(self, eps=None):
        """The corrector multiplying the gradient term at scale ``eps``."""
        if self.phi is not None:
            return self.phi
        if eps in self.phi_eps:
            return self.phi_eps[eps]
        raise CellProblemError(f"no first-order corrector for alpha={self.alpha}, eps={eps}")

    def to_csv(self, path, eps=None):
        second = self.phi if self.phi is not None else self.phi_eps.get(eps)
        if second is None:
            second = np.zeros_like(self.psi)
        write_columns(path, ["x", "psi", "phi_or_phi_eps"], [self.nodes, self.psi, second])


def _grid_mean(v):
    return float(np.mean(v))


def _prepare_rhs(rhs):
    rhs = np.asarray(rhs, dtype=float)
    scale = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    mean = _grid_mean(rhs)
    if scale == 0.0:
        return rhs
    if abs(mean) > MEAN_TOL * scale:
        if abs(mean) > MEAN_WARN * scale:
            raise CellProblemError(
                f"right-hand side has grid mean {mean:.3e} (sup norm {scale:.3e}); "
                "the cell problem is solvable only for mean-zero data")
        log.warning("removing rhs mean defect %.3e (quadrature noise)", mean)
        rhs = rhs - mean
    return rhs


def solve_cell_problem(A: GeneratorMatrix, rhs):
    """Mean-zero ``psi`` with ``A psi = -rhs`` via the bordered system

        [A  1] [psi]   [-rhs]
        [1' 0] [lam] = [  0 ].
    """
    if A.kind != "torus":
        raise CellProblemError(f"cell problems need a torus generator, got {A.kind}")
    rhs = _prepare_rhs(A.check_vector(rhs))
    n = A.n
    B = np.zeros((n + 1, n + 1))
    B[:n, :n] = A.entries
    B[:n, n] = 1.0
    B[n, :n] = 1.0
    sol = scipy.linalg.solve(B, np.append(-rhs, 0.0))
    psi = sol[:n]
    return psi - _grid_mean(psi)


def residual(A, psi, rhs):
    return float(np.max(np.abs(A.entries @ psi + rhs)))


def semigroup_oracle(A: GeneratorMatrix, rhs, horizon=40.0, dt=0.01, return_decay=False):
    """``int_0^T exp(tA) rhs dt`` by implicit Euler (right-endpoint sums).

    Aborts when the iterate norm grows for 10 consecutive steps.
    """
    if A.kind != "torus":
        raise CellProblemError("semigroup oracle needs a torus generator")
    rhs = _prepare_rhs(A.check_vector(rhs))
    n = A.n
    lu = scipy.linalg.lu_factor(np.eye(n) - dt * A.entries)
    y = rhs.copy()
    acc = np.zeros(n)
    steps = int(round(horizon / dt))
    growth = 0
    prev = float(np.max(np.abs(y)))
    floor = 1e-13 * (prev or 1.0)
    for _ in range(steps):
        y = scipy.linalg.lu_solve(lu, y)
        acc += dt * y
        cur = float(np.max(np.abs(y)))
        # fluctuations at roundoff level are not growth
        growth = growth + 1 if (cur > prev * (1 + 1e-12) and cur > floor) else 0
        if growth >= 10:
            raise CellProblemError("semigroup iterates keep growing; generator is not dissipative")
        prev = cur
    acc -= _grid_mean(acc)
    if return_decay:
        scale = float(np.max(np.abs(rhs))) or 1.0
        return acc, prev / scale
    return acc


def _is_alpha_one(alpha):
    return abs(alpha - 1.0) <= ALPHA_ONE_TOL


def compute_correctors(kernel, alpha, eps_list, grid: TorusGrid, A=None,
                       settings=DEFAULT_QUADRATURE, want_phi=None):
    """All correctors applicable to ``alpha``.

    ``psi`` always; ``phi`` for alpha in (1, 2); ``phi_eps`` for each eps in
    ``eps_list`` when alpha in (0, 1]. Passing ``want_phi=True`` for alpha <= 1
    is rejected.
    """
    if want_phi and not 1.0 < alpha < 2.0:
        raise CellProblemError(f"phi is only defined for alpha in (1, 2), got {alpha}")
    if A is None:
        A = assemble_torus_generator(kernel, grid, alpha, settings=settings)
    x = grid.nodes
    kbar = kmod.k_bar(kernel)
    f_psi = kmod.k_bar_of_x(kernel, x) - kbar
    psi = solve_cell_problem(A, f_psi)
    out = CellCorrectors(alpha=alpha, nodes=x, psi=psi, k_bar=kbar,
                         residual_psi=residual(A, psi, _prepare_rhs(f_psi)))
    out.rhs["psi"] = f_psi
    if 1.0 < alpha < 2.0:
        F = kmod.drift_F(kernel, alpha, x, settings)
        phi = solve_cell_problem(A, F)
        out.phi = phi
        out.residual_phi = residual(A, phi, _prepare_rhs(F))
        out.rhs["phi"] = F
        grad = (np.roll(psi, -1) - np.roll(psi, 1)) / (2 * grid.spacing)
        out.gradient_norm = float(np.max(np.abs(grad)))
        log.info("finite-difference |grad psi|_inf = %.4g", out.gradient_norm)
    elif alpha < 1.0 or _is_alpha_one(alpha):
        for eps in eps_list:
            Fe = kmod.drift_F_eps(kernel, alpha, eps, x, settings)
            pe = solve_cell_problem(A, Fe)
            out.phi_eps[eps] = pe
            out.residual_phi_eps[eps] = residual(A, pe, _prepare_rhs(Fe))
            out.rhs[f"phi_eps[{eps!r}]"] = Fe
    return out
