"""Monte Carlo simulation of the killed Markov chain behind a generator matrix.

The chain simulated is the discrete one, so agreement with the linear solves
checks the solver through an independent pathway, not the discretisation.
"""

from dataclasses import asdict, dataclass
import json
import logging
import time

import numpy as np

from . import _kernels
from .dirichlet import expected_exit_time, solve_generator
from .discretize import GeneratorMatrix, assemble_domain_generator

log = logging.getLogger(__name__)

FUSE = 10_000_000


class PathFuseError(RuntimeError):
    pass


@dataclass
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    seed: int
    elapsed: float


def chain_tables(A: GeneratorMatrix):
    """Total rates ``|A_ii|`` and cumulative jump rows over ``n`` targets plus killing."""
    if A.kind != "killed-domain":
        raise ValueError(f"expected a killed-domain generator, got {A.kind}")
    M = A.entries
    rates = -np.diag(M).copy()
    if not np.all(rates > 0):
        raise ValueError("every state needs a positive total rate")
    probs = np.clip(M, 0.0, None)
    np.fill_diagonal(probs, 0.0)
    kill = np.clip(rates - probs.sum(axis=1), 0.0, None)
    table = np.hstack([probs, kill[:, None]]) / rates[:, None]
    cum = np.cumsum(table, axis=1)
    cum[:, -1] = 1.0
    return cum, rates


def _check_start(A, start):
    if not 0 <= int(start) < A.n:
        raise IndexError(f"start node {start} outside 0..{A.n - 1}")


def _run(A, h, start, seed, first_path, n_paths, occupation=None, fuse=FUSE):
    cum, rates = chain_tables(A)
    keys = _kernels.path_keys(int(seed), int(first_path), int(n_paths))
    times, integrals, events = _kernels.simulate_paths(cum, rates, h, start, keys, fuse, occupation)
    if np.any(events >= fuse):
        bad = int(np.argmax(events >= fuse))
        raise PathFuseError(f"path {first_path + bad} from node {start} reached the "
                            f"{fuse}-event fuse (sim time {times[bad]:.4g})")
    return times, integrals


def simulate_exit(A: GeneratorMatrix, start, rng_seed, path_index=0, fuse=FUSE):
    """One path from ``start``: ``(exit_time, occupation_times)``."""
    _check_start(A, start)
    occ = np.zeros(A.n)
    times, _ = _run(A, np.zeros(A.n), start, rng_seed, path_index, 1, occ, fuse)
    return float(times[0]), occ


def feynman_kac_estimate(A: GeneratorMatrix, h, start, n_paths, seed, fuse=FUSE):
    """Mean of ``int_0^tau h(X_s) ds`` from ``start``; targets ``(-A)^{-1} h``."""
    if n_paths < 1000:
        raise ValueError(f"need at least 1000 paths, got {n_paths}")
    _check_start(A, start)
    h = A.check_vector(h)
    t0 = time.perf_counter()
    _, vals = _run(A, h, start, seed, 0, n_paths, fuse=fuse)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(n_paths))
    return McEstimate(mean, se, int(n_paths), int(seed), time.perf_counter() - t0)


def spot_nodes(n, count=5):
    """``count`` evenly spread interior indices, always including the centre."""
    idx = np.unique(np.round(np.linspace(0.15, 0.85, count) * (n - 1)).astype(int))
    return [int(i) for i in idx]


def mc_check(A: GeneratorMatrix, h, nodes, n_paths, seed, z_limit=3.0):
    """Feynman-Kac estimates at ``nodes`` against the direct solve of ``(-A) u = h``."""
    u = solve_generator(A, -np.asarray(h, dtype=float)).u
    rows = []
    for i in nodes:
        est = feynman_kac_estimate(A, h, i, n_paths, seed)
        if est.std_error > 0:
            z = (est.mean - u[i]) / est.std_error
        else:
            z = 0.0 if est.mean == u[i] else np.inf
        rows.append({"node": int(i), "x": float(A.nodes[i]), "direct": float(u[i]),
                     **asdict(est), "z_score": float(z), "pass": bool(abs(z) <= z_limit)})
    return {"n_paths": int(n_paths), "seed": int(seed), "z_limit": z_limit,
            "nodes": rows, "pass": all(r["pass"] for r in rows)}


def exit_time_sweep(kernel, alpha, eps_list, grid, settings=None, mc_paths=0, seed=0,
                    ratio_limit=1.5):
    """Sup expected exit time per eps; pass iff max/min <= ``ratio_limit``."""
    kw = {} if settings is None else {"settings": settings}
    rows = []
    for eps in eps_list:
        A = assemble_domain_generator(kernel, eps, grid, alpha, **kw)
        t = expected_exit_time(A)
        i = int(np.argmax(t))
        row = {"eps": float(eps), "sup_exit_time": float(t[i]), "argmax_x": float(A.nodes[i])}
        if mc_paths:
            est = feynman_kac_estimate(A, np.ones(A.n), i, mc_paths, seed)
            row["mc_mean"] = est.mean
            row["mc_std_error"] = est.std_error
            row["mc_z_score"] = (est.mean - t[i]) / est.std_error
        rows.append(row)
    sup = np.array([r["sup_exit_time"] for r in rows])
    ratio = float(sup.max() / sup.min())
    return {"alpha": float(alpha), "kernel": kernel.name, "rows": rows, "ratio": ratio,
            "ratio_limit": ratio_limit, "pass": ratio <= ratio_limit}


def write_json(report, path):
    with open(path, "w", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
