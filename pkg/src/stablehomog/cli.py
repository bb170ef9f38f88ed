"""Command line entry point: ``stablehomog <subcommand> CONFIG --out DIR``.

Exit status 0 when every verdict passes, 1 when any fails, 2 on
infrastructure errors (bad config, I/O, unexpected exceptions).
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import config as C
from . import experiments as E
from .cell import compute_correctors, semigroup_oracle
from .dirichlet import solve_generator
from .discretize import DomainGrid, TorusGrid, assemble_domain_generator, assemble_torus_generator
from .kernel import QuadratureSettings, kernel_from_config, validate_kernel
from . import kernel as kmod
from . import mc

log = logging.getLogger("stablehomog")


class _Infra(Exception):
    pass


def _settings(cfg):
    try:
        return QuadratureSettings(**C.section(cfg, "quadrature"))
    except TypeError as exc:
        raise C.ConfigError(f"bad quadrature settings: {exc}") from exc


def _kernel(cfg):
    return kernel_from_config(cfg.get("kernel", "additive-cosine"))


def _study_configs(cfg):
    out = []
    for a in C.alphas(cfg):
        c = dict(cfg)
        c.pop("alphas", None)
        c["alpha"] = a
        out.append(E.StudyConfig.from_mapping(c))
    return out


def _emit(line):
    print(line, flush=True)


# --------------------------------------------------------------------------

def cmd_validate_kernel(cfg, out):
    """Check kernel bounds, symmetry, periodicity and Kbar."""
    spec = _kernel(cfg)
    rep = validate_kernel(spec, n_samples=int(cfg.get("n_samples", 1024)))
    data = rep.as_dict()
    data["k_bar"] = kmod.k_bar(spec)
    E.write_json(data, os.path.join(out, "kernel_validation.json"))
    _emit(f"kernel {spec.name}: symmetry {rep.symmetry_defect:.2e} periodicity "
          f"{rep.periodicity_defect:.2e} range [{rep.k_min:.4g}, {rep.k_max:.4g}] "
          f"K-bar {data['k_bar']:.12g} -> {'PASS' if rep.passed else 'FAIL'}")
    return rep.passed


def cmd_cell_problem(cfg, out):
    """Solve the periodic cell problems and compare with the semigroup oracle."""
    spec = _kernel(cfg)
    settings = _settings(cfg)
    opts = C.section(cfg, "cell")
    grid = TorusGrid(int(cfg.get("torus_points", 128)))
    eps_list = [float(e) for e in cfg.get("eps_list", [1 / 4, 1 / 8, 1 / 16, 1 / 32])]
    ok = True
    report = []
    for a in C.alphas(cfg):
        A = assemble_torus_generator(spec, grid, a, settings=settings)
        cc = compute_correctors(spec, a, eps_list, grid, A=A, settings=settings)
        entry = {"alpha": a, "n_torus": grid.n_points, "checks": {}}
        fields = [("psi", cc.psi, cc.rhs["psi"])]
        if cc.phi is not None:
            fields.append(("phi", cc.phi, cc.rhs["phi"]))
        for e, v in cc.phi_eps.items():
            fields.append((f"phi_eps[{e:g}]", v, cc.rhs[f"phi_eps[{e!r}]"]))
        for name, sol, rhs in fields:
            scale = float(np.max(np.abs(rhs))) or 1.0
            chk = {"mean": float(grid.spacing * np.sum(sol)),
                   "residual_rel": float(np.max(np.abs(A.entries @ sol + rhs - np.mean(rhs)))) / scale,
                   "rhs_mean": float(np.mean(rhs))}
            if opts.get("oracle", True):
                orc = semigroup_oracle(A, rhs, float(opts.get("horizon", 40.0)),
                                       float(opts.get("dt", 0.01)))
                chk["oracle_diff"] = float(np.max(np.abs(orc - sol)))
            chk["pass"] = (abs(chk["mean"]) < 1e-10 and chk["residual_rel"] < 1e-8
                           and chk.get("oracle_diff", 0.0) < 1e-6)
            ok &= chk["pass"]
            entry["checks"][name] = chk
            _emit(f"alpha={a:g} {name}: mean {chk['mean']:.1e} residual {chk['residual_rel']:.1e} "
                  f"oracle {chk.get('oracle_diff', float('nan')):.1e} -> "
                  f"{'PASS' if chk['pass'] else 'FAIL'}")
        report.append(entry)
        for e in (eps_list if cc.phi is None and cc.phi_eps else [None]):
            tag = f"alpha{a:g}" + ("" if e is None else f"_eps{e:g}")
            cc.to_csv(os.path.join(out, f"correctors_{tag}.csv"), eps=e)
    E.write_json({"kernel": spec.name, "results": report,
                  "environment": E.environment_fingerprint()},
                 os.path.join(out, "cell_problem.json"))
    return ok


def cmd_solve(cfg, out):
    """Solve one Dirichlet problem (oscillating or homogenised)."""
    spec = _kernel(cfg)
    settings = _settings(cfg)
    a = C.alphas(cfg)[0]
    opts = C.section(cfg, "solve")
    eps = opts.get("eps", 0.125)
    eps = None if eps is None else float(eps)
    dom = tuple(float(v) for v in cfg.get("domain", (-1.0, 1.0)))
    grid_opts = C.section(cfg, "grid")
    if "n_interior" in grid_opts:
        grid = DomainGrid(dom[0], dom[1], int(grid_opts["n_interior"]))
    else:
        grid = DomainGrid.with_spacing(dom[0], dom[1], (eps or 0.125) / float(grid_opts.get("ratio", 16)))
    rhs_name = cfg.get("rhs", "poly3")
    if rhs_name not in E.RHS_FUNCTIONS:
        raise C.ConfigError(f"unknown rhs {rhs_name!r}")
    h = E.RHS_FUNCTIONS[rhs_name](grid.nodes)
    A = assemble_domain_generator(spec, eps, grid, a, settings)
    sol = solve_generator(A, h)
    sol.to_csv(os.path.join(out, "solution.csv"))
    # maximum principle: h >= 0 here gives u <= 0 (A u = h with A an M-matrix negative)
    mp = bool(np.all(sol.u <= 1e-10)) if np.all(h >= 0) else True
    ok = mp and np.all(np.isfinite(sol.u))
    E.write_json({"kernel": spec.name, "alpha": a, "eps": eps, "n_interior": grid.n_interior,
                  "residual": sol.residual, "condition_estimate": sol.condition_estimate,
                  "factor_seconds": sol.factor_seconds, "maximum_principle": mp, "pass": bool(ok)},
                 os.path.join(out, "solve.json"))
    _emit(f"solve alpha={a:g} eps={eps} n={grid.n_interior}: residual {sol.residual:.2e} "
          f"cond {sol.condition_estimate:.2e} -> {'PASS' if ok else 'FAIL'}")
    return ok


def _run_study(cfg, out, runner, stem):
    ok = True
    summary = []
    for sc in _study_configs(cfg):
        tag = f"{stem}_alpha{sc.alpha:g}"
        try:
            rep = runner(sc)
        except E.StudyError as exc:
            _emit(f"{stem} alpha={sc.alpha:g}: FAIL at stage {exc.stage}: {exc}")
            summary.append({"alpha": sc.alpha, "verdict": "fail", "stage": exc.stage,
                            "error": str(exc)})
            ok = False
            continue
        E.write_convergence_csv(rep, os.path.join(out, tag + ".csv"))
        E.write_json(rep.as_dict(), os.path.join(out, tag + ".json"))
        slope = "exact" if rep.exact_match else f"{rep.fitted_slope:.4f} +- {rep.slope_std_error:.4f}"
        _emit(f"{stem} alpha={sc.alpha:g} kernel={rep.kernel}: slope {slope} vs exponent "
              f"{rep.theoretical_exponent:g} - {rep.tolerance:g} -> {rep.verdict.upper()}")
        summary.append({"alpha": sc.alpha, "verdict": rep.verdict, "slope": rep.fitted_slope})
        ok &= rep.passed
    E.write_json(summary, os.path.join(out, f"{stem}_summary.json"))
    return ok


def cmd_converge(cfg, out):
    """L1 homogenisation rate study over the eps sweep."""
    return _run_study(cfg, out, E.run_theorem1_study, "convergence")


def cmd_interior_converge(cfg, out):
    """L2 rate study with a compactly supported homogenised solution."""
    cfg = dict(cfg)
    cfg.setdefault("rhs", "bump")
    return _run_study(cfg, out, E.run_theorem2_study, "interior_convergence")


def cmd_corrector_diagnostic(cfg, out):
    """Two-scale corrector diagnostic (informational).

    The exit status only reflects whether the runs completed.
    """
    for sc in _study_configs(cfg):
        diag = E.run_corrector_diagnostic(sc)
        tag = f"alpha{sc.alpha:g}"
        E.write_json(diag.as_dict(), os.path.join(out, f"corrector_diagnostic_{tag}.json"))
        for ex in diag.expansions:
            ex.to_csv(os.path.join(out, f"addends_{tag}_eps{ex.eps:g}.csv"))
        diag.correctors.to_csv(os.path.join(out, f"correctors_{tag}.csv"),
                               eps=sc.eps_list[-1])
        for e, ue, ve in zip(diag.eps, diag.ubar_l1, diag.v_l1):
            _emit(f"alpha={sc.alpha:g} eps={e:g}: |u-ubar|_1 {ue:.4e}  |u-v|_1 {ve:.4e}")
        _emit(f"alpha={sc.alpha:g}: v error <= ubar error at smallest eps: "
              f"{'yes' if diag.passed else 'no'} (informational)")
    return True


def cmd_mc_check(cfg, out):
    """Feynman-Kac Monte Carlo against the direct solve at spot nodes."""
    spec = _kernel(cfg)
    settings = _settings(cfg)
    opts = C.section(cfg, "mc")
    eps = float(opts.get("eps", 0.125))
    grid = DomainGrid.with_spacing(-1.0, 1.0, eps / float(opts.get("grid_ratio", 4)))
    paths = int(opts.get("paths", 100_000))
    seed = int(cfg.get("seed", 0))
    ok = True
    reports = []
    for a in C.alphas(cfg):
        A = assemble_domain_generator(spec, eps, grid, a, settings)
        h = E.RHS_FUNCTIONS[cfg.get("rhs", "poly3")](grid.nodes)
        rep = mc.mc_check(A, h, mc.spot_nodes(grid.n_interior, int(opts.get("nodes", 5))),
                          paths, seed)
        rep.update({"alpha": a, "eps": eps, "kernel": spec.name, "n_interior": grid.n_interior})
        for r in rep["nodes"]:
            _emit(f"alpha={a:g} node {r['node']} x={r['x']:+.4f}: direct {r['direct']:.6e} "
                  f"mc {r['mean']:.6e} +- {r['std_error']:.1e} z={r['z_score']:+.2f}")
        ok &= rep["pass"]
        reports.append(rep)
    mc.write_json({"results": reports, "environment": E.environment_fingerprint()},
                  os.path.join(out, "mc_check.json"))
    _emit(f"mc-check -> {'PASS' if ok else 'FAIL'}")
    return ok


COMMANDS = {
    "validate-kernel": cmd_validate_kernel,
    "cell-problem": cmd_cell_problem,
    "solve": cmd_solve,
    "converge": cmd_converge,
    "interior-converge": cmd_interior_converge,
    "corrector-diagnostic": cmd_corrector_diagnostic,
    "mc-check": cmd_mc_check,
}


def build_parser():
    p = argparse.ArgumentParser(prog="stablehomog", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).splitlines()[0])
        sp.add_argument("config", help="YAML configuration file")
        sp.add_argument("--out", default="out", help="artifact directory (created if missing)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = C.load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        ok = COMMANDS[args.command](cfg, args.out)
    except (C.ConfigError, kmod.KernelError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except E.StudyError as exc:
        print(f"study failed: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:   # unexpected: infrastructure
        log.exception("unexpected failure")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
