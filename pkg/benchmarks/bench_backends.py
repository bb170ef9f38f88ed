"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the backend is fixed at
import time by ``STABLEHOMOG_BACKEND``. Usage::

    python3 benchmarks/bench_backends.py [--n 511] [--paths 20000] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

PROBE = r"""
import json, sys, time
import numpy as np
import stablehomog as sh
from stablehomog import _accel, discretize as D, mc

n, paths, repeat = (int(v) for v in sys.argv[1:4])
spec = sh.kernel_from_config("additive-cosine")
grid = D.DomainGrid(-1, 1, n)


def best(fn):
    fn()  # warm-up, includes jit compilation
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = fn()
        out.append(time.perf_counter() - t0)
    return min(out), res


t_dom, A = best(lambda: D.assemble_domain_generator(spec, 1 / 8, grid, 1.5))
t_tor, _ = best(lambda: D.assemble_torus_generator(spec, D.TorusGrid(128), 1.5))
h = np.ones(A.n)
t_mc, est = best(lambda: mc.feynman_kac_estimate(A, h, A.n // 2, paths, seed=1))
print(json.dumps({"backend": _accel.BACKEND, "domain_assembly": t_dom,
                  "torus_assembly": t_tor, "paths": t_mc, "mc_mean": est.mean,
                  "checksum": float(np.abs(A.entries).sum())}))
"""


def run(backend, args):
    env = dict(os.environ, STABLEHOMOG_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", PROBE, str(args.n), str(args.paths),
                          str(args.repeat)], env=env, check=True, capture_output=True,
                         text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=511, help="interior nodes of the domain grid")
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    res = {b: run(b, args) for b in ("numba", "numpy")}
    print(f"{'stage':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for key in ("domain_assembly", "torus_assembly", "paths"):
        a, b = res["numba"][key], res["numpy"][key]
        print(f"{key:<18}{a:12.4f}{b:12.4f}{b / a:10.1f}")
    same_mc = res["numba"]["mc_mean"] == res["numpy"]["mc_mean"]
    rel = abs(res["numba"]["checksum"] / res["numpy"]["checksum"] - 1)
    print(f"MC means identical: {same_mc}; assembly checksum rel. diff {rel:.1e}")
    return 0 if same_mc and rel < 1e-12 else 1


if __name__ == "__main__":
    sys.exit(main())
