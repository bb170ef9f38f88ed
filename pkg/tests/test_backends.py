"""The numpy fallback and the numba kernels must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from stablehomog import _accel

PROBE = r"""
import sys
import numpy as np
from stablehomog import _accel, discretize as D, kernel as K, mc
k = K.additive_cosine()
A = D.assemble_domain_generator(k, 1 / 16, D.DomainGrid(-1, 1, 127), 1.5)
B = D.assemble_domain_generator(k, 1 / 8, D.DomainGrid(-1, 1, 63), 0.5)
T = D.assemble_torus_generator(K.product_cosine(), D.TorusGrid(32), 1.0)
kill = D.killing_rate(0.3, k, 1 / 8, 1.2, (-1, 1))
est = mc.feynman_kac_estimate(B, np.ones(B.n), 31, 2000, seed=9)
np.savez(sys.argv[1], A=A.entries, B=B.entries, T=T.entries, kill=kill,
         mean=est.mean, backend=_accel.BACKEND)
"""


def _probe(path, backend):
    env = dict(os.environ, STABLEHOMOG_BACKEND=backend)
    res = subprocess.run([sys.executable, "-c", PROBE, str(path)], env=env,
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return np.load(path)


@pytest.mark.skipif(_accel.numba is None, reason="numba unavailable")
def test_numpy_and_numba_agree(tmp_path):
    a = _probe(tmp_path / "nb.npz", "numba")
    b = _probe(tmp_path / "np.npz", "numpy")
    assert str(a["backend"]) == "numba" and str(b["backend"]) == "numpy"
    for key in ("A", "B", "T"):
        scale = np.abs(a[key]).max()
        assert np.abs(a[key] - b[key]).max() < 1e-12 * scale, key
    assert float(a["kill"]) == pytest.approx(float(b["kill"]), rel=1e-13)
    # the counter RNG makes the simulated chains identical, not merely close
    assert float(a["mean"]) == float(b["mean"])
