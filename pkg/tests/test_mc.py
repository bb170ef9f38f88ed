import numpy as np
import pytest
from scipy import stats

from stablehomog import _kernels
from stablehomog import dirichlet as Di
from stablehomog import discretize as D
from stablehomog import mc


def toy(rate):
    return D.GeneratorMatrix(np.array([[-rate]]), "killed-domain", 1.0, 1.0, np.zeros(1))


def test_pure_killing_exponential_law():
    est = mc.feynman_kac_estimate(toy(4.0), np.ones(1), 0, 100_000, seed=3)
    assert abs(est.mean - 0.25) < 3 * est.std_error
    # the sample standard deviation of an exponential equals its mean
    assert est.std_error * np.sqrt(est.n_paths) == pytest.approx(0.25, rel=0.02)


def test_uniforms_are_uniform_and_match_compiled():
    keys = _kernels.path_keys(99, 0, 50_000)
    u = _kernels.uniforms(keys, np.zeros(keys.size, dtype=np.int64))
    assert 0 < u.min() and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-3
    v = _kernels.uniforms(keys, np.ones(keys.size, dtype=np.int64))
    assert abs(np.corrcoef(u, v)[0, 1]) < 0.02
    nb = np.array([_kernels._uniform_nb(k, 0) for k in keys[:100]])
    assert np.array_equal(nb, u[:100])


def test_path_keys_depend_on_seed_and_index():
    a = _kernels.path_keys(1, 0, 10)
    assert np.array_equal(a[5:], _kernels.path_keys(1, 5, 5))
    assert not np.any(a == _kernels.path_keys(2, 0, 10))


@pytest.fixture(scope="module")
def killed(unit):
    return D.assemble_domain_generator(unit, 0.25, D.DomainGrid(-1, 1, 31), 1.5)


def test_occupation_sums_to_exit_time(killed):
    for seed in range(5):
        t, occ = mc.simulate_exit(killed, 15, seed)
        assert occ.sum() == pytest.approx(t, rel=1e-12)
        assert occ.min() >= 0


def test_exit_time_from_centre(killed):
    t = Di.expected_exit_time(killed)
    est = mc.feynman_kac_estimate(killed, np.ones(killed.n), 15, 100_000, seed=11)
    assert abs(est.mean - t[15]) < 3 * est.std_error


def test_zero_rhs_is_exactly_zero(killed):
    est = mc.feynman_kac_estimate(killed, np.zeros(killed.n), 4, 1000, seed=1)
    assert est.mean == 0.0 and est.std_error == 0.0


def test_seed_reproducibility(killed):
    h = np.cos(killed.nodes)
    a = mc.feynman_kac_estimate(killed, h, 7, 2000, seed=123)
    b = mc.feynman_kac_estimate(killed, h, 7, 2000, seed=123)
    c = mc.feynman_kac_estimate(killed, h, 7, 2000, seed=124)
    assert a.mean == b.mean and a.std_error == b.std_error
    assert a.mean != c.mean


def test_fuse_aborts(killed):
    with pytest.raises(mc.PathFuseError):
        mc.feynman_kac_estimate(killed, np.ones(killed.n), 15, 1000, seed=0, fuse=2)


def test_argument_checks(killed):
    with pytest.raises(ValueError):
        mc.feynman_kac_estimate(killed, np.ones(killed.n), 0, 10, seed=0)
    with pytest.raises(IndexError):
        mc.simulate_exit(killed, killed.n, 0)
    with pytest.raises(ValueError):
        mc.chain_tables(D.GeneratorMatrix(np.zeros((2, 2)), "torus", 1.0, 0.5, np.zeros(2)))


def test_chain_tables_rows(killed):
    cum, rates = mc.chain_tables(killed)
    assert cum.shape == (killed.n, killed.n + 1)
    assert np.all(np.diff(cum, axis=1) >= -1e-15) and np.all(cum[:, -1] == 1.0)
    kill = 1 - cum[:, -2]
    assert np.allclose(kill * rates, killed.killing_rates, rtol=1e-9)


def test_oscillating_feynman_kac(additive):
    A = D.assemble_domain_generator(additive, 1 / 8, D.DomainGrid(-1, 1, 63), 1.5)
    h = (1 - A.nodes ** 2) ** 3
    rep = mc.mc_check(A, h, [31], 100_000, seed=5)
    assert rep["pass"], rep


def test_exit_time_sweep(unit, additive):
    g = D.DomainGrid(-1, 1, 255)
    rep = mc.exit_time_sweep(unit, 1.5, [1 / 4, 1 / 8, 1 / 16, 1 / 32], g)
    assert rep["ratio"] == pytest.approx(1.0, abs=1e-10) and rep["pass"]
    rep = mc.exit_time_sweep(additive, 1.5, [1 / 4, 1 / 8, 1 / 16, 1 / 32], g)
    assert rep["pass"] and rep["ratio"] < 1.5


def test_doubling_kernel_halves_exit_times(additive):
    g = D.DomainGrid(-1, 1, 63)
    t1 = Di.expected_exit_time(D.assemble_domain_generator(additive, 1 / 8, g, 1.0))
    t2 = Di.expected_exit_time(D.assemble_domain_generator(additive.scaled(2.0), 1 / 8, g, 1.0))
    assert np.allclose(t2, t1 / 2, rtol=1e-10)
