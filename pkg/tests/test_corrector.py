import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stablehomog import cell as C
from stablehomog import corrector as Co
from stablehomog import dirichlet as Di
from stablehomog import discretize as D


def test_smoothstep_endpoints_and_symmetry():
    assert Co.smoothstep9(0.0) == 0.0 and Co.smoothstep9(1.0) == pytest.approx(1.0, abs=1e-15)
    assert Co.smoothstep9(0.5) == pytest.approx(0.5, abs=1e-15)
    t = np.linspace(0, 1, 101)
    assert np.allclose(Co.smoothstep9(t) + Co.smoothstep9(1 - t), 1.0, atol=1e-14)
    assert np.all(np.diff(Co.smoothstep9(t)) >= 0)


def test_smoothstep_flat_to_fourth_order():
    # S(t) = O(t^5) at 0, so its first four derivatives vanish there
    for t in (1e-2, 1e-3):
        assert Co.smoothstep9(t) < 200 * t ** 5


@given(st.floats(-1.0, 1.0))
@settings(max_examples=80, deadline=None)
def test_cutoff_bounds(x):
    v = Co.eval_cutoff(x, 0.1)
    assert 0.0 <= v <= 1.0


def test_cutoff_examples():
    assert Co.eval_cutoff(0.0, 0.1) == 1.0
    assert Co.eval_cutoff(0.95, 0.1) == 0.0
    assert Co.eval_cutoff(0.85, 0.1) == pytest.approx(0.5, abs=1e-14)
    assert Co.eval_cutoff(-0.85, 0.1) == pytest.approx(0.5, abs=1e-14)
    assert Co.eval_cutoff(0.79, 0.1) == 1.0
    with pytest.raises(ValueError):
        Co.eval_cutoff(0.0, 0.3)


def test_cutoff_derivative_scaling():
    # finite-difference derivatives scale like eps^-k with one constant across eps
    consts = []
    for eps in (1 / 4, 1 / 8, 1 / 16, 1 / 32):
        # spacing tied to eps so every transition zone is sampled alike
        h = eps / 400
        x = -1 + h * np.arange(int(round(2 / h)) + 1)
        eta = Co.eval_cutoff(x, eps)
        row = []
        d = eta
        for k in range(1, 5):
            d = np.diff(d) / h
            row.append(np.abs(d).max() * eps ** k)
        consts.append(row)
    consts = np.array(consts)
    assert np.all(consts.max(axis=0) / consts.min(axis=0) < 1.01)


@pytest.fixture(scope="module")
def setup(additive):
    g = D.DomainGrid(-1, 1, 255)
    Abar = D.assemble_domain_generator(additive, None, g, 1.5)
    ubar = Di.solve_generator(Abar, (1 - g.nodes ** 2) ** 3).u
    return g, Abar, ubar


def test_constant_kernel_expansion_is_truncation(unit, setup):
    g, _, _ = setup
    Abar = D.assemble_domain_generator(unit, None, g, 1.5)
    ubar = Di.solve_generator(Abar, (1 - g.nodes ** 2) ** 3).u
    cc = C.compute_correctors(unit, 1.5, [1 / 8], D.TorusGrid(32))
    ex = Co.assemble_v_eps(ubar, cc, 1.5, 1 / 8, g, Abar)
    assert np.abs(ex.gradient_term).max() < 1e-12 and np.abs(ex.zero_order_term).max() < 1e-12
    assert np.array_equal(ex.truncated, ubar * Co.eval_cutoff(g.nodes, 1 / 8))


def test_addends_sum_and_support(additive, setup):
    g, Abar, ubar = setup
    cc = C.compute_correctors(additive, 1.5, [1 / 8], D.TorusGrid(64))
    ex = Co.assemble_v_eps(ubar, cc, 1.5, 1 / 8, g, Abar)
    assert np.abs(ex.v - (ex.truncated + ex.gradient_term + ex.zero_order_term)).max() < 1e-15
    off = ex.eta == 0
    assert np.all(ex.truncated[off] == 0) and np.all(ex.zero_order_term[off] == 0)
    assert np.abs(ex.gradient_term).max() > 0


def test_expansion_improves_interior_residual(additive, setup):
    # the corrector terms cancel the O(eps^(1-alpha)) residual of u_bar deep inside D
    g, Abar, ubar = setup
    eps = 1 / 16
    cc = C.compute_correctors(additive, 1.5, [eps], D.TorusGrid(128))
    ex = Co.assemble_v_eps(ubar, cc, 1.5, eps, g, Abar)
    Ae = D.assemble_domain_generator(additive, eps, g, 1.5)
    h = (1 - g.nodes ** 2) ** 3
    m = np.abs(g.nodes) < 0.5
    r_bar = np.abs(Ae.entries @ ubar - h)[m].max()
    r_v = np.abs(Ae.entries @ ex.v - h)[m].max()
    assert r_v < 0.2 * r_bar


def test_regime_mismatch(additive, setup):
    g, Abar, ubar = setup
    cc = C.compute_correctors(additive, 0.5, [1 / 8], D.TorusGrid(32))
    with pytest.raises(C.CellProblemError):
        Co.assemble_v_eps(ubar, cc, 1.5, 1 / 8, g, Abar)
    with pytest.raises(C.CellProblemError):
        Co.assemble_v_eps(ubar, cc, 0.5, 1 / 16, g, Abar)


def test_grid_mismatch(additive, setup):
    g, Abar, ubar = setup
    cc = C.compute_correctors(additive, 1.5, [1 / 8], D.TorusGrid(32))
    with pytest.raises(ValueError):
        Co.assemble_v_eps(ubar[:-1], cc, 1.5, 1 / 8, g, Abar)


def test_periodic_sampler_reproduces_nodes():
    nodes = np.arange(32) / 32
    vals = np.sin(2 * np.pi * nodes)
    s = Co.periodic_sampler(nodes, vals)
    assert np.allclose(s(nodes + 3.0), vals, atol=1e-14)
    assert np.allclose(s(np.array([0.123])), np.sin(2 * np.pi * 0.123), atol=1e-5)


def test_addends_csv(tmp_path, additive, setup):
    g, Abar, ubar = setup
    cc = C.compute_correctors(additive, 1.5, [1 / 8], D.TorusGrid(32))
    ex = Co.assemble_v_eps(ubar, cc, 1.5, 1 / 8, g, Abar)
    p = tmp_path / "a.csv"
    ex.to_csv(p)
    assert p.read_text().splitlines()[0] == "x,u_bar_eps,gradient_term,zero_order_term,v_eps"
