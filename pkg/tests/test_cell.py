import numpy as np
import pytest

from stablehomog import cell as C
from stablehomog import discretize as D
from stablehomog import kernel as K

EPS = [1 / 4, 1 / 8, 1 / 16, 1 / 32]


@pytest.fixture(scope="module")
def torus():
    return D.TorusGrid(64)


@pytest.fixture(scope="module")
def gens(torus, additive):
    return {a: D.assemble_torus_generator(additive, torus, a) for a in (0.5, 1.0, 1.5)}


def test_bordered_solve_against_pseudo_inverse(gens, rng):
    A = gens[1.5]
    f = rng.standard_normal(A.n)
    f -= f.mean()
    psi = C.solve_cell_problem(A, f)
    ref = -np.linalg.pinv(A.entries) @ f
    assert np.allclose(psi, ref - ref.mean(), atol=1e-10)
    assert abs(psi.sum()) < 1e-10


def test_nonzero_mean_rejected(gens):
    A = gens[1.0]
    with pytest.raises(C.CellProblemError):
        C.solve_cell_problem(A, np.ones(A.n))


def test_tiny_mean_defect_removed_with_warning(gens, caplog):
    A = gens[1.0]
    f = np.cos(2 * np.pi * A.nodes) + 1e-8
    with caplog.at_level("WARNING"):
        psi = C.solve_cell_problem(A, f)
    assert "mean defect" in caplog.text
    assert np.abs(A.entries @ psi + f - 1e-8).max() < 1e-10


def test_domain_generator_rejected(additive):
    A = D.assemble_domain_generator(additive, None, D.DomainGrid(-1, 1, 15), 1.5)
    with pytest.raises(C.CellProblemError):
        C.solve_cell_problem(A, np.zeros(A.n))


def test_constant_kernel_has_zero_correctors(unit, torus):
    cc = C.compute_correctors(unit, 1.5, EPS, torus)
    assert np.abs(cc.psi).max() < 1e-12 and np.abs(cc.phi).max() < 1e-12
    cc = C.compute_correctors(unit, 0.5, EPS, torus)
    assert all(np.abs(v).max() < 1e-12 for v in cc.phi_eps.values())


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_correctors_residuals_and_oracle(additive, torus, gens, alpha):
    cc = C.compute_correctors(additive, alpha, EPS, torus, A=gens[alpha])
    A = gens[alpha]
    assert np.abs(cc.psi).max() > 1e-3
    assert abs(torus.spacing * cc.psi.sum()) < 1e-10
    assert cc.residual_psi < 1e-8 * np.abs(cc.rhs["psi"]).max()
    orc = C.semigroup_oracle(A, cc.rhs["psi"])
    assert np.abs(orc - cc.psi).max() < 1e-6
    if alpha > 1:
        assert cc.phi is not None and not cc.phi_eps
        assert cc.gradient_norm is not None
        assert np.abs(C.semigroup_oracle(A, cc.rhs["phi"]) - cc.phi).max() < 1e-6
    else:
        assert cc.phi is None and sorted(cc.phi_eps) == sorted(EPS)


def test_additive_cosine_phi_is_not_zero(additive, torus, gens):
    # F(x) = -0.6 sin(2 pi x) * (sine integral) does not vanish, so neither does phi
    cc = C.compute_correctors(additive, 1.5, EPS, torus, A=gens[1.5])
    F = cc.rhs["phi"]
    assert np.allclose(F, K.drift_F_fourier(additive, 1.5, torus.nodes), atol=1e-10)
    assert np.abs(cc.phi).max() > 1e-2
    # psi and phi are driven by cos and sin respectively: phi is odd about 0
    assert np.allclose(cc.phi[1:], -cc.phi[1:][::-1], atol=1e-10)


def test_phi_requested_outside_range(additive, torus):
    with pytest.raises(C.CellProblemError):
        C.compute_correctors(additive, 0.8, EPS, torus, want_phi=True)


def test_first_order_lookup(additive, torus, gens):
    cc = C.compute_correctors(additive, 0.5, EPS, torus, A=gens[0.5])
    assert cc.first_order(1 / 8) is cc.phi_eps[1 / 8]
    with pytest.raises(C.CellProblemError):
        cc.first_order(0.3)


def test_semigroup_decay_factor(gens, rng):
    A = gens[0.5]
    f = np.sin(2 * np.pi * A.nodes)
    _, decay = C.semigroup_oracle(A, f, horizon=5.0, return_decay=True)
    lam = D.smallest_eigenvalue(A)
    # implicit Euler damps the slowest mode by (1 + dt lam)^-steps
    assert decay == pytest.approx((1 + 0.01 * lam) ** -500, rel=1e-3)


def test_semigroup_rejects_growing_operator(gens):
    A = gens[0.5]
    bad = D.GeneratorMatrix(-A.entries, "torus", 0.5, A.spacing, A.nodes)
    with pytest.raises(C.CellProblemError):
        C.semigroup_oracle(bad, np.sin(2 * np.pi * A.nodes), horizon=1.0, dt=1e-4)


def test_csv_export(tmp_path, additive, torus, gens):
    cc = C.compute_correctors(additive, 1.5, EPS, torus, A=gens[1.5])
    p = tmp_path / "c.csv"
    cc.to_csv(p)
    lines = p.read_bytes().split(b"\n")
    assert lines[0] == b"x,psi,phi_or_phi_eps"
    assert len(lines) == torus.n_points + 2 and b"\r" not in p.read_bytes()
