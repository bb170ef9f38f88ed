import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma

from stablehomog import kernel as K


def sine_integral(alpha, b):
    """int_0^inf z^-alpha sin(b z) dz."""
    return gamma(1 - alpha) * math.sin(math.pi * (1 - alpha) / 2) * b ** (alpha - 1)


def test_builtin_kernels_validate(additive, product, unit):
    for spec in (additive, product, unit):
        rep = K.validate_kernel(spec)
        assert rep.passed, rep
        assert rep.symmetry_defect < 1e-12 and rep.periodicity_defect < 1e-12


def test_validation_flags_asymmetric_kernel():
    bad = K.KernelSpec(evaluate=lambda x, y: 1 + 0.3 * np.cos(2 * np.pi * x),
                       lambda_bound=2.0, name="x-only")
    rep = K.validate_kernel(bad)
    assert not rep.passed and rep.symmetry_defect > 0.1


def test_validation_flags_ellipticity():
    bad = K.KernelSpec(evaluate=lambda x, y: 1 + 0.9 * np.cos(2 * np.pi * (x - y)),
                       lambda_bound=1.5, name="weak")
    assert not K.validate_kernel(bad).passed


def test_validation_needs_samples(unit):
    with pytest.raises(ValueError):
        K.validate_kernel(unit, n_samples=4)


def test_non_positive_kernel_rejected():
    with pytest.raises(K.KernelError):
        K.from_modes([(0, 0, 1.0, 0.0), (1, 1, 1.5, 0.0)], name="negative")


def test_fourier_modes_are_symmetrised():
    spec = K.kernel_from_config({"fourier": [{"p": 2, "q": 0, "amplitude": 0.2},
                                             {"p": 0, "q": 0, "amplitude": 1.0}]})
    x, y = np.meshgrid(np.linspace(0, 1, 7), np.linspace(0, 1, 5))
    assert np.allclose(spec.evaluate(x, y), spec.evaluate(y, x), atol=1e-15)


def test_kernel_from_config_unknown_name():
    with pytest.raises(K.KernelError):
        K.kernel_from_config("no-such-kernel")


def test_k_bar_values(additive, product, unit):
    assert K.k_bar(unit) == pytest.approx(1.0, abs=1e-14)
    assert K.k_bar(additive) == pytest.approx(1.0, abs=1e-13)
    assert K.k_bar(product) == pytest.approx(1.0, abs=1e-13)
    assert K.k_bar(K.constant_kernel(2.5)) == pytest.approx(2.5, abs=1e-13)
    assert K.k_bar(additive) == pytest.approx(additive.mean_value, abs=1e-13)


def test_k_bar_of_x_additive(additive):
    x = np.array([0.0, 0.25, 0.5, 0.1])
    assert np.allclose(K.k_bar_of_x(additive, x), 1 + 0.3 * np.cos(2 * np.pi * x), atol=1e-13)
    # averaging in x again recovers K-bar
    xs = np.linspace(0, 1, 64, endpoint=False)
    assert np.mean(K.k_bar_of_x(additive, xs)) == pytest.approx(1.0, abs=1e-13)


def test_k_bar_of_x_product_is_flat(product):
    assert np.allclose(K.k_bar_of_x(product, np.linspace(0, 1, 9)), 1.0, atol=1e-13)


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_drift_additive_cosine_closed_form(additive, alpha):
    # K(x, x+z) - K(x, x-z) = -0.6 sin(2 pi x) sin(2 pi z)
    x = np.array([0.0, 0.1, 0.25, 0.6])
    expected = -0.6 * np.sin(2 * np.pi * x) * sine_integral(alpha, 2 * np.pi)
    assert np.allclose(K.drift_F(additive, alpha, x), expected, atol=1e-10)
    assert K.drift_F(additive, alpha, 0.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("alpha", [1.3, 1.7])
def test_drift_matches_fourier_oracle(product, alpha):
    x = np.linspace(0, 1, 11)
    assert np.allclose(K.drift_F(product, alpha, x), K.drift_F_fourier(product, alpha, x),
                       atol=1e-10)


def test_drift_vanishes_for_constant_and_product(unit, product):
    assert np.allclose(K.drift_F(unit, 1.5, np.linspace(0, 1, 5)), 0.0, atol=1e-14)
    # 0.25 cos(2pi x) [cos 2pi(x+z) - cos 2pi(x-z)] = -0.25 sin(4pi x) sin(2pi z)
    x = np.array([0.125, 0.3])
    ref = -0.25 * np.sin(4 * np.pi * x) * sine_integral(1.5, 2 * np.pi)
    assert np.allclose(K.drift_F(product, 1.5, x), ref, atol=1e-10)


def test_drift_has_zero_mean(additive, product):
    x = np.arange(64) / 64
    for spec in (additive, product):
        assert abs(np.mean(K.drift_F(spec, 1.5, x))) < 1e-9
        assert abs(np.mean(K.drift_F_eps(spec, 0.5, 0.125, x))) < 1e-9


def test_drift_eps_against_adaptive_quadrature(additive):
    # independent oracle: scipy quad of the truncated integral
    alpha, eps, x = 0.5, 0.1, 0.1
    f = lambda z: z ** -alpha * (-0.6 * math.sin(2 * math.pi * x) * math.sin(2 * math.pi * z))
    ref = integrate.quad(f, 0, 1 / eps, limit=400, epsabs=1e-13, epsrel=1e-13)[0]
    assert K.drift_F_eps(additive, alpha, eps, x) == pytest.approx(ref, rel=1e-9)


def test_drift_eps_tends_to_full_sine_integral(additive):
    # for alpha < 1 the untruncated integral converges; truncation error ~ eps^alpha
    x = 0.2
    full = -0.6 * math.sin(2 * math.pi * x) * sine_integral(0.5, 2 * math.pi)
    d1 = abs(K.drift_F_eps(additive, 0.5, 1 / 16, x) - full)
    d2 = abs(K.drift_F_eps(additive, 0.5, 1 / 256, x) - full)
    assert d2 < d1


def test_drift_alpha_ranges(additive):
    with pytest.raises(ValueError):
        K.drift_F(additive, 1.0, 0.1)
    with pytest.raises(ValueError):
        K.drift_F_eps(additive, 1.5, 0.1, 0.1)
    with pytest.raises(ValueError):
        K.drift_F_eps(additive, 0.5, 1.5, 0.1)
    # alpha = 1 is admitted for the truncated drift
    K.drift_F_eps(additive, 1.0, 0.25, 0.1)


def test_scaled_kernel(additive):
    two = additive.scaled(2.0)
    x = np.linspace(0, 1, 5)
    assert np.allclose(two.evaluate(x, x[::-1]), 2 * additive.evaluate(x, x[::-1]))
