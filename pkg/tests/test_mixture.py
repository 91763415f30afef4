import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate as sp_integrate

from heatflow.mixture import (
    FlowedMixture,
    MixtureSpec,
    density,
    density_t_derivative,
    density_x_derivative,
    hermite_he,
    log_density,
    moments,
    t_derivative_ratios,
    x_derivative_ratios,
)

ASYM = MixtureSpec.from_components([(0.3, -1.0, 0.5), (0.7, 2.0, 2.0)])
TRIMODAL = MixtureSpec.from_components([(0.25, -2.0, 0.3), (0.5, 0.0, 1.0), (0.25, 2.5, 0.6)])


def mp_density(spec, x, t):
    # independent arbitrary-precision evaluation of the flowed mixture
    return mp.fsum(
        mp.mpf(w) * mp.npdf(x, mp.mpf(m), mp.sqrt(mp.mpf(v) + t))
        for w, m, v in spec.components
    )


# --- construction ---------------------------------------------------------


def test_spec_validation_names_component():
    with pytest.raises(ValueError, match="component 1: variance"):
        MixtureSpec((0.5, 0.5), (0.0, 1.0), (1.0, -1.0))
    with pytest.raises(ValueError, match="component 0: weight"):
        MixtureSpec((0.0, 1.0), (0.0, 1.0), (1.0, 1.0))
    with pytest.raises(ValueError, match="at least one"):
        MixtureSpec((), (), ())
    with pytest.raises(ValueError, match="equal length"):
        MixtureSpec((1.0,), (0.0, 1.0), (1.0,))


def test_weights_normalized():
    spec = MixtureSpec((1.0, 3.0), (0.0, 1.0), (1.0, 1.0))
    assert spec.weights == (0.25, 0.75)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        MixtureSpec.gaussian().at(-0.1)


# --- density --------------------------------------------------------------


def test_density_examples():
    assert density(MixtureSpec.gaussian().at(0.0), 0.0) == pytest.approx(0.3989422804014327, rel=1e-14)
    assert density(MixtureSpec.gaussian().at(3.0), 0.0) == pytest.approx(1 / math.sqrt(8 * math.pi), rel=1e-14)
    two = MixtureSpec.from_components([(0.5, -1.0, 1.0), (0.5, 1.0, 1.0)])
    assert density(two.at(0.0), 0.0) == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-14)
    assert density(two.at(0.0), 0.0) == pytest.approx(0.2419707, abs=1e-7)


def test_density_is_vectorized_and_positive_in_far_tails():
    x = np.array([-60.0, 0.0, 60.0])
    p = density(ASYM.at(0.5), x)
    assert p.shape == (3,)
    assert np.all(p >= 0)
    # log density stays finite where the density underflows
    assert np.all(np.isfinite(log_density(ASYM.at(0.0), np.array([-500.0, 500.0]))))


@pytest.mark.parametrize("spec", [MixtureSpec.gaussian(), ASYM, TRIMODAL])
@pytest.mark.parametrize("t", [0.0, 0.3, 2.0])
def test_normalization(spec, t):
    fm = spec.at(t)
    val, _ = sp_integrate.quad(lambda x: density(fm, x), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_density_matches_high_precision():
    rng = np.random.default_rng(3)
    for x, t in zip(rng.uniform(-5, 5, 10), rng.uniform(0, 3, 10)):
        assert density(TRIMODAL.at(t), x) == pytest.approx(float(mp_density(TRIMODAL, x, t)), rel=1e-13)


# --- x derivatives --------------------------------------------------------


def test_hermite_values():
    he = hermite_he(4, np.array([0.0, 1.0, 2.0]))
    np.testing.assert_allclose(he[2], [-1.0, 0.0, 3.0])
    np.testing.assert_allclose(he[3], [0.0, -2.0, 2.0])
    np.testing.assert_allclose(he[4], [3.0, -2.0, -5.0])


def test_x_derivative_examples():
    fm = MixtureSpec.gaussian().at(0.0)
    assert density_x_derivative(fm, 0.3, 0) == pytest.approx(density(fm, 0.3), rel=1e-15)
    assert density_x_derivative(fm, 0.0, 1) == 0.0
    assert density_x_derivative(fm, 0.0, 2) == pytest.approx(-1 / math.sqrt(2 * math.pi), rel=1e-14)


@pytest.mark.parametrize("n", range(1, 7))
def test_x_derivative_matches_finite_differences(n):
    rng = np.random.default_rng(10 + n)
    mp.mp.dps = 40
    for _ in range(4):
        x, t = rng.uniform(-4, 4), rng.uniform(0, 2)
        ref = mp.diff(lambda u: mp_density(TRIMODAL, u, mp.mpf(t)), mp.mpf(x), n)
        got = density_x_derivative(TRIMODAL.at(t), x, n)
        assert got == pytest.approx(float(ref), rel=1e-6, abs=1e-12)


def test_x_derivative_ratios_consistent_with_derivatives():
    fm = ASYM.at(0.4)
    x = np.linspace(-6, 8, 15)
    ratios = x_derivative_ratios(fm, x, 6)
    p = density(fm, x)
    for j in range(7):
        np.testing.assert_allclose(ratios[j] * p, density_x_derivative(fm, x, j), rtol=1e-12, atol=1e-300)


def test_ratios_finite_where_density_underflows():
    ratios = x_derivative_ratios(ASYM.at(0.0), np.array([-80.0, 90.0]), 8)
    assert np.all(np.isfinite(ratios))


# --- t derivatives --------------------------------------------------------


def test_t_derivative_is_heat_equation():
    fm = TRIMODAL.at(0.7)
    x = np.linspace(-4, 4, 9)
    assert density_t_derivative(fm, 0.5, 0) == pytest.approx(density(fm, 0.5))
    np.testing.assert_allclose(density_t_derivative(fm, x, 1), 0.5 * density_x_derivative(fm, x, 2), rtol=1e-15)


def test_t_derivative_gaussian_closed_form():
    # p_t(0) = (2 pi (1 + t))^{-1/2}, so d/dt at t = 0 is -1 / (2 sqrt(2 pi))
    val = density_t_derivative(MixtureSpec.gaussian().at(0.0), 0.0, 1)
    assert val == pytest.approx(-0.5 / math.sqrt(2 * math.pi), rel=1e-14)
    assert val == pytest.approx(-0.19947, abs=1e-5)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_t_derivative_matches_finite_differences_in_t(k):
    rng = np.random.default_rng(20 + k)
    mp.mp.dps = 40
    for _ in range(4):
        x, t = rng.uniform(-4, 4), rng.uniform(0.2, 2)
        ref = mp.diff(lambda s: mp_density(ASYM, mp.mpf(x), s), mp.mpf(t), k)
        got = density_t_derivative(ASYM.at(t), x, k)
        assert got == pytest.approx(float(ref), rel=1e-6, abs=1e-12)


def test_t_derivative_ratios():
    fm = ASYM.at(0.2)
    x = np.array([-1.0, 0.5, 3.0])
    r = t_derivative_ratios(fm, x, 3)
    p = density(fm, x)
    for j in range(4):
        np.testing.assert_allclose(r[j] * p, density_t_derivative(fm, x, j), rtol=1e-12)


# --- flow and moments -----------------------------------------------------


def test_semigroup_on_variances():
    t1, t2 = 0.375, 1.25
    twice = ASYM.at(t1).as_spec().at(t2)
    once = ASYM.at(t1 + t2)
    assert tuple(twice.variances) == tuple(once.variances)
    x = np.linspace(-5, 5, 11)
    np.testing.assert_array_equal(density(twice, x), density(once, x))


def test_moments_examples():
    assert moments(MixtureSpec.gaussian()) == (0.0, 1.0)
    a = 1.7
    mean, var = moments(MixtureSpec.from_components([(0.5, -a, 1.0), (0.5, a, 1.0)]))
    assert mean == 0.0
    assert var == pytest.approx(1 + a * a, rel=1e-15)
    mean, var = moments(ASYM)
    assert mean == pytest.approx(1.1, rel=1e-14)
    assert var == pytest.approx(3.44, rel=1e-14)


def test_moments_match_quadrature():
    mean, var = moments(TRIMODAL)
    fm = TRIMODAL.at(0.0)
    m1, _ = sp_integrate.quad(lambda x: x * density(fm, x), -np.inf, np.inf, epsabs=1e-13)
    m2, _ = sp_integrate.quad(lambda x: (x - m1) ** 2 * density(fm, x), -np.inf, np.inf, epsabs=1e-13)
    assert mean == pytest.approx(m1, abs=1e-10)
    assert var == pytest.approx(m2, rel=1e-10)


def test_variance_law():
    for t in (0.0, 0.5, 4.0):
        assert ASYM.at(t).total_variance() == moments(ASYM)[1] + t
        assert moments(ASYM.at(t).as_spec())[1] == pytest.approx(moments(ASYM)[1] + t, rel=1e-15)


def test_long_double_time_keeps_precision():
    fm = FlowedMixture(ASYM, np.longdouble("0.1"))
    assert fm.variances.dtype == np.longdouble
    assert log_density(fm, np.longdouble(0.5)).dtype == np.longdouble
