import math

import numpy as np
import pytest
from scipy import integrate

from hyperuni import specfun as sf

from conftest import gegenbauer_ratio


def test_gamma_d_known_values():
    assert math.isclose(sf.gamma_d(1), 1.0 / math.pi, rel_tol=1e-14)
    assert sf.gamma_d(2) == 0.5
    assert math.isclose(sf.gamma_d(3), 2.0 / math.pi, rel_tol=1e-14)


def test_gamma_d_is_reciprocal_polar_integral():
    for d in range(1, 6):
        integral, _ = integrate.quad(lambda t: math.sin(t) ** (d - 1), 0.0, math.pi)
        assert math.isclose(sf.gamma_d(d), 1.0 / integral, rel_tol=1e-12)


def test_gamma_d_rejects_bad_dimension():
    with pytest.raises(ValueError):
        sf.gamma_d(0)
    with pytest.raises(ValueError):
        sf.gamma_d(1.5)


def test_legendre_p_at_one_is_exactly_one():
    for d in (1, 2, 3, 4):
        for n in (0, 1, 2, 5, 17, 50):
            assert sf.legendre_p(d, n, 1.0) == 1.0


def test_legendre_p_degree_one_is_identity():
    xs = np.linspace(-1, 1, 17)
    for d in (1, 2, 3, 4):
        assert np.allclose(sf.legendre_p(d, 1, xs), xs, atol=1e-15)


def test_legendre_p_classical_value():
    # classical Legendre P_2(x) = (3x^2 - 1)/2
    assert math.isclose(sf.legendre_p(2, 2, 0.5), -0.125, abs_tol=1e-15)


def test_legendre_p_matches_gegenbauer_ratio_oracle():
    xs = np.arange(-1.0, 1.0 + 1e-9, 1e-2)
    for d in (1, 2, 3, 4):
        table = sf.legendre_p_table(d, 50, xs)
        for n in range(51):
            oracle = gegenbauer_ratio(d, n, xs)
            assert np.max(np.abs(table[n] - oracle)) < 1e-10, (d, n)


def test_legendre_p_bounded_on_interval():
    xs = np.linspace(-1, 1, 401)
    for d in (1, 2, 3, 4):
        table = sf.legendre_p_table(d, 60, xs)
        assert np.max(np.abs(table)) <= 1.0 + 1e-12


def test_legendre_p_domain_error():
    with pytest.raises(ValueError):
        sf.legendre_p(2, 3, 1.1)
    # within ulp slack: clamped, no error
    assert sf.legendre_p(2, 3, 1.0 + 1e-14) == 1.0


def test_zdim_examples():
    assert sf.zdim(2, 3) == 7
    assert sf.zdim(3, 2) == 9
    assert sf.zdim(1, 9) == 2
    for d in (1, 2, 3, 4):
        assert sf.zdim(d, 0) == 1


def test_zdim_table_matches_pointwise():
    for d in (1, 2, 3, 4, 5):
        table = sf.zdim_table(d, 300)
        expect = [sf.zdim(d, n) for n in range(301)]
        assert np.array_equal(table, np.array(expect, dtype=float))


def test_cap_measure_endpoints_and_symmetry():
    phis = np.linspace(0.05, math.pi - 0.05, 31)
    for d in (1, 2, 3, 4):
        assert sf.cap_measure(d, 0.0) == 0.0
        assert math.isclose(sf.cap_measure(d, math.pi), 1.0, abs_tol=1e-14)
        assert math.isclose(sf.cap_measure(d, math.pi / 2), 0.5, abs_tol=1e-14)
        left = sf.cap_measure(d, phis)
        right = sf.cap_measure(d, math.pi - phis[::-1])[::-1]
        assert np.max(np.abs(left + right - 1.0)) < 1e-12
        assert np.all(np.diff(sf.cap_measure(d, np.linspace(0, math.pi, 64))) >= 0)


def test_cap_measure_closed_form_d2():
    phis = np.linspace(0.0, math.pi, 41)
    assert np.allclose(sf.cap_measure(2, phis), (1.0 - np.cos(phis)) / 2.0, atol=1e-14)
    assert math.isclose(sf.cap_measure(2, math.pi / 3), 0.25, abs_tol=1e-14)


def test_cap_measure_against_quadrature():
    for d in (1, 2, 3, 4):
        for phi in (0.3, 1.0, 2.0, 2.9):
            quad, _ = integrate.quad(lambda t: math.sin(t) ** (d - 1), 0.0, phi)
            assert math.isclose(sf.cap_measure(d, phi), sf.gamma_d(d) * quad, abs_tol=1e-12)


def test_cap_measure_small_angle_order():
    # sigma(phi) ~ phi^d: the ratio must stabilise as phi -> 0
    for d in (1, 2, 3):
        r1 = sf.cap_measure(d, 1e-3) / 1e-3**d
        r2 = sf.cap_measure(d, 1e-4) / 1e-4**d
        assert math.isclose(r1, r2, rel_tol=1e-3)


def test_cap_measure_domain():
    with pytest.raises(ValueError):
        sf.cap_measure(2, -0.1)
    with pytest.raises(ValueError):
        sf.cap_measure(2, math.pi + 0.1)


def test_laplace_coeff_degree_one_closed_form():
    # a_1(phi) = sin(phi)^2 / 4 on S^2
    for phi in (0.3, 1.0, math.pi / 2, 2.5):
        assert math.isclose(sf.laplace_coeff(2, 1, phi), math.sin(phi) ** 2 / 4.0, abs_tol=1e-14)
    assert math.isclose(sf.laplace_coeff(2, 1, math.pi / 2), 0.25, abs_tol=1e-15)


def test_laplace_coeff_vanishes_at_pi():
    for d in (1, 2, 3):
        for n in (1, 2, 5):
            assert abs(sf.laplace_coeff(d, n, math.pi)) < 1e-14


def test_laplace_coeff_matches_quadrature():
    for d in (1, 2, 3):
        for n in (1, 2, 3, 7, 15, 30):
            for phi in (0.2, 0.7, 1.3, 2.4):
                quad, _ = integrate.quad(
                    lambda t: sf.legendre_p(d, n, math.cos(t)) * math.sin(t) ** (d - 1),
                    0.0,
                    phi,
                    epsabs=1e-13,
                    epsrel=1e-12,
                    limit=300,
                )
                closed = sf.laplace_coeff(d, n, phi)
                assert abs(closed - sf.gamma_d(d) * quad) < 1e-9, (d, n, phi)


def test_laplace_coeff_spot_value_high_degree():
    quad, _ = integrate.quad(
        lambda t: sf.legendre_p(2, 3, math.cos(t)) * math.sin(t), 0.0, 0.7,
        epsabs=1e-14, epsrel=1e-13,
    )
    assert abs(sf.laplace_coeff(2, 3, 0.7) - 0.5 * quad) < 1e-10


def test_laplace_coeff_table_consistency():
    phis = np.array([0.4, 1.1, 2.0])
    table = sf.laplace_coeff_table(2, 12, phis)
    for j, phi in enumerate(phis):
        for n in range(1, 13):
            assert math.isclose(table[n - 1, j], sf.laplace_coeff(2, n, phi), abs_tol=1e-14)


def test_gegenbauer_constant_against_literature_value():
    # For S^2 the sharp decay constant is sqrt(2/pi); the calibrated value is
    # twice the scanned maximum, so it must be close to 2 sqrt(2/pi) and
    # never below the sharp constant itself.
    c2 = sf.gegenbauer_bound_constant(2)
    sharp = math.sqrt(2.0 / math.pi)
    assert sharp <= c2 <= 2.0 * (sharp + 1e-3)
    assert c2 >= 2.0 * 0.9 * sharp


def test_gegenbauer_bound_holds():
    phis = np.linspace(1e-3, math.pi - 1e-3, 301)
    for d in (1, 2, 3, 4):
        c = sf.gegenbauer_bound_constant(d)
        x = np.cos(phis)
        table = sf.legendre_p_table(d, 200, x)
        for n in range(1, 201):
            bound = np.minimum(1.0, c / (n * np.sin(phis)) ** ((d - 1) / 2.0))
            assert np.all(np.abs(table[n]) <= bound + 1e-12), (d, n)


def test_gegenbauer_constant_cached_and_overridable():
    v1 = sf.gegenbauer_bound_constant(3)
    v2 = sf.gegenbauer_bound_constant(3)
    assert v1 == v2
    sf.set_gegenbauer_bound_constant(3, 123.0)
    assert sf.gegenbauer_bound_constant(3) == 123.0
    sf.set_gegenbauer_bound_constant(3, None)
    assert sf.gegenbauer_bound_constant(3) == v1


def test_truncation_infinite_tolerance():
    trunc = sf.truncation_for_tolerance(2, math.pi / 3, 10, math.inf)
    assert trunc.max_degree == 1
    assert math.isfinite(trunc.tail_bound)
    assert trunc.tail_bound >= 0.0


def test_truncation_monotone_in_n_and_tol():
    # the certified bound treats every Weyl sum as N^2, so doubling N at
    # fixed tol can only deepen the truncation
    phi = 1.1
    m_prev = 0
    for n_pts in (1, 4, 16, 64):
        trunc = sf.truncation_for_tolerance(2, phi, n_pts, 1e-2)
        assert trunc.max_degree >= m_prev
        assert trunc.tail_bound <= 1e-2
        m_prev = trunc.max_degree
    t_loose = sf.truncation_for_tolerance(2, phi, 10, 1e-2)
    t_tight = sf.truncation_for_tolerance(2, phi, 10, 1e-4)
    assert t_tight.max_degree >= t_loose.max_degree
    assert t_tight.tail_bound <= t_loose.tail_bound


def test_truncation_tail_dominates_brute_force_tail():
    # certified bound must dominate the actual dropped envelope tail,
    # sampled out to 10x the truncation degree
    d, phi, n_pts = 2, math.pi / 3, 100
    trunc = sf.truncation_for_tolerance(d, phi, n_pts, 1e-2)
    m = trunc.max_degree
    terms = sf.cap_series_terms(d, phi, 10 * m)
    brute = float(np.sum(terms[m:])) * n_pts**2
    assert trunc.tail_bound <= 1e-2
    assert trunc.tail_bound >= brute * (1.0 - 1e-9)


def test_truncation_degenerate_angles():
    for phi in (0.0, math.pi):
        trunc = sf.truncation_for_tolerance(2, phi, 50, 1e-10)
        assert trunc == (1, 0.0)


def test_truncation_hard_cap_error():
    with pytest.raises(sf.TruncationError):
        sf.truncation_for_tolerance(2, 1.0, 1000, 1e-12, hard_cap=2000)


def test_truncation_rejects_bad_args():
    with pytest.raises(ValueError):
        sf.truncation_for_tolerance(2, 1.0, 0, 1e-3)
    with pytest.raises(ValueError):
        sf.truncation_for_tolerance(2, 1.0, 10, 0.0)
    with pytest.raises(ValueError):
        sf.truncation_for_tolerance(2, -1.0, 10, 1e-3)


def test_cap_series_parseval_partial_sums():
    # partial sums approach sigma(1 - sigma) from below
    for d in (1, 2, 3):
        for phi in (0.5, 1.2, 2.2):
            sigma = sf.cap_measure(d, phi)
            total = sigma * (1.0 - sigma)
            partial = float(np.sum(sf.cap_series_terms(d, phi, 4000)))
            assert partial <= total + 1e-12
            assert total - partial < total * 0.02 + 1e-4


def test_funk_hecke_corrected_normalization():
    # int P_m(<x,y>) P_n(<y,z>) dsigma(y) = delta_mn P_n(<x,z>) / Z(d,n),
    # Monte Carlo estimate within 3 standard errors
    rng = np.random.default_rng(42)
    num = 400_000
    for d in (2, 3):
        x = rng.standard_normal(d + 1)
        x /= np.linalg.norm(x)
        z = rng.standard_normal(d + 1)
        z /= np.linalg.norm(z)
        ys = rng.standard_normal((num, d + 1))
        ys /= np.linalg.norm(ys, axis=1, keepdims=True)
        for m, n in ((1, 1), (2, 2), (4, 4), (8, 8), (1, 6), (3, 5), (2, 7)):
            vals = sf.legendre_p(d, m, ys @ x) * sf.legendre_p(d, n, ys @ z)
            est = float(vals.mean())
            se = float(vals.std(ddof=1)) / math.sqrt(num)
            expected = sf.legendre_p(d, n, float(x @ z)) / sf.zdim(d, n) if m == n else 0.0
            assert abs(est - expected) <= 3.0 * se + 1e-12, (d, m, n)
