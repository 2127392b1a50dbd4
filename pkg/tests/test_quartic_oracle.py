import math
import warnings

import mpmath
import numpy as np
import pytest

from surge.quartic_oracle import (
    ALTERNATIVE_ZETA1, DEFAULT_G_GRID, check_invariants, euler_exact, euler_series_fixture,
    euler_truncation_error, exact_quartic_Z, quartic_asymptotic_coeffs, quartic_deficit,
    richardson_coeffs, verify_resummation, zeta1_estimate,
)
from surge.series_core import InvalidInputError, borel_transform, pade, pade_poles, ratio_test


def mp_quartic(g):
    """Independent oracle: mpmath tanh-sinh quadrature on the whole line."""
    mpmath.mp.dps = 30
    g = mpmath.mpf(g)
    return float(mpmath.quad(lambda x: mpmath.exp(-(x**2 + x**4) / g), [-mpmath.inf, 0, mpmath.inf]))


# exact values

def test_gaussian_limit():
    g = 1e-4
    assert abs(exact_quartic_Z(g) / math.sqrt(math.pi * g) - 1) < 1e-3


@pytest.mark.parametrize("g", [0.1, 0.05, 0.5])
def test_dual_quadrature(g):
    assert exact_quartic_Z(g) == pytest.approx(mp_quartic(g), rel=1e-8)


def test_z_of_tenth_golden():
    assert exact_quartic_Z(0.1) == pytest.approx(0.5293924302255497, rel=1e-12)


def test_deficit_consistent():
    g = 0.01
    assert quartic_deficit(g) == pytest.approx(exact_quartic_Z(g) / math.sqrt(math.pi * g) - 1, rel=1e-6)


def test_rejects_nonpositive_g():
    with pytest.raises(InvalidInputError):
        exact_quartic_Z(0.0)


# coefficients

def test_coefficients():
    a = quartic_asymptotic_coeffs(10)
    assert a[0] == 1.0
    assert a[1] == -0.75
    assert a[2] == pytest.approx(3.28125)
    assert all(np.sign(a[k]) == (-1) ** k for k in range(11))


def test_coefficients_from_moments():
    # a_k = (-1)^k E[x^{4k}] / k! under N(0, 1/2) scaled by g^k
    a = quartic_asymptotic_coeffs(6)
    for k in range(7):
        moment = math.prod(range(4 * k - 1, 0, -2)) / 2 ** (2 * k)
        assert a[k] == pytest.approx((-1) ** k * moment / math.factorial(k), rel=1e-14)


def test_coefficient_range():
    with pytest.raises(InvalidInputError):
        quartic_asymptotic_coeffs(31)
    assert len(quartic_asymptotic_coeffs(30)) == 31


def test_richardson_cross_validation():
    a1, a2 = richardson_coeffs()
    ref = quartic_asymptotic_coeffs(2)
    assert a1 == pytest.approx(ref[1], rel=0.01)
    assert a2 == pytest.approx(ref[2], rel=0.01)


# Euler series

def test_euler_fixture():
    fx = euler_series_fixture()
    assert fx.series.order == 11
    np.testing.assert_array_equal(borel_transform(fx.series).coeffs, np.ones(12))
    radius, osc = ratio_test(borel_transform(fx.series), 3)
    assert abs(radius - 1) <= 1e-12 and not osc
    (pole,) = pade_poles(pade(borel_transform(fx.series), 0, 1))
    assert pole.residue == pytest.approx(-1.0, abs=1e-12)
    g = 0.2
    assert fx.stokes_discontinuity_magnitude(g) == pytest.approx(2 * math.pi * abs(pole.residue) * math.exp(-1 / g))


def test_euler_exact_against_mpmath():
    g = 0.1
    mpmath.mp.dps = 30
    ref = mpmath.exp(-10) * mpmath.ei(10) / mpmath.mpf(g)
    assert euler_exact(g) == pytest.approx(float(ref), rel=1e-12)


def test_euler_truncation_exponentially_small():
    err = euler_truncation_error(0.1)
    assert math.exp(-10) / 5 <= err <= 5 * math.exp(-10)


# resummation report

@pytest.fixture(scope="module")
def report():
    return verify_resummation()


def test_default_rows(report):
    assert [r.g for r in report.rows] == sorted(DEFAULT_G_GRID)
    for r in report.rows:
        assert r.exact == exact_quartic_Z(r.g, 1e-13)
        assert r.rel_error_truncated >= 0 and r.rel_error_borel_pade >= 0
        assert not r.errors


def test_borel_pade_accuracy(report):
    rows = {r.g: r for r in report.rows}
    assert rows[0.1].rel_error_borel_pade < 5e-3
    assert rows[0.01].rel_error_truncated < rows[0.01].rel_error_borel_pade


def test_zeta_estimate(report):
    assert report.zeta1 == pytest.approx(zeta1_estimate(quartic_asymptotic_coeffs(7)))
    assert report.zeta1 < 0
    assert set(report.alternative_zeta1) == set(ALTERNATIVE_ZETA1)


def test_truncation_error_monotone():
    rep = verify_resummation((0.1, 0.05, 0.02, 0.01))
    errs = [r.rel_error_truncated for r in sorted(rep.rows, key=lambda r: -r.g)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_half_integer_rounds_down():
    rep = verify_resummation((0.1,), series_order=30)
    n = rep.rows[0].n_terms
    assert n == math.ceil(abs(rep.zeta1) / 0.1 - 0.5)


def test_out_of_range_warns_but_reports():
    with pytest.warns(UserWarning):
        rep = verify_resummation((1.0,))
    assert len(rep.rows) == 1 and rep.rows[0].exact > 0


def test_fitted_coefficients_compared():
    fitted = [1.0, -0.74, 3.2]
    rep = verify_resummation((0.05,), fitted=fitted)
    assert len(rep.coefficients) >= 3
    assert any(c.get("fitted") == -0.74 for c in rep.coefficients)


def test_serialisation(report, tmp_path):
    text = report.to_csv(tmp_path / "o.csv")
    assert text.splitlines()[0].startswith("g,exact,truncated")
    assert (tmp_path / "o.csv").read_text() == text
    assert '"rows"' in report.to_json()
    assert "Borel" in report.format_table()


def test_invariants_all_pass():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        inv = check_invariants()
    assert all(ok for ok, _ in inv.values()), inv
