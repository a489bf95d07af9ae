"""Tests for the local-volatility rate function I(K, S0)."""

import math

import numpy as np
import pytest

from scripts.asian.core_model import LocalVolFn
from scripts.asian.errors import NonDifferentiable, OutOfDomain
from scripts.asian.rate_bs import j_bs, optimal_path_bs
from scripts.asian.rate_lv import (
    fg_pair,
    objective_curve,
    objective_value,
    optimal_path_lv,
    rate_discrete_path,
    rate_exact,
    rate_scan,
    rate_series,
    rate_series_explicit,
    series_coefficients,
)

S0 = 100.0
CEV = LocalVolFn.cev(0.3, -0.3, S0)
TABLE = LocalVolFn.tabulated([50.0, 80.0, 100.0, 125.0, 200.0], [0.42, 0.34, 0.30, 0.27, 0.24])


# ---------------------------------------------------------------------------
# Reduction to Black-Scholes
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("sigma", [0.1, 0.3, 0.5])
def test_constant_vol_reduces_to_j_bs(sigma):
    model = LocalVolFn.constant(sigma)
    for m in np.linspace(0.5, 2.0, 50):
        exact = rate_exact(model, S0, m * S0).i
        assert exact == pytest.approx(j_bs(m).j / sigma**2, abs=1e-8)


def test_atm_rate_is_zero():
    result = rate_exact(CEV, S0, S0)
    assert result.branch == "atm"
    assert result.i == 0.0


def test_non_positive_strike_is_rejected():
    with pytest.raises(OutOfDomain):
        rate_exact(CEV, S0, 0.0)


def test_multiplier_sign_and_identity():
    above = rate_exact(CEV, S0, 120.0)
    below = rate_exact(CEV, S0, 85.0)
    assert (above.branch, below.branch) == ("minus", "plus")
    assert above.lagrange < 0.0 < below.lagrange
    for result in (above, below):
        assert result.i == pytest.approx(0.5 * result.F * result.G, rel=1e-14)
        assert abs(result.residual) < 1e-9


def test_fg_pair_at_zero_terminal():
    assert fg_pair(CEV, S0, 0.0, "minus") == (0.0, 0.0)
    with pytest.raises(OutOfDomain):
        fg_pair(CEV, S0, -0.1, "minus")


# ---------------------------------------------------------------------------
# Exact, scan and series agree
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("model", [LocalVolFn.constant(0.3), CEV], ids=["constant", "cev"])
@pytest.mark.parametrize("ratio", [0.6, 0.8, 0.9, 1.1, 1.25, 1.5])
def test_exact_and_scan_agree(model, ratio):
    exact = rate_exact(model, S0, ratio * S0)
    scan = rate_scan(model, S0, ratio * S0)
    assert scan.i == pytest.approx(exact.i, abs=1e-6)
    assert scan.terminal == pytest.approx(exact.terminal, abs=1e-3)


@pytest.mark.parametrize("model", [LocalVolFn.constant(0.3), CEV], ids=["constant", "cev"])
@pytest.mark.parametrize("ratio", [0.8, 0.9, 1.1, 1.25])
def test_series_within_one_percent_near_the_money(model, ratio):
    x = math.log(ratio)
    assert rate_series(model, S0, x) == pytest.approx(rate_exact(model, S0, ratio * S0).i, rel=0.01)


@pytest.mark.parametrize("model", [LocalVolFn.constant(0.3), CEV], ids=["constant", "cev"])
@pytest.mark.parametrize("ratio", [1.0 - 1e-4, 1.0 + 1e-4])
def test_series_meets_exact_at_the_series_band(model, ratio):
    series = rate_series(model, S0, math.log(ratio), order=4)
    assert series == pytest.approx(rate_exact(model, S0, ratio * S0).i, rel=1e-5)


def test_objective_infimum_matches_exact():
    exact = rate_exact(CEV, S0, 115.0)
    assert objective_value(CEV, S0, 115.0, exact.terminal) == pytest.approx(exact.i, rel=1e-9)
    assert objective_value(CEV, S0, 115.0, exact.terminal + 0.05) > exact.i
    assert objective_value(CEV, S0, 115.0, math.log(1.15)) == math.inf


def test_objective_curve_stays_above_the_rate():
    exact = rate_exact(CEV, S0, 90.0)
    abscissa, values = objective_curve(CEV, S0, 90.0, n=40)
    assert abscissa.shape == values.shape == (40,)
    # chi = e^{-h1} decreases from K/S0
    assert np.all(np.diff(abscissa) < 0.0)
    assert np.all(values >= exact.i - 1e-10)
    with pytest.raises(OutOfDomain):
        objective_curve(CEV, S0, S0)


# ---------------------------------------------------------------------------
# Series forms
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("order", [2, 3, 4])
def test_series_forms_coincide(order):
    for x in (-0.2, 0.05, 0.2):
        assert rate_series(CEV, S0, x, order) == pytest.approx(rate_series_explicit(CEV, S0, x, order), rel=1e-12)


def test_cev_cubic_coefficient():
    # u = gamma = -0.3: cubic coefficient -3/10 - 9u/5 = 0.24 (times 1/sigma^2)
    x = 0.1
    cubic = (rate_series(CEV, S0, x, 3) - rate_series(CEV, S0, x, 2)) / x**3
    assert cubic * 0.3**2 == pytest.approx(0.24, rel=1e-10)
    assert rate_series(CEV, S0, x, 2) == pytest.approx(1.5 * x * x / 0.09, rel=1e-12)


def test_series_coefficients_of_constant_vol():
    a1, a2, a3 = series_coefficients(LocalVolFn.constant(0.25), S0)
    assert (a1, a2, a3) == (4.0, 0.0, 0.0)


def test_series_order_and_kink_errors():
    with pytest.raises(OutOfDomain):
        rate_series(CEV, S0, 0.1, order=5)
    clipped = LocalVolFn.cev(0.3, -0.3, S0, sigma_hi=0.3)
    with pytest.raises(NonDifferentiable):
        rate_series(clipped, S0, 0.1)


# ---------------------------------------------------------------------------
# Monotonicity and the discrete-path check
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("model", [LocalVolFn.constant(0.3), CEV, TABLE], ids=["constant", "cev", "tabulated"])
def test_rate_is_monotone_away_from_the_money(model):
    above = [rate_exact(model, S0, K).i for K in np.linspace(100.5, 200.0, 100)]
    below = [rate_exact(model, S0, K).i for K in np.linspace(99.5, 50.0, 100)]
    assert np.all(np.diff(above) > 0.0)
    assert np.all(np.diff(below) > 0.0)


@pytest.mark.parametrize("model", [CEV, TABLE], ids=["cev", "tabulated"])
def test_rate_is_continuous_in_strike(model):
    for strike in np.linspace(60.0, 150.0, 20):
        here = rate_exact(model, S0, strike).i
        nudged = rate_exact(model, S0, strike * (1.0 + 1e-6)).i
        assert abs(nudged - here) <= 1e-4


@pytest.mark.parametrize(
    "model, ratio",
    [
        (LocalVolFn.constant(0.3), 0.8),
        (LocalVolFn.constant(0.3), 1.25),
        (CEV, 0.8),
        (CEV, 1.2),
        (CEV, 1.25),
    ],
)
def test_discrete_path_minimum_matches_exact(model, ratio):
    brute = rate_discrete_path(model, S0, ratio * S0)
    assert brute.i == pytest.approx(rate_exact(model, S0, ratio * S0).i, abs=1e-3)
    assert brute.method == "discrete_path"


def test_discrete_path_at_the_money():
    assert rate_discrete_path(CEV, S0, S0).i == 0.0


# ---------------------------------------------------------------------------
# Optimal path
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("ratio", [0.8, 1.3])
def test_optimal_path_lv_matches_bs_path_for_constant_vol(ratio):
    t = np.linspace(0.0, 1.0, 51)
    path = optimal_path_lv(LocalVolFn.constant(0.3), S0, ratio * S0, t)
    np.testing.assert_allclose(path, optimal_path_bs(ratio, t), atol=1e-4)


def test_optimal_path_lv_ends_at_terminal_value():
    exact = rate_exact(CEV, S0, 80.0)
    path = optimal_path_lv(CEV, S0, 80.0, np.linspace(0.0, 1.0, 11))
    assert path[0] == pytest.approx(0.0, abs=1e-12)
    assert path[-1] == pytest.approx(-exact.terminal, abs=1e-10)
    assert np.all(np.diff(path) < 0.0)
    assert np.all(optimal_path_lv(CEV, S0, S0, [0.0, 0.5, 1.0]) == 0.0)
