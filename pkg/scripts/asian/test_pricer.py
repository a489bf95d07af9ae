"""Tests for the asymptotic pricers against the published tables and exact identities."""

import math

import pytest

from scripts.asian.core_model import LocalVolFn, MarketParams, OptionSpec, forward_average, put_call_parity_gap
from scripts.asian.errors import OutOfDomain
from scripts.asian.pricer import (
    bachelier_forward,
    black_forward,
    check_price_bounds,
    implied_asian_vol,
    implied_equivalent_vol,
    price_asymptotic,
    price_atm,
    price_floating_asymptotic,
    price_itm_expansion,
    price_ldp_exponent,
)
from scripts.asian.rate_bs import j_bs

BS = LocalVolFn.constant(0.3)
MARKET = MarketParams(100.0)
MATURITIES = (0.5, 1.0, 2.0)

CALLS = {
    100: (4.8830, 6.9013, 9.7477),
    105: (2.9188, 4.8847, 7.7382),
    110: (1.6388, 3.3715, 6.0826),
    115: (0.8671, 2.2745, 4.7505),
    120: (0.4351, 1.5033, 3.6835),
    125: (0.2081, 0.9758, 2.8414),
    130: (0.0953, 0.6234, 2.1790),
}
PUTS = {
    70: (0.0035, 0.0809, 0.5596),
    75: (0.0263, 0.2580, 1.1250),
    80: (0.1295, 0.6609, 2.0167),
    85: (0.4543, 1.4237, 3.2984),
    90: (1.2190, 2.6711, 5.0095),
    95: (2.6494, 4.4877, 7.1628),
    100: (4.8830, 6.9013, 9.7477),
}
SIGMA_LN = {
    "call": dict(zip(CALLS, (17.32, 17.41, 17.48, 17.56, 17.63, 17.70, 17.76))),
    "put": dict(zip(PUTS, (16.68, 16.81, 16.92, 17.03, 17.14, 17.23, 17.32))),
}
TABLE2 = [
    (0.02, 1.0, 2.0, 2.0, 0.10, 0.055923),
    (0.18, 1.0, 2.0, 2.0, 0.30, 0.217054),
    (0.0125, 2.0, 2.0, 2.0, 0.25, 0.172163),
    (0.05, 1.0, 1.9, 2.0, 0.50, 0.192895),
    (0.05, 1.0, 2.0, 2.0, 0.50, 0.246125),
    (0.05, 1.0, 2.1, 2.0, 0.50, 0.305927),
    (0.05, 2.0, 2.0, 2.0, 0.50, 0.349314),
]
# Published entries that the Black formula on Sigma_LN does not reproduce to
# the printed digits. Key -> (value the formula gives, distance allowed to the
# published entry).
TABLE1_OFF = {
    ("call", 110, 0.5): (1.638274, 6e-4),
    ("call", 105, 2.0): (7.735169, 3.5e-3),
    ("call", 130, 2.0): (2.179747, 8e-4),
}
TABLE2_OFF = {0.18: (0.2170643, 1.5e-5)}


# ---------------------------------------------------------------------------
# Published tables
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("side, table", [("call", CALLS), ("put", PUTS)])
def test_table1_asymptotic_prices(side, table):
    for strike, prices in table.items():
        for T, expected in zip(MATURITIES, prices):
            result = price_asymptotic(BS, MARKET, OptionSpec.fixed(float(strike), T, side))
            off = TABLE1_OFF.get((side, strike, T))
            if off is None:
                assert result.price == pytest.approx(expected, abs=1e-4), (side, strike, T)
            else:
                formula, tol = off
                assert result.price == pytest.approx(formula, abs=2e-6), (side, strike, T)
                assert abs(result.price - expected) <= tol, (side, strike, T)


@pytest.mark.parametrize("side", ["call", "put"])
def test_table1_equivalent_vol_column(side):
    for strike, expected in SIGMA_LN[side].items():
        result = price_asymptotic(BS, MARKET, OptionSpec.fixed(float(strike), 1.0, side))
        assert 100.0 * result.sigma == pytest.approx(expected, abs=0.01)


@pytest.mark.parametrize("r, T, s0, K, sigma, expected", TABLE2)
def test_table2_asymptotic_column(r, T, s0, K, sigma, expected):
    result = price_asymptotic(LocalVolFn.constant(sigma), MarketParams(s0, r), OptionSpec.fixed(K, T))
    if r in TABLE2_OFF:
        formula, tol = TABLE2_OFF[r]
        assert result.price == pytest.approx(formula, abs=2e-7)
        assert abs(result.price - expected) <= tol
    else:
        assert result.price == pytest.approx(expected, abs=1e-6)


# ---------------------------------------------------------------------------
# Exact identities
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("market", [MARKET, MarketParams(100.0, 0.05, 0.02)], ids=["flat", "carry"])
def test_put_call_parity_on_table1_grid(market):
    for strike in list(CALLS) + list(PUTS):
        for T in MATURITIES:
            call = price_asymptotic(BS, market, OptionSpec.fixed(float(strike), T, "call")).price
            put = price_asymptotic(BS, market, OptionSpec.fixed(float(strike), T, "put")).price
            gap = put_call_parity_gap(market, OptionSpec.fixed(float(strike), T))
            assert abs(call - put - gap) <= 1e-12 * max(1.0, abs(gap)) + 1e-12


@pytest.mark.parametrize("method", ["equiv_ln", "equiv_n"])
def test_price_bounds_hold(method):
    market = MarketParams(100.0, 0.03, 0.01)
    for side, strikes in (("call", CALLS), ("put", PUTS)):
        for strike in strikes:
            for T in MATURITIES:
                option = OptionSpec.fixed(float(strike), T, side)
                result = price_asymptotic(BS, market, option, method=method)
                if method == "equiv_ln":
                    assert check_price_bounds(result, market, option)
                else:
                    # Bachelier respects the lower bound only
                    lower = max(forward_average(market, T) - strike, 0.0) if side == "call" else 0.0
                    assert math.exp(market.r * T) * result.price >= lower - 1e-10


def test_zero_strike_call_is_discounted_forward():
    market = MarketParams(100.0, 0.04, 0.01)
    result = price_asymptotic(BS, market, OptionSpec.fixed(1e-7, 1.0, "call"))
    expected = math.exp(-0.04) * (forward_average(market, 1.0) - 1e-7)
    assert result.price == pytest.approx(expected, rel=1e-9)


def test_check_price_bounds_flags_violation():
    option = OptionSpec.fixed(110.0, 1.0, "call")
    result = price_asymptotic(BS, MARKET, option)
    broken = type(result)(price=200.0, method=result.method)
    assert check_price_bounds(result, MARKET, option)
    assert not check_price_bounds(broken, MARKET, option)


def test_black_and_bachelier_with_zero_vol():
    assert black_forward(105.0, 100.0, 0.0, 1.0, 0.9, "call")[0] == pytest.approx(4.5)
    assert bachelier_forward(95.0, 100.0, 0.0, 1.0, 1.0, "put")[0] == pytest.approx(5.0)
    assert black_forward(105.0, 100.0, 0.0, 1.0, 1.0, "put")[0] == 0.0


def test_bachelier_atm_value():
    # forward = strike: sigma_N sqrt(T) / sqrt(2 pi)
    price, d = bachelier_forward(100.0, 100.0, 17.32, 0.5, 1.0, "call")
    assert d == 0.0
    assert price == pytest.approx(17.32 * math.sqrt(0.5) / math.sqrt(2.0 * math.pi), rel=1e-14)


def test_unknown_method_and_floating_option_rejected():
    with pytest.raises(OutOfDomain):
        price_asymptotic(BS, MARKET, OptionSpec.fixed(110.0, 1.0), method="laplace")
    with pytest.raises(OutOfDomain):
        price_asymptotic(BS, MARKET, OptionSpec.floating(0.9, 1.0))


# ---------------------------------------------------------------------------
# ATM, ITM and exponent
# ---------------------------------------------------------------------------


def test_atm_sqrt_t_formula():
    result = price_atm(BS, MARKET, 0.5)
    assert result.price == pytest.approx(4.8860, abs=1e-4)
    assert result.method == "atm_sqrt_t"
    # Black at sigma/sqrt(3) agrees to O(T^{3/2})
    assert result.price == pytest.approx(CALLS[100][0], abs=5e-3)


def test_itm_expansion():
    result = price_itm_expansion(MARKET, OptionSpec.fixed(90.0, 1.0, "call"))
    assert result.price == pytest.approx(10.0)
    market = MarketParams(100.0, 0.05, 0.0)
    put = price_itm_expansion(market, OptionSpec.fixed(110.0, 0.1, "put"))
    assert put.price == pytest.approx(10.0 + 0.5 * 0.05 * 100.0 * 0.1 - 110.0 * 0.05 * 0.1)
    with pytest.raises(OutOfDomain):
        price_itm_expansion(MARKET, OptionSpec.fixed(110.0, 1.0, "call"))


def test_ldp_exponent():
    exponent, decay = price_ldp_exponent(BS, MARKET, OptionSpec.fixed(120.0, 0.25))
    assert exponent == pytest.approx(j_bs(1.2).j / 0.09 / 0.25, rel=1e-12)
    assert decay == pytest.approx(math.exp(-exponent))
    with pytest.raises(OutOfDomain):
        price_ldp_exponent(BS, MARKET, OptionSpec.fixed(120.0, 0.25, "put"))


# ---------------------------------------------------------------------------
# Floating strike
# ---------------------------------------------------------------------------


def test_floating_branches():
    atm = price_floating_asymptotic(BS, MARKET, 1.0, 0.5)
    assert atm.method == "atm_sqrt_t"
    assert atm.price == pytest.approx(4.8860, abs=1e-4)

    market = MarketParams(100.0, 0.04, 0.01)
    itm_put = price_floating_asymptotic(BS, market, 0.9, 0.1, "put")
    assert itm_put.method == "itm_expansion"
    assert itm_put.price == pytest.approx(10.0 - 0.5 * 100.0 * 0.05 * 0.1 + 0.9 * 100.0 * 0.01 * 0.1)
    itm_call = price_floating_asymptotic(BS, market, 1.1, 0.1, "call")
    assert itm_call.price == pytest.approx(10.0 + 0.5 * 100.0 * 0.05 * 0.1 - 1.1 * 100.0 * 0.01 * 0.1)


@pytest.mark.parametrize("kappa, side", [(0.9, "call"), (1.2, "put")])
def test_floating_otm_exponent_equals_fixed_strike_exponent(kappa, side):
    result = price_floating_asymptotic(BS, MARKET, kappa, 0.5, side)
    assert result.method == "equiv_ln"
    assert result.price > 0.0
    fixed_side = "put" if kappa < 1.0 else "call"
    exponent, _ = price_ldp_exponent(BS, MARKET, OptionSpec.fixed(100.0 * kappa, 0.5, fixed_side))
    assert result.diagnostics["exponent"] == pytest.approx(exponent, rel=1e-12)


def test_floating_otm_call_under_zero_carry_matches_fixed_put():
    # r = q = 0: the floating call prices like the fixed put at K = kappa S0
    floating = price_floating_asymptotic(BS, MARKET, 0.9, 1.0, "call").price
    fixed = price_asymptotic(BS, MARKET, OptionSpec.fixed(90.0, 1.0, "put")).price
    assert floating == pytest.approx(fixed, rel=1e-12)


@pytest.mark.parametrize("kappa", [0.6, 0.7])
def test_floating_otm_call_with_skew_below_one(kappa):
    result = price_floating_asymptotic(LocalVolFn.cev(0.3, -0.3, 100.0), MARKET, kappa, 0.5, "call")
    assert result.method == "equiv_ln"
    assert 0.0 < result.price < price_floating_asymptotic(BS, MARKET, 1.0, 0.5).price
    assert result.diagnostics["rate_method"] == "bvp"
    assert result.diagnostics["lambda"] > 0.0


# ---------------------------------------------------------------------------
# Implied volatilities
# ---------------------------------------------------------------------------


def test_implied_equivalent_vol_round_trip():
    option = OptionSpec.fixed(115.0, 1.0)
    result = price_asymptotic(BS, MARKET, option)
    assert implied_equivalent_vol(result.price, MARKET, option) == pytest.approx(result.sigma, abs=1e-10)


def test_implied_asian_vol_round_trip():
    option = OptionSpec.fixed(85.0, 0.5, "put")
    price = price_asymptotic(LocalVolFn.constant(0.25), MARKET, option).price
    assert implied_asian_vol(price, MARKET, option) == pytest.approx(0.25, abs=1e-8)


def test_implied_vol_out_of_range():
    with pytest.raises(OutOfDomain):
        implied_equivalent_vol(150.0, MARKET, OptionSpec.fixed(110.0, 1.0))
