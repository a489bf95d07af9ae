"""Tests for the Monte Carlo engine."""

import math

import numpy as np
import pytest

from scripts.asian.core_model import LocalVolFn, MarketParams, OptionSpec, forward_average
from scripts.asian.errors import InvalidConfig, OutOfDomain
from scripts.asian.mc_engine import (
    AsianMonteCarloEngine,
    McConfig,
    _merge,
    convergence_sweep,
    estimates_frame,
    simulate_asian,
)
from scripts.asian.pricer import price_asymptotic, price_atm

BS = LocalVolFn.constant(0.3)
MARKET = MarketParams(100.0)
SMALL = McConfig(paths=20_000, steps=50, batch_size=2_000)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        {"paths": 10},
        {"steps": 1},
        {"scheme": "milstein"},
        {"workers": 0},
        {"seed": -1},
        {"antithetic": True, "paths": 1001},
        {"antithetic": True, "batch_size": 999},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(InvalidConfig):
        McConfig(**kwargs)


def test_config_from_settings_casts_values():
    cfg = McConfig.from_settings({"paths": "5000", "steps": 20.0, "antithetic": 1, "extra": "ignored"})
    assert (cfg.paths, cfg.steps, cfg.antithetic) == (5000, 20, True)
    with pytest.raises(InvalidConfig):
        McConfig.from_settings({"paths": "many"})


def test_batches_cover_all_paths():
    assert McConfig(paths=7_000, batch_size=3_000).batches() == [3_000, 3_000, 1_000]
    assert McConfig(paths=6_000, batch_size=3_000).batches() == [3_000, 3_000]


def test_merge_matches_pooled_moments():
    rng = np.random.default_rng(7)
    parts = [rng.normal(size=n) for n in (5, 17, 1, 40)]
    stats = [(p.size, p.mean(), float(np.sum((p - p.mean()) ** 2)), 0) for p in parts]
    n, mean, m2, _ = _merge(stats)
    pooled = np.concatenate(parts)
    assert n == pooled.size
    assert mean == pytest.approx(pooled.mean(), rel=1e-12)
    assert m2 == pytest.approx(float(np.sum((pooled - pooled.mean()) ** 2)), rel=1e-12)


# ---------------------------------------------------------------------------
# Reproducibility and estimators
# ---------------------------------------------------------------------------


def test_same_seed_same_estimate_for_any_worker_count():
    option = OptionSpec.fixed(110.0, 0.5)
    serial = simulate_asian(BS, MARKET, option, SMALL)
    threaded = simulate_asian(BS, MARKET, option, McConfig(paths=20_000, steps=50, batch_size=2_000, workers=4))
    assert serial.price == threaded.price
    assert serial.stderr == threaded.stderr


def test_different_seed_changes_estimate():
    option = OptionSpec.fixed(110.0, 0.5)
    first = simulate_asian(BS, MARKET, option, SMALL)
    second = simulate_asian(BS, MARKET, option, McConfig(paths=20_000, steps=50, batch_size=2_000, seed=1))
    assert first.price != second.price
    assert abs(first.price - second.price) < 5.0 * math.hypot(first.stderr, second.stderr)


def test_antithetic_estimate():
    option = OptionSpec.fixed(100.0, 0.5)
    plain = simulate_asian(BS, MARKET, option, SMALL)
    anti = simulate_asian(BS, MARKET, option, McConfig(paths=20_000, steps=50, batch_size=2_000, antithetic=True))
    assert anti.antithetic
    assert abs(anti.price - plain.price) < 5.0 * math.hypot(anti.stderr, plain.stderr)


def test_antithetic_sampling_reduces_stderr_across_seeds():
    option = OptionSpec.fixed(100.0, 0.5)
    reduced = 0
    for seed in range(20):
        plain = simulate_asian(BS, MARKET, option, McConfig(paths=2_000, steps=20, batch_size=2_000, seed=seed))
        anti = simulate_asian(
            BS, MARKET, option, McConfig(paths=2_000, steps=20, batch_size=2_000, seed=seed, antithetic=True)
        )
        reduced += anti.stderr < plain.stderr
    assert reduced >= 16


def test_stderr_scales_like_inverse_sqrt_paths():
    option = OptionSpec.fixed(100.0, 0.5)
    small = simulate_asian(BS, MARKET, option, McConfig(paths=4_000, steps=20, batch_size=2_000))
    large = simulate_asian(BS, MARKET, option, McConfig(paths=16_000, steps=20, batch_size=2_000))
    assert 0.0 < large.stderr < small.stderr
    assert small.stderr / large.stderr == pytest.approx(2.0, rel=0.1)


@pytest.mark.parametrize("paths", [20_000, pytest.param(100_000, marks=pytest.mark.slow)])
def test_step_bias_between_200_and_800_steps(paths):
    # independent streams: the gap is noise with standard deviation hypot(se_200, se_800)
    option = OptionSpec.fixed(100.0, 0.5)
    coarse = simulate_asian(BS, MARKET, option, McConfig(paths=paths, steps=200, batch_size=10_000))
    fine = simulate_asian(BS, MARKET, option, McConfig(paths=paths, steps=800, batch_size=10_000, seed=7))
    assert abs(coarse.price - fine.price) < 3.0 * math.hypot(coarse.stderr, fine.stderr)


@pytest.mark.parametrize("model", [BS, LocalVolFn.cev(0.3, -0.3, 100.0)], ids=["constant", "cev"])
def test_discounted_terminal_is_a_martingale(model):
    market = MarketParams(100.0, 0.05, 0.01)
    estimate = AsianMonteCarloEngine(model, market, SMALL).simulate_terminal(1.0)
    tolerance = 4.0 * estimate.stderr + (0.0 if model.is_constant else 0.05)
    assert abs(estimate.price - 100.0) < tolerance


def test_nearly_deterministic_path_prices_the_forward_average():
    market = MarketParams(100.0, 0.05, 0.0)
    estimate = simulate_asian(LocalVolFn.constant(1e-3), market, OptionSpec.fixed(90.0, 1.0), SMALL)
    expected = math.exp(-0.05) * (forward_average(market, 1.0) - 90.0)
    assert estimate.price == pytest.approx(expected, rel=5e-4)


def test_rejects_non_positive_maturity():
    engine = AsianMonteCarloEngine(BS, MARKET, SMALL)
    with pytest.raises(OutOfDomain):
        engine.simulate_terminal(0.0)


def test_floating_atm_price_against_sqrt_t_formula():
    estimate = simulate_asian(BS, MARKET, OptionSpec.floating(1.0, 0.5, "call"), SMALL)
    assert estimate.price == pytest.approx(4.8860, abs=4.0 * estimate.stderr + 0.1)


def test_estimates_frame_columns():
    option = OptionSpec.fixed(105.0, 0.25)
    estimate = simulate_asian(BS, MARKET, option, McConfig(paths=1_000, steps=10, batch_size=500))
    frame = estimates_frame([(105.0, 0.25, estimate)])
    assert list(frame.columns) == ["strike", "T", "price", "stderr", "N", "n", "seed"]
    assert frame.loc[0, "N"] == 1_000


# ---------------------------------------------------------------------------
# Convergence sweep
# ---------------------------------------------------------------------------


def test_convergence_sweep_approaches_minus_rate():
    frame = convergence_sweep(BS, MARKET, OptionSpec.fixed(110.0, 1.0), [0.4, 0.05], SMALL)
    assert list(frame.columns) == ["T", "price", "stderr", "t_log_price", "minus_rate", "gap", "all_payoffs_zero"]
    assert not frame["all_payoffs_zero"].any()
    assert frame["gap"].iloc[-1] < frame["gap"].iloc[0]


def test_convergence_sweep_flags_all_zero_payoffs():
    frame = convergence_sweep(BS, MARKET, OptionSpec.fixed(200.0, 1.0), [0.01], McConfig(paths=1_000, steps=10))
    row = frame.iloc[0]
    assert bool(row["all_payoffs_zero"])
    assert row["t_log_price"] == -math.inf
    assert math.isnan(row["gap"])


def test_convergence_sweep_needs_otm_option():
    with pytest.raises(OutOfDomain):
        convergence_sweep(BS, MARKET, OptionSpec.fixed(100.0, 1.0), [0.1], SMALL)


# ---------------------------------------------------------------------------
# Desk-scale cross-check against the asymptotic prices
# ---------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.parametrize("side, strike", [("call", 100), ("call", 110), ("call", 120), ("put", 70), ("put", 85), ("put", 95)])
def test_asymptotic_prices_within_three_stderr(side, strike):
    option = OptionSpec.fixed(float(strike), 0.5, side)
    estimate = simulate_asian(BS, MARKET, option, McConfig(paths=100_000, steps=200))
    asymptotic = price_asymptotic(BS, MARKET, option).price
    assert abs(asymptotic - estimate.price) <= 3.0 * estimate.stderr


@pytest.mark.slow
def test_atm_formula_within_three_stderr():
    estimate = simulate_asian(BS, MARKET, OptionSpec.fixed(100.0, 0.5), McConfig(paths=100_000, steps=200))
    assert abs(price_atm(BS, MARKET, 0.5).price - estimate.price) <= 3.0 * estimate.stderr
