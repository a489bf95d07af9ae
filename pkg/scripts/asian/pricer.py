"""
Preços assintóticos de opções asiáticas.

OTM e ATM: Black sobre a média forward A(T) com Sigma_LN (ou Bachelier com
Sigma_N). ITM: expansão pela paridade até O(T). ``price_ldp_exponent``
devolve só o expoente I/T, que fixa o preço apenas em escala log.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from scipy.special import ndtr

from scripts.asian.core_model import (
    ATM_BAND,
    SERIES_BAND,
    LocalVolFn,
    MarketParams,
    OptionSpec,
    classify_moneyness,
    forward_average,
)
from scripts.asian.equiv_vol import SQRT3, rate_value, vol_limits
from scripts.asian.errors import NoSignChange, OutOfDomain
from scripts.asian.floating import atm_floating_price, rate_floating
from scripts.asian.numerics import QuadConfig, RootConfig, find_root

logger = logging.getLogger(__name__)

METHODS = ("equiv_ln", "equiv_n")
IMPLIED_VOL_RANGE = (1e-4, 5.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class PriceResult:
    price: float
    method: str  # equiv_ln | equiv_n | atm_sqrt_t | itm_expansion
    sigma: float = float("nan")
    forward: float = float("nan")
    d1: float = float("nan")
    d2: float = float("nan")
    rate: float = float("nan")
    side: str = "call"
    diagnostics: Dict[str, Any] = field(default_factory=dict)


def black_forward(forward: float, strike: float, sigma: float, maturity: float, discount: float, side: str):
    """Black descontado sobre um forward; devolve (price, d1, d2)."""
    vol = sigma * math.sqrt(maturity)
    if not vol > 0.0:
        intrinsic = forward - strike if side == "call" else strike - forward
        return discount * max(intrinsic, 0.0), float("nan"), float("nan")
    d1 = (math.log(forward / strike) + 0.5 * vol * vol) / vol
    d2 = d1 - vol
    if side == "call":
        price = forward * ndtr(d1) - strike * ndtr(d2)
    else:
        price = strike * ndtr(-d2) - forward * ndtr(-d1)
    return discount * float(price), d1, d2


def bachelier_forward(forward: float, strike: float, sigma_n: float, maturity: float, discount: float, side: str):
    """Bachelier descontado, vol normal em unidades de moeda; devolve (price, d)."""
    vol = sigma_n * math.sqrt(maturity)
    intrinsic = forward - strike if side == "call" else strike - forward
    if not vol > 0.0:
        return discount * max(intrinsic, 0.0), float("nan")
    d = intrinsic / vol
    density = _INV_SQRT_2PI * math.exp(-0.5 * d * d)
    return discount * (intrinsic * float(ndtr(d)) + vol * density), d


def _require_fixed(option: OptionSpec) -> None:
    if option.style != "fixed":
        raise OutOfDomain("Esta operação precifica strike fixo; use price_floating_asymptotic")


def price_asymptotic(
    model: LocalVolFn,
    market: MarketParams,
    option: OptionSpec,
    method: str = "equiv_ln",
    cfg: Optional[RootConfig] = None,
    quad: Optional[QuadConfig] = None,
    bands: Tuple[float, float] = (ATM_BAND, SERIES_BAND),
) -> PriceResult:
    """
    Preço Black (``equiv_ln``) ou Bachelier (``equiv_n``) sobre A(T) com a vol
    equivalente em K/S0; r e q só entram por A(T) e pelo desconto.
    """
    _require_fixed(option)
    if method not in METHODS:
        raise OutOfDomain(f"method deve ser um de {METHODS}, recebido '{method}'")
    T = option.maturity
    K = option.strike
    forward = forward_average(market, T)
    discount = math.exp(-market.r * T)
    limits = vol_limits(model, market.s0, K, cfg, quad, *bands)
    diagnostics = {"regime": limits.regime, "moneyness": classify_moneyness(market, option, bands[0]).tag}

    if method == "equiv_ln":
        price, d1, d2 = black_forward(forward, K, limits.sigma_ln, T, discount, option.side)
        return PriceResult(price, method, limits.sigma_ln, forward, d1, d2, limits.rate, option.side, diagnostics)
    price, d = bachelier_forward(forward, K, limits.sigma_n, T, discount, option.side)
    return PriceResult(price, method, limits.sigma_n, forward, d, d, limits.rate, option.side, diagnostics)


def price_atm(model: LocalVolFn, market: MarketParams, maturity: float, side: str = "call") -> PriceResult:
    """sigma(S0) S0 sqrt(T / (6 pi)), termo líder ATM para calls e puts."""
    price = atm_floating_price(model, market, maturity)
    sigma = float(model(market.s0)) / SQRT3
    return PriceResult(price, "atm_sqrt_t", sigma, forward_average(market, maturity), side=side)


def price_itm_expansion(
    market: MarketParams, option: OptionSpec, atm_band: float = ATM_BAND
) -> PriceResult:
    """
    Strike fixo ITM até O(T):

        call: S0 - K - (r + q) S0 T / 2 + K r T
        put:  K - S0 + (r + q) S0 T / 2 - K r T
    """
    _require_fixed(option)
    if classify_moneyness(market, option, atm_band).tag != "ITM":
        raise OutOfDomain(f"K={option.strike:g} não está ITM para uma {option.side} com S0={market.s0:g}")
    s0, K, T = market.s0, option.strike, option.maturity
    call = s0 - K - 0.5 * (market.r + market.q) * s0 * T + K * market.r * T
    price = call if option.side == "call" else -call
    return PriceResult(price, "itm_expansion", forward=forward_average(market, T), side=option.side)


def price_ldp_exponent(
    model: LocalVolFn,
    market: MarketParams,
    option: OptionSpec,
    cfg: Optional[RootConfig] = None,
    quad: Optional[QuadConfig] = None,
    atm_band: float = ATM_BAND,
) -> Tuple[float, float]:
    """(I/T, e^{-I/T}) para strike fixo OTM; sem prefator."""
    _require_fixed(option)
    tag = classify_moneyness(market, option, atm_band).tag
    if tag != "OTM":
        raise OutOfDomain(f"Expoente de grandes desvios exige opção OTM, recebido {tag}")
    rate, _ = rate_value(model, market.s0, option.strike, cfg, quad)
    exponent = rate / option.maturity
    return exponent, math.exp(-exponent)


def price_floating_asymptotic(
    model: LocalVolFn,
    market: MarketParams,
    kappa: float,
    maturity: float,
    side: str = "call",
    cfg: Optional[RootConfig] = None,
    n_steps: int = 400,
    atm_band: float = ATM_BAND,
    scan_points: int = 41,
) -> PriceResult:
    """
    Strike flutuante: fórmula sqrt(T) em kappa = 1, expansão pela paridade
    ITM e, OTM, Black com a vol implícita por I_f. O proxy OTM usa a simetria
    de maturidade curta com strike fixo kappa S0 do lado oposto, r e q
    trocados, descontado por e^{-qT}.
    """
    option = OptionSpec.floating(kappa, maturity, side)
    tag = classify_moneyness(market, option, atm_band).tag
    T = maturity
    s0, r, q = market.s0, market.r, market.q

    if tag == "ATM":
        return PriceResult(
            atm_floating_price(model, market, T), "atm_sqrt_t", float(model(s0)) / SQRT3, side=side
        )
    if tag == "ITM":
        if side == "put":
            price = (1.0 - kappa) * s0 - 0.5 * s0 * (r + q) * T + kappa * s0 * q * T
        else:
            price = (kappa - 1.0) * s0 + 0.5 * s0 * (r + q) * T - kappa * s0 * q * T
        return PriceResult(price, "itm_expansion", side=side)

    rate = rate_floating(model, s0, kappa, cfg, n_steps, scan_points)
    if not rate.i_f > 0.0:
        raise OutOfDomain(f"Taxa flutuante nula em kappa={kappa:g}")
    sigma = abs(math.log(kappa)) / math.sqrt(2.0 * rate.i_f)
    swapped = MarketParams(s0, r=q, q=r)
    forward = forward_average(swapped, T)
    mirror_side = "put" if side == "call" else "call"
    price, d1, d2 = black_forward(forward, kappa * s0, sigma, T, math.exp(-q * T), mirror_side)
    diagnostics = {
        "exponent": rate.i_f / T,
        "lambda": rate.lam,
        "f1": rate.f1,
        "rate_method": rate.method,
        "flags": rate.flags,
    }
    return PriceResult(price, "equiv_ln", sigma, forward, d1, d2, rate.i_f, side, diagnostics)


def implied_equivalent_vol(
    price: float, market: MarketParams, option: OptionSpec, cfg: Optional[RootConfig] = None
) -> float:
    """Sigma tal que o Black sobre A(T) reproduz ``price``."""
    _require_fixed(option)
    T, K = option.maturity, option.strike
    forward = forward_average(market, T)
    discount = math.exp(-market.r * T)

    def gap(sigma: float) -> float:
        return black_forward(forward, K, sigma, T, discount, option.side)[0] - price

    try:
        return find_root(gap, IMPLIED_VOL_RANGE, cfg)
    except NoSignChange as e:
        raise OutOfDomain(f"Preço {price:.6g} fora do intervalo Black desta opção: {e}") from e


def implied_asian_vol(
    price: float,
    market: MarketParams,
    option: OptionSpec,
    cfg: Optional[RootConfig] = None,
) -> float:
    """Vol constante cujo preço asiático assintótico é ``price``."""
    _require_fixed(option)

    def gap(sigma: float) -> float:
        return price_asymptotic(LocalVolFn.constant(sigma), market, option, cfg=cfg).price - price

    try:
        return find_root(gap, IMPLIED_VOL_RANGE, cfg)
    except NoSignChange as e:
        raise OutOfDomain(f"Preço {price:.6g} fora do intervalo assintótico asiático: {e}") from e


def check_price_bounds(result: PriceResult, market: MarketParams, option: OptionSpec, tol: float = 1e-10) -> bool:
    """(A - K)^+ <= e^{rT} C <= A para calls, (K - A)^+ <= e^{rT} P <= K para puts."""
    _require_fixed(option)
    T, K = option.maturity, option.strike
    forward = forward_average(market, T)
    undiscounted = math.exp(market.r * T) * result.price
    if option.side == "call":
        lower, upper = max(forward - K, 0.0), forward
    else:
        lower, upper = max(K - forward, 0.0), K
    slack = tol * max(1.0, upper)
    ok = lower - slack <= undiscounted <= upper + slack
    if not ok:
        logger.warning(
            f"Preço {result.price:.9g} fora dos limites [{lower:.9g}, {upper:.9g}] "
            f"(sem desconto) para K={K:g}, T={T:g}, {option.side}"
        )
    return ok
