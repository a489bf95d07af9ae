"""
Limites de maturidade curta das volatilidades equivalentes da asiática:

    Sigma_LN^2 = log^2(K/S0) / (2 I)         log-normal (Black sobre A(T))
    Sigma_N^2  = (K - S0)^2 / (2 I)          normal (Bachelier), em unidades de moeda
    sigma_imp^2 = J_BS(K/S0) / I             vol constante com a mesma taxa

No ATM as três viram sigma(S0)/sqrt(3), S0 sigma(S0)/sqrt(3) e sigma(S0).
Dentro da banda de série a taxa vem da expansão da vol local.
"""

import math
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from scripts.asian.core_model import ATM_BAND, SERIES_BAND, LocalVolFn
from scripts.asian.errors import NonDifferentiable, OutOfDomain
from scripts.asian.numerics import QuadConfig, RootConfig
from scripts.asian.rate_bs import j_bs
from scripts.asian.rate_lv import rate_exact, rate_series

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)

# sigma/sqrt(3) * (1 + c1 x + c2 x^2 + c3 x^3), vol constante
LN_SERIES_BS = (1.0, 1.0 / 10.0, -23.0 / 2100.0, 1.0 / 3500.0)
# sigma S0/sqrt(3) * (1 + c1 k + c2 k^2 + c3 k^3), k = K/S0 - 1
N_SERIES_BS = (1.0, 3.0 / 5.0, -33.0 / 350.0, 83.0 / 1750.0)


@dataclass(frozen=True)
class VolLimits:
    sigma_ln: float
    sigma_n: float
    sigma_implied_asian: float
    rate: float
    regime: str  # atm | series | bs | exact


def rate_value(
    model: LocalVolFn,
    s0: float,
    strike: float,
    cfg: Optional[RootConfig] = None,
    quad: Optional[QuadConfig] = None,
    series_band: float = SERIES_BAND,
) -> Tuple[float, str]:
    """I(K, S0) e o regime usado para obtê-la."""
    if not (strike > 0.0 and s0 > 0.0):
        raise OutOfDomain(f"Precisa de K > 0 e S0 > 0, recebido K={strike}, S0={s0}")
    x = math.log(strike / s0)
    if model.is_constant:
        sigma = float(model(s0))
        if not sigma > 0.0:
            raise OutOfDomain("Vol zero não tem função taxa finita")
        return j_bs(strike / s0, cfg, series_band).j / sigma**2, "bs"
    if abs(x) < series_band:
        try:
            return rate_series(model, s0, x, order=4), "series"
        except NonDifferentiable as e:
            logger.debug(f"Série indisponível em S0={s0:g} ({e}); usando a taxa exata")
    return rate_exact(model, s0, strike, cfg, quad).i, "exact"


def vol_limits(
    model: LocalVolFn,
    s0: float,
    strike: float,
    cfg: Optional[RootConfig] = None,
    quad: Optional[QuadConfig] = None,
    atm_band: float = ATM_BAND,
    series_band: float = SERIES_BAND,
) -> VolLimits:
    if not (strike > 0.0 and s0 > 0.0):
        raise OutOfDomain(f"Precisa de K > 0 e S0 > 0, recebido K={strike}, S0={s0}")
    sigma0 = float(model(s0))
    x = math.log(strike / s0)
    if abs(x) <= atm_band:
        return VolLimits(sigma0 / SQRT3, s0 * sigma0 / SQRT3, sigma0, 0.0, "atm")

    rate, regime = rate_value(model, s0, strike, cfg, quad, series_band)
    if not rate > 0.0:
        raise OutOfDomain(f"Função taxa nula em K={strike:g}, S0={s0:g}: sem volatilidades equivalentes")
    j = j_bs(strike / s0, cfg, series_band).j
    return VolLimits(
        sigma_ln=abs(x) / math.sqrt(2.0 * rate),
        sigma_n=abs(strike - s0) / math.sqrt(2.0 * rate),
        sigma_implied_asian=math.sqrt(j / rate),
        rate=rate,
        regime=regime,
    )


def _poly(coeffs, z: float, order: int, max_order: int) -> float:
    if not 0 <= order <= max_order:
        raise OutOfDomain(f"Ordem da expansão deve estar entre 0 e {max_order}, recebido {order}")
    return sum(c * z**i for i, c in enumerate(coeffs[: order + 1]))


def vol_ln_series_bs(sigma: float, x: float, order: int = 3) -> float:
    return sigma / SQRT3 * _poly(LN_SERIES_BS, x, order, 3)


def vol_n_series_bs(sigma: float, s0: float, k: float, order: int = 3) -> float:
    return sigma * s0 / SQRT3 * _poly(N_SERIES_BS, k, order, 3)


def vol_series_coefficients(model: LocalVolFn, s0: float) -> Dict[str, Tuple[float, float, float]]:
    """
    Nível, skew e convexidade de Sigma_LN em x = log(K/S0) e de Sigma_N em
    k = K/S0 - 1, a partir de sigma, sigma' e sigma'' em S0.

    Com u = S0 sigma'/sigma e w = S0^2 sigma''/sigma:

        Sigma_LN = sigma/sqrt3 (1 + (1/10 + 3u/5) x
                   + (-23/2100 + 57u/175 - 33u^2/350 + 9w/35) x^2)
        Sigma_N  = sigma S0/sqrt3 (1 + (3/5 + 3u/5) k
                   + (-33/350 + 57u/175 - 33u^2/350 + 9w/35) k^2)

    Raises:
        NonDifferentiable: S0 em um bico do corte.
    """
    model.check_differentiable(s0)
    sigma = float(model(s0))
    u = s0 * float(model.derivative(s0, 1)) / sigma
    w = s0**2 * float(model.derivative(s0, 2)) / sigma
    shared = 57.0 / 175.0 * u - 33.0 / 350.0 * u * u + 9.0 / 35.0 * w

    level_ln = sigma / SQRT3
    level_n = sigma * s0 / SQRT3
    return {
        "ln": (level_ln, level_ln * (0.1 + 0.6 * u), level_ln * (-23.0 / 2100.0 + shared)),
        "n": (level_n, level_n * (0.6 + 0.6 * u), level_n * (-33.0 / 350.0 + shared)),
    }


def vol_ln_series_lv(model: LocalVolFn, s0: float, x: float, order: int = 2) -> float:
    return _poly(vol_series_coefficients(model, s0)["ln"], x, order, 2)


def vol_n_series_lv(model: LocalVolFn, s0: float, k: float, order: int = 2) -> float:
    return _poly(vol_series_coefficients(model, s0)["n"], k, order, 2)


def asian_atm_from_european(euro_vol: float, euro_skew: float) -> Tuple[float, float]:
    """Nível e skew (d/dx) ATM da asiática a partir da vol implícita europeia ATM e seu skew."""
    return euro_vol / SQRT3, (euro_vol / 10.0 + 1.2 * euro_skew) / SQRT3
