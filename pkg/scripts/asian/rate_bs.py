"""
Função taxa Black-Scholes J_BS(m), m = K/S0.

Para m >= 1 o parâmetro é beta com sinh(beta)/beta = m; para m <= 1 é
xi em [0, pi/2) com sin(2 xi)/(2 xi) = m:

    J = beta**2 / 2 - beta * tanh(beta / 2)     (m >= 1)
    J = 2 xi (tan(xi) - xi)                      (m <= 1)

Perto de m = 1 as duas equações perdem curvatura e a série de Taylor assume
dentro da banda de série. Nas caudas há assintóticas fechadas.
"""

import math
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from scripts.asian.core_model import SERIES_BAND
from scripts.asian.errors import OutOfDomain
from scripts.asian.numerics import RootConfig, find_root

logger = logging.getLogger(__name__)

# coeficientes de x^2 .. x^6 em J_BS(e^x)
X_SERIES = (3.0 / 2.0, -3.0 / 10.0, 109.0 / 1400.0, -117.0 / 7000.0, 47749.0 / 16170000.0)
# coeficientes de k^2 .. k^6 em J_BS(1 + k)
K_SERIES = (3.0 / 2.0, -9.0 / 5.0, 333.0 / 175.0, -1704.0 / 875.0, 1326951.0 / 673750.0)

SMALL_M_FLOOR = 1e-8
_BRACKET_EDGE = 1e-12


@dataclass(frozen=True)
class BsRateResult:
    j: float
    branch: str  # beta | xi | series | tail
    param: float  # beta ou xi; nan sem raiz resolvida
    residual: float
    flags: Tuple[str, ...] = ()


def solve_beta(m: float, cfg: Optional[RootConfig] = None) -> float:
    """Único beta >= 0 com sinh(beta)/beta = m."""
    if not (math.isfinite(m) and m >= 1.0):
        raise OutOfDomain(f"solve_beta exige m >= 1, recebido {m}")
    if m == 1.0:
        return 0.0
    cfg = cfg or RootConfig()

    hi = 1.0
    while math.sinh(hi) / hi < m:
        hi *= cfg.expand_factor
        if hi > 700.0:
            raise OutOfDomain(f"m={m:g} além do alcance representável de sinh(beta)/beta")
    return find_root(lambda b: math.sinh(b) / b - m, (_BRACKET_EDGE, hi), cfg)


def solve_xi(m: float, cfg: Optional[RootConfig] = None) -> float:
    """Único xi em [0, pi/2) com sin(2 xi)/(2 xi) = m."""
    if not (math.isfinite(m) and 0.0 < m <= 1.0):
        raise OutOfDomain(f"solve_xi exige 0 < m <= 1, recebido {m}")
    if m == 1.0:
        return 0.0
    hi = 0.5 * math.pi - _BRACKET_EDGE
    if math.sin(2.0 * hi) / (2.0 * hi) >= m:
        raise OutOfDomain(f"m={m:g} próximo demais de 0: xi preso em pi/2")
    return find_root(lambda xi: math.sin(2.0 * xi) / (2.0 * xi) - m, (_BRACKET_EDGE, hi), cfg)


def j_bs_series(x: float, order: int = 4) -> float:
    """Série de Taylor de J_BS em x = log m com os primeiros `order` termos (1..5)."""
    return _series(X_SERIES, x, order)


def j_bs_series_k(k: float, order: int = 4) -> float:

    return _series(K_SERIES, k, order)


def _series(coeffs: Sequence[float], z: float, order: int) -> float:
    if not 1 <= order <= len(coeffs):
        raise OutOfDomain(f"Ordem da série deve estar entre 1 e {len(coeffs)}, recebido {order}")
    return float(sum(c * z ** (i + 2) for i, c in enumerate(coeffs[:order])))


def j_bs_tail(m: float, side: str, published: bool = False) -> float:
    """
    Assintóticas de J_BS para m -> infinito (side="large") e m -> 0
    (side="small"), com x = log m e l = log(2x):

        large: x^2/2 + x l - x + l^2/2 + l^2/(2x)
        small: 2 e^{-x} - pi^2/2 + (5 pi^2/6) e^{x}

    ``published=True`` devolve as formas citadas na literatura,
    x^2/2 + x l - x + 3 l^2 - 2 l e 2 e^{-x} - 2 - pi^2/2, menos precisas.
    """
    if side not in ("large", "small"):
        raise OutOfDomain(f"side deve ser 'large' ou 'small', recebido '{side}'")
    if not (math.isfinite(m) and m > 0.0):
        raise OutOfDomain(f"m deve ser > 0, recebido {m}")
    x = math.log(m)

    if side == "large":
        if m <= 1.0:
            raise OutOfDomain(f"Cauda de strike grande exige m > 1, recebido {m}")
        if x < 1.0:
            logger.warning(f"Cauda de strike grande avaliada em x={x:.3g} < 1; valor pouco confiável")
        ell = math.log(2.0 * x)
        if published:
            return 0.5 * x * x + x * ell - x + 3.0 * ell * ell - 2.0 * ell
        return 0.5 * x * x + x * ell - x + 0.5 * ell * ell + ell * ell / (2.0 * x)

    if m >= 1.0:
        raise OutOfDomain(f"Cauda de strike pequeno exige m < 1, recebido {m}")
    if published:
        return 2.0 * math.exp(-x) - 2.0 - 0.5 * math.pi**2
    return 2.0 * math.exp(-x) - 0.5 * math.pi**2 + (5.0 * math.pi**2 / 6.0) * m


def j_bs(m: float, cfg: Optional[RootConfig] = None, series_band: float = SERIES_BAND) -> BsRateResult:
    if not (math.isfinite(m) and m > 0.0):
        raise OutOfDomain(f"J_BS exige m > 0, recebido {m}")
    x = math.log(m)

    if abs(x) < series_band:
        return BsRateResult(j_bs_series(x, order=5), "series", float("nan"), 0.0)

    if m < SMALL_M_FLOOR:
        logger.warning(f"m={m:.3e} abaixo de {SMALL_M_FLOOR:g}: usando a assintótica da cauda de strike pequeno")
        return BsRateResult(j_bs_tail(m, "small"), "tail", float("nan"), float("nan"), ("tail_approximation",))

    if m > 1.0:
        beta = solve_beta(m, cfg)
        j = 0.5 * beta * beta - beta * math.tanh(0.5 * beta)
        return BsRateResult(j, "beta", beta, math.sinh(beta) / beta - m)

    xi = solve_xi(m, cfg)
    j = 2.0 * xi * (math.tan(xi) - xi)
    return BsRateResult(j, "xi", xi, math.sin(2.0 * xi) / (2.0 * xi) - m)


def optimal_path_bs(m: float, grid, cfg: Optional[RootConfig] = None) -> np.ndarray:
    """
    Caminho minimizante f(t) do problema variacional Black-Scholes:

        m >= 1:  f(t) = beta t - 2 log((e^{beta t} + e^{beta}) / (1 + e^{beta}))
        m <= 1:  f(t) = log(cos^2(xi) / cos^2(xi (t - 1)))

    com f(0) = 0, f'(1) = 0 e integral de e^f em [0, 1] igual a m.
    """
    if not (math.isfinite(m) and m > 0.0):
        raise OutOfDomain(f"Caminho ótimo exige m > 0, recebido {m}")
    t = np.asarray(grid, dtype=float)
    if m == 1.0:
        return np.zeros_like(t)
    if m > 1.0:
        beta = solve_beta(m, cfg)
        # (e^{bt} + e^b)/(1 + e^b) = (1 + e^{b(t-1)})/(1 + e^{-b}), sem overflow
        return beta * t - 2.0 * np.log1p(np.exp(beta * (t - 1.0))) + 2.0 * math.log1p(math.exp(-beta))
    xi = solve_xi(m, cfg)
    return 2.0 * math.log(math.cos(xi)) - 2.0 * np.log(np.cos(xi * (t - 1.0)))


def bs_terminal_value(m: float, cfg: Optional[RootConfig] = None) -> float:
    """f(1) do caminho ótimo BS: 2 log cosh(beta/2) para m > 1, 2 log cos(xi) para m < 1."""
    if m == 1.0:
        return 0.0
    return float(optimal_path_bs(m, [1.0], cfg)[0])
