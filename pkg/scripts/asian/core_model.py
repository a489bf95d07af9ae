"""
Tipos de domínio da biblioteca: função de vol local, parâmetros de mercado,
especificação da opção e moneyness, além da média forward A(T) e do gap da
paridade put-call.

Documentos de modelo em JSON:

    {"model": {"kind": "constant", "sigma": 0.3},
     "market": {"s0": 100, "r": 0.0, "q": 0.0}}

    {"model": {"kind": "cev", "sigma0": 0.3, "exponent": -0.3, "s_ref": 100,
               "sigma_lo": 1e-4, "sigma_hi": 10}}

    {"model": {"kind": "tabulated", "knots": [...], "values": [...]}}

Nós tabelados devem ser estritamente crescentes em S; a curva é a
interpolação cúbica monótona (PCHIP) com extrapolação constante.
"""

import json
import math
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import PchipInterpolator

from scripts.asian.errors import InvalidConfig, NonDifferentiable, OutOfDomain

logger = logging.getLogger(__name__)

SIGMA_LO = 1e-4
SIGMA_HI = 10.0
ATM_BAND = 1e-6
SERIES_BAND = 1e-4
# abaixo deste |(r-q)T| A(T) usa a forma de Taylor
FORWARD_TAYLOR_BAND = 1e-8

KINDS = ("constant", "cev", "tabulated")
SIDES = ("call", "put")

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class LocalVolFn:
    """
    Vol local limitada sigma(S).

    Construa com :meth:`constant`, :meth:`cev` ou :meth:`tabulated`. Curvas CEV
    e tabeladas são cortadas em [sigma_lo, sigma_hi] e as derivadas zeram onde
    o corte está ativo.
    """

    kind: str
    sigma0: float = 0.0
    exponent: float = 0.0
    s_ref: float = 1.0
    knots: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()
    sigma_lo: float = SIGMA_LO
    sigma_hi: float = SIGMA_HI
    _interp: Any = field(default=None, init=False, repr=False, compare=False)
    _slopes: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfig(f"Tipo de volatilidade desconhecido '{self.kind}', esperado um de {KINDS}")
        if not (0.0 < self.sigma_lo <= self.sigma_hi < math.inf):
            raise InvalidConfig(
                f"Limites de vol precisam de 0 < sigma_lo <= sigma_hi < inf, "
                f"recebido [{self.sigma_lo}, {self.sigma_hi}]"
            )

        if self.kind in ("constant", "cev"):
            if not (math.isfinite(self.sigma0) and self.sigma0 >= 0.0):
                raise InvalidConfig(f"sigma0 deve ser finito e >= 0, recebido {self.sigma0}")
        if self.kind == "cev":
            if not math.isfinite(self.exponent):
                raise InvalidConfig(f"Expoente CEV deve ser finito, recebido {self.exponent}")
            if not self.s_ref > 0.0:
                raise InvalidConfig(f"Nível de referência CEV deve ser > 0, recebido {self.s_ref}")
        if self.kind == "tabulated":
            knots = np.asarray(self.knots, dtype=float)
            values = np.asarray(self.values, dtype=float)
            if knots.ndim != 1 or knots.size < 2 or knots.size != values.size:
                raise InvalidConfig("Vol tabelada precisa de >= 2 nós e um valor por nó")
            if np.any(knots <= 0.0) or np.any(np.diff(knots) <= 0.0):
                raise InvalidConfig("Nós tabelados devem ser positivos e estritamente crescentes em S")
            if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
                raise InvalidConfig("Valores da vol tabelada devem ser finitos e > 0")
            interp = PchipInterpolator(knots, values, extrapolate=False)
            object.__setattr__(self, "_interp", interp)
            object.__setattr__(self, "_slopes", (interp.derivative(1), interp.derivative(2)))

    @classmethod
    def constant(cls, sigma: float, sigma_lo: float = SIGMA_LO, sigma_hi: float = SIGMA_HI) -> "LocalVolFn":
        return cls(kind="constant", sigma0=float(sigma), sigma_lo=sigma_lo, sigma_hi=sigma_hi)

    @classmethod
    def cev(
        cls,
        sigma0: float,
        exponent: float,
        s_ref: float,
        sigma_lo: float = SIGMA_LO,
        sigma_hi: float = SIGMA_HI,
    ) -> "LocalVolFn":
        """sigma(S) = sigma0 * (S / s_ref) ** exponent, com corte."""
        return cls(
            kind="cev",
            sigma0=float(sigma0),
            exponent=float(exponent),
            s_ref=float(s_ref),
            sigma_lo=sigma_lo,
            sigma_hi=sigma_hi,
        )

    @classmethod
    def tabulated(
        cls,
        knots,
        values,
        sigma_lo: float = SIGMA_LO,
        sigma_hi: float = SIGMA_HI,
    ) -> "LocalVolFn":
        return cls(
            kind="tabulated",
            knots=tuple(float(k) for k in knots),
            values=tuple(float(v) for v in values),
            sigma_lo=sigma_lo,
            sigma_hi=sigma_hi,
        )

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def _raw(self, s: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(s, self.sigma0)
        if self.kind == "cev":
            # S = 0 dá vol bruta infinita (ou nula), absorvida pelo corte
            with np.errstate(divide="ignore", over="ignore"):
                return self.sigma0 * np.power(s / self.s_ref, self.exponent)
        inside = np.clip(s, self.knots[0], self.knots[-1])
        return self._interp(inside)

    def __call__(self, s: ArrayLike) -> ArrayLike:
        if self.kind == "constant" and np.isscalar(s):
            return min(max(self.sigma0, self.sigma_lo), self.sigma_hi)
        if self.kind == "cev" and np.isscalar(s) and s > 0.0:
            raw = self.sigma0 * (s / self.s_ref) ** self.exponent
            return min(max(raw, self.sigma_lo), self.sigma_hi)
        arr = np.asarray(s, dtype=float)
        out = np.clip(self._raw(arr), self.sigma_lo, self.sigma_hi)
        return float(out) if out.ndim == 0 else out

    def derivative(self, s: ArrayLike, order: int = 1) -> ArrayLike:
        """d^order sigma / dS^order (ordem 1 ou 2); zero onde há corte ou extrapolação."""
        if order not in (1, 2):
            raise OutOfDomain(f"Só há derivadas de primeira e segunda ordem, recebido order={order}")
        arr = np.asarray(s, dtype=float)
        if self.kind == "constant":
            out = np.zeros_like(arr)
        elif self.kind == "cev":
            raw = self._raw(arr)
            active = (raw > self.sigma_lo) & (raw < self.sigma_hi)
            g = self.exponent
            with np.errstate(divide="ignore", invalid="ignore"):
                if order == 1:
                    out = g * raw / arr
                else:
                    out = g * (g - 1.0) * raw / arr**2
            out = np.where(active, out, 0.0)
        else:
            raw = self._raw(arr)
            inside = (arr > self.knots[0]) & (arr < self.knots[-1])
            active = inside & (raw > self.sigma_lo) & (raw < self.sigma_hi)
            poly = self._slopes[order - 1]
            out = np.where(active, poly(np.clip(arr, self.knots[0], self.knots[-1])), 0.0)
        return float(out) if out.ndim == 0 else out

    def check_differentiable(self, s: float) -> None:
        if self.kind == "constant":
            return
        raw = float(self._raw(np.asarray(s, dtype=float)))
        for bound in (self.sigma_lo, self.sigma_hi):
            if math.isclose(raw, bound, rel_tol=1e-12):
                raise NonDifferentiable(
                    f"sigma({s:g}) = {raw:g} está no limite de corte {bound:g}; "
                    "as derivadas laterais diferem"
                )
        if self.kind == "tabulated" and (s <= self.knots[0] or s >= self.knots[-1]):
            raise NonDifferentiable(
                f"S0={s:g} fora do intervalo aberto dos nós ({self.knots[0]:g}, {self.knots[-1]:g})"
            )

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "constant":
            return {"kind": "constant", "sigma": self.sigma0}
        base = {"sigma_lo": self.sigma_lo, "sigma_hi": self.sigma_hi}
        if self.kind == "cev":
            return {"kind": "cev", "sigma0": self.sigma0, "exponent": self.exponent, "s_ref": self.s_ref, **base}
        return {"kind": "tabulated", "knots": list(self.knots), "values": list(self.values), **base}


@dataclass(frozen=True)
class MarketParams:
    s0: float
    r: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.s0) and self.s0 > 0.0):
            raise OutOfDomain(f"Spot deve ser finito e > 0, recebido {self.s0}")
        for name in ("r", "q"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise OutOfDomain(f"{name} deve ser finito e >= 0, recebido {value}")


@dataclass(frozen=True)
class OptionSpec:
    """Strike fixo K ou razão flutuante kappa, maturidade em anos, call/put."""

    maturity: float
    side: str = "call"
    strike: Optional[float] = None
    kappa: Optional[float] = None

    def __post_init__(self):
        if self.side not in SIDES:
            raise OutOfDomain(f"side deve ser 'call' ou 'put', recebido '{self.side}'")
        if not (math.isfinite(self.maturity) and self.maturity > 0.0):
            raise OutOfDomain(f"Maturidade deve ser > 0, recebido {self.maturity}")
        if (self.strike is None) == (self.kappa is None):
            raise OutOfDomain("Informe exatamente um: strike (fixo) ou kappa (flutuante)")
        level = self.strike if self.strike is not None else self.kappa
        if not (math.isfinite(level) and level > 0.0):
            raise OutOfDomain(f"Strike / razão de strike deve ser > 0, recebido {level}")

    @classmethod
    def fixed(cls, strike: float, maturity: float, side: str = "call") -> "OptionSpec":
        return cls(maturity=maturity, side=side, strike=float(strike))

    @classmethod
    def floating(cls, kappa: float, maturity: float, side: str = "call") -> "OptionSpec":
        return cls(maturity=maturity, side=side, kappa=float(kappa))

    @property
    def style(self) -> str:
        return "fixed" if self.strike is not None else "floating"

    def ratio(self, s0: float) -> float:
        """K/S0 no strike fixo, kappa no flutuante."""
        return self.strike / s0 if self.strike is not None else self.kappa


@dataclass(frozen=True)
class Moneyness:
    tag: str  # OTM | ATM | ITM
    x: float  # log(K/S0) (log kappa no flutuante)
    k: float  # K/S0 - 1


def forward_average(market: MarketParams, maturity: float) -> float:
    """A(T) = S0 (e^{(r-q)T} - 1) / ((r-q)T), contínua em r = q."""
    if not maturity > 0.0:
        raise OutOfDomain(f"Maturidade deve ser > 0, recebido {maturity}")
    d = (market.r - market.q) * maturity
    if abs(d) < FORWARD_TAYLOR_BAND:
        return market.s0 * (1.0 + d / 2.0 + d * d / 6.0)
    return market.s0 * math.expm1(d) / d


def classify_moneyness(market: MarketParams, option: OptionSpec, atm_band: float = ATM_BAND) -> Moneyness:
    ratio = option.ratio(market.s0)
    x = math.log(ratio)
    k = ratio - 1.0
    if abs(x) <= atm_band:
        return Moneyness("ATM", x, k)

    # call fixa e put flutuante pagam com a razão abaixo de um
    above_is_otm = (option.style == "fixed") == (option.side == "call")
    otm = (ratio > 1.0) == above_is_otm
    return Moneyness("OTM" if otm else "ITM", x, k)


def put_call_parity_gap(market: MarketParams, option: OptionSpec) -> float:
    """C - P = e^{-rT} (A(T) - K) para asiáticas de strike fixo."""
    if option.style != "fixed":
        raise OutOfDomain("Gap de paridade put-call só existe para strike fixo")
    T = option.maturity
    return math.exp(-market.r * T) * (forward_average(market, T) - option.strike)


def model_from_dict(doc: Dict[str, Any], sigma_lo: float = SIGMA_LO, sigma_hi: float = SIGMA_HI) -> LocalVolFn:
    """Limites de corte do documento prevalecem sobre os passados."""
    kind = doc.get("kind")
    bounds = {
        "sigma_lo": float(doc.get("sigma_lo", sigma_lo)),
        "sigma_hi": float(doc.get("sigma_hi", sigma_hi)),
    }
    try:
        if kind == "constant":
            return LocalVolFn.constant(float(doc["sigma"]), **bounds)
        if kind == "cev":
            return LocalVolFn.cev(float(doc["sigma0"]), float(doc["exponent"]), float(doc["s_ref"]), **bounds)
        if kind == "tabulated":
            return LocalVolFn.tabulated(doc["knots"], doc["values"], **bounds)
    except KeyError as e:
        raise InvalidConfig(f"Modelo '{kind}' sem o campo {e}") from e
    raise InvalidConfig(f"Tipo de modelo desconhecido '{kind}'")


def market_from_dict(doc: Dict[str, Any]) -> MarketParams:
    try:
        return MarketParams(float(doc["s0"]), float(doc.get("r", 0.0)), float(doc.get("q", 0.0)))
    except KeyError as e:
        raise InvalidConfig(f"Bloco market sem o campo {e}") from e


def load_model_document(
    source: Union[str, Path, Dict[str, Any]],
    sigma_lo: float = SIGMA_LO,
    sigma_hi: float = SIGMA_HI,
) -> Tuple[LocalVolFn, Optional[MarketParams]]:
    """Lê um documento de modelo (caminho ou dict já lido); o bloco market é opcional."""
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        if not path.exists():
            raise InvalidConfig(f"Arquivo de modelo não encontrado: {path}")
        with open(path, "r", encoding="utf-8") as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as e:
                raise InvalidConfig(f"Arquivo de modelo {path} não é JSON válido: {e}") from e

    if "model" not in doc:
        raise InvalidConfig("Documento de modelo precisa de um bloco 'model'")
    model = model_from_dict(doc["model"], sigma_lo, sigma_hi)
    market = market_from_dict(doc["market"]) if "market" in doc else None
    logger.debug(f"Modelo {model.kind} carregado" + (f" com S0={market.s0}" if market else ""))
    return model, market
