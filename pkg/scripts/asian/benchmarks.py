"""
Tabelas de benchmark em DataFrames do pandas.

As colunas de referência (Monte Carlo, espectral, outros métodos) vêm dos
YAML em config/benchmarks e nunca são recalculadas.
"""

import math
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import numpy as np
import pandas as pd
import yaml
from tqdm import tqdm

from scripts.asian.core_model import LocalVolFn, MarketParams, OptionSpec
from scripts.asian.equiv_vol import rate_value, vol_limits
from scripts.asian.errors import InvalidConfig
from scripts.asian.floating import rate_floating
from scripts.asian.pricer import price_asymptotic
from scripts.asian.rate_bs import j_bs, optimal_path_bs
from scripts.asian.rate_lv import optimal_path_lv
from scripts.utils.settings_manager import settings_manager

logger = logging.getLogger(__name__)

REFERENCE_COLUMNS = ("linetsky", "levy", "fpp3")


def _load_reference(path: Optional[Union[str, Path]], key: str) -> Dict[str, Any]:
    if path is None:
        path = settings_manager.section("benchmarks").get(key)
        if path is None:
            raise InvalidConfig(f"benchmarks.{key} não definido nas configurações")
        path = settings_manager.resolve_path(path)
    path = Path(path)
    if not path.exists():
        raise InvalidConfig(f"Arquivo de referência não encontrado: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def table1_scenario() -> Dict[str, Any]:
    defaults = {
        "s0": 100.0,
        "sigma": 0.30,
        "r": 0.0,
        "q": 0.0,
        "maturities": [0.5, 1.0, 2.0],
        "call_strikes": [100, 105, 110, 115, 120, 125, 130],
        "put_strikes": [70, 75, 80, 85, 90, 95, 100],
    }
    return {**defaults, **settings_manager.section("benchmarks", "table1")}


def bench_table1(
    decimals: Optional[int] = None,
    reference_path: Optional[Union[str, Path]] = None,
    progress: bool = False,
) -> pd.DataFrame:
    """
    Uma linha por (side, K): preço assintótico por maturidade (``price_T<T>``),
    referência MC guardada (``mc_T<T>``, ``mc_stdev_T<T>``) e ``sigma_ln``.
    """
    scenario = table1_scenario()
    if decimals is None:
        decimals = int(settings_manager.section("output").get("table1_decimals", 4))
    model = LocalVolFn.constant(float(scenario["sigma"]))
    market = MarketParams(float(scenario["s0"]), float(scenario["r"]), float(scenario["q"]))
    maturities = [float(T) for T in scenario["maturities"]]

    reference = _load_reference(reference_path, "table1_reference")
    mc = {(row["side"], float(row["K"]), float(row["T"])): row for row in reference.get("rows", [])}

    cases = [("call", float(K)) for K in scenario["call_strikes"]]
    cases += [("put", float(K)) for K in scenario["put_strikes"]]
    rows = []
    for side, K in tqdm(cases, desc="Tabela 1", disable=not progress, leave=False):
        row: Dict[str, Any] = {"side": side, "K": K}
        for T in maturities:
            result = price_asymptotic(model, market, OptionSpec.fixed(K, T, side))
            row[f"price_T{T:g}"] = round(result.price, decimals)
            ref = mc.get((side, K, T))
            row[f"mc_T{T:g}"] = ref["price"] if ref else math.nan
            row[f"mc_stdev_T{T:g}"] = ref["stdev"] if ref else math.nan
        row["sigma_ln"] = round(vol_limits(model, market.s0, K).sigma_ln, decimals)
        rows.append(row)
    return pd.DataFrame(rows)


def bench_table2(
    decimals: Optional[int] = None,
    reference_path: Optional[Union[str, Path]] = None,
) -> pd.DataFrame:
    """Preço assintótico de cada cenário guardado ao lado das colunas de referência."""
    if decimals is None:
        decimals = int(settings_manager.section("output").get("table2_decimals", 6))
    reference = _load_reference(reference_path, "table2_reference")
    scenarios = reference.get("scenarios", [])
    if not scenarios:
        raise InvalidConfig("Referência da Tabela 2 sem cenários")

    rows = []
    for sc in scenarios:
        market = MarketParams(float(sc["s0"]), float(sc["r"]), float(sc.get("q", 0.0)))
        model = LocalVolFn.constant(float(sc["sigma"]))
        option = OptionSpec.fixed(float(sc["K"]), float(sc["T"]), "call")
        price = price_asymptotic(model, market, option).price
        row = {k: sc[k] for k in ("r", "T", "s0", "K", "sigma")}
        row["asymptotic"] = round(price, decimals)
        row["published"] = sc.get("asym", math.nan)
        for col in REFERENCE_COLUMNS:
            row[col] = sc.get(col, math.nan)
        row["reldiff_linetsky"] = abs(price - row["linetsky"]) / row["linetsky"]
        rows.append(row)
    return pd.DataFrame(rows)


def rate_scan_grid(
    model: LocalVolFn,
    s0: float,
    ratios: Iterable[float],
    progress: bool = False,
) -> pd.DataFrame:
    """Colunas ratio (K/S0), j_bs, i_lv."""
    rows = []
    for ratio in tqdm(list(ratios), desc="Varredura", disable=not progress, leave=False):
        ratio = float(ratio)
        if ratio == 1.0:
            rows.append({"ratio": ratio, "j_bs": 0.0, "i_lv": 0.0})
            continue
        i_lv, _ = rate_value(model, s0, ratio * s0)
        rows.append({"ratio": ratio, "j_bs": j_bs(ratio).j, "i_lv": i_lv})
    return pd.DataFrame(rows)


def path_frame(
    model: LocalVolFn,
    s0: float,
    strike: Optional[float] = None,
    kappa: Optional[float] = None,
    n: int = 101,
) -> pd.DataFrame:
    """Caminho ótimo f(t) em [0, 1] para strike fixo ou razão flutuante."""
    if (strike is None) == (kappa is None):
        raise InvalidConfig("path_frame precisa de strike ou kappa (exatamente um)")
    t = np.linspace(0.0, 1.0, n)
    if kappa is not None:
        result = rate_floating(model, s0, kappa)
        f = np.interp(t, result.t, result.f)
    elif model.is_constant:
        f = optimal_path_bs(strike / s0, t)
    else:
        f = optimal_path_lv(model, s0, strike, t)
    return pd.DataFrame({"t": t, "f": f, "spot": s0 * np.exp(f)})
