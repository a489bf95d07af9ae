"""
pipeline.py: CLI das assintóticas de curta maturidade para opções asiáticas

Uso:
    python pipeline.py price --model constant:0.30 --s0 100 --strike 110 --T 0.5
    python pipeline.py rate --model cev:0.3,-0.3 --s0 100 --moneyness 1.2
    python pipeline.py vol --model constant:0.30 --s0 100 --strike 100
    python pipeline.py path --model cev_skew --strike 120 --points 101
    python pipeline.py mc --model constant:0.30 --strike 110 --T 0.5 --paths 100000
    python pipeline.py bench-table1 --out data/output/table1.csv
    python pipeline.py bench-table2 --format json
    python pipeline.py scan --model smile_table --from 0.5 --to 2.0 --points 61

Modelos (--model):
    constant:<sigma> | cev:<sigma0>,<expoente>[,<s_ref>] | table:<arquivo>
    <arquivo.json> com bloco "model" (e "market" opcional)
    <perfil> definido em config/model_profiles.json

Dados vão para stdout (ou --out); logs vão para stderr.
Códigos de saída: 0 sucesso, 1 falha numérica, 2 erro de uso.
"""

import sys
import json
import logging
import argparse
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from scripts.asian.benchmarks import bench_table1, bench_table2, path_frame, rate_scan_grid
from scripts.asian.core_model import (
    LocalVolFn,
    MarketParams,
    OptionSpec,
    load_model_document,
    market_from_dict,
    model_from_dict,
)
from scripts.asian.equiv_vol import vol_limits
from scripts.asian.errors import AsianError, InvalidConfig, OutOfDomain
from scripts.asian.floating import rate_floating
from scripts.asian.mc_engine import AsianMonteCarloEngine, convergence_sweep
from scripts.asian.pricer import (
    price_asymptotic,
    price_atm,
    price_floating_asymptotic,
    price_itm_expansion,
    price_ldp_exponent,
)
from scripts.asian.rate_lv import objective_curve, rate_discrete_path, rate_exact, rate_scan, rate_series
from scripts.utils.log_config import setup_logging
from scripts.utils.settings_manager import settings_manager

logger = logging.getLogger("PIPELINE")

PRICE_METHODS = ["equiv_ln", "equiv_n", "atm_sqrt_t", "itm_expansion", "ldp_exponent"]
RATE_METHODS = ["exact", "scan", "series", "discrete_path"]


# -------------------------------------------------------------------------
# Modelo e mercado
# -------------------------------------------------------------------------


def _read_table(path: Path) -> LocalVolFn:
    """Tabela de volatilidade local: JSON de modelo ou CSV com colunas S,sigma."""
    if not path.exists():
        raise InvalidConfig(f"Arquivo de tabela não encontrado: {path}")
    if path.suffix.lower() == ".json":
        model, _ = load_model_document(path, **settings_manager.vol_bounds())
        return model
    frame = pd.read_csv(path)
    if not {"S", "sigma"} <= set(frame.columns):
        raise InvalidConfig(f"Tabela {path} precisa das colunas S e sigma")
    return LocalVolFn.tabulated(frame["S"].to_numpy(), frame["sigma"].to_numpy(), **settings_manager.vol_bounds())


def resolve_model(spec: str, s0: Optional[float]) -> Tuple[LocalVolFn, Optional[MarketParams]]:
    """Interpreta --model: spec inline, arquivo JSON, perfil ou <nome>.json em paths.models."""
    bounds = settings_manager.vol_bounds()
    kind, _, body = spec.partition(":")
    try:
        if kind == "constant" and body:
            return LocalVolFn.constant(float(body), **bounds), None
        if kind == "cev" and body:
            parts = [float(p) for p in body.split(",")]
            if len(parts) not in (2, 3):
                raise InvalidConfig(f"Spec CEV inválida '{spec}': use cev:<sigma0>,<expoente>[,<s_ref>]")
            s_ref = parts[2] if len(parts) == 3 else (s0 or settings_manager.default_market()["s0"])
            return LocalVolFn.cev(parts[0], parts[1], s_ref, **bounds), None
        if kind == "table" and body:
            return _read_table(Path(body)), None
    except ValueError as e:
        if isinstance(e, AsianError):
            raise
        raise InvalidConfig(f"Spec de modelo inválida '{spec}': {e}") from e

    path = Path(spec)
    if path.suffix.lower() == ".json" or path.exists():
        return load_model_document(path, **bounds)

    profile = settings_manager.get_model_profile(spec)
    if profile is not None:
        market = market_from_dict(settings_manager.default_market(spec)) if "market" in profile else None
        return model_from_dict(profile["model"], **bounds), market

    stored = settings_manager.models_dir() / f"{spec}.json"
    if stored.exists():
        return load_model_document(stored, **bounds)

    raise InvalidConfig(
        f"Modelo '{spec}' não reconhecido. Perfis disponíveis: {', '.join(settings_manager.list_model_profiles())}"
    )


def build_market(args, doc_market: Optional[MarketParams]) -> MarketParams:
    base = doc_market or market_from_dict(settings_manager.default_market())
    return MarketParams(
        args.s0 if args.s0 is not None else base.s0,
        args.r if args.r is not None else base.r,
        args.q if args.q is not None else base.q,
    )


def _strike(args, market: MarketParams) -> Optional[float]:
    if args.strike is not None and args.moneyness is not None:
        raise OutOfDomain("Use apenas um de --strike ou --moneyness")
    if args.moneyness is not None:
        return args.moneyness * market.s0
    return args.strike


def _option(args, market: MarketParams) -> OptionSpec:
    strike = _strike(args, market)
    if getattr(args, "kappa", None) is not None:
        if strike is not None:
            raise OutOfDomain("Use --kappa (strike flutuante) ou --strike/--moneyness (strike fixo), não ambos")
        return OptionSpec.floating(args.kappa, args.T, args.side)
    if strike is None:
        raise OutOfDomain("Informe --strike, --moneyness ou --kappa")
    return OptionSpec.fixed(strike, args.T, args.side)


def _setup(args) -> Tuple[LocalVolFn, MarketParams]:
    model, doc_market = resolve_model(args.model, args.s0)
    market = build_market(args, doc_market)
    logger.debug(f"Modelo {model.kind}, S0={market.s0:g}, r={market.r:g}, q={market.q:g}")
    return model, market


# -------------------------------------------------------------------------
# Comandos
# -------------------------------------------------------------------------


def cmd_price(args) -> pd.DataFrame:
    model, market = _setup(args)
    option = _option(args, market)
    row = {"style": option.style, "side": option.side, "T": option.maturity}
    bands = settings_manager.bands()

    if option.style == "floating":
        result = price_floating_asymptotic(
            model,
            market,
            option.kappa,
            option.maturity,
            option.side,
            settings_manager.root_config(),
            settings_manager.bvp_steps(),
            bands["atm_band"],
            settings_manager.bvp_scan_points(),
        )
        row.update({"kappa": option.kappa, "price": result.price, "method": result.method, "sigma": result.sigma})
        return pd.DataFrame([row])

    row["strike"] = option.strike
    if args.method == "ldp_exponent":
        exponent, scale = price_ldp_exponent(
            model, market, option, settings_manager.root_config(), settings_manager.quad_config(), bands["atm_band"]
        )
        row.update({"exponent": exponent, "price_scale": scale, "method": args.method})
        return pd.DataFrame([row])
    if args.method == "atm_sqrt_t":
        result = price_atm(model, market, option.maturity, option.side)
    elif args.method == "itm_expansion":
        result = price_itm_expansion(market, option, bands["atm_band"])
    else:
        result = price_asymptotic(
            model,
            market,
            option,
            args.method,
            settings_manager.root_config(),
            settings_manager.quad_config(),
            (bands["atm_band"], bands["series_band"]),
        )
    row.update(
        {
            "price": result.price,
            "method": result.method,
            "sigma": result.sigma,
            "forward": result.forward,
            "rate": result.rate,
        }
    )
    return pd.DataFrame([row])


def cmd_rate(args) -> pd.DataFrame:
    model, market = _setup(args)
    if args.kappa is not None:
        result = rate_floating(
            model,
            market.s0,
            args.kappa,
            settings_manager.root_config(),
            settings_manager.bvp_steps(),
            settings_manager.bvp_scan_points(),
        )
        row = {
            "kappa": args.kappa,
            "rate": result.i_f,
            "lambda": result.lam,
            "f1": result.f1,
            "method": result.method,
            "flags": ";".join(result.flags),
        }
        return pd.DataFrame([row])

    strike = _strike(args, market)
    if strike is None:
        raise OutOfDomain("Informe --strike, --moneyness ou --kappa")
    cfg, quad = settings_manager.root_config(), settings_manager.quad_config()
    if args.method == "series":
        value = rate_series(model, market.s0, float(np.log(strike / market.s0)), order=args.order)
        return pd.DataFrame([{"strike": strike, "ratio": strike / market.s0, "rate": value, "method": "series"}])
    if args.method == "scan":
        result = rate_scan(model, market.s0, strike, cfg, quad)
    elif args.method == "discrete_path":
        result = rate_discrete_path(model, market.s0, strike)
    else:
        result = rate_exact(model, market.s0, strike, cfg, quad)
    row = {
        "strike": strike,
        "ratio": strike / market.s0,
        "rate": result.i,
        "terminal": result.terminal,
        "lagrange": result.lagrange,
        "method": result.method,
        "branch": result.branch,
        "flags": ";".join(result.flags),
    }
    return pd.DataFrame([row])


def cmd_vol(args) -> pd.DataFrame:
    model, market = _setup(args)
    strike = _strike(args, market)
    if strike is None:
        raise OutOfDomain("Informe --strike ou --moneyness")
    bands = settings_manager.bands()
    limits = vol_limits(
        model,
        market.s0,
        strike,
        settings_manager.root_config(),
        settings_manager.quad_config(),
        bands["atm_band"],
        bands["series_band"],
    )
    row = {
        "strike": strike,
        "sigma_ln": limits.sigma_ln,
        "sigma_n": limits.sigma_n,
        "sigma_implied_asian": limits.sigma_implied_asian,
        "rate": limits.rate,
        "regime": limits.regime,
    }
    return pd.DataFrame([row])


def cmd_path(args) -> pd.DataFrame:
    model, market = _setup(args)
    strike = _strike(args, market)
    return path_frame(model, market.s0, strike=strike, kappa=args.kappa, n=args.points)


def cmd_mc(args) -> pd.DataFrame:
    model, market = _setup(args)
    option = _option(args, market)
    cfg = settings_manager.mc_config(
        paths=args.paths,
        steps=args.steps,
        seed=args.seed,
        workers=args.workers,
        antithetic=True if args.antithetic else None,
        progress=False if args.no_progress else None,
    )
    level = option.strike if option.style == "fixed" else option.kappa
    if args.sweep:
        maturities = [float(t) for t in args.sweep.split(",")]
        logger.info(f"Varredura de convergência em T = {maturities}")
        return convergence_sweep(model, market, option, maturities, cfg)

    logger.info(f"Monte Carlo: {cfg.paths} caminhos, {cfg.steps} passos, seed {cfg.seed}")
    estimate = AsianMonteCarloEngine(model, market, cfg).simulate(option)
    row = estimate.to_row(level, option.maturity)
    row["flags"] = ";".join(estimate.flags)
    return pd.DataFrame([row])


def cmd_bench_table1(args) -> pd.DataFrame:
    return bench_table1(reference_path=args.reference, progress=not args.no_progress)


def cmd_bench_table2(args) -> pd.DataFrame:
    return bench_table2(reference_path=args.reference)


def cmd_scan(args) -> pd.DataFrame:
    model, market = _setup(args)
    if args.objective:
        strike = _strike(args, market)
        if strike is None:
            raise OutOfDomain("--objective precisa de --strike ou --moneyness")
        abscissa, values = objective_curve(model, market.s0, strike, n=args.points)
        return pd.DataFrame({"abscissa": abscissa, "objective": values})
    ratios = np.linspace(args.ratio_from, args.ratio_to, args.points)
    return rate_scan_grid(model, market.s0, ratios, progress=not args.no_progress)


COMMANDS: Dict[str, Callable[[argparse.Namespace], pd.DataFrame]] = {
    "price": cmd_price,
    "rate": cmd_rate,
    "vol": cmd_vol,
    "path": cmd_path,
    "mc": cmd_mc,
    "bench-table1": cmd_bench_table1,
    "bench-table2": cmd_bench_table2,
    "scan": cmd_scan,
}


# -------------------------------------------------------------------------
# Argumentos e saída
# -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    output_cfg = settings_manager.section("output")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=str, default=None, help="Arquivo de saída (padrão: stdout)")
    common.add_argument(
        "--format",
        type=str,
        default=output_cfg.get("format", "csv"),
        choices=["csv", "json"],
        help="Formato de saída",
    )
    common.add_argument("--log-level", type=str, default=None, help="Nível de log (DEBUG, INFO, ...)")
    common.add_argument("--no-progress", action="store_true", help="Desativa barras de progresso")

    market = argparse.ArgumentParser(add_help=False)
    market.add_argument("--model", type=str, required=True, help="Modelo de volatilidade local")
    market.add_argument("--s0", type=float, default=None, help="Preço spot S0")
    market.add_argument("--r", type=float, default=None, help="Taxa de juros r")
    market.add_argument("--q", type=float, default=None, help="Dividend yield q")

    strike = argparse.ArgumentParser(add_help=False)
    strike.add_argument("--strike", type=float, default=None, help="Strike fixo K")
    strike.add_argument("--moneyness", type=float, default=None, help="K/S0 (alternativa a --strike)")

    floating = argparse.ArgumentParser(add_help=False)
    floating.add_argument("--kappa", type=float, default=None, help="Razão do strike flutuante")

    option = argparse.ArgumentParser(add_help=False)
    option.add_argument("--T", type=float, default=1.0, help="Maturidade em anos")
    option.add_argument("--side", type=str, default="call", choices=["call", "put"])

    parser = argparse.ArgumentParser(description="Assintóticas de curta maturidade para opções asiáticas")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", parents=[common, market, strike, floating, option], help="Preço assintótico")
    p.add_argument("--method", type=str, default="equiv_ln", choices=PRICE_METHODS)

    p = sub.add_parser("rate", parents=[common, market, strike, floating], help="Função taxa I(K, S0) ou I_f(kappa)")
    p.add_argument("--method", type=str, default="exact", choices=RATE_METHODS)
    p.add_argument("--order", type=int, default=4, choices=[2, 3, 4], help="Ordem da série (método series)")

    sub.add_parser("vol", parents=[common, market, strike], help="Volatilidades equivalentes no limite T -> 0")

    p = sub.add_parser("path", parents=[common, market, strike, floating], help="Caminho ótimo f(t)")
    p.add_argument("--points", type=int, default=101)

    p = sub.add_parser("mc", parents=[common, market, strike, floating, option], help="Preço por Monte Carlo")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--antithetic", action="store_true")
    p.add_argument("--sweep", type=str, default=None, help="Lista de maturidades para a varredura T log C (ex.: 1,0.5,0.25)")

    for name, text in (("bench-table1", "Tabela 1 (Black-Scholes)"), ("bench-table2", "Tabela 2 (cenários de referência)")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--reference", type=str, default=None, help="Arquivo YAML de referência")

    p = sub.add_parser("scan", parents=[common, market, strike], help="Grade (K/S0, J_BS, I_LV) ou curva objetivo")
    p.add_argument("--from", dest="ratio_from", type=float, default=0.5)
    p.add_argument("--to", dest="ratio_to", type=float, default=2.0)
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--objective", action="store_true", help="Curva objetivo da representação por ínfimo")
    return parser


def emit(frame: pd.DataFrame, args) -> None:
    digits = int(settings_manager.section("output").get("significant_digits", 9))
    if args.format == "json":
        text = json.dumps(
            json.loads(frame.to_json(orient="records", double_precision=15)), indent=2, ensure_ascii=False
        )
        text += "\n"
    else:
        text = frame.to_csv(index=False, float_format=f"%.{digits}g")

    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text, encoding="utf-8")
        logger.info(f"Resultado salvo em: {out_path}")
    else:
        sys.stdout.write(text)


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse já imprimiu o uso em stderr; --help sai com 0
        return 0 if e.code in (0, None) else 2

    setup_logging(args.log_level)
    logger.debug(f"Comando: {args.command}")
    try:
        frame = COMMANDS[args.command](args)
    except AsianError as e:
        logger.error(f"Falha em '{args.command}': {e}")
        print(f"erro: {e}", file=sys.stderr)
        return 1

    emit(frame, args)
    return 0


if __name__ == "__main__":
    sys.exit(run())
