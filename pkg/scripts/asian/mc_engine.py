"""
Monte Carlo de asiáticas de strike fixo e flutuante sob

    dS = (r - q) S dt + sigma(S) S dW

simulado em log (log-Euler, exato para sigma constante), com a média
aritmética pela regra do trapézio na grade de tempo.

Os caminhos são divididos em lotes; o lote i usa seu próprio stream Philox
gerado de ``SeedSequence(seed)`` e as estatísticas são combinadas na ordem
dos lotes. O mesmo (seed, paths, steps, batch_size) reproduz a mesma
estimativa com qualquer número de workers.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from scripts.asian.core_model import LocalVolFn, MarketParams, OptionSpec, classify_moneyness
from scripts.asian.equiv_vol import rate_value
from scripts.asian.errors import InvalidConfig, OutOfDomain
from scripts.asian.floating import rate_floating

logger = logging.getLogger(__name__)

SCHEMES = ("log_euler",)


@dataclass(frozen=True)
class McConfig:
    paths: int = 100_000
    steps: int = 200
    seed: int = 20240611
    scheme: str = "log_euler"
    antithetic: bool = False
    workers: int = 1
    batch_size: int = 10_000
    progress: bool = False

    def __post_init__(self):
        if self.paths < 100:
            raise InvalidConfig(f"Monte Carlo exige pelo menos 100 caminhos, recebido {self.paths}")
        if self.steps < 2:
            raise InvalidConfig(f"Monte Carlo exige pelo menos 2 passos de tempo, recebido {self.steps}")
        if self.scheme not in SCHEMES:
            raise InvalidConfig(f"Esquema desconhecido '{self.scheme}', esperado um de {SCHEMES}")
        if self.workers < 1 or self.batch_size < 1:
            raise InvalidConfig("workers e batch_size devem ser >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig(f"seed deve caber em 64 bits, recebido {self.seed}")
        if self.antithetic and (self.paths % 2 or self.batch_size % 2):
            raise InvalidConfig("Antitéticos exigem número de caminhos e batch_size pares")

    @classmethod
    def from_settings(cls, values: Dict[str, Any]) -> "McConfig":
        casts = {"paths": int, "steps": int, "seed": int, "workers": int, "batch_size": int,
                 "scheme": str, "antithetic": bool, "progress": bool}
        names = {f.name for f in fields(cls)}
        try:
            kwargs = {k: casts[k](v) for k, v in (values or {}).items() if k in names}
        except (TypeError, ValueError) as e:
            raise InvalidConfig(f"Valor inválido em mc_config: {e}") from e
        return cls(**kwargs)

    def batches(self) -> List[int]:
        full, rest = divmod(self.paths, self.batch_size)
        return [self.batch_size] * full + ([rest] if rest else [])


@dataclass(frozen=True)
class McEstimate:
    price: float
    stderr: float
    paths: int
    steps: int
    seed: int
    antithetic: bool = False
    flags: Tuple[str, ...] = ()

    def to_row(self, strike: float, maturity: float) -> Dict[str, Any]:
        return {
            "strike": strike,
            "T": maturity,
            "price": self.price,
            "stderr": self.stderr,
            "N": self.paths,
            "n": self.steps,
            "seed": self.seed,
        }


# (contagem, média, soma dos desvios ao quadrado, payoffs nulos)
_BatchStats = Tuple[int, float, float, int]
Payoff = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _merge(stats: Iterable[_BatchStats]) -> _BatchStats:
    """Combinação par a par (Chan) dos momentos dos lotes, na ordem dada."""
    n, mean, m2, zeros = 0, 0.0, 0.0, 0
    for nb, mb, m2b, zb in stats:
        if nb == 0:
            continue
        total = n + nb
        delta = mb - mean
        mean += delta * nb / total
        m2 += m2b + delta * delta * n * nb / total
        n = total
        zeros += zb
    return n, mean, m2, zeros


class AsianMonteCarloEngine:


    def __init__(self, model: LocalVolFn, market: MarketParams, cfg: Optional[McConfig] = None):
        self.model = model
        self.market = market
        self.cfg = cfg or McConfig()

    def _simulate_batch(self, task: Tuple[int, np.random.SeedSequence], maturity: float, payoff: Payoff) -> _BatchStats:
        size, seed_seq = task
        cfg = self.cfg
        rng = np.random.Generator(np.random.Philox(seed_seq))
        drift = self.market.r - self.market.q
        dt = maturity / cfg.steps
        sqrt_dt = math.sqrt(dt)
        draws = size // 2 if cfg.antithetic else size

        x = np.full(size, math.log(self.market.s0))
        spot = np.full(size, self.market.s0)
        acc = 0.5 * spot
        for i in range(cfg.steps):
            sig = np.asarray(self.model(spot), dtype=float)
            z = rng.standard_normal(draws)
            if cfg.antithetic:
                z = np.concatenate([z, -z])
            x += (drift - 0.5 * sig * sig) * dt + sig * sqrt_dt * z
            spot = np.exp(x)
            acc += spot if i < cfg.steps - 1 else 0.5 * spot
        average = acc / cfg.steps

        values = payoff(average, spot)
        if cfg.antithetic:
            values = 0.5 * (values[:draws] + values[draws:])
        mean = float(np.mean(values))
        m2 = float(np.sum((values - mean) ** 2))
        return values.size, mean, m2, int(np.count_nonzero(values == 0.0))

    def _run(self, maturity: float, payoff: Payoff, label: str) -> McEstimate:
        if not maturity > 0.0:
            raise OutOfDomain(f"Maturidade deve ser > 0, recebido {maturity}")
        cfg = self.cfg
        sizes = cfg.batches()
        children = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
        tasks = list(zip(sizes, children))

        def work(task):
            return self._simulate_batch(task, maturity, payoff)

        logger.debug(f"MC {label}: {cfg.paths} caminhos x {cfg.steps} passos em {len(tasks)} lotes, {cfg.workers} workers")
        progress = dict(total=len(tasks), desc=label, disable=not cfg.progress, leave=False)
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
                # map preserva a ordem dos lotes
                results = list(tqdm(executor.map(work, tasks), **progress))
        else:
            results = [work(task) for task in tqdm(tasks, **progress)]

        n, mean, m2, zeros = _merge(results)
        stderr = math.sqrt(m2 / (n - 1) / n) if n > 1 else float("nan")
        flags = ()
        if zeros == n:
            flags = ("all_payoffs_zero",)
            logger.warning(f"MC {label}: nenhum caminho terminou ITM; estimativa 0")
        return McEstimate(mean, stderr, cfg.paths, cfg.steps, cfg.seed, cfg.antithetic, flags)

    def simulate(self, option: OptionSpec) -> McEstimate:
        T = option.maturity
        discount = math.exp(-self.market.r * T)
        call = option.side == "call"
        if option.style == "fixed":
            K = option.strike

            def payoff(average, terminal):
                return discount * np.maximum(average - K if call else K - average, 0.0)

        else:
            kappa = option.kappa

            def payoff(average, terminal):
                return discount * np.maximum(kappa * terminal - average if call else average - kappa * terminal, 0.0)

        level = option.strike if option.style == "fixed" else option.kappa
        return self._run(T, payoff, f"{option.style} {option.side} {level:g} T={T:g}")

    def simulate_terminal(self, maturity: float) -> McEstimate:
        """Média de e^{-(r-q)T} S_T; igual a S0 a menos do erro de Monte Carlo."""
        factor = math.exp(-(self.market.r - self.market.q) * maturity)
        return self._run(maturity, lambda average, terminal: factor * terminal, f"terminal T={maturity:g}")


def simulate_asian(
    model: LocalVolFn, market: MarketParams, option: OptionSpec, cfg: Optional[McConfig] = None
) -> McEstimate:
    return AsianMonteCarloEngine(model, market, cfg).simulate(option)


def convergence_sweep(
    model: LocalVolFn,
    market: MarketParams,
    option: OptionSpec,
    maturities: Iterable[float],
    cfg: Optional[McConfig] = None,
    rate: Optional[float] = None,
) -> pd.DataFrame:
    """
    T log C_MC contra -I numa lista de maturidades para uma opção OTM.
    ``rate`` padrão: I(K, S0) no strike fixo ou I_f(kappa) no flutuante.
    """
    tag = classify_moneyness(market, option).tag
    if tag != "OTM":
        raise OutOfDomain(f"Varredura de convergência exige opção OTM, recebido {tag}")
    if rate is None:
        if option.style == "fixed":
            rate, _ = rate_value(model, market.s0, option.strike)
        else:
            rate = rate_floating(model, market.s0, option.kappa).i_f

    engine = AsianMonteCarloEngine(model, market, cfg)
    rows = []
    for T in maturities:
        estimate = engine.simulate(replace(option, maturity=float(T)))
        zero = "all_payoffs_zero" in estimate.flags or estimate.price <= 0.0
        t_log = float(T) * math.log(estimate.price) if not zero else -math.inf
        rows.append(
            {
                "T": float(T),
                "price": estimate.price,
                "stderr": estimate.stderr,
                "t_log_price": t_log,
                "minus_rate": -rate,
                "gap": abs(t_log + rate) if not zero else math.nan,
                "all_payoffs_zero": zero,
            }
        )
    return pd.DataFrame(rows)


def estimates_frame(rows: Iterable[Tuple[float, float, McEstimate]]) -> pd.DataFrame:
    """Tabela pronta para CSV a partir de triplas (strike, T, estimate)."""
    return pd.DataFrame([est.to_row(strike, T) for strike, T, est in rows])
