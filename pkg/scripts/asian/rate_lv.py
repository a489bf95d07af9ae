"""
Função taxa I(K, S0) de asiáticas de strike fixo sob vol local.

Três caminhos independentes:

- ``rate_exact``: resolve o valor terminal do caminho ótimo (f1 se K > S0,
  h1 se K < S0) pelas integrais F, G e devolve I = F G / 2.
- ``rate_scan``: minimiza direto o objetivo unidimensional
  G(phi)^2 / (2 (phi - K/S0)) (ou o espelho para K < S0).
- ``rate_series``: expansão em log-strike a partir de sigma, sigma' e
  sigma'' em S0.

``rate_discrete_path`` é a checagem por força bruta sobre caminhos
lineares por partes.
"""

import math
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize, minimize_scalar

from scripts.asian.core_model import LocalVolFn
from scripts.asian.errors import AsianError, OutOfDomain
from scripts.asian.numerics import (
    QuadConfig,
    RootConfig,
    expand_bracket,
    find_root,
    integrate_sqrt_singular,
    invert_power_series,
)

logger = logging.getLogger(__name__)

TERMINAL_WIDTH = 10.0
SCAN_POINTS = 60
DENSE_SCAN_POINTS = 1000
MAX_SCAN_WIDTH = 40.0


@dataclass(frozen=True)
class LvRateResult:
    i: float
    terminal: float  # f1 (ramo "minus") ou h1 (ramo "plus")
    F: float
    G: float
    lagrange: float
    method: str  # exact | scan | series | discrete_path
    branch: str  # minus (K > S0) | plus (K < S0) | atm
    residual: float = 0.0
    flags: Tuple[str, ...] = ()


def _branch_of(s0: float, strike: float) -> str:
    if strike > s0:
        return "minus"
    if strike < s0:
        return "plus"
    return "atm"


def _integrands(model: LocalVolFn, s0: float, terminal: float, branch: str):
    """Funções (sigma, gap, fator de G) do ramo escolhido."""
    if branch == "minus":
        level = math.exp(terminal)

        def sigma(y):
            return model(s0 * np.exp(y))

        def gap(d):
            return level * -np.expm1(-d)

        def g_factor(y):
            return gap(terminal - y) / sigma(y)

    elif branch == "plus":
        level = math.exp(-terminal)

        def sigma(y):
            return model(s0 * np.exp(-y))

        def gap(d):
            return level * np.expm1(d)

        def g_factor(y):
            return gap(terminal - y) / sigma(y)

    else:
        raise OutOfDomain(f"branch deve ser 'plus' ou 'minus', recebido '{branch}'")
    return sigma, gap, g_factor


def fg_pair(
    model: LocalVolFn,
    s0: float,
    terminal: float,
    branch: str,
    quad: Optional[QuadConfig] = None,
) -> Tuple[float, float]:
    """
    Integrais (F, G) para o valor terminal do caminho ótimo.

    minus (K >= S0), y in [0, f1]:
        F = int 1 / (sigma(S0 e^y) sqrt(e^f1 - e^y)),  G = int sqrt(e^f1 - e^y) / sigma(S0 e^y)
    plus (K <= S0), y in [0, h1]:
        F = int 1 / (sigma(S0 e^-y) sqrt(e^-y - e^-h1)), G = int sqrt(e^-y - e^-h1) / sigma(S0 e^-y)
    """
    if terminal < 0.0:
        raise OutOfDomain(f"Valor terminal deve ser >= 0, recebido {terminal}")
    if terminal == 0.0:
        return 0.0, 0.0
    sigma, gap, g_factor = _integrands(model, s0, terminal, branch)
    F = integrate_sqrt_singular(lambda y: 1.0 / sigma(y), gap, (0.0, terminal), "b", quad)
    G = integrate_sqrt_singular(g_factor, gap, (0.0, terminal), "b", quad)
    return F, G


def _g_only(model: LocalVolFn, s0: float, terminal: float, branch: str, quad: Optional[QuadConfig]) -> float:
    if terminal == 0.0:
        return 0.0
    _, gap, g_factor = _integrands(model, s0, terminal, branch)
    return integrate_sqrt_singular(g_factor, gap, (0.0, terminal), "b", quad)


def rate_exact(
    model: LocalVolFn,
    s0: float,
    strike: float,
    cfg: Optional[RootConfig] = None,
    quad: Optional[QuadConfig] = None,
) -> LvRateResult:
    """
    Solves e^{f1} - K/S0 = G/F (K > S0) or K/S0 - e^{-h1} = G/F (K < S0)
    for the terminal value and returns I = F G / 2 with the multiplier
    lambda = -F^2/2 (K > S0) or +F^2/2 (K < S0).

    Raises:
        NoSignChange: expansão do bracket esgotada (último bracket anexado).
    """
    if not (strike > 0.0 and s0 > 0.0):
        raise OutOfDomain(f"Precisa de K > 0 e S0 > 0, recebido K={strike}, S0={s0}")
    branch = _branch_of(s0, strike)
    if branch == "atm":
        return LvRateResult(0.0, 0.0, 0.0, 0.0, 0.0, "exact", "atm")

    x = math.log(strike / s0)
    excess = math.expm1(x)  # K/S0 - 1

    if branch == "minus":

        def equation(f1: float) -> float:
            F, G = fg_pair(model, s0, f1, "minus", quad)
            return math.expm1(f1) - excess - G / F

        anchor = x
    else:

        def equation(h1: float) -> float:
            F, G = fg_pair(model, s0, h1, "plus", quad)
            return excess - math.expm1(-h1) - G / F

        anchor = -x

    lo, hi = expand_bracket(equation, anchor, TERMINAL_WIDTH, cfg)
    terminal = find_root(equation, (lo, hi), cfg)
    F, G = fg_pair(model, s0, terminal, branch, quad)
    lagrange = -0.5 * F * F if branch == "minus" else 0.5 * F * F
    residual = equation(terminal)
    logger.debug(f"rate_exact K/S0={strike / s0:.6g}: terminal={terminal:.12g}, I={0.5 * F * G:.12g}")
    return LvRateResult(0.5 * F * G, terminal, F, G, lagrange, "exact", branch, residual)


def objective_value(
    model: LocalVolFn,
    s0: float,
    strike: float,
    terminal: float,
    quad: Optional[QuadConfig] = None,
) -> float:
    """
    Objetivo unidimensional cujo ínfimo no valor terminal é I:
    G(f1)^2 / (2 (e^f1 - K/S0)) for K > S0, G(h1)^2 / (2 (K/S0 - e^-h1)) for K < S0.
    """
    branch = _branch_of(s0, strike)
    if branch == "atm":
        raise OutOfDomain("A representação por ínfimo exige K != S0")
    m = strike / s0
    x = math.log(m)
    G = _g_only(model, s0, terminal, branch, quad)
    if branch == "minus":
        denom = m * math.expm1(terminal - x)
    else:
        denom = -m * math.expm1(-(terminal + x))
    if denom <= 0.0:
        return math.inf
    return 0.5 * G * G / denom


def objective_curve(
    model: LocalVolFn,
    s0: float,
    strike: float,
    n: int = 100,
    width: float = 3.0,
    quad: Optional[QuadConfig] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Amostra o objetivo contra phi = e^{f1} (K > S0) ou chi = e^{-h1} (K < S0)."""
    branch = _branch_of(s0, strike)
    if branch == "atm":
        raise OutOfDomain("A representação por ínfimo exige K != S0")
    x = math.log(strike / s0)
    anchor = x if branch == "minus" else -x
    offsets = np.linspace(width / n, width, n)
    values = np.array([objective_value(model, s0, strike, anchor + d, quad) for d in offsets])
    terminals = anchor + offsets
    abscissa = np.exp(terminals) if branch == "minus" else np.exp(-terminals)
    return abscissa, values


def rate_scan(
    model: LocalVolFn,
    s0: float,
    strike: float,
    cfg: Optional[RootConfig] = None,
    quad: Optional[QuadConfig] = None,
) -> LvRateResult:
    """
    Minimiza o objetivo do ínfimo no valor terminal.

    Uma varredura grossa em escala log localiza o mínimo e a busca da seção
    áurea o refina quando a varredura é unimodal; caso contrário uma
    varredura densa escolhe antes o mínimo global. Mínimo preso na borda
    recebe a flag ``minimizer_at_boundary``.
    """
    branch = _branch_of(s0, strike)
    if branch == "atm":
        raise OutOfDomain("rate_scan exige K != S0; a taxa ATM é zero")
    x = math.log(strike / s0)
    anchor = x if branch == "minus" else -x
    width = TERMINAL_WIDTH
    lowest = max(1e-10, 1e-4 * abs(x))

    def objective(log_offset: float) -> float:
        return objective_value(model, s0, strike, anchor + math.exp(log_offset), quad)

    flags = []
    while True:
        grid = np.linspace(math.log(lowest), math.log(width), SCAN_POINTS)
        values = np.array([objective(u) for u in grid])
        i = int(np.argmin(values))
        if i < grid.size - 1 or width >= MAX_SCAN_WIDTH:
            break
        width = min(MAX_SCAN_WIDTH, width * 2.0)
        logger.debug(f"rate_scan: mínimo na borda superior, ampliando para {width:g}")

    # unimodal: desce e depois sobe, uma única virada
    diffs = np.diff(values)
    steps = np.sign(np.where(np.abs(diffs) > 1e-12 * np.abs(values[1:]), diffs, 0.0))
    steps = steps[steps != 0]
    unimodal = steps.size == 0 or np.count_nonzero(np.diff(steps) != 0) <= 1
    if not unimodal:
        logger.warning("rate_scan: objetivo não unimodal na varredura grossa; usando varredura densa")
        grid = np.linspace(grid[0], grid[-1], DENSE_SCAN_POINTS)
        values = np.array([objective(u) for u in grid])
        i = int(np.argmin(values))

    if i == 0 or i == grid.size - 1:
        flags.append("minimizer_at_boundary")
        logger.warning(f"rate_scan K/S0={strike / s0:.6g}: ínfimo preso na borda da varredura")
        best_u, best = grid[i], float(values[i])
    else:
        outcome = minimize_scalar(
            objective, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden", tol=1e-10
        )
        best_u, best = float(outcome.x), float(outcome.fun)
        if best > values[i]:
            best_u, best = grid[i], float(values[i])

    terminal = anchor + math.exp(best_u)
    F, G = fg_pair(model, s0, terminal, branch, quad)
    lagrange = -0.5 * F * F if branch == "minus" else 0.5 * F * F
    return LvRateResult(best, terminal, F, G, lagrange, "scan", branch, 0.0, tuple(flags))


def series_coefficients(model: LocalVolFn, s0: float) -> Tuple[float, float, float]:
    """Coeficientes a1, a2, a3 da expansão da vol local em S0."""
    model.check_differentiable(s0)
    sig = float(model(s0))
    d1 = float(model.derivative(s0, 1))
    d2 = float(model.derivative(s0, 2))
    a1 = 1.0 / sig
    a2 = -0.5 * s0 * d1 / sig**2
    a3 = -s0 * d1 / (6.0 * sig**2) + s0**2 * d1**2 / (3.0 * sig**3) - s0**2 * d2 / (6.0 * sig**2)
    return a1, a2, a3


def _truncate(coeffs: Tuple[float, ...], x: float, order: int) -> float:
    if order not in (2, 3, 4):
        raise OutOfDomain(f"Ordem de rate_series deve ser 2, 3 ou 4, recebido {order}")
    return sum(c * x**p for p, c in zip((2, 3, 4), coeffs) if p <= order)


def rate_series(model: LocalVolFn, s0: float, x: float, order: int = 4) -> float:
    """
    Expansão de I em x = log(K/S0) até x**order (ordem 2, 3 ou 4), montada
    com a série revertida b1, b2, b3 de a1, a2, a3.

    Raises:
        NonDifferentiable: S0 em um bico do corte de sigma.
    """
    b1, b2, b3 = invert_power_series(series_coefficients(model, s0), 3)
    r2 = b2 / b1**2
    coeffs = (
        1.5,
        -3.0 / 10.0 - 18.0 / 5.0 * r2,
        109.0 / 1400.0 + 117.0 / 175.0 * r2 + 1872.0 / 175.0 * r2**2 - 162.0 / 35.0 * b3 / b1**3,
    )
    return _truncate(coeffs, x, order) / b1**2


def rate_series_explicit(model: LocalVolFn, s0: float, x: float, order: int = 4) -> float:
    """Mesma expansão escrita com u = S0 sigma'/sigma e w = S0^2 sigma''/sigma."""
    model.check_differentiable(s0)
    sig = float(model(s0))
    u = s0 * float(model.derivative(s0, 1)) / sig
    w = s0**2 * float(model.derivative(s0, 2)) / sig
    coeffs = (
        1.5,
        -3.0 / 10.0 - 9.0 / 5.0 * u,
        109.0 / 1400.0 - 153.0 / 350.0 * u + 333.0 / 175.0 * u**2 - 27.0 / 35.0 * w,
    )
    return _truncate(coeffs, x, order) / sig**2


def optimal_path_lv(
    model: LocalVolFn,
    s0: float,
    strike: float,
    grid,
    n_nodes: int = 400,
    cfg: Optional[RootConfig] = None,
    quad: Optional[QuadConfig] = None,
) -> np.ndarray:
    """
    Caminho ótimo f(t) para vol local qualquer.

    No ótimo t(y) = F(0..y) / F; o caminho sai tabelando t em nós
    concentrados perto do valor terminal e invertendo de forma monótona.
    """
    t_grid = np.asarray(grid, dtype=float)
    rate = rate_exact(model, s0, strike, cfg, quad)
    if rate.branch == "atm":
        return np.zeros_like(t_grid)

    terminal = rate.terminal
    sigma, gap, _ = _integrands(model, s0, terminal, rate.branch)
    u = np.linspace(0.0, 1.0, n_nodes)
    nodes = terminal * (1.0 - (1.0 - u) ** 2)
    remaining = np.array(
        [
            integrate_sqrt_singular(lambda y: 1.0 / sigma(y), gap, (y, terminal), "b", quad) if y < terminal else 0.0
            for y in nodes
        ]
    )
    times = 1.0 - remaining / rate.F
    times[0], times[-1] = 0.0, 1.0
    path = PchipInterpolator(times, nodes)(np.clip(t_grid, 0.0, 1.0))
    return path if rate.branch == "minus" else -path


def rate_discrete_path(
    model: LocalVolFn,
    s0: float,
    strike: float,
    n_points: int = 50,
) -> LvRateResult:
    """
    Mínimo por força bruta da ação discretizada
    sum ((f_{i+1} - f_i) / sigma_i)^2 / (2 dt) sobre caminhos com f_0 = 0 e
    integral trapezoidal de e^f igual a K/S0; sigma_i no ponto médio.
    """
    m = strike / s0
    if m == 1.0:
        return LvRateResult(0.0, 0.0, 0.0, 0.0, 0.0, "discrete_path", "atm")
    dt = 1.0 / (n_points - 1)
    weights = np.full(n_points, dt)
    weights[0] = weights[-1] = 0.5 * dt

    def unpack(z: np.ndarray) -> np.ndarray:
        return np.concatenate([[0.0], z])

    def action(z: np.ndarray) -> Tuple[float, np.ndarray]:
        f = unpack(z)
        d = np.diff(f)
        spot = s0 * np.exp(0.5 * (f[:-1] + f[1:]))
        sig = model(spot)
        dsig = model.derivative(spot, 1)
        inv = 1.0 / sig**2
        value = 0.5 * np.sum(d * d * inv) / dt
        # d(1/sigma^2)/d(ponto médio) = -2 sigma' S / sigma^3, metade para cada ponta
        dinv = -dsig * spot / sig**3
        grad = np.zeros(n_points)
        grad[1:] += d * inv / dt + 0.5 * d * d * dinv / dt
        grad[:-1] += -d * inv / dt + 0.5 * d * d * dinv / dt
        return float(value), grad[1:]

    def constraint(z: np.ndarray) -> float:
        return float(np.dot(weights, np.exp(unpack(z)))) - m

    def constraint_grad(z: np.ndarray) -> np.ndarray:
        return (weights * np.exp(unpack(z)))[1:]

    t = np.linspace(0.0, 1.0, n_points)
    start = math.log(m) * t[1:] * (2.0 - t[1:])
    outcome = minimize(
        action,
        start,
        jac=True,
        method="SLSQP",
        constraints=[{"type": "eq", "fun": constraint, "jac": constraint_grad}],
        options={"ftol": 1e-14, "maxiter": 1000},
    )
    if not outcome.success:
        # SLSQP pode parar numa busca linear plana já no ótimo
        if abs(constraint(outcome.x)) > 1e-8:
            raise AsianError(f"Minimização do caminho discreto falhou: {outcome.message}")
        logger.warning(f"SLSQP parou cedo ({outcome.message}); restrição satisfeita, mantendo o resultado")
    f_end = float(outcome.x[-1])
    branch = _branch_of(s0, strike)
    terminal = f_end if branch == "minus" else -f_end
    return LvRateResult(float(outcome.fun), terminal, float("nan"), float("nan"), float("nan"), "discrete_path", branch)
