"""
Função taxa I_f(kappa) de asiáticas de strike flutuante.

O caminho ótimo resolve

    (f' / sigma)' = lambda e^f sigma,   f(0) = 0,
    f'(1) / sigma_1 = lambda kappa e^{f1} sigma_1,

com a restrição de média  int_0^1 e^{f(t)} dt = kappa e^{f1}, e

    I_f = lambda (kappa - 1) e^{f1} + lambda^2 kappa^2 e^{2 f1} sigma_1^2 / 2.

Em Black-Scholes isso vira J_BS(kappa) / sigma^2. Com vol local qualquer o
multiplicador lambda sai de uma busca externa com bracket sobre a restrição
de média; cada tentativa resolve o problema de contorno acima por shooting
em p(0) = f'(0) / sigma(S0).
"""

import math
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import simpson

from scripts.asian.core_model import LocalVolFn, MarketParams
from scripts.asian.errors import AsianError, NoSignChange, OutOfDomain
from scripts.asian.numerics import DEFAULT_ROOT, BvpSolution, RootConfig, find_root, shoot_bvp
from scripts.asian.rate_bs import bs_terminal_value, j_bs, optimal_path_bs

logger = logging.getLogger(__name__)

MAX_OCTAVES = 40
MAX_OUTER_STEPS = 4 * MAX_OCTAVES
MIN_STEP_REL = 1e-12
CONSTRAINT_TOL = 1e-10
MULTIPLICITY_POINTS = 6
INNER_WIDENINGS = 3
FALLBACK_SCAN_POINTS = 200


@dataclass(frozen=True)
class FloatingRateResult:
    i_f: float
    lam: float
    f1: float
    t: np.ndarray
    f: np.ndarray
    method: str  # bs_closed_form | bvp | atm
    f_prime0: float = 0.0
    residual: float = 0.0  # restrição de média no lambda devolvido
    flags: Tuple[str, ...] = ()
    multiplicity: int = 1
    lambda_rel: float = float("nan")  # lambda recalculado pelas integrais do caminho
    energy_drift: float = 0.0  # max |E(t) - E(0)| / max(1, |E(0)|), E = p^2/2 - lambda e^f
    identity_gap: float = 0.0  # |I_f - ação do caminho devolvido|


def rate_floating_bs(kappa: float, sigma: float) -> float:
    """J_BS(kappa) / sigma^2."""
    if not sigma > 0.0:
        raise OutOfDomain(f"sigma deve ser > 0, recebido {sigma}")
    if not (math.isfinite(kappa) and kappa > 0.0):
        raise OutOfDomain(f"kappa deve ser > 0, recebido {kappa}")
    if kappa == 1.0:
        return 0.0
    return j_bs(kappa).j / (sigma * sigma)


def lambda_bs(kappa: float, sigma: float, f1: float) -> float:
    """2 (e^{f1} - 1) e^{-2 f1} / (sigma^2 kappa^2)."""
    return 2.0 * math.expm1(f1) * math.exp(-2.0 * f1) / (sigma * sigma * kappa * kappa)


def floating_terminal_bs(kappa: float, cfg: Optional[RootConfig] = None) -> float:
    """f(1) do caminho flutuante BS: o caminho de strike fixo em m = kappa percorrido ao contrário."""
    return -bs_terminal_value(kappa, cfg)


def optimal_path_floating_bs(kappa: float, grid, cfg: Optional[RootConfig] = None) -> np.ndarray:
    t = np.asarray(grid, dtype=float)
    h = optimal_path_bs(kappa, np.concatenate([1.0 - t, [1.0]]), cfg)
    return h[:-1] - h[-1]


def _check_kappa(kappa: float) -> None:
    if not (math.isfinite(kappa) and kappa > 0.0):
        raise OutOfDomain(f"kappa deve ser > 0, recebido {kappa}")


def _closed_form(kappa: float, sigma: float, n_steps: int, cfg: Optional[RootConfig]) -> FloatingRateResult:
    t = np.linspace(0.0, 1.0, n_steps + 1)
    if kappa == 1.0:
        return FloatingRateResult(0.0, 0.0, 0.0, t, np.zeros_like(t), "atm")
    f1 = floating_terminal_bs(kappa, cfg)
    lam = lambda_bs(kappa, sigma, f1)
    path = optimal_path_floating_bs(kappa, t, cfg)
    return FloatingRateResult(rate_floating_bs(kappa, sigma), lam, f1, t, path, "bs_closed_form", lambda_rel=lam)


class _FloatingProblem:
    """Shooting interno e restrição de média para um (model, S0, kappa)."""

    def __init__(self, model: LocalVolFn, s0: float, kappa: float, cfg: RootConfig, n_steps: int, scan_points: int):
        self.model = model
        self.s0 = s0
        self.kappa = kappa
        self.cfg = cfg
        self.n_steps = n_steps
        self.scan_points = scan_points
        self.sigma0 = float(model(s0))
        self.f1_seed = floating_terminal_bs(kappa, cfg)
        self.lam_seed = lambda_bs(kappa, self.sigma0, self.f1_seed)
        self._cache: Dict[float, Optional[BvpSolution]] = {}
        self.last_error: Optional[AsianError] = None

    def sigma(self, f):
        return self.model(self.s0 * np.exp(f))

    def _width(self, lam: float) -> float:
        return 2.0 * (1.0 + abs(lam) * self.kappa * self.sigma0 * math.exp(abs(self.f1_seed)))

    def solve(self, lam: float, richardson: bool = False) -> Optional[BvpSolution]:
        if not richardson and lam in self._cache:
            return self._cache[lam]

        def rhs(_t, f, p):
            s = self.sigma(f)
            return s * p, lam * np.exp(f) * s

        def transversality(f1, p1):
            return p1 - lam * self.kappa * np.exp(f1) * self.sigma(f1)

        width = self._width(lam)
        points = self.scan_points
        solution = None
        for attempt in range(INNER_WIDENINGS + 1):
            try:
                solution = shoot_bvp(
                    rhs,
                    0.0,
                    transversality,
                    (-width, width),
                    self.cfg,
                    n_steps=self.n_steps,
                    scan_points=points,
                    prefer=0.0,
                    richardson=richardson,
                )
                break
            except NoSignChange as e:
                self.last_error = e
                logger.debug(f"Shooting interno falhou para lambda={lam:.6g} com largura {width:.3g} (tentativa {attempt + 1})")
                width *= 4.0
                points = FALLBACK_SCAN_POINTS
        if not richardson:
            self._cache[lam] = solution
        return solution

    def constraint(self, lam: float) -> float:
        """int e^{f - f1} dt - kappa na solução interna; nan se o shooting falhou."""
        solution = self.solve(lam)
        if solution is None:
            return float("nan")
        f = solution.y
        return float(simpson(np.exp(f - f[-1]), x=solution.t)) - self.kappa

    def rate(self, lam: float, f1: float) -> float:
        sig1 = float(self.sigma(f1))
        e1 = math.exp(f1)
        return lam * (self.kappa - 1.0) * e1 + 0.5 * (lam * self.kappa * e1 * sig1) ** 2


def _same_sign(value: float, sign: float) -> bool:
    return math.isfinite(value) and value * sign > 0.0


def _outer_bracket(problem: _FloatingProblem, sign: float) -> Tuple[float, float]:
    """
    Bracket de lambda entre um multiplicador pequeno, onde a restrição tem o
    sinal de 1 - kappa, e um grande, onde o sinal já virou.
    """
    lam0 = problem.lam_seed
    c0 = problem.constraint(lam0)
    for _ in range(MAX_OCTAVES):
        if math.isfinite(c0):
            break
        lam0 *= 0.5
        c0 = problem.constraint(lam0)
    if abs(c0) <= CONSTRAINT_TOL:
        return lam0, lam0
    if _same_sign(c0, sign):
        # acima de certo multiplicador o problema interno não tem solução;
        # o passo cai pela metade sempre que a tentativa cai lá
        lo, step = lam0, lam0
        hi = lo + step
        for _ in range(MAX_OUTER_STEPS):
            hi = lo + step
            c = problem.constraint(hi)
            if not math.isfinite(c):
                step *= 0.5
                if abs(step) < MIN_STEP_REL * abs(lam0):
                    break
                continue
            if c * sign <= 0.0:
                return lo, hi
            lo, step = hi, 2.0 * step
        c_far = problem.constraint(hi)
    else:
        lo, hi = 0.5 * lam0, lam0
        for _ in range(MAX_OCTAVES):
            c = problem.constraint(lo)
            if _same_sign(c, sign):
                return lo, hi
            lo, hi = 0.5 * lo, lo
        c_far = problem.constraint(lo)
    diagnostics = {"lambda_seed": problem.lam_seed}
    if problem.last_error is not None:
        diagnostics.update(problem.last_error.diagnostics)
    raise NoSignChange(
        f"Restrição de média sem mudança de sinal em torno de lambda_BS={problem.lam_seed:.6g}",
        (min(lo, hi), max(lo, hi)),
        (c0, c_far),
        diagnostics=diagnostics,
    )


def _outer_roots(problem: _FloatingProblem, lo: float, hi: float) -> List[float]:
    """Raízes da restrição numa subgrade geométrica de [lo, hi]."""
    if lo == hi:
        return [lo]
    grid = np.geomspace(lo, hi, MULTIPLICITY_POINTS) if lo * hi > 0.0 else np.linspace(lo, hi, MULTIPLICITY_POINTS)
    values = [problem.constraint(float(g)) for g in grid]
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if not (math.isfinite(fa) and math.isfinite(fb)):
            continue
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0.0:
            roots.append(find_root(problem.constraint, (float(a), float(b)), problem.cfg))
    if values[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def rate_floating_lv(
    model: LocalVolFn,
    s0: float,
    kappa: float,
    cfg: Optional[RootConfig] = None,
    n_steps: int = 400,
    scan_points: int = 41,
) -> FloatingRateResult:
    """
    Taxa de strike flutuante para vol local qualquer.

    A busca de lambda parte de lambda_BS(kappa) com sigma = sigma(S0); lambda
    tem o sinal de 1 - kappa. Com vários multiplicadores válidos fica o de
    menor I_f e o resultado recebe a flag ``multiple_roots``.

    Raises:
        OutOfDomain: kappa <= 0 ou kappa == 1 (use atm_floating_price).
        NoSignChange: bracket externo ou interno esgotado; diagnostics traz
            a última trajetória integrada.
    """
    _check_kappa(kappa)
    if kappa == 1.0:
        raise OutOfDomain("kappa = 1 tem taxa nula; precifique com atm_floating_price")
    if not s0 > 0.0:
        raise OutOfDomain(f"S0 deve ser > 0, recebido {s0}")
    cfg = cfg or DEFAULT_ROOT

    problem = _FloatingProblem(model, s0, kappa, cfg, n_steps, scan_points)
    sign = 1.0 if kappa < 1.0 else -1.0
    lo, hi = _outer_bracket(problem, sign)
    lo, hi = min(lo, hi), max(lo, hi)
    roots = _outer_roots(problem, lo, hi)
    if not roots:
        roots = [find_root(problem.constraint, (lo, hi), cfg)]

    candidates = []
    for lam in roots:
        solution = problem.solve(lam)
        if solution is not None:
            candidates.append((problem.rate(lam, float(solution.y[-1])), lam))
    if not candidates:
        raise NoSignChange("Shooting interno falhou em todas as raízes externas", (lo, hi), diagnostics={"roots": roots})
    i_f, lam = min(candidates)
    flags = ("multiple_roots",) if len(candidates) > 1 else ()
    if flags:
        logger.warning(f"kappa={kappa:g}: {len(candidates)} multiplicadores satisfazem a restrição, mantendo o menor I_f")

    solution = problem.solve(lam, richardson=True)
    if solution is None:
        raise NoSignChange("Shooting interno falhou na grade refinada", (lo, hi), diagnostics={"lambda": lam})
    t, f, p = solution.t, solution.y, solution.v
    f1 = float(f[-1])
    i_f = problem.rate(lam, f1)
    sig = problem.sigma(f)
    sig1 = float(problem.sigma(f1))
    e1 = math.exp(f1)

    i_s = float(simpson(np.exp(f) * sig, x=t))
    denom = i_s * (i_s - 2.0 * kappa * e1 * sig1)
    lambda_rel = 2.0 * (1.0 - e1) / denom if denom != 0.0 else float("nan")
    energy = 0.5 * p * p - lam * np.exp(f)
    drift = float(np.max(np.abs(energy - energy[0])) / max(1.0, abs(float(energy[0]))))
    action = 0.5 * float(simpson(p * p, x=t))

    logger.debug(f"Flutuante kappa={kappa:g}: lambda={lam:.12g}, f1={f1:.12g}, I_f={i_f:.12g}")
    return FloatingRateResult(
        i_f=i_f,
        lam=lam,
        f1=f1,
        t=t,
        f=f,
        method="bvp",
        f_prime0=problem.sigma0 * solution.shooting_value,
        residual=problem.constraint(lam),
        flags=flags,
        multiplicity=len(candidates),
        lambda_rel=lambda_rel,
        energy_drift=drift,
        identity_gap=abs(i_f - action),
    )


def rate_floating(
    model: LocalVolFn,
    s0: float,
    kappa: float,
    cfg: Optional[RootConfig] = None,
    n_steps: int = 400,
    scan_points: int = 41,
) -> FloatingRateResult:
    """Forma fechada com vol constante, shooting aninhado nos demais; kappa = 1 dá taxa zero."""
    _check_kappa(kappa)
    if model.is_constant or kappa == 1.0:
        return _closed_form(kappa, float(model(s0)), n_steps, cfg)
    return rate_floating_lv(model, s0, kappa, cfg, n_steps, scan_points)


def atm_floating_price(model: LocalVolFn, market: MarketParams, maturity: float) -> float:
    """sigma(S0) S0 sqrt(T / (6 pi)), igual para call e put."""
    if not maturity > 0.0:
        raise OutOfDomain(f"Maturidade deve ser > 0, recebido {maturity}")
    return float(model(market.s0)) * market.s0 * math.sqrt(maturity / (6.0 * math.pi))
