"""
Núcleos numéricos: raízes com bracket, quadratura Gauss-Kronrod adaptativa
com substituição para a singularidade 1/sqrt na ponta, reversão de séries
de potências e shooting RK4 para problemas de contorno.
"""

import math
import logging
from dataclasses import dataclass, fields
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from scripts.asian.errors import (
    DegenerateSeries,
    InvalidConfig,
    MaxIterExceeded,
    NoSignChange,
    SubdivisionLimit,
)

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny


def _from_settings(cls, values: Dict[str, Any]):
    names = {f.name for f in fields(cls)}
    return cls(**{k: v for k, v in (values or {}).items() if k in names})


@dataclass(frozen=True)
class RootConfig:
    abs_tol: float = 1e-12
    max_iter: int = 200
    expand_factor: float = 2.0
    max_expansions: int = 60

    def __post_init__(self):
        if not self.abs_tol > 0.0:
            raise InvalidConfig(f"abs_tol deve ser > 0, recebido {self.abs_tol}")
        if self.max_iter < 1:
            raise InvalidConfig(f"max_iter deve ser >= 1, recebido {self.max_iter}")
        if not self.expand_factor > 1.0:
            raise InvalidConfig(f"expand_factor deve ser > 1, recebido {self.expand_factor}")

    @classmethod
    def from_settings(cls, values: Dict[str, Any]) -> "RootConfig":
        return _from_settings(cls, values)


@dataclass(frozen=True)
class QuadConfig:
    rel_tol: float = 1e-10
    max_subdivisions: int = 64
    abs_tol: float = 0.0

    def __post_init__(self):
        if not self.rel_tol > 0.0 or self.abs_tol < 0.0:
            raise InvalidConfig("Tolerâncias da quadratura devem ser positivas")
        if self.max_subdivisions < 1:
            raise InvalidConfig(f"max_subdivisions deve ser >= 1, recebido {self.max_subdivisions}")

    @classmethod
    def from_settings(cls, values: Dict[str, Any]) -> "QuadConfig":
        return _from_settings(cls, values)


DEFAULT_ROOT = RootConfig()
DEFAULT_QUAD = QuadConfig()


# ---------------------------------------------------------------------------
# Raízes
# ---------------------------------------------------------------------------


def find_root(f: Callable[[float], float], bracket: Tuple[float, float], cfg: Optional[RootConfig] = None) -> float:
    """
    Raiz de Brent de f em um bracket com mudança de sinal.

    Raises:
        NoSignChange: f(a) e f(b) com o mesmo sinal ou não finitos.
        MaxIterExceeded: Brent não convergiu em cfg.max_iter.
    """
    cfg = cfg or DEFAULT_ROOT
    a, b = float(bracket[0]), float(bracket[1])
    fa, fb = float(f(a)), float(f(b))
    if not (math.isfinite(fa) and math.isfinite(fb)):
        raise NoSignChange("Função não finita nas pontas do bracket", (a, b), (fa, fb))
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0.0) == (fb > 0.0):
        raise NoSignChange("Sem mudança de sinal no bracket", (a, b), (fa, fb))

    try:
        root, info = brentq(f, a, b, xtol=cfg.abs_tol, maxiter=cfg.max_iter, full_output=True, disp=False)
    except RuntimeError as e:
        raise MaxIterExceeded(f"Brent não convergiu em [{a:.6g}, {b:.6g}]: {e}") from e
    if not info.converged:
        raise MaxIterExceeded(
            f"Brent parou após {info.iterations} iterações em [{a:.6g}, {b:.6g}] ({info.flag})"
        )
    return float(root)


def expand_bracket(
    f: Callable[[float], float],
    anchor: float,
    width: float,
    cfg: Optional[RootConfig] = None,
) -> Tuple[float, float]:
    """Cresce [anchor, anchor + width] geometricamente até f mudar de sinal."""
    cfg = cfg or DEFAULT_ROOT
    f_anchor = float(f(anchor))
    if f_anchor == 0.0:
        return (anchor, anchor)
    inner = anchor
    far = anchor + width
    f_far = float("nan")
    for _ in range(cfg.max_expansions):
        f_far = float(f(far))
        if not math.isfinite(f_far):
            break
        if f_far == 0.0 or (f_far > 0.0) != (f_anchor > 0.0):
            return (min(inner, far), max(inner, far))
        inner = far
        width *= cfg.expand_factor
        far = anchor + width
        logger.debug(f"Bracket expandido para [{min(anchor, far):.6g}, {max(anchor, far):.6g}]")
    raise NoSignChange("Expansão do bracket esgotada", (min(anchor, far), max(anchor, far)), (f_anchor, f_far))


# ---------------------------------------------------------------------------
# Quadratura
# ---------------------------------------------------------------------------

# abscissas Gauss-Kronrod 7/15 em [0, 1] (metade positiva, decrescente) e pesos
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)

_NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
_KRONROD = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
_GAUSS = np.zeros(15)
_GAUSS[[1, 3, 5]] = _WG[:3]
_GAUSS[7] = _WG[3]
_GAUSS[[9, 11, 13]] = _WG[2::-1]


def _gk15_panels(f: Callable[[np.ndarray], np.ndarray], a: np.ndarray, b: np.ndarray):

    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = center[:, None] + half[:, None] * _NODES[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        fv = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    if not np.all(np.isfinite(fv)):
        raise SubdivisionLimit("Integrando não finito em um nó da quadratura")

    kronrod = fv @ _KRONROD
    gauss = fv @ _GAUSS
    mean = 0.5 * kronrod
    resasc = np.abs(half) * (np.abs(fv - mean[:, None]) @ _KRONROD)
    resabs = np.abs(half) * (np.abs(fv) @ _KRONROD)
    err = np.abs(half * (kronrod - gauss))
    scaled = np.where(
        (resasc > 0.0) & (err > 0.0),
        resasc * np.minimum(1.0, (200.0 * err / np.where(resasc > 0.0, resasc, 1.0)) ** 1.5),
        err,
    )
    floor = np.where(resabs > _TINY / (50.0 * _EPS), 50.0 * _EPS * resabs, 0.0)
    return half * kronrod, np.maximum(scaled, floor)


def integrate_adaptive(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    cfg: Optional[QuadConfig] = None,
) -> float:
    """
    Quadratura GK15 globalmente adaptativa de um integrando vetorizado em [a, b].

    Os painéis cujo erro passa da sua parcela da tolerância são bisseccionados
    juntos, uma chamada do integrando por rodada.

    Raises:
        SubdivisionLimit: tolerância não atingida em cfg.max_subdivisions painéis.
    """
    cfg = cfg or DEFAULT_QUAD
    if a == b:
        return 0.0
    lo = np.array([float(a)])
    hi = np.array([float(b)])
    est, err = _gk15_panels(f, lo, hi)

    while True:
        total = float(math.fsum(est))
        total_err = float(np.sum(err))
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if total_err <= tol:
            return total
        n = lo.size
        if n >= cfg.max_subdivisions:
            raise SubdivisionLimit(
                f"Quadratura parou em {n} painéis: estimativa {total:.12g}, erro {total_err:.3e} > {tol:.3e}",
                diagnostics={"estimate": total, "error": total_err},
            )

        # bissecta os piores painéis até o limite de painéis
        order = np.argsort(err)[::-1]
        share = tol / n
        n_split = max(1, int(np.count_nonzero(err > share)))
        n_split = min(n_split, cfg.max_subdivisions - n)
        chosen = order[:n_split]
        keep = np.ones(n, dtype=bool)
        keep[chosen] = False

        mid = 0.5 * (lo[chosen] + hi[chosen])
        new_lo = np.concatenate([lo[chosen], mid])
        new_hi = np.concatenate([mid, hi[chosen]])
        new_est, new_err = _gk15_panels(f, new_lo, new_hi)

        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        est = np.concatenate([est[keep], new_est])
        err = np.concatenate([err[keep], new_err])


def integrate_sqrt_singular(
    factor: Callable[[np.ndarray], np.ndarray],
    gap: Callable[[np.ndarray], np.ndarray],
    interval: Tuple[float, float],
    singular_end: str = "b",
    cfg: Optional[QuadConfig] = None,
) -> float:
    """
    Integrate factor(y) / sqrt(g(y)) where g vanishes linearly at one end.

    Args:
        factor: Smooth vectorised factor, evaluated at y.
        gap: g expressed through the distance d = |y - singular end| >= 0,
            so that callers can evaluate it without cancellation
            (e.g. ``lambda d: e**f1 * -np.expm1(-d)``).
        interval: (a, b) with a <= b.
        singular_end: "a" or "b".
        cfg: Quadrature tolerances.

    Substituting d = u**2 turns the integrand into
    2 u factor(y) / sqrt(g(u**2)), which is smooth at u = 0.
    """
    a, b = float(interval[0]), float(interval[1])
    if singular_end not in ("a", "b"):
        raise ValueError(f"singular_end deve ser 'a' ou 'b', recebido '{singular_end}'")
    if b < a:
        raise ValueError(f"Intervalo precisa de a <= b, recebido ({a}, {b})")
    if a == b:
        return 0.0

    end = b if singular_end == "b" else a
    direction = -1.0 if singular_end == "b" else 1.0

    def integrand(u: np.ndarray) -> np.ndarray:
        d = u * u
        y = end + direction * d
        return 2.0 * u * factor(y) / np.sqrt(gap(d))

    return integrate_adaptive(integrand, 0.0, math.sqrt(b - a), cfg)


# ---------------------------------------------------------------------------
# Séries de potências
# ---------------------------------------------------------------------------


def invert_power_series(a: Sequence[float], n: Optional[int] = None) -> np.ndarray:
    """
    Reverse the series Z(y) = a1 y + a2 y^2 + ... + an y^n.

    Returns b1..bn with Y(z) = sum b_j z^j and Y(Z(y)) = y + O(y^{n+1}),
    solved order by order from Z(Y(z)) = z.
    """
    a = np.asarray(a, dtype=float)
    n = int(n or a.size)
    if n < 1:
        raise ValueError(f"Ordem deve ser >= 1, recebido {n}")
    if a.size == 0 or a[0] == 0.0:
        raise DegenerateSeries("Coeficiente líder a1 nulo; série não inversível")
    coeffs = np.zeros(n)
    coeffs[: min(n, a.size)] = a[:n]

    y = np.zeros(n + 1)
    y[1] = 1.0 / coeffs[0]
    for k in range(2, n + 1):
        composed = np.zeros(n + 1)
        power = y.copy()
        for j in range(1, k + 1):
            composed += coeffs[j - 1] * power
            power = np.convolve(power, y)[: n + 1]
        y[k] = -composed[k] / coeffs[0]
    return y[1:]


def eval_power_series(b: Sequence[float], z: float) -> float:
    """sum_j b_j z^j starting at j = 1."""
    return float(sum(bj * z ** (j + 1) for j, bj in enumerate(b)))


# ---------------------------------------------------------------------------
# Problemas de contorno
# ---------------------------------------------------------------------------

Rhs = Callable[[float, Any, Any], Tuple[Any, Any]]


@dataclass(frozen=True)
class BvpSolution:
    t: np.ndarray
    y: np.ndarray
    v: np.ndarray
    shooting_value: float
    residual: float
    richardson_error: float


def rk4_integrate(rhs: Rhs, y0, v0, n_steps: int, t_span: Tuple[float, float] = (0.0, 1.0)):
    """
    RK4 de passo fixo para o par y' = F(t, y, v), v' = G(t, y, v).

    y0 e v0 podem ser arrays (uma trajetória por entrada); devolve (t, y, v)
    com o eixo do tempo primeiro.
    """
    t0, t1 = t_span
    h = (t1 - t0) / n_steps
    t = t0 + h * np.arange(n_steps + 1)
    # escalares ficam como float; arrays 0-d são bem mais lentos neste laço
    y = float(y0) if np.isscalar(y0) else np.asarray(y0, dtype=float)
    v = float(v0) if np.isscalar(v0) else np.asarray(v0, dtype=float)
    ys = np.empty((n_steps + 1,) + np.shape(y))
    vs = np.empty((n_steps + 1,) + np.shape(v))
    ys[0], vs[0] = y, v
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_steps):
            ti = t[i]
            k1y, k1v = rhs(ti, y, v)
            k2y, k2v = rhs(ti + 0.5 * h, y + 0.5 * h * k1y, v + 0.5 * h * k1v)
            k3y, k3v = rhs(ti + 0.5 * h, y + 0.5 * h * k2y, v + 0.5 * h * k2v)
            k4y, k4v = rhs(ti + h, y + h * k3y, v + h * k3v)
            y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            ys[i + 1], vs[i + 1] = y, v
    return t, ys, vs


def shoot_bvp(
    rhs: Rhs,
    left_value: float,
    residual: Callable[[Any, Any], Any],
    bracket: Tuple[float, float],
    cfg: Optional[RootConfig] = None,
    n_steps: int = 400,
    scan_points: int = 41,
    prefer: float = 0.0,
    t_span: Tuple[float, float] = (0.0, 1.0),
    richardson: bool = True,
) -> BvpSolution:
    """
    Resolve y(t0) = left_value, residual(y(t1), v(t1)) = 0 por shooting em v(t0).

    Uma equação f'' = F(t, f, f') entra como ``rhs = lambda t, y, v: (v, F(t, y, v))``.
    O bracket é varrido com ``scan_points`` trajetórias integradas juntas; das
    mudanças de sinal encontradas, a mais próxima de ``prefer`` é refinada com
    Brent. A trajetória devolvida traz a estimativa de erro por passo dobrado
    (Richardson).

    Raises:
        NoSignChange: resíduo sem mudança de sinal no bracket varrido.
        MaxIterExceeded: Brent não convergiu.
    """
    cfg = cfg or DEFAULT_ROOT
    if n_steps < 400:
        raise InvalidConfig(f"Integração do BVP exige pelo menos 400 passos, recebido {n_steps}")
    lo, hi = float(bracket[0]), float(bracket[1])

    grid = np.linspace(lo, hi, max(2, scan_points))
    _, ys, vs = rk4_integrate(rhs, np.full_like(grid, left_value), grid, n_steps, t_span)
    with np.errstate(over="ignore", invalid="ignore"):
        res = np.asarray(residual(ys[-1], vs[-1]), dtype=float)
    finite = np.isfinite(res)
    changes = np.flatnonzero(finite[:-1] & finite[1:] & (np.sign(res[:-1]) * np.sign(res[1:]) <= 0.0))
    if changes.size == 0:
        ends = (float(res[0]), float(res[-1]))
        raise NoSignChange(
            "Resíduo do shooting sem mudança de sinal", (lo, hi), ends, diagnostics={"trajectory": ys[:, 0]}
        )
    if changes.size > 1:
        logger.debug(f"Resíduo do shooting muda de sinal {changes.size} vezes; mantendo a mais próxima de {prefer:g}")
    mids = 0.5 * (grid[changes] + grid[changes + 1])
    i = int(changes[np.argmin(np.abs(mids - prefer))])

    def terminal_residual(s: float) -> float:
        _, y_path, v_path = rk4_integrate(rhs, float(left_value), s, n_steps, t_span)
        return float(residual(y_path[-1], v_path[-1]))

    root = find_root(terminal_residual, (grid[i], grid[i + 1]), cfg)

    t, y, v = rk4_integrate(rhs, float(left_value), root, n_steps, t_span)
    error = float("nan")
    if richardson:
        _, y_fine, _ = rk4_integrate(rhs, float(left_value), root, 2 * n_steps, t_span)
        error = float(np.max(np.abs(y - y_fine[::2])) / 15.0)
        if error > 1e-8:
            logger.warning(f"Erro RK4 por passo dobrado {error:.2e} em {n_steps} passos")
    final_residual = float(residual(y[-1], v[-1]))
    return BvpSolution(t, y, v, float(root), final_residual, error)
