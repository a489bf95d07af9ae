"""Exceções da biblioteca de assintóticas.

Todas herdam de :class:`AsianError`, e a CLI converte a família inteira em
código de saída 1. Os solvers anexam em ``diagnostics`` o que tinham no
momento da falha (último bracket, última trajetória).
"""

from typing import Any, Dict, Optional, Tuple


class AsianError(Exception):
    """Base das falhas numéricas e de domínio."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics: Dict[str, Any] = dict(diagnostics or {})


class OutOfDomain(AsianError, ValueError):
    """Entrada fora do domínio da operação."""


class NoSignChange(AsianError):
    """Solver de bracket sem mudança de sinal."""

    def __init__(
        self,
        message: str,
        bracket: Optional[Tuple[float, float]] = None,
        values: Optional[Tuple[float, float]] = None,
        diagnostics: Optional[Dict[str, Any]] = None,
    ):
        if bracket is not None:
            message = f"{message} (último bracket [{bracket[0]:.6g}, {bracket[1]:.6g}]"
            if values is not None:
                message += f", f = ({values[0]:.3e}, {values[1]:.3e})"
            message += ")"
        super().__init__(message, diagnostics)
        self.bracket = bracket
        self.values = values


class MaxIterExceeded(AsianError):
    pass


class SubdivisionLimit(AsianError):
    """Quadratura adaptativa não atingiu a tolerância."""


class DegenerateSeries(AsianError):
    """Série de potências com coeficiente líder nulo."""


class NonDifferentiable(AsianError):
    """A vol local não tem derivada utilizável no ponto de expansão."""


class InvalidConfig(AsianError, ValueError):
    """Configuração de modelo, Monte Carlo ou settings inválida."""
