from __future__ import annotations
from typing import Any, Dict, Optional


class QECError(Exception):
    """
    Error base del simulador. `details` guarda diagnósticos numéricos
    (autovalor mínimo, población de cola, residuos) para el reporte.
    """

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.details: Dict[str, Any] = dict(details or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.details:
            return base
        extra = ", ".join(f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}" for k, v in self.details.items())
        return f"{base} ({extra})"


class DimensionError(QECError, ValueError):
    """Formas incompatibles entre matrices/estados."""


class ContractError(QECError, ValueError):
    """Precondición o postcondición numérica violada."""


class DegeneracyError(ContractError):
    """Gram casi singular, normalización nula, estado degenerado."""


class TruncationError(ContractError):
    """Población fuera del espacio de Fock truncado."""


class InfeasibleError(ContractError):
    """Sin solución real (p.ej. discriminante negativo para α)."""


class ConventionError(ContractError):
    """Convención incompatible (p.ej. norm_dim distinto de la dimensión)."""


class IntegrityError(QECError, RuntimeError):
    """Deriva numérica durante una simulación (traza, hermiticidad)."""
