from __future__ import annotations
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.numerics.linalg import ComplexMatrix, as_matrix, dagger
from src.protocol.schema import NoiseParams
from src.services.codes import CodePair
from src.services.fock import FockSpace, ladder_ops
from src.utils.errors import ContractError, DimensionError
from src.utils.log import log_metrics, setup_logger

log = setup_logger("CHANNEL")

J_SYMMETRY_TOL = 1e-12
U_INDEPENDENCE_TOL = 1e-10
BLOCK_TOL = 1e-12
DEGENERACY_TOL = 1e-14
SMALLNESS_WARN = 0.1
# Σ F̂ᵢ†F̂ᵢ normalizado debe ser la identidad en el código
NORMALIZED_CODE_TOL = 1e-4

# Etiquetas por paridad: F1/F2 conservan paridad, F3 la invierte
LABELS = ("F1", "F2", "F3")


@dataclass(frozen=True, eq=False)
class TransformedKraus:
    """
    F̂ᵢ = Σ_k V_ki Â_k con J = VΛVᵀ. Las columnas de `v`, `lambdas` y `f_ops`
    siguen el orden de `labels`: (F1 fluctuación, F2 casi identidad, F3 ∝ â).
    """
    a_ops: Tuple[ComplexMatrix, ...]
    j: np.ndarray
    v: np.ndarray
    lambdas: np.ndarray
    f_ops: Tuple[ComplexMatrix, ...]
    labels: Tuple[str, ...] = LABELS
    parity_flip: Tuple[bool, ...] = (False, False, True)
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def by_label(self, label: str) -> ComplexMatrix:
        return self.f_ops[self.labels.index(label)]

    def completeness(self) -> ComplexMatrix:
        return sum(dagger(f) @ f for f in self.f_ops)

    def trace_normalized(self) -> Tuple[ComplexMatrix, ...]:
        """F̂ᵢ/√(ΣΛ): sobre el código ΣΛ = tr J es la traza de salida del canal crudo."""
        scale = 1.0 / np.sqrt(float(np.sum(self.lambdas)))
        return tuple(scale * f for f in self.f_ops)


def short_time_kraus(space: FockSpace, p: NoiseParams) -> List[ComplexMatrix]:
    """Â₁ = √(κτ)â, Â₂ = √(κ_φτ)n̂, Â₃ = Î − (κτ/2)n̂ − (κ_φτ/2)n̂²."""
    a, _, n = ladder_ops(space)
    kt = p.kappa * p.tau
    kpt = p.kappa_phi * p.tau
    a1 = np.sqrt(kt) * a
    a2 = np.sqrt(kpt) * n
    a3 = np.eye(space.dim, dtype=complex) - 0.5 * kt * n - 0.5 * kpt * (n @ n)
    return [a1, a2, a3]


def _j_for(state: np.ndarray, a_ops: Sequence[ComplexMatrix]) -> np.ndarray:
    images = np.column_stack([op @ state for op in a_ops])
    return dagger(images) @ images


def j_matrix(pair: CodePair, a_ops: Sequence[ComplexMatrix]) -> np.ndarray:
    """J_ij = ⟨u_L|Â_i†Â_j|u_L⟩ con u = 0, contrastado contra u = 1."""
    if len(a_ops) != 3:
        raise DimensionError(f"se esperaban 3 operadores de Kraus, llegaron {len(a_ops)}")
    j0 = _j_for(pair.zero, a_ops)
    j1 = _j_for(pair.one, a_ops)
    drift = float(np.max(np.abs(j0 - j1)))
    if drift > U_INDEPENDENCE_TOL:
        raise ContractError("J depende de la palabra código", {"u_drift": drift, "family": pair.family})
    imag = float(np.max(np.abs(j0.imag)))
    asym = float(np.max(np.abs(j0 - j0.T)))
    if asym > J_SYMMETRY_TOL or imag > J_SYMMETRY_TOL:
        raise ContractError("J no es real simétrica", {"asymmetry": asym, "imag": imag})
    j = j0.real
    return 0.5 * (j + j.T)


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return vec if vec[k] >= 0 else -vec


def _code_block(pair: CodePair, op: ComplexMatrix) -> np.ndarray:
    """Restricción 2×2 de un operador a la base {|0_L⟩, |1_L⟩}."""
    basis = np.column_stack([pair.zero, pair.one])
    return dagger(basis) @ op @ basis


def kl_residuals(pair: CodePair, f_ops: Sequence[ComplexMatrix], lambdas: np.ndarray,
                 labels: Sequence[str] = LABELS) -> Dict[str, float]:
    """‖P_L F̂ᵢ†F̂ⱼ P_L − Λᵢδᵢⱼ P_L‖ para cada par (i ≤ j)."""
    basis = np.column_stack([pair.zero, pair.one])
    images = [f @ basis for f in f_ops]
    out: Dict[str, float] = {}
    for i in range(len(f_ops)):
        for k in range(i, len(f_ops)):
            block = dagger(images[i]) @ images[k]
            if i == k:
                block = block - lambdas[i] * np.eye(2)
            out[f"{labels[i]}{labels[k]}"] = float(np.linalg.norm(block, 2))
    return out


def transform_kraus(pair: CodePair, p: NoiseParams, k_er: Optional[float] = None) -> TransformedKraus:
    """
    Diagonaliza J respetando el bloque de paridad: Â₁ (cambia paridad) queda solo,
    el bloque {Â₂, Â₃} se diagonaliza y se ordena por Λ ascendente.
    Empates de Λ: primero la etiqueta de paridad, luego el índice original.
    """
    a_ops = short_time_kraus(pair.space, p)
    j = j_matrix(pair, a_ops)

    leak = float(max(abs(j[0, 1]), abs(j[0, 2])))
    if leak > BLOCK_TOL:
        raise ContractError("J mezcla Â₁ con {Â₂, Â₃}", {"offblock": leak})

    w, vecs = np.linalg.eigh(j[1:, 1:])
    # eigh ya entrega Λ ascendente; ante empate se conserva el índice
    order = (0, 1)
    if abs(w[1] - w[0]) < DEGENERACY_TOL:
        log.warning(f"Λ degenerados ({w[0]:.3e}); se desempata por índice")

    v = np.zeros((3, 3))
    lambdas = np.zeros(3)
    for col, k in enumerate(order):
        v[1:, col] = _fix_sign(vecs[:, k])
        lambdas[col] = w[k]
    v[0, 2] = 1.0
    lambdas[2] = j[0, 0]

    f_ops = tuple(sum(v[k, i] * a_ops[k] for k in range(3)) for i in range(3))

    diag = kl_residuals(pair, f_ops, lambdas)
    worst = max(diag.values())
    diag["kl_residual_max"] = worst
    if k_er is not None:
        bound = 10.0 * np.sqrt(k_er) * float(np.max(lambdas))
        diag["kl_residual_bound"] = float(bound)
        if worst > bound:
            log.warning(f"Residual KL {worst:.2e} sobre la cota {bound:.2e}")

    n_mean = float(np.real(np.vdot(pair.zero, np.arange(pair.dim) * pair.zero)))
    n2_mean = float(np.real(np.vdot(pair.zero, np.arange(pair.dim) ** 2 * pair.zero)))
    for name, value in p.smallness(n_mean, n2_mean).items():
        diag[name] = value
        if value > SMALLNESS_WARN:
            log.warning(f"[fail]{name}={value:.3f}[/fail]: el desarrollo a tiempo corto no es fiable")

    # Â₃ sólo es Î a primer orden: ΣÂ†Â = Î + O(τ²)
    diag["trace_excess"] = float(np.sum(lambdas) - 1.0)

    metrics = {f"Λ_{l}": float(x) for l, x in zip(LABELS, lambdas)}
    metrics["residual_max"] = worst
    log_metrics(log, "Λ y residual KL", metrics)
    return TransformedKraus(
        a_ops=tuple(a_ops), j=j, v=v, lambdas=lambdas, f_ops=f_ops, diagnostics=diag,
    )


def apply_channel(kraus: Sequence[ComplexMatrix], rho: ComplexMatrix, hermitian: bool = True) -> ComplexMatrix:
    """
    Σ K ρ K†. Con hermitian=True la salida se simetriza (hermítica exacta);
    para operadores como |0_L⟩⟨1_L| se pasa hermitian=False y el mapa queda lineal.
    """
    rho = as_matrix(rho, square=True, name="rho")
    out = np.zeros_like(rho)
    for k in kraus:
        if k.shape[1] != rho.shape[0]:
            raise DimensionError(f"Kraus {k.shape} incompatible con rho {rho.shape}")
        out = out + k @ rho @ dagger(k)
    return 0.5 * (out + dagger(out)) if hermitian else out


def design_channel(pair: CodePair, tk: TransformedKraus) -> Tuple[ComplexMatrix, ...]:
    """
    Canal de diseño que conserva la traza sobre el código. El desarrollo crudo
    {F̂ᵢ} tiene traza 1 + O(τ²) y, aplicado ciclo tras ciclo, la acumula.
    """
    ops = tk.trace_normalized()
    block = _code_block(pair, sum(dagger(f) @ f for f in ops))
    dev = float(np.linalg.norm(block - np.eye(2), 2))
    if dev > NORMALIZED_CODE_TOL:
        raise ContractError(
            "el canal normalizado no conserva la traza en el código",
            {"deviation": dev, "trace_excess": tk.diagnostics.get("trace_excess", float("nan"))},
        )
    log.debug(f"Canal de diseño: exceso de traza {float(np.sum(tk.lambdas)) - 1.0:.3e}, desvío {dev:.2e}")
    return ops
