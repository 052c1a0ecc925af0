from __future__ import annotations
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from src.utils.errors import ContractError, DegeneracyError, DimensionError

# Alias de tipos: todas las matrices son ndarray complejos densos
ComplexMatrix = np.ndarray
StateVector = np.ndarray

HERMITIAN_TOL = 1e-10
GRAM_FLOOR = 1e-10


def as_matrix(a, *, square: bool = False, name: str = "matriz") -> ComplexMatrix:
    """Convierte a ndarray complejo 2D y valida entradas finitas."""
    m = np.asarray(a)
    if m.ndim != 2:
        raise DimensionError(f"{name}: se esperaba 2D, llegó ndim={m.ndim}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name}: no es cuadrada {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractError(f"{name}: contiene NaN/Inf")
    return m.astype(complex, copy=False)


def dagger(a: ComplexMatrix) -> ComplexMatrix:
    return a.conj().T


def hermiticity_residual(h: ComplexMatrix) -> float:
    """‖h − h†‖ relativo a max(1, ‖h‖)."""
    scale = max(1.0, float(np.linalg.norm(h)))
    return float(np.linalg.norm(h - dagger(h))) / scale


def mat_exp(a) -> ComplexMatrix:
    """
    exp(a) por scaling-and-squaring con aproximante de Padé (orden 13),
    vía scipy.linalg.expm.
    """
    m = as_matrix(a, square=True, name="mat_exp")
    return sla.expm(m)


def eig_hermitian(h, tol: float = HERMITIAN_TOL) -> Tuple[np.ndarray, ComplexMatrix]:
    """Autovalores ascendentes y autovectores (columnas) de una matriz hermítica."""
    m = as_matrix(h, square=True, name="eig_hermitian")
    res = hermiticity_residual(m)
    if res > tol:
        raise ContractError("eig_hermitian: la matriz no es hermítica", {"residual": res})
    # se simetriza para que eigh no dependa del triángulo que lee
    w, v = sla.eigh(0.5 * (m + dagger(m)))
    return w, v


def inv_sqrt_psd(g: ComplexMatrix, floor: float = GRAM_FLOOR) -> ComplexMatrix:
    """G^(−1/2) para una matriz de Gram definida positiva."""
    w, v = eig_hermitian(g)
    if w[0] <= floor:
        raise DegeneracyError("Gram casi singular", {"min_eigenvalue": float(w[0])})
    return (v * (1.0 / np.sqrt(w))) @ dagger(v)


def loewdin_orthonormalize(vectors: Sequence[StateVector], floor: float = GRAM_FLOOR) -> List[StateVector]:
    """
    Ortogonalización simétrica: V·G^(−1/2). Es la base ortonormal más cercana
    (en suma de desplazamientos cuadráticos) al conjunto de entrada.
    """
    if len(vectors) == 0:
        return []
    dims = {np.asarray(v).shape for v in vectors}
    if len(dims) != 1:
        raise DimensionError(f"loewdin: vectores de distinta forma {sorted(dims)}")
    mat = np.column_stack([np.asarray(v, dtype=complex) for v in vectors])
    gram = dagger(mat) @ mat
    out = mat @ inv_sqrt_psd(gram, floor)
    return [out[:, k].copy() for k in range(out.shape[1])]


def is_unitary(u: ComplexMatrix, tol: float = 1e-10) -> bool:
    return unitarity_residual(u) <= tol


def unitarity_residual(u: ComplexMatrix) -> float:
    eye = np.eye(u.shape[0])
    return float(np.max(np.abs(dagger(u) @ u - eye)))


def expect(op: ComplexMatrix, state: StateVector) -> complex:
    """⟨ψ|op|ψ⟩."""
    return complex(np.vdot(state, op @ state))


def ket(dim: int, k: int) -> StateVector:
    v = np.zeros(dim, dtype=complex)
    v[k] = 1.0
    return v


def projector(*states: StateVector) -> ComplexMatrix:
    """Σ |ψ⟩⟨ψ| sobre estados ya ortonormales."""
    p = np.zeros((states[0].shape[0],) * 2, dtype=complex)
    for s in states:
        p += np.outer(s, s.conj())
    return p


def partial_trace_second(rho: ComplexMatrix, d1: int, d2: int) -> ComplexMatrix:
    """Tr_2 de un operador sobre H1⊗H2 (orden kron(A1, A2))."""
    return np.einsum("ijkj->ik", rho.reshape(d1, d2, d1, d2))


def exp_divided_differences(mu: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """
    G_ij = (e^{μ_i} − e^{μ_j})/(μ_i − μ_j), con e^{(μ_i+μ_j)/2} si μ_i ≈ μ_j.
    Con A = V diag(μ) V⁻¹: d e^A = V (G ∘ V⁻¹ dA V) V⁻¹.
    """
    ex = np.exp(mu)
    diff = mu[:, None] - mu[None, :]
    close = np.abs(diff) < tol
    safe = np.where(close, 1.0, diff)
    g = (ex[:, None] - ex[None, :]) / safe
    mid = np.exp(0.5 * (mu[:, None] + mu[None, :]))
    return np.where(close, mid, g)
