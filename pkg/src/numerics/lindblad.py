from __future__ import annotations
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from src.numerics.linalg import (
    ComplexMatrix, as_matrix, dagger, hermiticity_residual, mat_exp,
)
from src.utils.errors import ContractError, DimensionError

Method = Literal["auto", "expm", "rk4"]

# cruce entre exponencial del Liouvilliano (d² x d²) y RK4 adaptativo
EXPM_MAX_DIM = 64


@dataclass(frozen=True)
class LindbladSpec:
    """
    dρ/dt = −i[H, ρ] + Σ_k (γ_k/2)·D[c_k]ρ,  D[x]ρ = 2xρx† − x†xρ − ρx†x.

    Las tasas se interpretan con este prefactor γ/2: una pérdida con tasa κ
    vacía |1⟩ como e^{−κt}.
    """
    hamiltonian: ComplexMatrix
    jump_ops: Tuple[Tuple[ComplexMatrix, float], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        h = as_matrix(self.hamiltonian, square=True, name="hamiltonian")
        if hermiticity_residual(h) > 1e-12:
            raise ContractError("LindbladSpec: H no es hermítico", {"residual": hermiticity_residual(h)})
        jumps = []
        for op, rate in self.jump_ops:
            c = as_matrix(op, square=True, name="jump")
            if c.shape != h.shape:
                raise DimensionError(f"LindbladSpec: salto {c.shape} vs H {h.shape}")
            if rate < 0:
                raise ContractError(f"LindbladSpec: tasa negativa {rate}")
            jumps.append((c, float(rate)))
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jump_ops", tuple(jumps))

    @property
    def dim(self) -> int:
        return int(self.hamiltonian.shape[0])

    @classmethod
    def dissipative(cls, dim: int, jumps: Sequence[Tuple[ComplexMatrix, float]]) -> "LindbladSpec":
        return cls(np.zeros((dim, dim), dtype=complex), tuple(jumps))

    def effective_hamiltonian(self) -> ComplexMatrix:
        """K = H − (i/2) Σ γ c†c."""
        k = self.hamiltonian.astype(complex).copy()
        for c, rate in self.jump_ops:
            k -= 0.5j * rate * (dagger(c) @ c)
        return k

    def stiffness(self) -> float:
        """Cota gruesa del radio espectral del generador (para el paso inicial)."""
        s = float(np.linalg.norm(self.hamiltonian, 2))
        for c, rate in self.jump_ops:
            s += rate * float(np.linalg.norm(dagger(c) @ c, 2))
        return s


def lindblad_rhs(spec: LindbladSpec, rho: ComplexMatrix) -> ComplexMatrix:
    k = spec.effective_hamiltonian()
    return _rhs(k, spec.jump_ops, rho)


def _rhs(k: ComplexMatrix, jumps, rho: ComplexMatrix) -> ComplexMatrix:
    out = -1j * (k @ rho) + 1j * (rho @ dagger(k))
    for c, rate in jumps:
        if rate == 0.0:
            continue
        out += rate * (c @ rho @ dagger(c))
    return out


def lindblad_superoperator(spec: LindbladSpec) -> ComplexMatrix:
    """
    Liouvilliano en vectorización por columnas: vec(AXB) = (Bᵀ ⊗ A) vec(X).
    """
    d = spec.dim
    eye = np.eye(d)
    k = spec.effective_hamiltonian()
    sup = -1j * np.kron(eye, k) + 1j * np.kron(k.conj(), eye)
    for c, rate in spec.jump_ops:
        sup += rate * np.kron(c.conj(), c)
    return sup


def _check_rho(spec: LindbladSpec, rho0) -> ComplexMatrix:
    rho = as_matrix(rho0, square=True, name="rho0")
    if rho.shape[0] != spec.dim:
        raise DimensionError(f"rho0 {rho.shape} vs espacio {spec.dim}")
    return rho


def lindblad_propagate(
    spec: LindbladSpec,
    rho0,
    t: float,
    method: Method = "auto",
    tol: float = 1e-10,
    validate_state: bool = True,
) -> ComplexMatrix:
    """
    ρ(t) bajo la ecuación maestra. `auto` usa la exponencial del Liouvilliano
    hasta EXPM_MAX_DIM y RK4 adaptativo por encima.

    Con validate_state=False se aceptan operadores no físicos (p.ej. |0_L⟩⟨1_L|);
    el mapa es lineal y se propaga igual.
    """
    rho = _check_rho(spec, rho0)
    if validate_state:
        _validate_density(rho)
    if t < 0:
        raise ContractError(f"tiempo negativo t={t}")
    if t == 0:
        return rho.copy()
    if method == "auto":
        method = "expm" if spec.dim <= EXPM_MAX_DIM else "rk4"
    if method == "expm":
        prop = mat_exp(lindblad_superoperator(spec) * t)
        vec = prop @ rho.reshape(-1, order="F")
        return vec.reshape(spec.dim, spec.dim, order="F")
    if method == "rk4":
        return _propagate_rk4(spec, rho, t, tol)
    raise ValueError(f"método desconocido: {method}")


def _validate_density(rho: ComplexMatrix) -> None:
    if hermiticity_residual(rho) > 1e-10:
        raise ContractError("rho0 no es hermítica", {"residual": hermiticity_residual(rho)})
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1.0) > 1e-10:
        raise ContractError("rho0 sin traza unitaria", {"trace": tr})
    w = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))
    if w[0] < -1e-10:
        raise ContractError("rho0 no es semidefinida positiva", {"min_eigenvalue": float(w[0])})


def _rk4_step(k, jumps, rho, h):
    k1 = _rhs(k, jumps, rho)
    k2 = _rhs(k, jumps, rho + 0.5 * h * k1)
    k3 = _rhs(k, jumps, rho + 0.5 * h * k2)
    k4 = _rhs(k, jumps, rho + h * k3)
    return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _propagate_rk4(spec: LindbladSpec, rho: ComplexMatrix, t: float, tol: float) -> ComplexMatrix:
    """
    RK4 con control de paso por duplicación (un paso h vs dos de h/2) y
    corrección de Richardson sobre el resultado aceptado.
    """
    k = spec.effective_hamiltonian()
    jumps = [(c, r) for c, r in spec.jump_ops if r > 0]
    stiff = max(spec.stiffness(), 1e-12)
    h = min(t, 1.0 / stiff)
    h_min = t * 1e-12
    elapsed = 0.0
    cur = rho.copy()
    scale = max(1.0, float(np.max(np.abs(rho))))
    while t - elapsed > t * 1e-13:
        h = min(h, t - elapsed)
        full = _rk4_step(k, jumps, cur, h)
        half = _rk4_step(k, jumps, _rk4_step(k, jumps, cur, 0.5 * h), 0.5 * h)
        err = float(np.max(np.abs(half - full))) / 15.0
        if err <= tol * scale or h <= h_min:
            cur = half + (half - full) / 15.0
            elapsed += h
            grow = 2.0 if err == 0 else min(2.0, 0.9 * (tol * scale / err) ** 0.2)
            h *= max(grow, 1.0)
        else:
            h *= max(0.2, 0.9 * (tol * scale / err) ** 0.2)
    return cur


def evolve_operators(
    spec: LindbladSpec,
    ops: Sequence[ComplexMatrix],
    t: float,
    method: Method = "auto",
    tol: float = 1e-10,
) -> List[ComplexMatrix]:
    """Propaga varios operadores (no necesariamente físicos) con el mismo mapa."""
    return [lindblad_propagate(spec, o, t, method=method, tol=tol, validate_state=False) for o in ops]


def propagator_cache(spec: LindbladSpec, t: float) -> Optional[ComplexMatrix]:
    """Superoperador exp(L t) si la dimensión lo permite, si no None."""
    if spec.dim > EXPM_MAX_DIM:
        return None
    return mat_exp(lindblad_superoperator(spec) * t)


def apply_superoperator(prop: ComplexMatrix, rho: ComplexMatrix) -> ComplexMatrix:
    d = rho.shape[0]
    return (prop @ rho.reshape(-1, order="F")).reshape(d, d, order="F")


@dataclass(frozen=True, eq=False)
class LossDephasingPropagator:
    """
    Propagador exacto de la ecuación maestra con H = 0 y saltos (â, κ), (n̂, κ_φ).
    En la base de Fock la diagonal d = k − j evoluciona sola:
        dρ_{j,j+d}/dt = −λ_j ρ_{j,j+d} + μ_j ρ_{j+1,j+1+d},
        λ_j = κ(2j+d)/2 + κ_φ d²/2,  μ_j = κ√((j+1)(j+1+d)),
    así que basta exponenciar una matriz bidiagonal por diagonal.
    """
    dim: int
    kappa: float
    kappa_phi: float
    t: float
    blocks: Tuple[np.ndarray, ...]

    @classmethod
    def build(cls, dim: int, kappa: float, kappa_phi: float, t: float) -> "LossDephasingPropagator":
        if kappa < 0 or kappa_phi < 0:
            raise ContractError("tasas negativas", {"kappa": kappa, "kappa_phi": kappa_phi})
        if t < 0:
            raise ContractError(f"tiempo negativo t={t}")
        return _band_propagator(int(dim), float(kappa), float(kappa_phi), float(t))

    def spec(self) -> LindbladSpec:
        a = np.diag(np.sqrt(np.arange(1, self.dim, dtype=float)), k=1).astype(complex)
        n = np.diag(np.arange(self.dim, dtype=float)).astype(complex)
        return LindbladSpec.dissipative(self.dim, [(a, self.kappa), (n, self.kappa_phi)])

    def apply(self, rho: ComplexMatrix) -> ComplexMatrix:
        rho = np.asarray(rho)
        if rho.shape != (self.dim, self.dim):
            raise DimensionError(f"rho {rho.shape} vs propagador de dimensión {self.dim}")
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for d, block in enumerate(self.blocks):
            idx = np.arange(self.dim - d)
            out[idx, idx + d] = block @ rho[idx, idx + d]
            if d:
                out[idx + d, idx] = block @ rho[idx + d, idx]
        return out


@lru_cache(maxsize=8)
def _band_propagator(dim: int, kappa: float, kappa_phi: float, t: float) -> LossDephasingPropagator:
    blocks = []
    for d in range(dim):
        j = np.arange(dim - d, dtype=float)
        gen = np.diag(-(0.5 * kappa * (2.0 * j + d) + 0.5 * kappa_phi * d * d))
        if dim - d > 1:
            gen += np.diag(kappa * np.sqrt((j[:-1] + 1.0) * (j[:-1] + 1.0 + d)), k=1)
        blocks.append(np.real(mat_exp(gen * t)))
    return LossDephasingPropagator(dim, kappa, kappa_phi, t, tuple(blocks))
