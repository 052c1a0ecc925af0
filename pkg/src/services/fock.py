from __future__ import annotations
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from src.numerics.linalg import ComplexMatrix, StateVector, eig_hermitian, mat_exp
from src.utils.errors import ContractError, TruncationError
from src.utils.log import setup_logger

log = setup_logger("FOCK")

# por encima de este padding la exponencial densa deja de ser razonable
DENSE_PAD_LIMIT = 1024
DEFAULT_TAIL_TOL = 1e-12
DEFAULT_SIZING_FACTOR = 14.0

StateMethod = Literal["auto", "expm", "analytic"]


def db_to_r(db: float) -> float:
    """r = dB·ln10/20."""
    return float(db) * math.log(10.0) / 20.0


def r_to_db(r: float) -> float:
    return 20.0 * float(r) / math.log(10.0)


@dataclass(frozen=True)
class SqueezeParams:
    r: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.r):
            raise ContractError(f"r no finito: {self.r}")

    @classmethod
    def from_db(cls, db: float) -> "SqueezeParams":
        return cls(db_to_r(db))

    @property
    def db(self) -> float:
        return r_to_db(self.r)


@dataclass(frozen=True)
class FockSpace:
    """
    Espacio de Fock truncado a `dim` niveles. `pad` es la dimensión usada al
    exponenciar generadores que acoplan |k⟩ con |k±2⟩ (se trunca después).
    `n_max` es el índice de Fock más alto que se comprime (columnas verificadas
    hasta n_max+2).
    """
    dim: int
    pad: int = 0
    tail_tol: float = DEFAULT_TAIL_TOL
    n_max: int = 1

    def __post_init__(self) -> None:
        if self.dim < 4:
            raise ContractError(f"dim debe ser ≥ 4 (llegó {self.dim})")
        if self.pad == 0:
            object.__setattr__(self, "pad", 2 * self.dim)
        if self.pad < self.dim:
            raise ContractError(f"pad ({self.pad}) < dim ({self.dim})")

    @classmethod
    def for_squeezing(
        cls,
        r: float,
        n_max: int = 1,
        factor: float = DEFAULT_SIZING_FACTOR,
        tail_tol: float = DEFAULT_TAIL_TOL,
        minimum: int = 32,
    ) -> "FockSpace":
        """N = max(32, ⌈factor·e^{2|r|}·(n_max+1)⌉) redondeado al múltiplo de 8 siguiente."""
        raw = max(minimum, math.ceil(factor * math.exp(2.0 * abs(r)) * (n_max + 1)))
        dim = int(8 * math.ceil(raw / 8))
        log.debug(f"Dimensión de truncamiento: r={r:.4f}, n_max={n_max} → N={dim}")
        return cls(dim=dim, tail_tol=tail_tol, n_max=n_max)

    @property
    def checked_cols(self) -> int:
        return min(self.dim, self.n_max + 3)


# -----------------------------
# Operadores de escalera
# -----------------------------

@lru_cache(maxsize=16)
def _annihilation(dim: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)
    a.setflags(write=False)
    return a


def ladder_ops(space: FockSpace) -> Tuple[ComplexMatrix, ComplexMatrix, ComplexMatrix]:
    """(â, â†, n̂) en el espacio truncado; n̂ = â†â exacto."""
    a = _annihilation(space.dim).astype(complex)
    a_dag = a.conj().T.copy()
    n = a_dag @ a
    return a, a_dag, n


def number_diag(dim: int) -> np.ndarray:
    return np.arange(dim, dtype=float)


def apply_annihilation(v: np.ndarray) -> np.ndarray:
    """â·v sin construir la matriz."""
    out = np.zeros_like(v)
    out[:-1] = np.sqrt(np.arange(1, v.shape[0])) * v[1:]
    return out


def apply_creation(v: np.ndarray) -> np.ndarray:
    """â†·v truncado (se descarta lo que sale del espacio)."""
    out = np.zeros_like(v)
    out[1:] = np.sqrt(np.arange(1, v.shape[0])) * v[:-1]
    return out


# -----------------------------
# Compresión
# -----------------------------

@lru_cache(maxsize=32)
def _squeeze_truncated(dim: int, pad: int, r: float) -> np.ndarray:
    a = _annihilation(pad)
    gen = 0.5 * r * (a @ a - a.T @ a.T)  # real antisimétrico
    s = np.real(mat_exp(gen))[:dim, :dim].copy()
    s.setflags(write=False)
    return s


def squeeze_operator(space: FockSpace, p: SqueezeParams) -> ComplexMatrix:
    """
    Ŝ(r) = exp[r(â² − â†²)/2] exponenciado en `pad` y truncado a `dim`.
    Se verifica la norma de las columnas 0..n_max+2.
    """
    s = _squeeze_truncated(space.dim, space.pad, float(p.r))
    cols = space.checked_cols
    dev = float(np.max(np.abs(np.linalg.norm(s[:, :cols], axis=0) - 1.0)))
    if dev > 1e-8:
        raise TruncationError(
            "padding insuficiente para Ŝ(r)",
            {"r": float(p.r), "dim": space.dim, "pad": space.pad, "column_norm_dev": dev},
        )
    return s.astype(complex)


def _parity_signs(dim: int, m: int) -> np.ndarray:
    """(−1)^{(k−m)/2} en los niveles de la misma paridad que m, 0 en el resto."""
    ks = np.arange(dim)
    same = (ks % 2) == (m % 2)
    half = (ks - m) // 2
    return np.where(same, np.where(half % 2 == 0, 1.0, -1.0), 0.0)


def _overlap_vector(ns: np.ndarray, m: int, r: float) -> np.ndarray:
    """⟨n|m,r⟩ para un arreglo de índices n (fórmula cerrada, log-espacio)."""
    ns = np.asarray(ns, dtype=int)
    out = np.zeros(ns.shape, dtype=float)
    if r == 0.0:
        out[ns == m] = 1.0
        return out
    mask = (ns % 2) == (m % 2)
    sel = ns[mask]
    if sel.size == 0:
        return out
    c, s = math.cosh(r), math.sinh(r)
    log_half_s = math.log(abs(s) / 2.0)
    log_pref = 0.5 * (gammaln(m + 1) + gammaln(sel + 1)) - 0.5 * (sel + m + 1) * math.log(c)

    ks = list(range(m % 2, m + 1, 2))
    logs = np.full((len(ks), sel.size), -np.inf)
    signs = np.zeros((len(ks), sel.size))
    for i, k in enumerate(ks):
        valid = sel >= k
        p = (sel + m - 2 * k) // 2
        half_n = np.maximum((sel - k) // 2, 0)
        term = p * log_half_s - gammaln(k + 1) - gammaln((m - k) // 2 + 1) - gammaln(half_n + 1)
        logs[i, valid] = term[valid]
        sgn = np.where(half_n % 2 == 0, 1.0, -1.0)
        if s < 0:
            sgn = sgn * np.where(p % 2 == 0, 1.0, -1.0)
        signs[i] = sgn
    mx = logs.max(axis=0)
    total = np.sum(signs * np.exp(logs - mx), axis=0)
    out[mask] = total * np.exp(log_pref + mx)
    return out


def overlap_analytic(n: int, m: int, p: SqueezeParams) -> float:
    """
    ⟨n|m,r⟩ = (m!n!)^{1/2}/cosh(r)^{(n+m+1)/2} · Σ_k [sinh(r)/2]^{(n+m−2k)/2}
              (−1)^{(n−k)/2} / (k!·((m−k)/2)!·((n−k)/2)!),  k ≡ n ≡ m (mod 2).
    """
    if (n + m) % 2:
        return 0.0
    return float(_overlap_vector(np.array([n]), int(m), float(p.r))[0])


def overlap_matrix(size: int, p: SqueezeParams) -> np.ndarray:
    """Bloque [⟨k|S(r)|l⟩]_{k,l<size} de la fórmula cerrada, sin truncamiento."""
    ks = np.arange(size)
    return np.column_stack([_overlap_vector(ks, l, float(p.r)) for l in range(size)])


def tail_population(state: StateVector, fraction: float = 0.1) -> float:
    d = state.shape[0]
    start = int(math.floor((1.0 - fraction) * d))
    return float(np.sum(np.abs(state[start:]) ** 2))


def mean_photon_number(state: StateVector) -> float:
    return float(np.sum(number_diag(state.shape[0]) * np.abs(state) ** 2) / np.sum(np.abs(state) ** 2))


def check_tail(space: FockSpace, state: StateVector, label: str = "estado") -> float:
    tail = tail_population(state)
    if tail > space.tail_tol:
        raise TruncationError(
            f"{label}: población en el 10% superior del espacio",
            {"tail": tail, "tol": space.tail_tol, "dim": space.dim},
        )
    return tail


def squeezed_fock_state(
    space: FockSpace,
    n: int,
    p: SqueezeParams,
    method: StateMethod = "auto",
) -> StateVector:
    """|n, r⟩ = Ŝ(r)|n⟩, normalizado. r<0 sale de r>0 por la regla de signos de paridad."""
    if n >= space.dim / 2:
        raise ContractError(f"n={n} fuera del rango útil (dim={space.dim})")
    r = float(p.r)
    if method == "auto":
        method = "expm" if space.pad <= DENSE_PAD_LIMIT else "analytic"
    if method == "expm":
        col = np.array(_squeeze_truncated(space.dim, space.pad, abs(r))[:, n])
    elif method == "analytic":
        col = _overlap_vector(np.arange(space.dim), n, abs(r))
    else:
        raise ValueError(f"método desconocido: {method}")
    if r < 0:
        col = col * _parity_signs(space.dim, n)
    check_tail(space, col, f"|{n}, r={r:.4f}⟩")
    return (col / np.linalg.norm(col)).astype(complex)


# -----------------------------
# Desplazamiento y Wigner
# -----------------------------

@lru_cache(maxsize=8)
def _displacement_factors(pad: int) -> Tuple[np.ndarray, np.ndarray]:
    a = _annihilation(pad)
    w, v = eig_hermitian(1j * (a.T - a))
    w.setflags(write=False)
    v.setflags(write=False)
    return w, v


def _displace_padded(pad: int, beta: complex, vec: np.ndarray) -> np.ndarray:
    """D(β)·vec en el espacio con padding: D(β) = R V e^{−i|β|λ} V† R†, R = e^{iθn̂}."""
    w, v = _displacement_factors(pad)
    amp, theta = abs(beta), float(np.angle(beta))
    rot = np.exp(1j * theta * np.arange(pad))
    y = v.conj().T @ (rot.conj() * vec)
    y = np.exp(-1j * amp * w) * y
    return rot * (v @ y)


def displace_operator(space: FockSpace, beta: complex) -> ComplexMatrix:
    """D(β) = exp(βâ† − β*â) calculado en `pad` y truncado a `dim`."""
    w, v = _displacement_factors(space.pad)
    amp, theta = abs(beta), float(np.angle(beta))
    rot = np.exp(1j * theta * np.arange(space.pad))
    d = (rot[:, None] * v) @ (np.exp(-1j * amp * w)[:, None] * (v.conj().T * rot.conj()[None, :]))
    return d[: space.dim, : space.dim]


def displace_state(space: FockSpace, beta: complex, state: StateVector) -> StateVector:
    padded = np.zeros(space.pad, dtype=complex)
    padded[: state.shape[0]] = state
    return _displace_padded(space.pad, beta, padded)[: space.dim]


def wigner_grid(state: StateVector, xs: Sequence[float], ps: Sequence[float]) -> np.ndarray:
    """
    W(x,p) = (1/π)⟨ψ|D(β)ΠD(−β)|ψ⟩, β = (x+ip)/√2. Devuelve W[i, j] = W(xs[i], ps[j]).
    """
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ps))):
        raise ContractError("grilla de Wigner con valores no finitos")
    d = state.shape[0]
    pad = 2 * d
    psi = np.zeros(pad, dtype=complex)
    psi[:d] = state
    parity = np.where(np.arange(pad) % 2 == 0, 1.0, -1.0)
    out = np.empty((xs.size, ps.size))
    for i, x in enumerate(xs):
        for j, p in enumerate(ps):
            beta = (x + 1j * p) / math.sqrt(2.0)
            phi = _displace_padded(pad, -beta, psi)
            out[i, j] = float(np.sum(parity * np.abs(phi) ** 2)) / math.pi
    return out
