from __future__ import annotations
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from src.numerics.linalg import ComplexMatrix, dagger, exp_divided_differences, mat_exp
from src.protocol.schema import AdamConfig, GrapeSettings, NoiseParams
from src.services.adam import minimize
from src.services.channel import transform_kraus
from src.services.codes import Branch, build_code
from src.services.fock import FockSpace
from src.services.recovery import build_qutrit_unitaries, error_bases
from src.utils.errors import ContractError, DimensionError
from src.utils.log import setup_logger

log = setup_logger("GRAPE")

ANCILLA_DIM = 3
GRAPE_TAIL_TOL = 1e-8
FD_STEP = 1e-6

# Marco rotante: ω_s, ω_d, ω_ge, ω_gf desaparecen del hamiltoniano de control
FRAME_METADATA = {
    "frame": "rotating (drive + transmon transitions)",
    "eliminated": ["omega_s", "omega_d", "omega_ge", "omega_gf"],
}


@dataclass(frozen=True, eq=False)
class PulseGrid:
    """Amplitudes constantes por tramo, en unidades de χ."""
    omega_q: np.ndarray
    omega_p: np.ndarray

    def __post_init__(self) -> None:
        q = np.asarray(self.omega_q, dtype=float)
        p = np.asarray(self.omega_p, dtype=float)
        if q.shape != p.shape or q.ndim != 1:
            raise DimensionError(f"pulsos con formas distintas {q.shape} vs {p.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ContractError("amplitudes no finitas")
        object.__setattr__(self, "omega_q", q)
        object.__setattr__(self, "omega_p", p)

    @property
    def segments(self) -> int:
        return int(self.omega_q.shape[0])

    @classmethod
    def from_dimensionless(cls, x: np.ndarray, total_time: float) -> "PulseGrid":
        """x = (Ω_q·T..., Ω_p·T...)."""
        n = x.size // 2
        return cls(x[:n] / total_time, x[n:] / total_time)

    def dimensionless(self, total_time: float) -> np.ndarray:
        return np.concatenate([self.omega_q, self.omega_p]) * total_time

    def refined(self, factor: int = 2) -> "PulseGrid":
        """Mismos pulsos con cada tramo partido en `factor`."""
        return PulseGrid(np.repeat(self.omega_q, factor), np.repeat(self.omega_p, factor))

    def max_amplitude(self) -> float:
        return float(max(np.max(np.abs(self.omega_q)), np.max(np.abs(self.omega_p))))


@dataclass(frozen=True, eq=False)
class GrapeProblem:
    """
    Ĥ = −χ_e n̂⊗|e⟩⟨e| − χ_f n̂⊗|f⟩⟨f| + Ω_q(t) q̂⊗Î + Ω_p(t) p̂⊗Î, orden kron(osc, qutrit).
    """
    chi_e: float
    chi_f: float
    segments: int
    total_time: float
    osc_dim: int
    target: ComplexMatrix
    amplitude_bound: Optional[float] = None
    drift: ComplexMatrix = field(init=False, repr=False)
    q_op: ComplexMatrix = field(init=False, repr=False)
    p_op: ComplexMatrix = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.segments < 1 or self.total_time <= 0:
            raise ContractError("segments ≥ 1 y total_time > 0", {"segments": self.segments, "T": self.total_time})
        d = self.joint_dim
        if self.target.shape != (d, d):
            raise DimensionError(f"objetivo {self.target.shape} vs espacio conjunto {d}")
        a = np.diag(np.sqrt(np.arange(1, self.osc_dim, dtype=float)), k=1).astype(complex)
        n = dagger(a) @ a
        anc_e = np.diag([0.0, 1.0, 0.0]).astype(complex)
        anc_f = np.diag([0.0, 0.0, 1.0]).astype(complex)
        eye_a = np.eye(ANCILLA_DIM, dtype=complex)
        q = (a + dagger(a)) / np.sqrt(2.0)
        p = 1j * (dagger(a) - a) / np.sqrt(2.0)
        object.__setattr__(self, "drift", -self.chi_e * np.kron(n, anc_e) - self.chi_f * np.kron(n, anc_f))
        object.__setattr__(self, "q_op", np.kron(q, eye_a))
        object.__setattr__(self, "p_op", np.kron(p, eye_a))

    @classmethod
    def from_settings(cls, s: GrapeSettings, target: ComplexMatrix) -> "GrapeProblem":
        return cls(s.chi_e, s.chi_f, s.segments, s.total_time, s.osc_dim, target, s.amplitude_bound)

    @property
    def joint_dim(self) -> int:
        return self.osc_dim * ANCILLA_DIM

    @property
    def dt(self) -> float:
        return self.total_time / self.segments

    def segment_generators(self, grid: PulseGrid) -> List[ComplexMatrix]:
        """Ĥ_k·Δt de cada tramo."""
        dt = self.total_time / grid.segments
        return [
            dt * (self.drift + wq * self.q_op + wp * self.p_op)
            for wq, wp in zip(grid.omega_q, grid.omega_p)
        ]


# -----------------------------
# Propagadores y fidelidad
# -----------------------------

def segment_propagators(problem: GrapeProblem, grid: PulseGrid) -> List[ComplexMatrix]:
    return [mat_exp(-1j * hdt) for hdt in problem.segment_generators(grid)]


def total_propagator(problem: GrapeProblem, grid: PulseGrid) -> ComplexMatrix:
    u = np.eye(problem.joint_dim, dtype=complex)
    for uk in segment_propagators(problem, grid):
        u = uk @ u
    return u


def gate_fidelity(target: ComplexMatrix, u: ComplexMatrix) -> float:
    """Φ = |Tr(Û_obj† Û)|/D."""
    return float(abs(np.trace(dagger(target) @ u))) / target.shape[0]


def fidelity(problem: GrapeProblem, grid: PulseGrid) -> float:
    return gate_fidelity(problem.target, total_propagator(problem, grid))


def gradient_fd(problem: GrapeProblem, grid: PulseGrid) -> np.ndarray:
    """∂Φ/∂(Ω·T) por diferencias centrales (2·2·segmentos evaluaciones)."""
    x = grid.dimensionless(problem.total_time)
    out = np.zeros_like(x)
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += FD_STEP
        xm[k] -= FD_STEP
        fp = fidelity(problem, PulseGrid.from_dimensionless(xp, problem.total_time))
        fm = fidelity(problem, PulseGrid.from_dimensionless(xm, problem.total_time))
        out[k] = (fp - fm) / (2.0 * FD_STEP)
    return out


def gradient_exact(problem: GrapeProblem, grid: PulseGrid) -> Tuple[float, np.ndarray]:
    """
    Φ y ∂Φ/∂(Ω·T) por descomposición espectral de cada Ĥ_kΔt
    (derivada de Fréchet de la exponencial con diferencias divididas).
    """
    gens = problem.segment_generators(grid)
    n = len(gens)
    eig = [sla.eigh(0.5 * (h + dagger(h))) for h in gens]
    props = [(v * np.exp(-1j * lam)) @ dagger(v) for lam, v in eig]

    # prefijos R_k = U_{k−1}…U_1 y sufijos L_k = U_N…U_{k+1}
    d = problem.joint_dim
    right = [np.eye(d, dtype=complex)]
    for uk in props[:-1]:
        right.append(uk @ right[-1])
    left = [np.eye(d, dtype=complex)] * n
    acc = np.eye(d, dtype=complex)
    for k in range(n - 1, -1, -1):
        left[k] = acc
        acc = acc @ props[k]
    u_total = acc
    tau = np.trace(dagger(problem.target) @ u_total)
    phi = float(abs(tau)) / d

    # ∂(Ĥ_kΔt)/∂(Ω·T) = q̂/N (o p̂/N)
    dq = problem.q_op / n
    dp = problem.p_op / n
    grad_q = np.zeros(n)
    grad_p = np.zeros(n)
    phase = np.conj(tau) / (abs(tau) * d) if abs(tau) > 0 else 0.0
    for k, (lam, v) in enumerate(eig):
        w = right[k] @ dagger(problem.target) @ left[k]
        g = exp_divided_differences(-1j * lam)
        c = (dagger(v) @ w @ v) * g.T
        y = v @ c @ dagger(v)
        grad_q[k] = float(np.real(phase * np.sum(y.T * (-1j * dq))))
        grad_p[k] = float(np.real(phase * np.sum(y.T * (-1j * dp))))
    return phi, np.concatenate([grad_q, grad_p])


def reachable_fidelity_bound(problem: GrapeProblem, target: Optional[ComplexMatrix] = None) -> float:
    """
    Con controles sólo sobre el oscilador Û(T) es diagonal por bloques en la ancilla,
    así que Φ ≤ Σ_a ‖T_aa‖_*/D.
    """
    t = problem.target if target is None else target
    blocks = t.reshape(problem.osc_dim, ANCILLA_DIM, problem.osc_dim, ANCILLA_DIM)
    total = sum(np.linalg.norm(blocks[:, a, :, a], "nuc") for a in range(ANCILLA_DIM))
    return float(total) / problem.joint_dim


# -----------------------------
# Optimización
# -----------------------------

@dataclass
class GrapeResult:
    grid: PulseGrid
    fidelity: float
    history: List[float]
    iterations: int
    stalled: bool
    bound: float

    def as_dict(self) -> Dict[str, object]:
        return {
            "fidelity": self.fidelity,
            "iterations": self.iterations,
            "stalled": self.stalled,
            "reachable_bound": self.bound,
            "omega_q": self.grid.omega_q.tolist(),
            "omega_p": self.grid.omega_p.tolist(),
            **FRAME_METADATA,
        }


def _bounded(x: np.ndarray, scale: Optional[float]) -> Tuple[np.ndarray, np.ndarray]:
    """x → scale·tanh(x/scale) y su derivada; sin cota es la identidad."""
    if scale is None:
        return x, np.ones_like(x)
    th = np.tanh(x / scale)
    return scale * th, 1.0 - th * th


def grape_optimize(problem: GrapeProblem, settings: GrapeSettings, seed: int = 0,
                   init: Optional[PulseGrid] = None) -> GrapeResult:
    """
    Maximiza Φ con Adam sobre las variables adimensionales Ω·T.
    Se detiene si la mejora es < 1e-10 en 50 iteraciones (`stalled`).
    """
    rng = np.random.default_rng(seed)
    x0 = (init.dimensionless(problem.total_time) if init is not None
          else rng.normal(0.0, settings.init_scale, size=2 * problem.segments))
    scale = problem.amplitude_bound * problem.total_time if problem.amplitude_bound else None

    def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
        u, du = _bounded(x, scale)
        grid = PulseGrid.from_dimensionless(u, problem.total_time)
        if settings.gradient == "exact":
            phi, g = gradient_exact(problem, grid)
        else:
            phi, g = fidelity(problem, grid), gradient_fd(problem, grid)
        return 1.0 - phi, -g * du

    bound = reachable_fidelity_bound(problem)
    log.info(
        f"GRAPE: {problem.segments} tramos, Tχ={problem.total_time:g}, D={problem.joint_dim}, "
        f"cota alcanzable Φ ≤ [metric]{bound:.4f}[/metric]"
    )
    adam = AdamConfig(
        learning_rate=settings.learning_rate, max_iters=settings.iters,
        target_loss=1e-8, log_every=max(1, settings.iters // 10),
    )
    res = minimize(objective, x0, adam, label="GRAPE", stall_window=50)
    u, _ = _bounded(res.params, scale)
    grid = PulseGrid.from_dimensionless(u, problem.total_time)
    history = [1.0 - v for v in res.history]
    return GrapeResult(grid, 1.0 - res.loss, history, res.iterations, res.stalled, bound)


# -----------------------------
# Objetivos
# -----------------------------

def recovery_target(osc_dim: int, n: int, r: float, branch: Branch, noise: NoiseParams) -> ComplexMatrix:
    """Û₃Û₂Û₁ (ancilla de tres niveles) para el código construido en dimensión reducida."""
    space = FockSpace(osc_dim, tail_tol=GRAPE_TAIL_TOL)
    pair = build_code(space, n, r, branch)
    tk = transform_kraus(pair, noise)
    uni = build_qutrit_unitaries(pair, error_bases(pair, tk))
    return uni.total()


def displacement_target(osc_dim: int, beta: complex) -> ComplexMatrix:
    """D(β)⊗Î con el mismo generador truncado que usan los controles."""
    a = np.diag(np.sqrt(np.arange(1, osc_dim, dtype=float)), k=1).astype(complex)
    d = mat_exp(beta * dagger(a) - np.conj(beta) * a)
    return np.kron(d, np.eye(ANCILLA_DIM, dtype=complex))
