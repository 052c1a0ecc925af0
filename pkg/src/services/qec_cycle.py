from __future__ import annotations
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np

from src.numerics.linalg import ComplexMatrix, StateVector, dagger, partial_trace_second
from src.numerics.lindblad import LossDephasingPropagator
from src.protocol.schema import QECCycleConfig
from src.services.channel import TransformedKraus, apply_channel, design_channel, transform_kraus
from src.services.codes import CodePair
from src.services.fock import FockSpace
from src.services.recovery import RecoveryUnitaries, build_recovery, error_bases
from src.utils.errors import ContractError, DimensionError, IntegrityError
from src.utils.log import setup_logger

log = setup_logger("QEC")

NoiseModel = Literal["lindblad", "kraus", "none"]
OscillatorMap = Callable[[ComplexMatrix], ComplexMatrix]

TRACE_DRIFT_TOL = 1e-6
BASELINE_DIM = 8
TABLE_HEADER = (
    "time", "corrected", "uncorrected", "baseline",
    "corrected_haar", "uncorrected_haar", "baseline_haar",
)


# -----------------------------
# Ruido sobre el oscilador
# -----------------------------

def lindblad_noise(dim: int, cfg: QECCycleConfig, t: Optional[float] = None) -> OscillatorMap:
    prop = LossDephasingPropagator.build(dim, cfg.kappa, cfg.kappa_phi, cfg.tau_w if t is None else t)
    return prop.apply


def kraus_noise(pair: CodePair, tk: TransformedKraus) -> OscillatorMap:
    """Ruido igual al modelo de diseño: el canal {F̂ᵢ} de tiempo corto, con traza 1 en el código."""
    ops = design_channel(pair, tk)
    return lambda rho: apply_channel(ops, rho, hermitian=False)


def _identity(rho: ComplexMatrix) -> ComplexMatrix:
    return rho.copy()


def _on_blocks(noise: OscillatorMap, rho_joint: ComplexMatrix, dim_osc: int, dim_anc: int) -> ComplexMatrix:
    """Aplica un mapa del oscilador a cada bloque de ancilla ⟨a|ρ|b⟩."""
    blocks = rho_joint.reshape(dim_osc, dim_anc, dim_osc, dim_anc)
    out = np.empty_like(blocks)
    for a in range(dim_anc):
        for b in range(dim_anc):
            out[:, a, :, b] = noise(np.ascontiguousarray(blocks[:, a, :, b]))
    return out.reshape(rho_joint.shape)


def _check_joint(rho_joint: ComplexMatrix, uni: RecoveryUnitaries) -> None:
    if rho_joint.shape != (uni.joint_dim, uni.joint_dim):
        raise DimensionError(f"rho conjunto {rho_joint.shape} vs {uni.joint_dim}")
    g = uni.anc.index(uni.anc.level("g"))
    blocks = rho_joint.reshape(uni.dim_osc, uni.anc.dim, uni.dim_osc, uni.anc.dim)
    excited = float(np.real(np.trace(rho_joint)) - np.real(np.trace(blocks[:, g, :, g])))
    if abs(excited) > 1e-10:
        raise ContractError("la ancilla no empieza en |g⟩", {"excited_population": excited})


def _reset(rho_joint: ComplexMatrix, uni: RecoveryUnitaries) -> ComplexMatrix:
    """R: traza sobre la ancilla y reemplazo por |g⟩⟨g|."""
    osc = partial_trace_second(rho_joint, uni.dim_osc, uni.anc.dim)
    return np.kron(osc, uni.anc.ground_projector())


def _drift(before: complex, after: complex, what: str) -> None:
    d = abs(after - before)
    if d > TRACE_DRIFT_TOL:
        raise IntegrityError(f"deriva de traza en {what}", {"drift": float(d)})


def _noisy(rho_joint: ComplexMatrix, uni: RecoveryUnitaries, cfg: QECCycleConfig,
           noise: Optional[OscillatorMap]) -> ComplexMatrix:
    """Sin mapa explícito se usa la ecuación maestra exacta y se vigila la traza."""
    if noise is not None:
        return _on_blocks(noise, rho_joint, uni.dim_osc, uni.anc.dim)
    out = _on_blocks(lindblad_noise(uni.dim_osc, cfg), rho_joint, uni.dim_osc, uni.anc.dim)
    _drift(np.trace(rho_joint), np.trace(out), "evolución de Lindblad")
    return out


def autonomous_cycle(rho_joint: ComplexMatrix, uni: RecoveryUnitaries, cfg: QECCycleConfig,
                     noise: Optional[OscillatorMap] = None) -> ComplexMatrix:
    """
    Un ciclo autónomo: ruido durante τ_w sobre el oscilador, Û = Û₃Û₂Û₁ y
    reinicio ideal de la ancilla.
    """
    _check_joint(rho_joint, uni)
    noisy = _noisy(rho_joint, uni, cfg, noise)
    tr1 = np.trace(noisy)
    u = uni.total()
    out = _reset(u @ noisy @ dagger(u), uni)
    _drift(tr1, np.trace(out), "recuperación autónoma")
    return 0.5 * (out + dagger(out))


def measurement_cycle(rho_joint: ComplexMatrix, uni: RecoveryUnitaries, cfg: QECCycleConfig,
                      noise: Optional[OscillatorMap] = None) -> ComplexMatrix:
    """
    Ciclo con medición de paridad. Rama de paridad invertida: Û_a. Rama del código:
    Û₂Û₁, medición de la ancilla y la compuerta Û_e/Û_f que devuelve el resultado a |g⟩.
    """
    _check_joint(rho_joint, uni)
    noisy = _noisy(rho_joint, uni, cfg, noise)
    tr1 = np.trace(noisy)
    pi_code, pi_flip = uni.parity_projectors()
    eye_a = np.eye(uni.anc.dim)

    flip = np.kron(uni.ua @ pi_flip, eye_a)
    out = flip @ noisy @ dagger(flip)

    u21 = uni.u2 @ uni.u1 @ np.kron(pi_code, eye_a)
    kept = u21 @ noisy @ dagger(u21)
    for label in uni.anc.labels:
        meas = np.kron(np.eye(uni.dim_osc), uni.anc.op(label, label))
        gate = np.kron(np.eye(uni.dim_osc), uni.reset_gate(label))
        branch = gate @ meas
        out = out + branch @ kept @ dagger(branch)
    _drift(tr1, np.trace(out), "recuperación por paridad")
    return 0.5 * (out + dagger(out))


# -----------------------------
# Forma reducida: operadores de Kraus en el oscilador
# -----------------------------

def recovery_kraus(uni: RecoveryUnitaries, scheme: str = "autonomous") -> List[ComplexMatrix]:
    """
    Con la ancilla en |g⟩ y reinicio ideal, la recuperación es el canal del oscilador
    con Kraus K_a = ⟨a|Û|g⟩. En el esquema de paridad se suma la rama Û_a·Π.
    """
    d, na = uni.dim_osc, uni.anc.dim
    g = uni.anc.index(uni.anc.level("g"))
    if scheme == "autonomous":
        u = uni.total().reshape(d, na, d, na)
        return [np.ascontiguousarray(u[:, a, :, g]) for a in range(na)]
    if scheme == "parity":
        pi_code, pi_flip = uni.parity_projectors()
        u = (uni.u2 @ uni.u1).reshape(d, na, d, na)
        ops = [uni.ua @ pi_flip]
        ops += [np.ascontiguousarray(u[:, a, :, g]) @ pi_code for a in range(na)]
        return ops
    raise ValueError(f"esquema desconocido: {scheme}")


@dataclass(eq=False)
class QECSimulator:
    """
    Recuperación fija diseñada con (κ, κ_φ, τ_w) nominales; el ruido real puede ser
    la ecuación maestra exacta, el propio canal de diseño o nada.
    """
    pair: CodePair
    cfg: QECCycleConfig
    noise_model: NoiseModel = "lindblad"
    tk: TransformedKraus = field(init=False)
    uni: RecoveryUnitaries = field(init=False)
    kraus: List[ComplexMatrix] = field(init=False)
    noise: OscillatorMap = field(init=False)

    def __post_init__(self) -> None:
        self.tk = transform_kraus(self.pair, self.cfg.design_noise())
        bases = error_bases(self.pair, self.tk)
        self.uni = build_recovery(self.pair, bases, self.cfg.ancilla)
        self.kraus = recovery_kraus(self.uni, self.cfg.scheme)
        if self.noise_model == "lindblad":
            self.noise = lindblad_noise(self.pair.dim, self.cfg)
        elif self.noise_model == "kraus":
            self.noise = kraus_noise(self.pair, self.tk)
        elif self.noise_model == "none":
            self.noise = _identity
        else:
            raise ValueError(f"modelo de ruido desconocido: {self.noise_model}")

    def recover(self, rho: ComplexMatrix) -> ComplexMatrix:
        return apply_channel(self.kraus, rho, hermitian=False)

    def cycle(self, rho: ComplexMatrix) -> ComplexMatrix:
        """Ruido + recuperación sobre el oscilador (forma reducida)."""
        return self.recover(self.noise(rho))

    def idle(self, rho: ComplexMatrix) -> ComplexMatrix:
        return self.noise(rho)

    def joint_cycle(self, rho_joint: ComplexMatrix) -> ComplexMatrix:
        """Mismo ciclo con el estado conjunto explícito (más lento)."""
        fn = autonomous_cycle if self.cfg.scheme == "autonomous" else measurement_cycle
        return fn(rho_joint, self.uni, self.cfg, self.noise)

    def embed(self, rho: ComplexMatrix) -> ComplexMatrix:
        return np.kron(rho, self.uni.anc.ground_projector())


# -----------------------------
# Fidelidades
# -----------------------------

def logical_transfer_tensor(basis: Tuple[StateVector, StateVector], step: OscillatorMap,
                            cycles: int) -> np.ndarray:
    """
    T[c, k, l, i, j] = ⟨k_L|E^c(|i_L⟩⟨j_L|)|l_L⟩ para c = 0..cycles.
    """
    b = np.column_stack(basis)
    out = np.zeros((cycles + 1, 2, 2, 2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            rho = np.outer(basis[i], basis[j].conj())
            for c in range(cycles + 1):
                if c:
                    rho = step(rho)
                out[c, :, :, i, j] = dagger(b) @ rho @ b
    return out


def _cardinal_states() -> List[np.ndarray]:
    s = 1.0 / np.sqrt(2.0)
    return [
        np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex),
        np.array([s, s], dtype=complex), np.array([s, -s], dtype=complex),
        np.array([s, 1j * s], dtype=complex), np.array([s, -1j * s], dtype=complex),
    ]


def state_fidelity(t: np.ndarray, c: np.ndarray, normalize: bool = False) -> float:
    """⟨ψ|E(|ψ⟩⟨ψ|)|ψ⟩ con |ψ⟩ = Σ c_i|i_L⟩ a partir de T[k, l, i, j]."""
    rho_in = np.outer(c, c.conj())
    rho_out = np.einsum("klij,ij->kl", t, rho_in)
    f = float(np.real(np.vdot(c, rho_out @ c)))
    if normalize:
        tr = float(np.real(np.trace(rho_out)))
        f = f / tr if tr > 0 else 0.0
    return f


def six_state_fidelity(t: np.ndarray) -> float:
    return float(np.mean([state_fidelity(t, c) for c in _cardinal_states()]))


def entanglement_fidelity(t: np.ndarray) -> float:
    """F_e = ¼ Σ_ij T[i, j, i, j]."""
    return float(np.real(np.einsum("ijij->", t))) / 4.0


def haar_fidelity(t: np.ndarray) -> float:
    return (2.0 * entanglement_fidelity(t) + 1.0) / 3.0


@dataclass(frozen=True)
class FidelityRow:
    time: float
    corrected: float
    uncorrected: float
    baseline: float
    corrected_haar: float
    uncorrected_haar: float
    baseline_haar: float

    def as_tuple(self) -> Tuple[float, ...]:
        return tuple(getattr(self, k) for k in TABLE_HEADER)


def fidelity_timeseries(cfg: QECCycleConfig, pair: CodePair,
                        noise_model: NoiseModel = "lindblad") -> List[FidelityRow]:
    """
    Fidelidad media por ciclo: corregida, sin corregir y el cúbit de Fock {|0⟩, |1⟩}
    bajo el mismo ruido. Las tres primeras columnas siguen la convención configurada;
    las `_haar` siempre se reportan.
    """
    sim = QECSimulator(pair, cfg, noise_model)
    basis = pair.codewords()
    corrected = logical_transfer_tensor(basis, sim.cycle, cfg.cycles)
    uncorrected = logical_transfer_tensor(basis, sim.idle, cfg.cycles)

    fock = FockSpace(BASELINE_DIM)
    fock_basis = (np.eye(BASELINE_DIM, dtype=complex)[0], np.eye(BASELINE_DIM, dtype=complex)[1])
    if noise_model == "none":
        base_step: OscillatorMap = _identity
    else:
        base_step = lindblad_noise(fock.dim, cfg)
    baseline = logical_transfer_tensor(fock_basis, base_step, cfg.cycles)

    main = six_state_fidelity if cfg.fidelity_convention == "six-state" else haar_fidelity
    rows: List[FidelityRow] = []
    for c in range(cfg.cycles + 1):
        rows.append(FidelityRow(
            time=c * cfg.tau_w,
            corrected=main(corrected[c]),
            uncorrected=main(uncorrected[c]),
            baseline=main(baseline[c]),
            corrected_haar=haar_fidelity(corrected[c]),
            uncorrected_haar=haar_fidelity(uncorrected[c]),
            baseline_haar=haar_fidelity(baseline[c]),
        ))
    last = rows[-1]
    log.info(
        f"τ_w={cfg.tau_w:g}, {cfg.cycles} ciclos ({cfg.scheme}, {cfg.ancilla}): "
        f"corregida [ok]{last.corrected:.6f}[/ok], sin corregir {last.uncorrected:.6f}, "
        f"Fock {last.baseline:.6f}"
    )
    return rows


def cycle_infidelity(pair: CodePair, cfg: QECCycleConfig, corrected: bool = True,
                     noise_model: NoiseModel = "lindblad") -> float:
    """1 − F de un solo ciclo (seis estados), usado para medir el orden en τ_w."""
    sim = QECSimulator(pair, cfg.model_copy(update={"cycles": 1}), noise_model)
    step = sim.cycle if corrected else sim.idle
    t = logical_transfer_tensor(pair.codewords(), step, 1)[1]
    return 1.0 - six_state_fidelity(t)


def richardson_ratio(pair: CodePair, cfg: QECCycleConfig, corrected: bool = True) -> float:
    """Cociente de infidelidades por ciclo al pasar de τ_w a τ_w/2 (≈4 cuadrático, ≈2 lineal)."""
    full = cycle_infidelity(pair, cfg, corrected)
    half = cycle_infidelity(pair, cfg.model_copy(update={"tau_w": cfg.tau_w / 2.0}), corrected)
    if half <= 0:
        raise IntegrityError("infidelidad no positiva", {"full": full, "half": half})
    return full / half


# -----------------------------
# Punto de equilibrio frente al cúbit de Fock
# -----------------------------

def double_loss_probability(pair: CodePair, cfg: QECCycleConfig) -> float:
    """
    (κτ_w)²⟨n̂(n̂−1)⟩/2 promediado sobre las palabras código: probabilidad por ciclo
    de dos pérdidas, que ninguna recuperación de una sola pérdida corrige.
    """
    n = np.arange(pair.dim, dtype=float)
    falling = np.mean([float(np.real(np.vdot(u, n * (n - 1.0) * u))) for u in pair.codewords()])
    return 0.5 * (cfg.kappa * cfg.tau_w) ** 2 * falling


@dataclass(frozen=True)
class BreakEvenReport:
    """Margen corregida − Fock por ciclo (c = 1..cycles) y el piso de doble pérdida."""
    tau_w: float
    margins: Tuple[float, ...]
    double_loss: float
    baseline_infidelity: float

    @property
    def holds(self) -> bool:
        return bool(self.margins) and self.margins[-1] > 0.0

    @property
    def min_margin(self) -> float:
        return min(self.margins)

    @property
    def first_cycle_above(self) -> Optional[int]:
        """Primer ciclo desde el cual la corregida queda siempre sobre el cúbit de Fock."""
        first: Optional[int] = None
        for c, m in enumerate(self.margins, start=1):
            if m > 0.0:
                first = c if first is None else first
            else:
                first = None
        return first

    @property
    def floor_exceeds_baseline(self) -> bool:
        return self.double_loss > self.baseline_infidelity


def break_even_report(pair: CodePair, cfg: QECCycleConfig,
                      noise_model: NoiseModel = "lindblad") -> BreakEvenReport:
    rows = fidelity_timeseries(cfg, pair, noise_model)
    report = BreakEvenReport(
        tau_w=cfg.tau_w,
        margins=tuple(r.corrected - r.baseline for r in rows[1:]),
        double_loss=double_loss_probability(pair, cfg),
        baseline_infidelity=1.0 - rows[1].baseline,
    )
    if report.floor_exceeds_baseline:
        log.warning(
            f"κτ_w={cfg.tau_w:g}: doble pérdida {report.double_loss:.2e} por ciclo supera la "
            f"infidelidad del cúbit de Fock {report.baseline_infidelity:.2e}; no hay punto de equilibrio"
        )
    return report
