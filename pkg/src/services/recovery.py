from __future__ import annotations
from dataclasses import dataclass, field, replace
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from src.numerics.linalg import (
    ComplexMatrix, StateVector, dagger, ket, loewdin_orthonormalize, mat_exp,
    projector, unitarity_residual,
)
from src.services.channel import TransformedKraus
from src.services.codes import CodePair, code_projector
from src.utils.errors import ContractError, DegeneracyError
from src.utils.log import log_metrics, setup_logger

log = setup_logger("RECOVERY")

AncillaKind = Literal["qutrit", "two-qubit"]

IMAGE_FLOOR = 1e-12
ORTHO_TOL = 1e-12
UNITARY_TOL = 1e-8

# g, e, f del cúbit de tres niveles en la versión de dos cúbits
_QUTRIT_TO_PAIR = {"g": "g1g2", "e": "e1g2", "f": "g1e2"}


# -----------------------------
# Ancilla
# -----------------------------

@dataclass(frozen=True)
class AncillaSpace:
    kind: AncillaKind = "qutrit"

    @property
    def labels(self) -> Tuple[str, ...]:
        if self.kind == "qutrit":
            return ("g", "e", "f")
        # bit 0 = cúbit 1, bit 1 = cúbit 2
        return ("g1g2", "e1g2", "g1e2", "e1e2")

    @property
    def dim(self) -> int:
        return len(self.labels)

    def level(self, qutrit_label: str) -> str:
        """Nombre del nivel que hace de g/e/f en esta ancilla."""
        return qutrit_label if self.kind == "qutrit" else _QUTRIT_TO_PAIR[qutrit_label]

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def ket(self, label: str) -> StateVector:
        return ket(self.dim, self.index(label))

    def op(self, out_label: str, in_label: str) -> ComplexMatrix:
        """|out⟩⟨in| en el espacio de la ancilla."""
        m = np.zeros((self.dim, self.dim), dtype=complex)
        m[self.index(out_label), self.index(in_label)] = 1.0
        return m

    def ground_projector(self) -> ComplexMatrix:
        g = self.level("g")
        return self.op(g, g)


def _joint(osc: ComplexMatrix, anc: ComplexMatrix) -> ComplexMatrix:
    return np.kron(osc, anc)


# -----------------------------
# Bases de los espacios de error
# -----------------------------

@dataclass(frozen=True, eq=False)
class ErrorBases:
    """(|0_{F_i}⟩, |1_{F_i}⟩) por etiqueta, ortonormalizados por Löwdin."""
    labels: Tuple[str, ...]
    zero: Tuple[StateVector, ...]
    one: Tuple[StateVector, ...]
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def pair(self, label: str) -> Tuple[StateVector, StateVector]:
        k = self.labels.index(label)
        return self.zero[k], self.one[k]

    def projector(self, label: str) -> ComplexMatrix:
        return projector(*self.pair(label))


def error_bases(pair: CodePair, tk: TransformedKraus) -> ErrorBases:
    """
    |u_{F_i}⟩ = F̂ᵢ|u_L⟩/‖F̂ᵢ|u_L⟩‖; a F1 se le quita antes la componente en el
    espacio código para que Û₁ sea unitario exacto.
    """
    p_code = code_projector(pair)
    diag: Dict[str, float] = {}
    zeros: List[StateVector] = []
    ones: List[StateVector] = []
    for label, f in zip(tk.labels, tk.f_ops):
        images = [f @ pair.zero, f @ pair.one]
        norms = [float(np.linalg.norm(v)) for v in images]
        if min(norms) <= IMAGE_FLOOR:
            raise DegeneracyError(f"imagen nula para {label}", {"norm0": norms[0], "norm1": norms[1]})
        images = [v / nv for v, nv in zip(images, norms)]
        if label == "F1":
            inside = [p_code @ v for v in images]
            removed = max(float(np.linalg.norm(c)) for c in inside)
            diag["F1_code_component"] = removed
            log.info(f"Componente de F1 en el código proyectada fuera: [metric]{removed:.2e}[/metric]")
            images = [v - c for v, c in zip(images, inside)]
        diag[f"{label}_raw_overlap"] = float(abs(np.vdot(images[0], images[1])) / (
            np.linalg.norm(images[0]) * np.linalg.norm(images[1])))
        z, o = loewdin_orthonormalize(images)
        zeros.append(z)
        ones.append(o)

    bases = ErrorBases(labels=tuple(tk.labels), zero=tuple(zeros), one=tuple(ones), diagnostics=diag)

    # F3 tiene la paridad opuesta: ortogonal al código a precisión de máquina
    f3_leak = float(np.linalg.norm(p_code @ np.column_stack(bases.pair("F3"))))
    diag["F3_code_overlap"] = f3_leak
    if f3_leak > ORTHO_TOL:
        raise ContractError("la base F3 no es ortogonal al código", {"overlap": f3_leak})
    for i, a in enumerate(bases.labels):
        for b in bases.labels[i + 1:]:
            cross = np.column_stack(bases.pair(a)).conj().T @ np.column_stack(bases.pair(b))
            diag[f"cross_{a}{b}"] = float(np.max(np.abs(cross)))
    log_metrics(log, "Bases de error", diag)
    return bases


# -----------------------------
# Unitarios de recuperación
# -----------------------------

@dataclass(frozen=True, eq=False)
class RecoveryUnitaries:
    """
    u1, u2, u3 viven en oscilador⊗ancilla (orden kron(osc, anc)).
    ua y los proyectores de paridad actúan sólo en el oscilador; ue, uf sólo en la ancilla.
    """
    anc: AncillaSpace
    dim_osc: int
    u1: ComplexMatrix
    u2: ComplexMatrix
    u3: ComplexMatrix
    ua: Optional[ComplexMatrix] = None
    ue: Optional[ComplexMatrix] = None
    uf: Optional[ComplexMatrix] = None
    pi_even: Optional[ComplexMatrix] = None
    pi_odd: Optional[ComplexMatrix] = None
    code_parity: int = 1
    uen: Optional[ComplexMatrix] = None

    @property
    def joint_dim(self) -> int:
        return self.dim_osc * self.anc.dim

    def total(self) -> ComplexMatrix:
        """Û = Û₃Û₂Û₁."""
        return self.u3 @ self.u2 @ self.u1

    def parity_projectors(self) -> Tuple[ComplexMatrix, ComplexMatrix]:
        """(Π de la paridad del código, Π de la paridad opuesta)."""
        if self.pi_even is None or self.pi_odd is None:
            raise ContractError("esquema de paridad no construido")
        if self.code_parity == 1:
            return self.pi_odd, self.pi_even
        return self.pi_even, self.pi_odd

    def reset_gate(self, label: str) -> ComplexMatrix:
        """Unitario de ancilla que lleva el resultado medido `label` a |g⟩."""
        if self.ue is None or self.uf is None:
            raise ContractError("esquema de paridad no construido")
        eye = np.eye(self.anc.dim, dtype=complex)
        if self.anc.kind == "qutrit":
            return {"g": eye, "e": self.ue, "f": self.uf}[label]
        return {"g1g2": eye, "e1g2": self.ue, "g1e2": self.uf, "e1e2": self.ue @ self.uf}[label]

    def residuals(self) -> Dict[str, float]:
        out = {name: unitarity_residual(getattr(self, name)) for name in ("u1", "u2", "u3")}
        for name in ("ua", "ue", "uf", "uen"):
            m = getattr(self, name)
            if m is not None:
                out[name] = unitarity_residual(m)
        return out


def _correction_ops(pair: CodePair, bases: ErrorBases, label: str) -> Tuple[ComplexMatrix, ComplexMatrix]:
    """(L̂ᵢ, P̂_{F_i}) con L̂ᵢ = |0_L⟩⟨0_{F_i}| + |1_L⟩⟨1_{F_i}|."""
    z, o = bases.pair(label)
    lop = np.outer(pair.zero, z.conj()) + np.outer(pair.one, o.conj())
    return lop, bases.projector(label)


def _swap_operator(pair: CodePair, bases: ErrorBases) -> ComplexMatrix:
    """L̂₃ + L̂₃† + Î − P̂_L − P̂_{F₃}."""
    l3, p3 = _correction_ops(pair, bases, "F3")
    eye = np.eye(pair.dim, dtype=complex)
    return l3 + dagger(l3) + eye - code_projector(pair) - p3


def _check_unitaries(named: Dict[str, ComplexMatrix], bases: ErrorBases) -> None:
    for name, u in named.items():
        res = unitarity_residual(u)
        if res > UNITARY_TOL:
            raise ContractError(f"{name} no es unitario", {"residual": res, **bases.diagnostics})
        log.debug(f"{name}: residual de unitariedad {res:.1e}")


def _excite_block(pair: CodePair, bases: ErrorBases, label: str,
                  anc: AncillaSpace, ground: str, excited: str) -> ComplexMatrix:
    """
    L̂|x⟩⟨g| + L̂†|g⟩⟨x| + (Î−P̂_L)|x⟩⟨x| + (Î−P̂_F)|g⟩⟨g| para el par (g, x) dado.
    """
    lop, pf = _correction_ops(pair, bases, label)
    eye = np.eye(pair.dim, dtype=complex)
    p_code = code_projector(pair)
    return (
        _joint(lop, anc.op(excited, ground))
        + _joint(dagger(lop), anc.op(ground, excited))
        + _joint(eye - p_code, anc.op(excited, excited))
        + _joint(eye - pf, anc.op(ground, ground))
    )


def build_qutrit_unitaries(pair: CodePair, bases: ErrorBases, anc: Optional[AncillaSpace] = None) -> RecoveryUnitaries:
    anc = anc or AncillaSpace("qutrit")
    if anc.kind != "qutrit":
        raise ContractError(f"se esperaba ancilla de tres niveles, llegó {anc.kind}")
    eye = np.eye(pair.dim, dtype=complex)
    u1 = _excite_block(pair, bases, "F1", anc, "g", "e") + _joint(eye, anc.op("f", "f"))
    u2 = _excite_block(pair, bases, "F2", anc, "g", "f") + _joint(eye, anc.op("e", "e"))
    u3 = (
        _joint(_swap_operator(pair, bases), anc.op("g", "g"))
        + _joint(eye, anc.op("e", "e"))
        + _joint(eye, anc.op("f", "f"))
    )
    _check_unitaries({"U1": u1, "U2": u2, "U3": u3}, bases)
    return RecoveryUnitaries(anc=anc, dim_osc=pair.dim, u1=u1, u2=u2, u3=u3, code_parity=pair.parity)


def build_two_qubit_unitaries(pair: CodePair, bases: ErrorBases) -> RecoveryUnitaries:
    """
    Versión con dos cúbits. Û₁ actúa sobre el cúbit 1 cuando el cúbit 2 está en g₂,
    Û₂ sobre el cúbit 2 cuando el cúbit 1 está en g₁; Û₃ deja |g₁g₂⟩ marcado en |e₁g₂⟩.
    """
    anc = AncillaSpace("two-qubit")
    eye = np.eye(pair.dim, dtype=complex)
    u1 = (
        _excite_block(pair, bases, "F1", anc, "g1g2", "e1g2")
        + _joint(eye, anc.op("g1e2", "g1e2"))
        + _joint(eye, anc.op("e1e2", "e1e2"))
    )
    u2 = (
        _excite_block(pair, bases, "F2", anc, "g1g2", "g1e2")
        + _joint(eye, anc.op("e1g2", "e1g2"))
        + _joint(eye, anc.op("e1e2", "e1e2"))
    )
    u3 = (
        _joint(_swap_operator(pair, bases), anc.op("e1g2", "g1g2"))
        + _joint(eye, anc.op("e1e2", "e1e2"))
        + _joint(eye, anc.op("g1e2", "g1e2"))
        + _joint(eye, anc.op("g1g2", "e1g2"))
    )
    _check_unitaries({"U1": u1, "U2": u2, "U3": u3}, bases)
    return RecoveryUnitaries(anc=anc, dim_osc=pair.dim, u1=u1, u2=u2, u3=u3, code_parity=pair.parity)


def parity_projectors(dim: int) -> Tuple[ComplexMatrix, ComplexMatrix]:
    """(Π_par, Π_impar) de (−1)^n̂."""
    even = (np.arange(dim) % 2 == 0).astype(complex)
    return np.diag(even), np.diag(1.0 - even)


def _ancilla_swaps(anc: AncillaSpace) -> Tuple[ComplexMatrix, ComplexMatrix]:
    if anc.kind == "qutrit":
        ue = anc.op("e", "g") + anc.op("g", "e") + anc.op("f", "f")
        uf = anc.op("f", "g") + anc.op("g", "f") + anc.op("e", "e")
        return ue, uf
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    eye2 = np.eye(2, dtype=complex)
    # índice = bit(cúbit 1) + 2·bit(cúbit 2): el cúbit 1 es el factor derecho
    return np.kron(eye2, sx), np.kron(sx, eye2)


def build_parity_scheme(pair: CodePair, bases: ErrorBases,
                        anc: Optional[AncillaSpace] = None,
                        base: Optional[RecoveryUnitaries] = None) -> RecoveryUnitaries:
    """
    Û_a = L̂₃ + L̂₃† + Î − P̂_L − P̂_{F₃} (sólo oscilador), Û_e/Û_f sobre la ancilla
    y los proyectores de paridad. Si se pasa `base` se completa ese conjunto.
    """
    anc = anc or (base.anc if base is not None else AncillaSpace("qutrit"))
    ua = _swap_operator(pair, bases)
    ue, uf = _ancilla_swaps(anc)
    pi_even, pi_odd = parity_projectors(pair.dim)
    _check_unitaries({"U_a": ua, "U_e": ue, "U_f": uf}, bases)
    if base is None:
        base = (build_qutrit_unitaries(pair, bases, anc) if anc.kind == "qutrit"
                else build_two_qubit_unitaries(pair, bases))
    return replace(base, ua=ua, ue=ue, uf=uf, pi_even=pi_even, pi_odd=pi_odd, code_parity=pair.parity)


def build_recovery(pair: CodePair, bases: ErrorBases, kind: AncillaKind = "qutrit") -> RecoveryUnitaries:
    """Conjunto completo (Û₁, Û₂, Û₃ y esquema de paridad) para la ancilla pedida."""
    anc = AncillaSpace(kind)
    base = (build_qutrit_unitaries(pair, bases, anc) if kind == "qutrit"
            else build_two_qubit_unitaries(pair, bases))
    uni = build_parity_scheme(pair, bases, anc, base)
    log.info(
        f"Recuperación ({kind}) lista: máx residual unitario "
        f"[metric]{max(uni.residuals().values()):.1e}[/metric]"
    )
    return uni


# -----------------------------
# Û_en: reinicio con reservorio
# -----------------------------

def _uen_generator(anc: AncillaSpace, reservoir_dim: int) -> ComplexMatrix:
    if reservoir_dim < 2:
        raise ContractError(f"reservoir_dim debe ser ≥ 2 (llegó {reservoir_dim})")
    g, e, f = anc.level("g"), anc.level("e"), anc.level("f")
    lower = anc.op(g, e) + anc.op(g, f)
    b = np.diag(np.sqrt(np.arange(1, reservoir_dim, dtype=float)), k=1).astype(complex)
    h = np.kron(lower, dagger(b))
    return h + dagger(h)


def build_uen(anc: AncillaSpace, coupling: float, t: float, reservoir_dim: int = 2) -> ComplexMatrix:
    """Û_en = exp{−iςt[(|g⟩⟨e| + |g⟩⟨f|)b̂† + h.c.]} sobre ancilla⊗reservorio."""
    h = _uen_generator(anc, reservoir_dim)
    return mat_exp(-1j * coupling * t * h)


def _ground_population(h: ComplexMatrix, psi0: StateVector, pg: ComplexMatrix, theta: float) -> float:
    psi = mat_exp(-1j * theta * h) @ psi0
    return float(np.real(np.vdot(psi, pg @ psi)))


def _ground_rate(h: ComplexMatrix, psi0: StateVector, pg: ComplexMatrix, theta: float) -> float:
    """dP_g/dθ = −2·Im⟨ψ|ĤΠ_g|ψ⟩."""
    psi = mat_exp(-1j * theta * h) @ psi0
    return float(-2.0 * np.imag(np.vdot(psi, h @ (pg @ psi))))


def uen_transfer_time(anc: AncillaSpace, coupling: float = 1.0, reservoir_dim: int = 2) -> float:
    """
    Tiempo t que maximiza la población de g partiendo de |e, 0_b⟩, con ς·t ∈ (0, π].
    Búsqueda acotada y refinamiento por raíz de la derivada.
    """
    if coupling <= 0:
        raise ContractError(f"acoplamiento debe ser > 0 (llegó {coupling})")
    h = _uen_generator(anc, reservoir_dim)
    psi0 = np.kron(anc.ket(anc.level("e")), ket(reservoir_dim, 0))
    pg = np.kron(anc.op(anc.level("g"), anc.level("g")), np.eye(reservoir_dim))

    coarse = minimize_scalar(
        lambda th: -_ground_population(h, psi0, pg, th), bounds=(1e-6, np.pi), method="bounded",
    )
    theta = float(coarse.x)
    lo, hi = max(1e-6, theta - 0.2), min(np.pi, theta + 0.2)
    rate = lambda th: _ground_rate(h, psi0, pg, th)  # noqa: E731
    if rate(lo) > 0 > rate(hi):
        theta = brentq(rate, lo, hi, xtol=1e-15)
    pop = _ground_population(h, psi0, pg, theta)
    log.info(f"Û_en: ς·t = {theta:.12f}, población máxima de g desde |e,0⟩ = {pop:.6f}")
    return theta / coupling
