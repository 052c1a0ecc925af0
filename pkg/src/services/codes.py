from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Dict, Literal, Optional, Tuple

import numpy as np

from src.numerics.linalg import ComplexMatrix, StateVector, projector
from src.services.fock import (
    FockSpace, SqueezeParams, check_tail, displace_state, ladder_ops,
    overlap_analytic, squeezed_fock_state,
)
from src.utils.errors import ContractError, DegeneracyError, InfeasibleError
from src.utils.log import setup_logger

log = setup_logger("CODES")

Branch = Literal["plus", "minus"]
Family = Literal["ours", "sqfock", "sqcat"]

ORTHOGONAL_FAMILIES = ("ours", "sqcat")
CAT_NORM_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class SqueezeFrame:
    """
    Cada palabra código es S(r_u)·ψ_u con ψ_u soportado en pocos niveles de Fock.
    Permite evaluar elementos de matriz sin truncamiento (ver kl).
    """
    r0: float
    r1: float
    psi0: np.ndarray
    psi1: np.ndarray


@dataclass(frozen=True)
class CatParams:
    beta: float
    r: float

    @property
    def overlap_closed_form(self) -> float:
        """⟨−β,r|β,r⟩ = exp(−2e^{2r}β²)."""
        return math.exp(-2.0 * math.exp(2.0 * self.r) * self.beta ** 2)

    def norms(self) -> Tuple[float, float]:
        o = self.overlap_closed_form
        return math.sqrt(2.0 * (1.0 + o)), math.sqrt(max(0.0, 2.0 * (1.0 - o)))


@dataclass(frozen=True, eq=False)
class CodePair:
    zero: StateVector
    one: StateVector
    space: FockSpace
    n: int
    r: float
    family: Family
    alpha: float = 0.0
    branch: Optional[Branch] = None
    sign: int = 1
    overlap: complex = 0.0
    frame: Optional[SqueezeFrame] = None
    cat: Optional[CatParams] = None

    @property
    def dim(self) -> int:
        return int(self.zero.shape[0])

    @property
    def beta_coef(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.alpha ** 2))

    @property
    def is_orthogonal(self) -> bool:
        return self.family in ORTHOGONAL_FAMILIES

    @property
    def parity(self) -> int:
        """Paridad de Fock de |0_L⟩ (0 par, 1 impar)."""
        return int(self.n % 2) if self.family != "sqcat" else 0

    def codewords(self) -> Tuple[StateVector, StateVector]:
        return self.zero, self.one

    def describe(self) -> Dict[str, object]:
        return {
            "family": self.family,
            "n": self.n,
            "r": self.r,
            "dim": self.dim,
            "alpha": self.alpha,
            "branch": self.branch,
            "sign": self.sign,
            "overlap": abs(self.overlap),
            "beta": self.cat.beta if self.cat else None,
        }


# -----------------------------
# Coeficiente α
# -----------------------------

def _default_space(r: float, n: int) -> FockSpace:
    return FockSpace.for_squeezing(r, n_max=n)


def g_coefficients(space: FockSpace, n: int, r: float) -> Tuple[float, float, float, float]:
    """
    g_ab = ⟨a|S(−2r)|b⟩ como producto ⟨S(r)a|S(−r)b⟩ de los estados numéricos;
    se contrasta con la fórmula cerrada.
    """
    plus = {k: squeezed_fock_state(space, k, SqueezeParams(r)) for k in (n, n + 2)}
    minus = {k: squeezed_fock_state(space, k, SqueezeParams(-r)) for k in (n, n + 2)}
    g1 = float(np.real(np.vdot(plus[n + 2], minus[n + 2])))
    g2 = float(np.real(np.vdot(plus[n + 2], minus[n])))
    g3 = float(np.real(np.vdot(plus[n], minus[n + 2])))
    g4 = float(np.real(np.vdot(plus[n], minus[n])))
    ref = SqueezeParams(-2.0 * r)
    closed = (
        overlap_analytic(n + 2, n + 2, ref), overlap_analytic(n + 2, n, ref),
        overlap_analytic(n, n + 2, ref), overlap_analytic(n, n, ref),
    )
    dev = max(abs(x - y) for x, y in zip((g1, g2, g3, g4), closed))
    if dev > 1e-8:
        log.warning(f"g numéricos vs fórmula cerrada difieren en {dev:.2e} (n={n}, r={r:.4f})")
    return g1, g2, g3, g4


def quadratic_roots(g: Tuple[float, float, float, float]) -> Tuple[float, float]:
    """Raíces (mayor, menor) de g₁t² + (g₂−g₃)t − g₄ = 0."""
    g1, g2, g3, g4 = g
    b = g2 - g3
    if abs(g1) < 1e-300:
        raise InfeasibleError("coeficiente cuadrático nulo", {"g1": g1})
    disc = b * b + 4.0 * g1 * g4
    if disc < 0:
        raise InfeasibleError("discriminante negativo para α", {"discriminant": disc})
    sq = math.sqrt(disc)
    # forma estable frente a cancelación
    q = -0.5 * (b + math.copysign(sq, b if b != 0 else 1.0))
    t1 = q / g1
    t2 = -g4 / q if q != 0 else -t1
    return max(t1, t2), min(t1, t2)


def _root(space: FockSpace, n: int, r: float, branch: Branch) -> float:
    if r < 0:
        raise ContractError(f"r debe ser ≥ 0 (llegó {r})")
    hi, lo = quadratic_roots(g_coefficients(space, n, r))
    t = hi if branch == "plus" else lo
    alpha = abs(t) / math.sqrt(1.0 + t * t)
    if not (0.0 < alpha < 1.0):
        raise InfeasibleError("α fuera de (0,1)", {"alpha": alpha, "t": t})
    return t


def solve_alpha(n: int, r: float, branch: Branch = "plus", space: Optional[FockSpace] = None) -> float:
    """α ∈ (0,1) que anula ⟨0_L|1_L⟩ en la rama pedida."""
    space = space or _default_space(r, n)
    t = _root(space, n, r, branch)
    return abs(t) / math.sqrt(1.0 + t * t)


# -----------------------------
# Familias de códigos
# -----------------------------

def _embed(space: FockSpace, psi: np.ndarray, r: float) -> StateVector:
    out = np.zeros(space.dim, dtype=complex)
    for k, c in enumerate(psi):
        if c != 0:
            out += c * squeezed_fock_state(space, k, SqueezeParams(r))
    return out


def build_code(space: FockSpace, n: int, r: float, branch: Branch = "plus") -> CodePair:
    """
    |0_L⟩ = S(r)(α|n+2⟩ − σβ|n⟩), |1_L⟩ = S(−r)(α|n+2⟩ + σβ|n⟩), σ = signo de t = α/β.
    """
    if n + 2 >= space.dim / 2:
        raise ContractError(f"n+2={n + 2} demasiado cerca del corte (dim={space.dim})")
    t = _root(space, n, r, branch)
    sigma = 1 if t >= 0 else -1
    alpha = abs(t) / math.sqrt(1.0 + t * t)
    beta = 1.0 / math.sqrt(1.0 + t * t)

    psi0 = np.zeros(n + 3)
    psi1 = np.zeros(n + 3)
    psi0[n + 2], psi0[n] = alpha, -sigma * beta
    psi1[n + 2], psi1[n] = alpha, sigma * beta

    zero = _embed(space, psi0, r)
    one = _embed(space, psi1, -r)
    zero /= np.linalg.norm(zero)
    one /= np.linalg.norm(one)
    ov = complex(np.vdot(zero, one))
    if abs(ov) > 1e-10:
        raise ContractError("palabras código no ortogonales", {"overlap": abs(ov), "r": r, "n": n})
    log.debug(f"Código n={n}, r={r:.4f}, rama={branch}: α={alpha:.10f}, |⟨0|1⟩|={abs(ov):.1e}")
    return CodePair(
        zero=zero, one=one, space=space, n=n, r=float(r), family="ours",
        alpha=alpha, branch=branch, sign=sigma, overlap=ov,
        frame=SqueezeFrame(float(r), float(-r), psi0, psi1),
    )


def build_squeezed_fock_code(space: FockSpace, n: int, r: float) -> CodePair:
    """|0_L⟩ = S(r)|n⟩, |1_L⟩ = S(−r)|n⟩; el solapamiento se guarda, no se fuerza."""
    zero = squeezed_fock_state(space, n, SqueezeParams(r))
    one = squeezed_fock_state(space, n, SqueezeParams(-r))
    ov = complex(np.vdot(one, zero))
    psi = np.zeros(n + 1)
    psi[n] = 1.0
    return CodePair(
        zero=zero, one=one, space=space, n=n, r=float(r), family="sqfock",
        alpha=1.0, overlap=ov, frame=SqueezeFrame(float(r), float(-r), psi, psi.copy()),
    )


def squeezed_coherent_state(space: FockSpace, beta: complex, r: float) -> StateVector:
    """|β,r⟩ = D(β)S(r)|0⟩."""
    vac = squeezed_fock_state(space, 0, SqueezeParams(r))
    out = displace_state(space, beta, vac)
    check_tail(space, out, f"|β={beta}, r={r:.4f}⟩")
    return out


def build_squeezed_cat_code(space: FockSpace, p: CatParams) -> CodePair:
    """|0_L/1_L⟩ = (|β,r⟩ ± |−β,r⟩)/N_±."""
    n_plus, n_minus = p.norms()
    if n_minus <= CAT_NORM_FLOOR:
        raise DegeneracyError("gato impar degenerado", {"N_minus": n_minus, "beta": p.beta, "r": p.r})
    plus = squeezed_coherent_state(space, p.beta, p.r)
    minus = squeezed_coherent_state(space, -p.beta, p.r)
    ov = complex(np.vdot(minus, plus))
    expected = p.overlap_closed_form
    if abs(ov - expected) > 1e-8:
        raise ContractError(
            "convención de orden D·S inconsistente",
            {"numeric": abs(ov), "closed_form": expected},
        )
    zero = (plus + minus) / n_plus
    one = (plus - minus) / n_minus
    zero /= np.linalg.norm(zero)
    one /= np.linalg.norm(one)
    return CodePair(
        zero=zero, one=one, space=space, n=0, r=float(p.r), family="sqcat",
        overlap=complex(np.vdot(zero, one)), cat=p,
    )


# -----------------------------
# Términos δ del gato comprimido
# -----------------------------

@dataclass(frozen=True)
class CatDeltas:
    """δ_X = ⟨1_L|X|0_L⟩."""
    a_dag: float
    a: float
    a_dag_n: float
    n_a: float
    a_dag_n2: float
    n2_a: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "a_dag": self.a_dag, "a": self.a,
            "a_dag_n": self.a_dag_n, "n_a": self.n_a,
            "a_dag_n2": self.a_dag_n2, "n2_a": self.n2_a,
        }

    def sum_squares(self) -> float:
        return float(sum(v * v for v in self.as_dict().values()))


def cat_delta_analytic(p: CatParams) -> CatDeltas:
    """
    Formas cerradas; el signo superior corresponde a Â ∈ {â, n̂â, n̂²â} y el
    inferior a Â†. En el término de n̂² el sumando 8(5β²−3)β lleva e^{−2r}.
    """
    b, r = float(p.beta), float(p.r)
    o = p.overlap_closed_form
    den = math.sqrt(1.0 - o * o)
    if den <= CAT_NORM_FLOOR:
        raise DegeneracyError("gato impar degenerado", {"beta": b, "r": r})
    e = lambda k: math.exp(k * r)  # noqa: E731

    def first(s: int) -> float:
        return b * (1.0 - s * e(2) * o) / den

    def second(s: int) -> float:
        diag = 3 * b * e(-2) + b * e(2) + 4 * b * (b * b - 1)
        cross = b * o * (4 * e(6) * b * b - 1 + 4 * e(2) - 3 * e(4))
        return (diag + s * cross) / (4.0 * den)

    def third(s: int) -> float:
        diag = (
            15 * b * e(-4) + 3 * b * e(4) + 8 * (b * b - 1) * b * e(2)
            + 8 * (5 * b * b - 3) * b * e(-2) + 2 * (8 * b ** 4 - 16 * b * b + 7) * b
        )
        cross = b * o * (
            -16 * e(10) * b ** 4 + 40 * e(8) * b * b + 8 * e(4) * (b * b + 3)
            - e(6) * (32 * b * b + 15) - 3 * e(-2) + 8 - 14 * e(2)
        )
        return (diag + s * cross) / (16.0 * den)

    return CatDeltas(
        a_dag=first(-1), a=first(+1),
        a_dag_n=second(-1), n_a=second(+1),
        a_dag_n2=third(-1), n2_a=third(+1),
    )


def cat_delta_numeric(pair: CodePair) -> CatDeltas:
    """Los mismos seis elementos evaluados sobre las palabras código construidas."""
    if pair.family != "sqcat":
        raise ContractError("cat_delta_numeric requiere un código gato")
    a, a_dag, n = ladder_ops(pair.space)
    z, o = pair.zero, pair.one

    def el(op: ComplexMatrix) -> float:
        return float(np.real(np.vdot(o, op @ z)))

    return CatDeltas(
        a_dag=el(a_dag), a=el(a),
        a_dag_n=el(a_dag @ n), n_a=el(n @ a),
        a_dag_n2=el(a_dag @ n @ n), n2_a=el(n @ n @ a),
    )


# -----------------------------
# Operadores lógicos
# -----------------------------

def logical_x(space: FockSpace) -> ComplexMatrix:
    """X̂_L = exp(−iπn̂/2) = diag((−i)^k)."""
    cycle = np.array([1.0, -1j, -1.0, 1j])
    return np.diag(cycle[np.arange(space.dim) % 4])


def code_projector(pair: CodePair) -> ComplexMatrix:
    if not pair.is_orthogonal:
        raise ContractError(
            f"familia {pair.family} no ortogonal: ortogonalizar antes de proyectar",
            {"overlap": abs(pair.overlap)},
        )
    return projector(pair.zero, pair.one)
