from __future__ import annotations
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from src.numerics.linalg import ComplexMatrix
from src.services.codes import (
    Branch, CatParams, CodePair, Family, build_code, build_squeezed_cat_code,
    build_squeezed_fock_code,
)
from src.services.fock import (
    DEFAULT_SIZING_FACTOR, DEFAULT_TAIL_TOL, FockSpace, SqueezeParams,
    apply_annihilation, apply_creation, ladder_ops, overlap_matrix,
)
from src.utils.errors import DimensionError, QECError
from src.utils.log import setup_logger

log = setup_logger("KL")

TensorMethod = Literal["auto", "frame", "vector"]

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
SQRT6 = math.sqrt(6.0)


# -----------------------------
# Conjunto de errores
# -----------------------------

@dataclass(frozen=True)
class ErrorSet:
    """
    Operadores de error como palabras sobre {'a': â, 'A': â†}, leídas como
    producto de izquierda a derecha ("Aa" = â†â = n̂). La palabra vacía es Î.
    """
    labels: Tuple[str, ...]
    words: Tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.words):
            raise DimensionError("ErrorSet: labels y words de distinto largo")
        if not self.words or self.words[0] != "":
            raise ValueError("ErrorSet: el primer elemento debe ser la identidad")
        for w in self.words:
            if set(w) - {"a", "A"}:
                raise ValueError(f"ErrorSet: palabra inválida '{w}'")

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def combined(cls) -> "ErrorSet":
        return cls(("I", "a", "n", "n2"), ("", "a", "Aa", "AaAa"))

    @classmethod
    def loss(cls) -> "ErrorSet":
        return cls(("I", "a", "n"), ("", "a", "Aa"))

    @classmethod
    def dephasing(cls) -> "ErrorSet":
        return cls(("I", "n", "n2"), ("", "Aa", "AaAa"))

    @classmethod
    def identity_only(cls) -> "ErrorSet":
        return cls(("I",), ("",))

    @classmethod
    def named(cls, name: str) -> "ErrorSet":
        table = {"combined": cls.combined, "loss": cls.loss, "dephasing": cls.dephasing}
        if name not in table:
            raise ValueError(f"conjunto de errores desconocido: {name} (usa {sorted(table)})")
        return table[name]()

    @property
    def max_length(self) -> int:
        return max(len(w) for w in self.words)

    def operators(self, space: FockSpace) -> List[ComplexMatrix]:
        a, a_dag, _ = ladder_ops(space)
        letters = {"a": a, "A": a_dag}
        out = []
        for w in self.words:
            m = np.eye(space.dim, dtype=complex)
            for ch in w:
                m = m @ letters[ch]
            out.append(m)
        return out


def apply_word(word: str, vec: np.ndarray) -> np.ndarray:
    out = np.asarray(vec, dtype=complex)
    for ch in reversed(word):
        out = apply_annihilation(out) if ch == "a" else apply_creation(out)
    return out


def _apply_word_squeezed(word: str, r: float, vec: np.ndarray) -> np.ndarray:
    """S(r)†·W·S(r) aplicado a vec: â → c·â − s·â†, â† → c·â† − s·â."""
    c, s = math.cosh(r), math.sinh(r)
    out = np.asarray(vec, dtype=complex)
    for ch in reversed(word):
        lo, hi = apply_annihilation(out), apply_creation(out)
        out = c * lo - s * hi if ch == "a" else c * hi - s * lo
    return out


# -----------------------------
# Tensor KL y K_er
# -----------------------------

@dataclass(frozen=True, eq=False)
class KLTensor:
    """M^{μν}_{ij} = ⟨μ_L|Ê_i†Ê_j|ν_L⟩ para (μν) ∈ {00, 11, 01}."""
    m00: np.ndarray
    m11: np.ndarray
    m01: np.ndarray
    labels: Tuple[str, ...]
    method: str = "vector"

    def hermiticity_residual(self) -> float:
        return float(max(
            np.max(np.abs(self.m00 - self.m00.conj().T)),
            np.max(np.abs(self.m11 - self.m11.conj().T)),
        ))


@dataclass(frozen=True)
class KLReport:
    k_er: float
    diag_part: float
    offdiag_part: float
    per_term: Dict[Tuple[str, str], float] = field(default_factory=dict)


def _tensor_vector(pair: CodePair, errors: ErrorSet) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    imgs = {}
    for mu, cw in (("0", pair.zero), ("1", pair.one)):
        imgs[mu] = np.column_stack([apply_word(w, cw) for w in errors.words])
    m00 = imgs["0"].conj().T @ imgs["0"]
    m11 = imgs["1"].conj().T @ imgs["1"]
    m01 = imgs["0"].conj().T @ imgs["1"]
    return m00, m11, m01


def _tensor_frame(pair: CodePair, errors: ErrorSet) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """⟨E_iμ|E_jν⟩ = ⟨x_iμ|S(r_ν − r_μ)|y_jν⟩ con x, y en un espacio de Fock pequeño exacto."""
    fr = pair.frame
    size = max(len(fr.psi0), len(fr.psi1)) + errors.max_length + 1

    def images(psi: np.ndarray, r: float) -> np.ndarray:
        base = np.zeros(size, dtype=complex)
        base[: len(psi)] = psi
        return np.column_stack([_apply_word_squeezed(w, r, base) for w in errors.words])

    x0 = images(fr.psi0, fr.r0)
    x1 = images(fr.psi1, fr.r1)
    m00 = x0.conj().T @ x0
    m11 = x1.conj().T @ x1
    m01 = x0.conj().T @ overlap_matrix(size, SqueezeParams(fr.r1 - fr.r0)) @ x1

    # normalización respecto a las palabras código (ψ ya es unitario, S es unitario)
    n0 = float(np.real(np.vdot(fr.psi0, fr.psi0)))
    n1 = float(np.real(np.vdot(fr.psi1, fr.psi1)))
    return m00 / n0, m11 / n1, m01 / math.sqrt(n0 * n1)


def kl_tensor(pair: CodePair, errors: ErrorSet, method: TensorMethod = "auto") -> KLTensor:
    """
    Bloques M⁰⁰, M¹¹, M⁰¹. `frame` usa la representación S(r)·ψ de las palabras
    código (exacta, sin truncamiento); `vector` aplica los operadores al vector.
    """
    if method == "auto":
        method = "frame" if pair.frame is not None else "vector"
    if method == "frame":
        if pair.frame is None:
            raise ValueError("kl_tensor: el par no tiene representación comprimida")
        m00, m11, m01 = _tensor_frame(pair, errors)
    elif method == "vector":
        m00, m11, m01 = _tensor_vector(pair, errors)
    else:
        raise ValueError(f"método desconocido: {method}")
    return KLTensor(m00=m00, m11=m11, m01=m01, labels=errors.labels, method=method)


def k_er(t: KLTensor) -> KLReport:
    """K_er = Σ_ij |M⁰⁰_ij − M¹¹_ij|² + |M⁰¹_ij|², incluyendo el par (Î, Î)."""
    d = np.abs(t.m00 - t.m11) ** 2
    o = np.abs(t.m01) ** 2
    per_term = {
        (t.labels[i], t.labels[j]): float(d[i, j] + o[i, j])
        for i in range(len(t.labels)) for j in range(len(t.labels))
    }
    diag_part = float(np.sum(d))
    offdiag_part = float(np.sum(o))
    return KLReport(k_er=diag_part + offdiag_part, diag_part=diag_part, offdiag_part=offdiag_part, per_term=per_term)


def offdiag_moment(pair: CodePair, m: int, method: TensorMethod = "auto") -> float:
    """⟨1_L|n̂^m|0_L⟩ (real para las familias comprimidas)."""
    word = "Aa" * m
    ers = ErrorSet(("I", f"n{m}"), ("", word))
    t = kl_tensor(pair, ers, method=method)
    # ⟨0_L|Î†·n̂^m|1_L⟩ = conj(⟨1_L|n̂^m|0_L⟩)
    return float(np.real(np.conj(t.m01[0, 1])))


# -----------------------------
# Serie asintótica
# -----------------------------

def _series_coefficients(m: int, s: int) -> Tuple[float, float]:
    """(c7, c9) de c7·e^{−7r} + c9·e^{−9r}; s = +1 signo superior, −1 inferior."""
    if m == 1:
        return s * 32 * SQRT3 / 5, -64 * SQRT2 / 25
    if m == 2:
        return -(16 * SQRT2 / 5) * (5 + s * SQRT6), (32 * SQRT2 / 25) * (2 + s * 35 * SQRT6)
    if m == 3:
        return 24 * SQRT2 - s * 184 * SQRT3 / 5, -(16 * SQRT2 / 25) * (502 + s * 105 * SQRT6)
    if m == 4:
        return 8 * SQRT2 * (31 + s * 5 * SQRT6), 640 * SQRT2 - s * 6944 * SQRT3 / 5
    raise ValueError(f"m fuera de rango (1..4): {m}")


def offdiag_series(m: int, r: float, branch: Branch = "plus") -> float:
    """Serie de dos términos de ⟨1_L|n̂^m|0_L⟩ para n = 1."""
    s = 1 if branch == "plus" else -1
    c7, c9 = _series_coefficients(m, s)
    return c7 * math.exp(-7.0 * r) + c9 * math.exp(-9.0 * r)


def ker_series(r: float, branch: Branch = "plus") -> float:
    """K_er del conjunto {Î,â,n̂,n̂²} armado desde la serie (multiplicidades 3, 3, 2, 1)."""
    weights = {1: 3, 2: 3, 3: 2, 4: 1}
    return float(sum(w * offdiag_series(m, r, branch) ** 2 for m, w in weights.items()))


# -----------------------------
# Barridos
# -----------------------------

@dataclass(frozen=True)
class ScanRow:
    n: int
    r: float
    family: str
    branch: str
    beta: float
    dim: int
    k_er: float
    diag_part: float
    offdiag_part: float
    overlap: float
    error: str = ""

    HEADER = ("n", "r", "family", "branch", "beta", "dim", "K_er", "diag_part", "offdiag_part", "overlap", "error")

    def as_tuple(self) -> Tuple:
        return (
            self.n, self.r, self.family, self.branch, self.beta, self.dim,
            self.k_er, self.diag_part, self.offdiag_part, self.overlap, self.error,
        )


def build_pair(
    family: Family,
    n: int,
    r: float,
    branch: Branch = "plus",
    beta: float = 0.9,
    factor: float = DEFAULT_SIZING_FACTOR,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> CodePair:
    """Construye el par de la familia pedida con el tamaño de truncamiento automático."""
    if family == "sqcat":
        space = FockSpace.for_squeezing(r, n_max=max(1, round(beta * beta)), factor=factor, tail_tol=tail_tol)
        return build_squeezed_cat_code(space, CatParams(beta=beta, r=r))
    space = FockSpace.for_squeezing(r, n_max=n, factor=factor, tail_tol=tail_tol)
    if family == "sqfock":
        return build_squeezed_fock_code(space, n, r)
    if family == "ours":
        return build_code(space, n, r, branch)
    raise ValueError(f"familia desconocida: {family}")


def _scan_point(args) -> ScanRow:
    family, n, r, branch, beta, errors, factor, tail_tol = args
    br = branch if family == "ours" else "-"
    try:
        pair = build_pair(family, n, r, branch, beta, factor, tail_tol)
        rep = k_er(kl_tensor(pair, errors))
        return ScanRow(n, r, family, br, beta if family == "sqcat" else float("nan"), pair.dim,
                       rep.k_er, rep.diag_part, rep.offdiag_part, abs(pair.overlap))
    except QECError as e:
        log.warning(f"Punto (n={n}, r={r:.4f}, {family}) anotado con error: {e}")
        nan = float("nan")
        return ScanRow(n, r, family, br, beta, 0, nan, nan, nan, nan, error=str(e))


def ker_scan(
    ns: Sequence[int],
    rs: Sequence[float],
    family: Family = "ours",
    errors: Optional[ErrorSet] = None,
    branches: Sequence[Branch] = ("plus",),
    betas: Sequence[float] = (0.9,),
    threads: Optional[int] = None,
    factor: float = DEFAULT_SIZING_FACTOR,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> List[ScanRow]:
    """
    Una fila por (n, r) y rama (familia `ours`) o por (β, r) (familia `sqcat`).
    El orden de salida es el de la grilla, sin importar el orden de terminación.
    """
    rs = [float(r) for r in rs]
    if any(b < a for a, b in zip(rs, rs[1:])):
        raise ValueError("ker_scan: rs debe ser ascendente")
    errors = errors or ErrorSet.combined()
    if family == "ours":
        grid = [(family, n, r, b, 0.0) for n in ns for b in branches for r in rs]
    elif family == "sqfock":
        grid = [(family, n, r, "plus", 0.0) for n in ns for r in rs]
    else:
        grid = [(family, 0, r, "plus", beta) for beta in betas for r in rs]
    jobs = [(f, n, r, b, beta, errors, factor, tail_tol) for f, n, r, b, beta in grid]
    log.info(f"Barrido K_er: familia={family}, {len(jobs)} puntos")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_scan_point, jobs))


def fit_log_slope(rs: Sequence[float], values: Sequence[float]) -> float:
    """Pendiente de ln(values) contra r por mínimos cuadrados."""
    slope, _ = np.polyfit(np.asarray(rs, dtype=float), np.log(np.asarray(values, dtype=float)), 1)
    return float(slope)


@dataclass(frozen=True)
class SeriesRow:
    r: float
    branch: str
    numeric: Tuple[float, float, float, float]
    series: Tuple[float, float, float, float]
    k_er_numeric: float
    k_er_series: float


def series_scan(rs: Sequence[float], branch: Branch = "plus", threads: Optional[int] = None) -> List[SeriesRow]:
    """⟨1_L|n̂^m|0_L⟩ numérico vs serie (n = 1) y K_er de ambos lados."""
    def point(r: float) -> SeriesRow:
        pair = build_pair("ours", 1, r, branch)
        numeric = tuple(offdiag_moment(pair, m) for m in range(1, 5))
        series = tuple(offdiag_series(m, r, branch) for m in range(1, 5))
        return SeriesRow(
            r=r, branch=branch, numeric=numeric, series=series,
            k_er_numeric=k_er(kl_tensor(pair, ErrorSet.combined())).k_er,
            k_er_series=ker_series(r, branch),
        )

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(point, [float(r) for r in rs]))


@dataclass(frozen=True)
class CompareRow:
    family: str
    error_set: str
    orthogonal: bool
    overlap: float
    k_er: float

    HEADER = ("family", "error_set", "orthogonal", "overlap", "K_er")


def compare_codes(r: float, n: int = 1, beta: float = 0.9) -> List[CompareRow]:
    """Ortogonalidad y K_er de las tres familias bajo pérdida, desfase y ambos."""
    rows: List[CompareRow] = []
    for family in ("ours", "sqfock", "sqcat"):
        pair = build_pair(family, n, r, "plus", beta)
        for name in ("loss", "dephasing", "combined"):
            rep = k_er(kl_tensor(pair, ErrorSet.named(name)))
            rows.append(CompareRow(family, name, pair.is_orthogonal, abs(pair.overlap), rep.k_er))
    return rows
