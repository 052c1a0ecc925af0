from __future__ import annotations
from typing import Annotated, Any, Dict, List, Literal, Optional, Type

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator

from src.services.fock import db_to_r

# Subcomandos con archivo de configuración propio
RunType = Literal[
    "kl-scan", "code-info", "cat-delta", "qec-sim", "optimize-z",
    "grape-run", "wigner", "validate", "series-scan", "compare-codes",
]
# forma corta aceptada en la CLI y en los JSON
SCHEME_ALIASES = {"auto": "autonomous", "measurement": "parity"}


def _scheme_alias(v: Any) -> Any:
    if isinstance(v, str):
        return SCHEME_ALIASES.get(v.strip().lower(), v)
    return v


Scheme = Annotated[Literal["autonomous", "parity"], BeforeValidator(_scheme_alias)]
Ancilla = Literal["qutrit", "two-qubit"]
FidelityConvention = Literal["six-state", "haar"]
Gradient = Literal["fd", "exact"]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", str_strip_whitespace=True)


# -----------------------------
# Parámetros físicos
# -----------------------------

class NoiseParams(_Frozen):
    """κ (pérdida), κ_φ (desfase) y el paso corto τ del desarrollo de Kraus."""
    kappa: float = Field(default=1.0, ge=0)
    kappa_phi: float = Field(default=1.0 / 8.5, ge=0)
    tau: float = Field(default=0.01, ge=0)

    @classmethod
    def from_ratio(cls, kappa: float, ratio: float, tau: float) -> "NoiseParams":
        if ratio <= 0:
            raise ValueError(f"κ/κ_φ debe ser > 0 (llegó {ratio})")
        return cls(kappa=kappa, kappa_phi=kappa / ratio, tau=tau)

    def smallness(self, mean_n: float, mean_n2: float) -> Dict[str, float]:
        """Parámetros que deben ser ≪ 1 para que el desarrollo a tiempo corto valga."""
        return {
            "kappa_tau_n": self.kappa * self.tau * mean_n,
            "kappa_phi_tau_n2": self.kappa_phi * self.tau * mean_n2,
        }


class QECCycleConfig(_Frozen):
    kappa: float = Field(default=1.0, gt=0)
    kappa_phi: float = Field(default=1.0 / 8.5, ge=0)
    tau_w: float = 0.01
    cycles: int = 20
    scheme: Scheme = "autonomous"
    ancilla: Ancilla = "qutrit"
    fidelity_convention: FidelityConvention = "six-state"

    @field_validator("tau_w")
    @classmethod
    def _tau_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("tau_w debe ser > 0")
        return v

    @field_validator("cycles")
    @classmethod
    def _cycles_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("cycles debe ser ≥ 1")
        return v

    @property
    def ratio(self) -> float:
        return self.kappa / self.kappa_phi if self.kappa_phi > 0 else float("inf")

    def design_noise(self) -> NoiseParams:
        """Ruido nominal con el que se diseña la recuperación (fijo durante la corrida)."""
        return NoiseParams(kappa=self.kappa, kappa_phi=self.kappa_phi, tau=self.tau_w)


class AdamConfig(_Frozen):
    learning_rate: float = Field(default=5e-3, gt=0)
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = Field(default=1e-8, gt=0)
    max_iters: int = Field(default=20000, ge=0)
    target_loss: float = Field(default=1e-4, ge=0)
    log_every: int = Field(default=1000, ge=1)

    @field_validator("beta1", "beta2")
    @classmethod
    def _beta_range(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("beta1/beta2 deben estar en (0, 1)")
        return v


class GrapeSettings(_Frozen):
    chi_e: float = 1.0
    chi_f: float = 1.0
    segments: int = Field(default=10, ge=1)
    total_time: float = Field(default=1e-4, gt=0)
    osc_dim: int = Field(default=40, ge=4)
    iters: int = Field(default=2000, ge=0)
    learning_rate: float = Field(default=0.05, gt=0)
    amplitude_bound: Optional[float] = Field(default=None, gt=0)
    gradient: Gradient = "exact"
    init_scale: float = Field(default=0.01, ge=0)


# -----------------------------
# Configuraciones de corrida
# -----------------------------

class RunConfig(_Frozen):
    type: RunType
    seed: int = 0
    out: str = "./out"
    threads: Optional[int] = Field(default=None, ge=1)


class _Squeezed(RunConfig):
    """Compresión en dB (como en la CLI) o r crudo; r tiene prioridad."""
    squeezing_db: float = 8.0
    r: Optional[float] = None

    @property
    def r_value(self) -> float:
        return float(self.r) if self.r is not None else db_to_r(self.squeezing_db)


class KLScanRunConfig(RunConfig):
    type: Literal["kl-scan"] = "kl-scan"
    ns: List[int] = Field(default_factory=lambda: [1, 2])
    r_min: float = 0.3
    r_max: float = 2.2
    steps: int = Field(default=20, ge=1)
    family: Literal["ours", "sqfock", "sqcat"] = "ours"
    branches: List[Literal["plus", "minus"]] = Field(default_factory=lambda: ["plus"])
    betas: List[float] = Field(default_factory=lambda: [0.9])
    error_set: Literal["combined", "loss", "dephasing"] = "combined"

    @model_validator(mode="after")
    def _range(self) -> "KLScanRunConfig":
        if self.r_max < self.r_min:
            raise ValueError("r_max < r_min")
        return self

    def grid(self) -> List[float]:
        if self.steps == 1:
            return [self.r_min]
        h = (self.r_max - self.r_min) / (self.steps - 1)
        return [self.r_min + k * h for k in range(self.steps)]


class CodeInfoRunConfig(_Squeezed):
    type: Literal["code-info"] = "code-info"
    n: int = Field(default=1, ge=0)
    branch: Literal["plus", "minus"] = "plus"
    family: Literal["ours", "sqfock", "sqcat"] = "ours"
    beta: float = 0.9


class CatDeltaRunConfig(RunConfig):
    type: Literal["cat-delta"] = "cat-delta"
    betas: List[float] = Field(default_factory=lambda: [0.6, 0.9, 1.2])
    r_min: float = 0.0
    r_max: float = 1.5
    steps: int = Field(default=16, ge=1)
    numeric: bool = True

    def grid(self) -> List[float]:
        if self.steps == 1:
            return [self.r_min]
        h = (self.r_max - self.r_min) / (self.steps - 1)
        return [self.r_min + k * h for k in range(self.steps)]


class QECSimRunConfig(_Squeezed):
    type: Literal["qec-sim"] = "qec-sim"
    n: int = 1
    branch: Literal["plus", "minus"] = "plus"
    kappa_ratio: float = Field(default=8.5, gt=0)
    tau_w: List[float] = Field(default_factory=lambda: [0.01])
    cycles: int = Field(default=20, ge=1)
    scheme: Scheme = "autonomous"
    ancilla: Ancilla = "qutrit"
    fidelity: FidelityConvention = "six-state"
    noise: Literal["lindblad", "kraus", "none"] = "lindblad"

    def cycle_config(self, tau_w: float) -> QECCycleConfig:
        return QECCycleConfig(
            kappa=1.0, kappa_phi=1.0 / self.kappa_ratio, tau_w=tau_w, cycles=self.cycles,
            scheme=self.scheme, ancilla=self.ancilla, fidelity_convention=self.fidelity,
        )


class OptimizeZRunConfig(_Squeezed):
    type: Literal["optimize-z"] = "optimize-z"
    n: int = 1
    branch: Literal["plus", "minus"] = "plus"
    ansatz: Literal["nonhermitian5", "hermitian"] = "nonhermitian5"
    order: int = Field(default=6, ge=1)
    gradient: Gradient = "fd"
    adam: AdamConfig = Field(default_factory=AdamConfig)


class GrapeRunConfig(_Squeezed):
    type: Literal["grape-run"] = "grape-run"
    n: int = 1
    branch: Literal["plus", "minus"] = "plus"
    target: Literal["recovery", "displacement"] = "displacement"
    displacement: float = 0.5
    grape: GrapeSettings = Field(default_factory=GrapeSettings)


class WignerRunConfig(_Squeezed):
    type: Literal["wigner"] = "wigner"
    n: int = 1
    branch: Literal["plus", "minus"] = "plus"
    family: Literal["ours", "sqfock", "sqcat"] = "ours"
    beta: float = 0.9
    extent: float = Field(default=5.0, gt=0)
    points: int = Field(default=101, ge=2)


class ValidateRunConfig(RunConfig):
    type: Literal["validate"] = "validate"
    quick: bool = False


class SeriesScanRunConfig(RunConfig):
    type: Literal["series-scan"] = "series-scan"
    r_min: float = 1.0
    r_max: float = 2.5
    steps: int = Field(default=7, ge=1)
    branch: Literal["plus", "minus"] = "plus"

    def grid(self) -> List[float]:
        if self.steps == 1:
            return [self.r_min]
        h = (self.r_max - self.r_min) / (self.steps - 1)
        return [self.r_min + k * h for k in range(self.steps)]


class CompareCodesRunConfig(_Squeezed):
    type: Literal["compare-codes"] = "compare-codes"
    n: int = 1
    beta: float = 0.9


_REGISTRY: Dict[str, Type[RunConfig]] = {
    "kl-scan": KLScanRunConfig,
    "code-info": CodeInfoRunConfig,
    "cat-delta": CatDeltaRunConfig,
    "qec-sim": QECSimRunConfig,
    "optimize-z": OptimizeZRunConfig,
    "grape-run": GrapeRunConfig,
    "wigner": WignerRunConfig,
    "validate": ValidateRunConfig,
    "series-scan": SeriesScanRunConfig,
    "compare-codes": CompareCodesRunConfig,
}


class RunConfigFactory:
    @staticmethod
    def model_for(run_type: str) -> Type[RunConfig]:
        t = (run_type or "").lower()
        if t not in _REGISTRY:
            raise ValueError(f"config inválido: tipo desconocido '{run_type}'")
        return _REGISTRY[t]

    @staticmethod
    def parse_obj(obj: Dict[str, Any]) -> RunConfig:
        """
        Recibe el sobre {"type": ..., "config": {...}} y devuelve el modelo adecuado.
        Lanza ValidationError si la configuración no cumple.
        """
        if not isinstance(obj, dict) or "config" not in obj or not isinstance(obj["config"], dict):
            raise ValueError("config inválido: falta {type:'<subcomando>', config:{...}}")
        model = RunConfigFactory.model_for(obj.get("type", ""))
        data = dict(obj["config"])
        data["type"] = obj["type"].lower()
        return model.model_validate(data)

    @staticmethod
    def resolve(run_type: str, file_obj: Optional[Dict[str, Any]], overrides: Dict[str, Any],
                env: Optional[Dict[str, Any]] = None) -> RunConfig:
        """defaults < entorno < archivo < flags (los valores en None no pisan nada)."""
        data: Dict[str, Any] = {k: v for k, v in (env or {}).items() if v is not None}
        if file_obj is not None:
            parsed = RunConfigFactory.parse_obj(file_obj)
            if parsed.type != run_type:
                raise ValueError(f"config inválido: el archivo es de tipo '{parsed.type}', se esperaba '{run_type}'")
            data.update(parsed.model_dump(exclude_unset=True))
        for k, v in overrides.items():
            if v is None:
                continue
            if isinstance(v, dict) and isinstance(data.get(k), dict):
                data[k] = {**data[k], **v}
            else:
                data[k] = v
        data["type"] = run_type
        return RunConfigFactory.model_for(run_type).model_validate(data)
