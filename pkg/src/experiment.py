from __future__ import annotations
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv

from src.protocol.schema import (
    CatDeltaRunConfig, CodeInfoRunConfig, CompareCodesRunConfig, GrapeRunConfig, KLScanRunConfig,
    NoiseParams, OptimizeZRunConfig, QECSimRunConfig, RunConfig, RunConfigFactory, SeriesScanRunConfig,
    ValidateRunConfig, WignerRunConfig,
)
from src.services.codes import CatParams, CodePair, cat_delta_analytic, cat_delta_numeric
from src.services.fock import DEFAULT_SIZING_FACTOR, DEFAULT_TAIL_TOL, mean_photon_number, wigner_grid
from src.services.grape import (
    GrapeProblem, GrapeResult, displacement_target, grape_optimize, recovery_target,
)
from src.services.kl import (
    CompareRow, ErrorSet, ScanRow, SeriesRow, build_pair, compare_codes, k_er, ker_scan, kl_tensor,
    series_scan,
)
from src.services.qec_cycle import TABLE_HEADER, fidelity_timeseries
from src.services.validation import CheckResult, run_validation
from src.services.zl_synthesis import fixture_loss, optimize_zl
from src.storage.persistance import dump_json, load_json, write_csv, write_manifest
from src.utils.ids import generate_run_id
from src.utils.log import set_global_level, setup_logger

CAT_DELTA_KEYS = ("a_dag", "a", "a_dag_n", "n_a", "a_dag_n2", "n2_a")


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"config inválido: {name}={raw!r} no es un número")


class Experiment:
    """
    Carga el entorno (.env), resuelve la configuración de cada subcomando y
    escribe los artefactos (CSV/JSON + manifiesto) en el directorio de salida.
    """

    def __init__(self, env_path: Optional[str] = None) -> None:
        if env_path:
            if not Path(env_path).exists():
                raise FileNotFoundError(f"No existe el archivo: {env_path}")
            load_dotenv(env_path, override=True)
        else:
            load_dotenv()

        # ── Env ──────────────────────────────────────────────────────────────
        threads = os.getenv("QEC_THREADS", "")
        self.threads: Optional[int] = int(threads) if threads.strip() else None
        self.output_dir = os.getenv("QEC_OUTPUT_DIR", "./out")
        self.log_level = os.getenv("LOG_LEVEL", "INFO")
        self.tail_tol = _env_float("QEC_TAIL_TOL", DEFAULT_TAIL_TOL)
        self.sizing_factor = _env_float("QEC_SIZING_FACTOR", DEFAULT_SIZING_FACTOR)

        # ── Logger ───────────────────────────────────────────────────────────
        self.log = setup_logger("CLI", self.log_level)
        set_global_level(self.log_level)

    # ─────────────────────────────────────────────────────────────────────────

    def resolve(self, run_type: str, config_path: Optional[str], overrides: Dict[str, Any]) -> RunConfig:
        """defaults < entorno < archivo --config < flags."""
        file_obj = load_json(config_path) if config_path else None
        env = {"threads": self.threads, "out": self.output_dir}
        cfg = RunConfigFactory.resolve(run_type, file_obj, overrides, env=env)
        self.log.debug(f"Configuración resuelta para {run_type}: {cfg.model_dump()}")
        return cfg

    def _pair(self, family: str, n: int, r: float, branch: str = "plus", beta: float = 0.9) -> CodePair:
        return build_pair(family, n, r, branch, beta, self.sizing_factor, self.tail_tol)

    def _finish(self, cfg: RunConfig, outputs: List[Path], extra: Optional[Dict[str, Any]] = None) -> Path:
        run_id = generate_run_id(cfg.type)
        manifest = Path(cfg.out) / f"{cfg.type.replace('-', '_')}_manifest.json"
        params = cfg.model_dump()
        params["env"] = {"tail_tol": self.tail_tol, "sizing_factor": self.sizing_factor}
        write_manifest(str(manifest), cfg.type, params, [str(o) for o in outputs], cfg.seed, run_id, extra)
        for o in outputs + [manifest]:
            self.log.info(f"Escrito [code]{o}[/code]")
        return manifest

    # ── Subcomandos ──────────────────────────────────────────────────────────

    def kl_scan(self, cfg: KLScanRunConfig) -> List[ScanRow]:
        rows = ker_scan(
            cfg.ns, cfg.grid(), family=cfg.family, errors=ErrorSet.named(cfg.error_set),
            branches=cfg.branches, betas=cfg.betas, threads=cfg.threads,
            factor=self.sizing_factor, tail_tol=self.tail_tol,
        )
        path = write_csv(str(Path(cfg.out) / "kl_scan.csv"), ScanRow.HEADER, [r.as_tuple() for r in rows])
        self._finish(cfg, [path])
        return rows

    def code_info(self, cfg: CodeInfoRunConfig) -> Dict[str, Any]:
        pair = self._pair(cfg.family, cfg.n, cfg.r_value, cfg.branch, cfg.beta)
        rep = k_er(kl_tensor(pair, ErrorSet.combined()))
        info = dict(pair.describe())
        info.update({
            "squeezing_db": cfg.squeezing_db if cfg.r is None else None,
            "K_er": rep.k_er,
            "K_er_diag": rep.diag_part,
            "K_er_offdiag": rep.offdiag_part,
            "mean_n_zero": mean_photon_number(pair.zero),
            "mean_n_one": mean_photon_number(pair.one),
        })
        path = dump_json(str(Path(cfg.out) / "code_info.json"), info)
        self._finish(cfg, [path])
        return info

    def cat_delta(self, cfg: CatDeltaRunConfig) -> List[Tuple]:
        header = ["beta", "r", *(f"{k}_analytic" for k in CAT_DELTA_KEYS)]
        if cfg.numeric:
            header += [f"{k}_numeric" for k in CAT_DELTA_KEYS]
        header += ["sum_squares"]
        rows: List[Tuple] = []
        for beta in cfg.betas:
            for r in cfg.grid():
                ana = cat_delta_analytic(CatParams(beta=beta, r=r))
                row = [beta, r, *(ana.as_dict()[k] for k in CAT_DELTA_KEYS)]
                if cfg.numeric:
                    num = cat_delta_numeric(self._pair("sqcat", 0, r, beta=beta)).as_dict()
                    row += [num[k] for k in CAT_DELTA_KEYS]
                row.append(ana.sum_squares())
                rows.append(tuple(row))
        path = write_csv(str(Path(cfg.out) / "cat_delta.csv"), header, rows)
        self._finish(cfg, [path])
        return rows

    def qec_sim(self, cfg: QECSimRunConfig) -> List[Tuple]:
        pair = self._pair("ours", cfg.n, cfg.r_value, cfg.branch)
        rows: List[Tuple] = []
        for tau in cfg.tau_w:
            series = fidelity_timeseries(cfg.cycle_config(tau), pair, cfg.noise)
            rows += [(cfg.scheme, tau, k, *row.as_tuple()) for k, row in enumerate(series)]
        header = ("scheme", "tau_w", "cycle", *TABLE_HEADER)
        path = write_csv(str(Path(cfg.out) / "qec_sim.csv"), header, rows)
        self._finish(cfg, [path], {"dim": pair.dim, "alpha": pair.alpha})
        return rows

    def optimize_z(self, cfg: OptimizeZRunConfig) -> Dict[str, Any]:
        pair = self._pair("ours", cfg.n, cfg.r_value, cfg.branch)
        ansatz, result = optimize_zl(pair, cfg.ansatz, cfg.adam, cfg.seed, cfg.order, cfg.gradient)
        data = {
            **ansatz.as_dict(),
            "loss": result.loss,
            "iterations": result.iterations,
            "converged": result.converged,
            "fixture_loss": fixture_loss(pair),
        }
        hist = write_csv(
            str(Path(cfg.out) / "zl_history.csv"), ("iteration", "loss"), list(enumerate(result.history)),
        )
        coeffs = dump_json(str(Path(cfg.out) / "zl_coeffs.json"), data)
        self._finish(cfg, [hist, coeffs])
        return data

    def grape_run(self, cfg: GrapeRunConfig) -> GrapeResult:
        s = cfg.grape
        if cfg.target == "recovery":
            target = recovery_target(s.osc_dim, cfg.n, cfg.r_value, cfg.branch, NoiseParams())
        else:
            target = displacement_target(s.osc_dim, cfg.displacement)
        problem = GrapeProblem.from_settings(s, target)
        result = grape_optimize(problem, s, cfg.seed)
        pulses = write_csv(
            str(Path(cfg.out) / "grape_pulses.csv"), ("segment", "omega_q", "omega_p"),
            [(k, q, p) for k, (q, p) in enumerate(zip(result.grid.omega_q, result.grid.omega_p))],
        )
        hist = write_csv(
            str(Path(cfg.out) / "grape_history.csv"), ("iteration", "fidelity"), list(enumerate(result.history)),
        )
        summary = dump_json(str(Path(cfg.out) / "grape_result.json"), result.as_dict())
        self._finish(cfg, [pulses, hist, summary])
        return result

    def wigner(self, cfg: WignerRunConfig) -> np.ndarray:
        pair = self._pair(cfg.family, cfg.n, cfg.r_value, cfg.branch, cfg.beta)
        xs = np.linspace(-cfg.extent, cfg.extent, cfg.points)
        rows: List[Tuple] = []
        grids = []
        for label, state in (("0", pair.zero), ("1", pair.one)):
            w = wigner_grid(state, xs, xs)
            grids.append(w)
            rows += [(label, x, p, w[i, j]) for i, x in enumerate(xs) for j, p in enumerate(xs)]
        path = write_csv(str(Path(cfg.out) / "wigner.csv"), ("codeword", "x", "p", "W"), rows)
        self._finish(cfg, [path])
        return np.stack(grids)

    def validate(self, cfg: ValidateRunConfig) -> List[CheckResult]:
        results = run_validation(cfg.quick, cfg.threads)
        path = write_csv(str(Path(cfg.out) / "validation.csv"), CheckResult.HEADER, [r.as_tuple() for r in results])
        self._finish(cfg, [path], {
            "passed": all(r.passed for r in results),
            "seconds": {r.name: round(r.seconds, 3) for r in results},
        })
        return results

    def series_scan(self, cfg: SeriesScanRunConfig) -> List[SeriesRow]:
        rows = series_scan(cfg.grid(), cfg.branch, cfg.threads)
        header = (
            "r", "branch", *(f"numeric_m{m}" for m in range(1, 5)), *(f"series_m{m}" for m in range(1, 5)),
            "K_er_numeric", "K_er_series",
        )
        table = [(s.r, s.branch, *s.numeric, *s.series, s.k_er_numeric, s.k_er_series) for s in rows]
        path = write_csv(str(Path(cfg.out) / "series_scan.csv"), header, table)
        self._finish(cfg, [path])
        return rows

    def compare_codes(self, cfg: CompareCodesRunConfig) -> List[CompareRow]:
        rows = compare_codes(cfg.r_value, cfg.n, cfg.beta)
        table = [(c.family, c.error_set, c.orthogonal, c.overlap, c.k_er) for c in rows]
        path = write_csv(str(Path(cfg.out) / "compare_codes.csv"), CompareRow.HEADER, table)
        self._finish(cfg, [path])
        return rows


def parse_floats(values: Optional[Sequence[str]]) -> Optional[List[float]]:
    """Acepta flags repetidos o listas separadas por coma ("0.01,0.005")."""
    if not values:
        return None
    out: List[float] = []
    for v in values:
        out += [float(x) for x in str(v).split(",") if x.strip()]
    return out
