from __future__ import annotations
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import click
import typer
from pydantic import ValidationError

from src.experiment import Experiment, parse_floats
from src.services.kl import ScanRow
from src.utils.errors import QECError
from src.utils.pretty import banner, error_panel, render_code_info, render_rows, render_validation

app = typer.Typer(add_completion=False, help="Códigos bosónicos comprimidos: KL, recuperación y control óptimo")

# ── Opciones comunes ─────────────────────────────────────────────────────────
CONFIG = typer.Option(None, "--config", help="Archivo JSON {type, config}")
ENV = typer.Option(None, "--env", help="Ruta a archivo .env")
OUT = typer.Option(None, "--out", help="Directorio de salida")
THREADS = typer.Option(None, "--threads", help="Hilos para los barridos")
SEED = typer.Option(None, "--seed", help="Semilla")
DB = typer.Option(None, "--db", "--squeezing-db", help="Compresión en dB")
R = typer.Option(None, "--r", help="Parámetro de compresión r (pisa --db)")


def _run(run_type: str, env: Optional[Path], config: Optional[Path], overrides: Dict[str, Any],
         action: Callable[[Experiment, Any], int]) -> None:
    """
    Resuelve la configuración y ejecuta. Errores de configuración → código 2,
    errores numéricos (QECError) → código 1.
    """
    try:
        exp = Experiment(str(env) if env else None)
        cfg = exp.resolve(run_type, str(config) if config else None, overrides)
    except (ValueError, ValidationError, FileNotFoundError) as e:
        error_panel("Configuración inválida", str(e))
        raise typer.Exit(code=2)

    banner(run_type, {"salida": str(cfg.out), "semilla": cfg.seed})
    try:
        code = action(exp, cfg)
    except QECError as e:
        error_panel(type(e).__name__, str(e.args[0]) if e.args else type(e).__name__, e.details)
        raise typer.Exit(code=1)
    if code:
        raise typer.Exit(code=code)


def _floats(values: Optional[List[str]]) -> Optional[List[float]]:
    try:
        return parse_floats(values)
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--tau-w")


def _common(out: Optional[Path], threads: Optional[int], seed: Optional[int], **kw: Any) -> Dict[str, Any]:
    data = {"out": str(out) if out else None, "threads": threads, "seed": seed}
    # typer entrega listas vacías cuando un flag repetible no se usa
    data.update({k: (None if isinstance(v, (list, tuple)) and not v else v) for k, v in kw.items()})
    return data


@app.command("kl-scan")
def kl_scan(
    ns: Optional[List[int]] = typer.Option(None, "--n", help="Índice n (repetible)"),
    r_min: Optional[float] = typer.Option(None, "--r-min"),
    r_max: Optional[float] = typer.Option(None, "--r-max"),
    steps: Optional[int] = typer.Option(None, "--steps"),
    family: Optional[str] = typer.Option(None, "--family", help="ours | sqfock | sqcat"),
    branch: Optional[List[str]] = typer.Option(None, "--branch", help="plus | minus (repetible)"),
    beta: Optional[List[float]] = typer.Option(None, "--beta", help="β del gato (repetible)"),
    error_set: Optional[str] = typer.Option(None, "--error-set", help="combined | loss | dephasing"),
    config: Optional[Path] = CONFIG, env: Optional[Path] = ENV, out: Optional[Path] = OUT,
    threads: Optional[int] = THREADS, seed: Optional[int] = SEED,
):
    """
    K_er sobre una grilla de r para cada n (y rama) o β.
    """
    def action(exp: Experiment, cfg) -> int:
        rows = exp.kl_scan(cfg)
        render_rows("K_er", ScanRow.HEADER, [r.as_tuple() for r in rows])
        return 0

    _run("kl-scan", env, config, _common(
        out, threads, seed, ns=ns, r_min=r_min, r_max=r_max, steps=steps, family=family,
        branches=branch, betas=beta, error_set=error_set,
    ), action)


@app.command("code-info")
def code_info(
    n: Optional[int] = typer.Option(None, "--n"),
    db: Optional[float] = DB, r: Optional[float] = R,
    branch: Optional[str] = typer.Option(None, "--branch"),
    family: Optional[str] = typer.Option(None, "--family"),
    beta: Optional[float] = typer.Option(None, "--beta"),
    config: Optional[Path] = CONFIG, env: Optional[Path] = ENV, out: Optional[Path] = OUT,
    threads: Optional[int] = THREADS, seed: Optional[int] = SEED,
):
    """
    Construye el par de palabras código y muestra α, dimensión, solapamiento y K_er.
    """
    def action(exp: Experiment, cfg) -> int:
        render_code_info(exp.code_info(cfg))
        return 0

    _run("code-info", env, config, _common(
        out, threads, seed, n=n, squeezing_db=db, r=r, branch=branch, family=family, beta=beta,
    ), action)


@app.command("cat-delta")
def cat_delta(
    beta: Optional[List[float]] = typer.Option(None, "--beta", help="β (repetible)"),
    r_min: Optional[float] = typer.Option(None, "--r-min"),
    r_max: Optional[float] = typer.Option(None, "--r-max"),
    steps: Optional[int] = typer.Option(None, "--steps"),
    numeric: Optional[bool] = typer.Option(None, "--numeric/--no-numeric", help="Comparar con elementos de matriz"),
    config: Optional[Path] = CONFIG, env: Optional[Path] = ENV, out: Optional[Path] = OUT,
    threads: Optional[int] = THREADS, seed: Optional[int] = SEED,
):
    """
    Los seis términos δ del gato comprimido (forma cerrada y, opcionalmente, numérica).
    """
    def action(exp: Experiment, cfg) -> int:
        rows = exp.cat_delta(cfg)
        render_rows("δ del gato comprimido", ("beta", "r", "a_dag", "a"), [row[:4] for row in rows])
        return 0

    _run("cat-delta", env, config, _common(
        out, threads, seed, betas=beta, r_min=r_min, r_max=r_max, steps=steps, numeric=numeric,
    ), action)


@app.command("qec-sim")
def qec_sim(
    n: Optional[int] = typer.Option(None, "--n"),
    db: Optional[float] = DB, r: Optional[float] = R,
    branch: Optional[str] = typer.Option(None, "--branch"),
    kappa_ratio: Optional[float] = typer.Option(None, "--kappa-ratio", help="κ/κ_φ"),
    tau_w: Optional[List[str]] = typer.Option(None, "--tau-w", help="κτ_w (repetible o separado por coma)"),
    cycles: Optional[int] = typer.Option(None, "--cycles"),
    scheme: Optional[str] = typer.Option(None, "--scheme", help="auto | parity (auto = autonomous)"),
    ancilla: Optional[str] = typer.Option(None, "--ancilla", help="qutrit | two-qubit"),
    fidelity: Optional[str] = typer.Option(None, "--fidelity", help="six-state | haar"),
    noise: Optional[str] = typer.Option(None, "--noise", help="lindblad | kraus | none"),
    config: Optional[Path] = CONFIG, env: Optional[Path] = ENV, out: Optional[Path] = OUT,
    threads: Optional[int] = THREADS, seed: Optional[int] = SEED,
):
    """
    Fidelidad lógica por ciclo: corregida, sin corregir y cúbit de Fock.
    """
    def action(exp: Experiment, cfg) -> int:
        rows = exp.qec_sim(cfg)
        render_rows("Fidelidad por ciclo", ("scheme", "tau_w", "cycle", "time", "corrected", "uncorrected", "baseline"),
                    [row[:7] for row in rows])
        return 0

    _run("qec-sim", env, config, _common(
        out, threads, seed, n=n, squeezing_db=db, r=r, branch=branch, kappa_ratio=kappa_ratio,
        tau_w=_floats(tau_w), cycles=cycles, scheme=scheme, ancilla=ancilla, fidelity=fidelity, noise=noise,
    ), action)


@app.command("optimize-z")
def optimize_z(
    n: Optional[int] = typer.Option(None, "--n"),
    db: Optional[float] = DB, r: Optional[float] = R,
    branch: Optional[str] = typer.Option(None, "--branch"),
    ansatz: Optional[str] = typer.Option(None, "--ansatz", help="nonhermitian5 | hermitian"),
    order: Optional[int] = typer.Option(None, "--order"),
    gradient: Optional[str] = typer.Option(None, "--gradient", help="fd | exact"),
    max_iters: Optional[int] = typer.Option(None, "--max-iters"),
    config: Optional[Path] = CONFIG, env: Optional[Path] = ENV, out: Optional[Path] = OUT,
    threads: Optional[int] = THREADS, seed: Optional[int] = SEED,
):
    """
    Síntesis variacional de Ẑ_L = exp(−iĤ_z) con Adam.
    """
    def action(exp: Experiment, cfg) -> int:
        data = exp.optimize_z(cfg)
        render_code_info({k: data[k] for k in ("kind", "norm_dim", "loss", "iterations", "converged", "fixture_loss")})
        return 0

    overrides = _common(
        out, threads, seed, n=n, squeezing_db=db, r=r, branch=branch, ansatz=ansatz, order=order, gradient=gradient,
    )
    if max_iters is not None:
        overrides["adam"] = {"max_iters": max_iters}
    _run("optimize-z", env, config, overrides, action)


@app.command("grape-run")
def grape_run(
    n: Optional[int] = typer.Option(None, "--n"),
    db: Optional[float] = DB, r: Optional[float] = R,
    branch: Optional[str] = typer.Option(None, "--branch"),
    target: Optional[str] = typer.Option(None, "--target", help="recovery | displacement"),
    segments: Optional[int] = typer.Option(None, "--segments"),
    osc_dim: Optional[int] = typer.Option(None, "--osc-dim"),
    iters: Optional[int] = typer.Option(None, "--iters"),
    config: Optional[Path] = CONFIG, env: Optional[Path] = ENV, out: Optional[Path] = OUT,
    threads: Optional[int] = THREADS, seed: Optional[int] = SEED,
):
    """
    GRAPE con pulsos constantes por tramo sobre las cuadraturas del oscilador.
    """
    def action(exp: Experiment, cfg) -> int:
        res = exp.grape_run(cfg)
        render_code_info({"fidelity": res.fidelity, "reachable_bound": res.bound,
                          "iterations": res.iterations, "stalled": res.stalled})
        return 0

    overrides = _common(out, threads, seed, n=n, squeezing_db=db, r=r, branch=branch, target=target)
    grape = {k: v for k, v in (("segments", segments), ("osc_dim", osc_dim), ("iters", iters)) if v is not None}
    if grape:
        overrides["grape"] = grape
    _run("grape-run", env, config, overrides, action)


@app.command("wigner")
def wigner(
    n: Optional[int] = typer.Option(None, "--n"),
    db: Optional[float] = DB, r: Optional[float] = R,
    branch: Optional[str] = typer.Option(None, "--branch"),
    family: Optional[str] = typer.Option(None, "--family"),
    beta: Optional[float] = typer.Option(None, "--beta"),
    extent: Optional[float] = typer.Option(None, "--extent"),
    points: Optional[int] = typer.Option(None, "--points"),
    config: Optional[Path] = CONFIG, env: Optional[Path] = ENV, out: Optional[Path] = OUT,
    threads: Optional[int] = THREADS, seed: Optional[int] = SEED,
):
    """
    Función de Wigner de |0_L⟩ y |1_L⟩ en una grilla cuadrada.
    """
    def action(exp: Experiment, cfg) -> int:
        grids = exp.wigner(cfg)
        render_code_info({"W_min_0": float(grids[0].min()), "W_min_1": float(grids[1].min())})
        return 0

    _run("wigner", env, config, _common(
        out, threads, seed, n=n, squeezing_db=db, r=r, branch=branch, family=family, beta=beta,
        extent=extent, points=points,
    ), action)


@app.command("validate")
def validate(
    quick: Optional[bool] = typer.Option(None, "--quick/--full", help="Barrido de pendientes reducido"),
    config: Optional[Path] = CONFIG, env: Optional[Path] = ENV, out: Optional[Path] = OUT,
    threads: Optional[int] = THREADS, seed: Optional[int] = SEED,
):
    """
    Criterios de aceptación e invariantes de cada módulo. Sale con 1 si alguno falla.
    """
    def action(exp: Experiment, cfg) -> int:
        results = exp.validate(cfg)
        render_validation(results)
        return 0 if all(r.passed for r in results) else 1

    _run("validate", env, config, _common(out, threads, seed, quick=quick), action)


@app.command("series-scan")
def series_scan(
    r_min: Optional[float] = typer.Option(None, "--r-min"),
    r_max: Optional[float] = typer.Option(None, "--r-max"),
    steps: Optional[int] = typer.Option(None, "--steps"),
    branch: Optional[str] = typer.Option(None, "--branch"),
    config: Optional[Path] = CONFIG, env: Optional[Path] = ENV, out: Optional[Path] = OUT,
    threads: Optional[int] = THREADS, seed: Optional[int] = SEED,
):
    """
    ⟨1_L|n̂^m|0_L⟩ numérico vs la serie de dos términos (n = 1).
    """
    def action(exp: Experiment, cfg) -> int:
        rows = exp.series_scan(cfg)
        render_rows("Serie vs numérico", ("r", "branch", "K_er_numeric", "K_er_series"),
                    [(s.r, s.branch, s.k_er_numeric, s.k_er_series) for s in rows])
        return 0

    _run("series-scan", env, config, _common(
        out, threads, seed, r_min=r_min, r_max=r_max, steps=steps, branch=branch,
    ), action)


@app.command("compare-codes")
def compare_codes(
    n: Optional[int] = typer.Option(None, "--n"),
    db: Optional[float] = DB, r: Optional[float] = R,
    beta: Optional[float] = typer.Option(None, "--beta"),
    config: Optional[Path] = CONFIG, env: Optional[Path] = ENV, out: Optional[Path] = OUT,
    threads: Optional[int] = THREADS, seed: Optional[int] = SEED,
):
    """
    Ortogonalidad y K_er de las tres familias bajo pérdida, desfase y ambos.
    """
    def action(exp: Experiment, cfg) -> int:
        rows = exp.compare_codes(cfg)
        render_rows("Comparación de códigos", ("family", "error_set", "orthogonal", "overlap", "K_er"),
                    [(c.family, c.error_set, c.orthogonal, c.overlap, c.k_er) for c in rows])
        return 0

    _run("compare-codes", env, config, _common(out, threads, seed, n=n, squeezing_db=db, r=r, beta=beta), action)


def run_cli(argv: Optional[List[str]] = None) -> int:
    """Ejecuta la CLI y devuelve el código de salida en vez de terminar el proceso."""
    command = typer.main.get_command(app)
    try:
        rv = command.main(args=argv, prog_name="qec", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        return 1
    # con standalone_mode=False, typer.Exit vuelve como entero
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    raise SystemExit(run_cli())
