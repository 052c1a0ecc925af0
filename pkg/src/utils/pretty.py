from __future__ import annotations
import math
from typing import Any, Dict, Optional, Sequence

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from src.utils.log import get_console


def _out() -> Console:
    return get_console()


def banner(command: str, params: Optional[Dict[str, Any]] = None, style: str = "service") -> None:
    """Encabezado de cada subcomando con los parámetros que definen la corrida."""
    lines = [f"[{style}]qec {command}[/]"]
    lines += [f"[dim]{k}[/dim] = {_fmt(v)}" for k, v in (params or {}).items()]
    _out().print(Panel("\n".join(lines), border_style=style, expand=False))


def error_panel(title: str, message: str, details: Optional[Dict[str, Any]] = None) -> None:
    console = _out()
    body = f"[fail]{message}[/fail]"
    for k, v in (details or {}).items():
        body += f"\n[dim]{k}[/dim] = {_fmt(v)}"
    console.print(Panel(body, title=title, border_style="fail", expand=False))


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "[ok]sí[/ok]" if v else "[fail]no[/fail]"
    if isinstance(v, float):
        if math.isnan(v):
            return "[fail]nan[/fail]"
        if v != 0 and (abs(v) < 1e-3 or abs(v) >= 1e5):
            return f"{v:.4e}"
        return f"{v:.6f}"
    return "—" if v is None or v == "" else str(v)


def render_rows(title: str, header: Sequence[str], rows: Sequence[Sequence[Any]], limit: int = 40) -> None:
    """
    Tabla genérica para filas de barridos. Con muchas filas muestra las primeras
    `limit` y avisa cuántas quedaron fuera.
    """
    console = _out()
    t = Table(title=title, title_style="bold white", header_style="bold", expand=False)
    for h in header:
        t.add_column(h, justify="right" if h not in ("family", "branch", "error", "error_set", "scheme") else "left")
    if not rows:
        t.add_row(*(["—"] * len(header)))
    for row in rows[:limit]:
        t.add_row(*[_fmt(v) for v in row])
    console.print(t)
    if len(rows) > limit:
        console.print(f"[dim]… {len(rows) - limit} filas más en el CSV[/dim]")


def render_code_info(info: Dict[str, Any]) -> None:
    """
    Espera: info = {"family": ..., "n": ..., "r": ..., "K_er": ..., ...}
    """
    console = _out()
    t = Table(title="Palabras código", title_style="bold white", header_style="bold", show_header=False)
    t.add_column("Campo", style="code")
    t.add_column("Valor", justify="right")
    for k, v in info.items():
        t.add_row(k, _fmt(v))
    console.print(t)


def render_validation(results: Sequence[Any]) -> None:
    console = _out()
    t = Table(title="Validación", title_style="bold white", header_style="bold", show_lines=False)
    t.add_column("Chequeo", style="code")
    t.add_column("Estado")
    t.add_column("Valor", justify="right")
    t.add_column("Umbral")
    t.add_column("s", justify="right")
    t.add_column("Detalle", style="dim")
    for r in results:
        state = "[ok]OK[/ok]" if r.passed else "[fail]FALLA[/fail]"
        t.add_row(r.name, state, _fmt(r.value), r.threshold, f"{r.seconds:.1f}", r.detail)
    console.print(t)
