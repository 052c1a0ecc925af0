from __future__ import annotations
import logging
import os
import time
from contextlib import contextmanager
from typing import Iterator, Mapping, Optional, Set, Union

from rich.console import Console
from rich.logging import RichHandler
from rich.theme import Theme

# Estilos usados en el markup de los mensajes ([metric]…[/metric], [ok]…, etc.)
_QEC_THEME = Theme({
    "time": "dim",
    "level.debug": "cyan",
    "level.info": "bold green",
    "level.warning": "bold yellow",
    "level.error": "bold red",
    "service": "bold magenta",
    "code": "bold white",
    "metric": "bold blue",
    "ok": "bold green",
    "fail": "bold red",
})

_console: Optional[Console] = None
_registered: Set[str] = set()

Level = Union[str, int, None]


def get_console() -> Console:
    global _console
    if _console is None:
        _console = Console(theme=_QEC_THEME, highlight=False, soft_wrap=False)
    return _console


def _resolve_level(level: Level) -> int:
    """Nombre ("debug"), número o None (→ LOG_LEVEL del entorno, INFO si falta)."""
    if level is None:
        level = os.getenv("LOG_LEVEL", "INFO")
    if isinstance(level, int):
        return level
    return getattr(logging, str(level).strip().upper(), logging.INFO)


def setup_logger(name: str, level: Level = None) -> logging.Logger:
    """
    Logger con nombre de módulo (FOCK, KL, QEC, ...) y un único RichHandler sobre
    la consola compartida. Llamarlo de nuevo sólo ajusta el nivel.
    """
    logger = logging.getLogger(name)
    _registered.add(name)
    if logger.handlers:
        if level is not None:
            logger.setLevel(_resolve_level(level))
        return logger

    logger.setLevel(_resolve_level(level))
    handler = RichHandler(
        console=get_console(),
        show_time=True,
        show_level=True,
        show_path=False,
        rich_tracebacks=True,
        markup=True,
        log_time_format="[%H:%M:%S]",
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.propagate = False
    return logger


def set_global_level(level: Level) -> None:
    """Aplica el nivel a todos los loggers creados con setup_logger."""
    lvl = _resolve_level(level)
    for name in _registered:
        logging.getLogger(name).setLevel(lvl)


def log_metrics(logger: logging.Logger, title: str, values: Mapping[str, float],
                level: int = logging.DEBUG) -> None:
    """Una línea `título: k=v, ...` con los valores en notación científica."""
    if not logger.isEnabledFor(level) or not values:
        return
    body = ", ".join(f"{k}=[metric]{v:.3e}[/metric]" for k, v in values.items())
    logger.log(level, f"{title}: {body}")


class Stopwatch:
    def __init__(self) -> None:
        self.seconds = 0.0


@contextmanager
def timed(logger: logging.Logger, label: str, level: int = logging.DEBUG) -> Iterator[Stopwatch]:
    """Mide el bloque; el tiempo queda en `.seconds` y se registra al salir."""
    sw = Stopwatch()
    t0 = time.perf_counter()
    try:
        yield sw
    finally:
        sw.seconds = time.perf_counter() - t0
        logger.log(level, f"{label}: {sw.seconds:.2f} s")

