from __future__ import annotations
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.protocol.schema import AdamConfig
from src.utils.log import setup_logger

log = setup_logger("ADAM")

# (pérdida, gradiente) en parámetros reales
Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]

STALL_WINDOW = 50
STALL_TOL = 1e-10


class Adam:
    """Adam sobre un vector real; los parámetros complejos se pasan como (Re, Im) apilados."""

    def __init__(self, lr: float = 5e-3, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        if lr <= 0:
            raise ValueError(f"learning rate debe ser > 0 (llegó {lr})")
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ValueError("beta1/beta2 deben estar en (0, 1)")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None
        self.t = 0

    @classmethod
    def from_config(cls, cfg: AdamConfig) -> "Adam":
        return cls(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)

    def step(self, params: np.ndarray, grads: np.ndarray) -> None:
        """Actualiza `params` en el lugar."""
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t

        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grads
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * (grads * grads)

        denom = np.sqrt(self.v / bc2) + self.epsilon
        params -= (self.lr / bc1) * self.m / denom


@dataclass
class OptimizationResult:
    params: np.ndarray
    loss: float
    history: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    stalled: bool = False


def minimize(objective: Objective, x0: np.ndarray, cfg: AdamConfig, label: str = "adam",
             stall_window: Optional[int] = None) -> OptimizationResult:
    """
    Bucle de Adam con mejor-hasta-ahora. Termina al bajar de target_loss, al agotar
    max_iters o (si se da stall_window) cuando la mejora en esa ventana es < 1e-10.
    """
    opt = Adam.from_config(cfg)
    x = np.array(x0, dtype=float, copy=True)
    best_x, best = x.copy(), np.inf
    history: List[float] = []
    stalled = False
    it = 0
    for it in range(cfg.max_iters + 1):
        loss, grad = objective(x)
        history.append(float(loss))
        if loss < best:
            best, best_x = float(loss), x.copy()
        if loss <= cfg.target_loss:
            break
        if stall_window and len(history) > stall_window:
            if min(history[:-stall_window]) - best < STALL_TOL:
                stalled = True
                log.warning(f"{label}: sin mejora en {stall_window} iteraciones (pérdida {best:.3e})")
                break
        if it == cfg.max_iters:
            break
        if not np.all(np.isfinite(grad)):
            log.error(f"{label}: gradiente no finito en la iteración {it}")
            break
        opt.step(x, grad)
        if it % cfg.log_every == 0:
            log.debug(f"{label} it={it}: pérdida {loss:.3e}")

    converged = best <= cfg.target_loss
    style = "ok" if converged else "fail"
    log.info(f"{label}: [{style}]pérdida {best:.3e}[/{style}] tras {it} iteraciones")
    return OptimizationResult(best_x, best, history, it, converged, stalled)
