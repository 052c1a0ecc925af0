from __future__ import annotations
import csv
import json
import math
import platform
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from src import __version__


def _cell(x: Any) -> str:
    """Flotantes con 17 cifras significativas (ida y vuelta exacta), el resto con str."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return str(x)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """
    CSV con encabezado y punto decimal. El contenido depende sólo de los datos
    (sin marcas de tiempo), así dos corridas con la misma semilla son idénticas.
    """
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"fila de {len(row)} columnas para encabezado de {len(header)}")
            w.writerow([_cell(x) for x in row])
    return p


def _to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def dump_json(path: str, data: Dict[str, Any]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as f:
        json.dump(_to_jsonable(data), f, ensure_ascii=False, indent=2)
    return p


def load_json(path: str) -> Dict[str, Any]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"No existe el archivo: {path}")
    with p.open("r", encoding="utf-8") as f:
        return json.load(f)


def _version(dist: str) -> Optional[str]:
    try:
        return metadata.version(dist)
    except metadata.PackageNotFoundError:
        return None


def write_manifest(
    path: str,
    command: str,
    params: Dict[str, Any],
    outputs: List[str],
    seed: int,
    run_id: str,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Manifiesto de la corrida: versiones, parámetros resueltos y archivos producidos.
    Es el único artefacto con marca de tiempo.
    """
    data: Dict[str, Any] = {
        "command": command,
        "run_id": run_id,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seed": seed,
        "versions": {
            "package": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": _version("scipy"),
            "pydantic": _version("pydantic"),
        },
        "params": params,
        "outputs": [Path(o).name for o in outputs],
    }
    if extra:
        data["extra"] = extra
    return dump_json(path, data)
