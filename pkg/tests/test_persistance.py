import csv
import json

import numpy as np
import pytest

from src.storage.persistance import dump_json, load_json, write_csv, write_manifest
from src.utils.ids import generate_run_id


def test_csv_cells(tmp_path):
    path = write_csv(str(tmp_path / "sub" / "t.csv"), ("x", "y", "ok", "note"),
                     [(0.1, float("nan"), True, None), (np.float64(1 / 3), 2, np.bool_(False), "a")])
    rows = list(csv.reader(path.read_text(encoding="utf-8").splitlines()))
    assert rows[0] == ["x", "y", "ok", "note"]
    assert rows[1] == ["0.10000000000000001", "nan", "true", ""]
    assert float(rows[2][0]) == 1 / 3
    assert rows[2][1:] == ["2", "false", "a"]


def test_csv_rejects_ragged_rows(tmp_path):
    with pytest.raises(ValueError):
        write_csv(str(tmp_path / "t.csv"), ("a", "b"), [(1,)])


def test_json_roundtrip_of_numpy_values(tmp_path):
    path = dump_json(str(tmp_path / "d.json"), {"v": np.arange(3), "z": 1 + 2j, "inf": float("inf")})
    data = load_json(str(path))
    assert data == {"v": [0, 1, 2], "z": {"re": 1.0, "im": 2.0}, "inf": "inf"}


def test_load_json_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_json(str(tmp_path / "nope.json"))


def test_manifest(tmp_path):
    path = write_manifest(
        str(tmp_path / "m.json"), "code-info", {"r": 0.5}, [str(tmp_path / "code_info.json")],
        seed=4, run_id="code-info-1-abc", extra={"note": "x"},
    )
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["command"] == "code-info"
    assert data["outputs"] == ["code_info.json"]
    assert data["seed"] == 4
    assert set(data["versions"]) == {"package", "python", "numpy", "scipy", "pydantic"}
    assert data["extra"] == {"note": "x"}
    assert "created_at" in data


def test_run_ids():
    assert generate_run_id("kl-scan").startswith("kl-scan-")
    assert generate_run_id("a") != generate_run_id("a")
