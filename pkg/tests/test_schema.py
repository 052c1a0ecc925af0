import pytest
from pydantic import ValidationError

from src.protocol.schema import (
    AdamConfig, GrapeRunConfig, KLScanRunConfig, NoiseParams, OptimizeZRunConfig, QECCycleConfig, QECSimRunConfig,
    RunConfigFactory,
)


def test_parse_obj_envelope():
    cfg = RunConfigFactory.parse_obj({"type": "KL-SCAN", "config": {"ns": [1], "steps": 3}})
    assert isinstance(cfg, KLScanRunConfig)
    assert cfg.type == "kl-scan"
    assert cfg.grid() == pytest.approx([0.3, 1.25, 2.2])


@pytest.mark.parametrize("obj", [
    {"type": "kl-scan"},
    {"type": "kl-scan", "config": []},
    {"type": "route", "config": {}},
    "kl-scan",
])
def test_parse_obj_rejects_bad_envelope(obj):
    with pytest.raises(ValueError):
        RunConfigFactory.parse_obj(obj)


def test_unknown_field_is_rejected():
    with pytest.raises(ValidationError):
        RunConfigFactory.parse_obj({"type": "code-info", "config": {"squeezing": 8}})


def test_r_takes_precedence_over_db():
    cfg = RunConfigFactory.resolve("code-info", None, {"squeezing_db": 8.0, "r": 0.5})
    assert cfg.r_value == 0.5
    assert RunConfigFactory.resolve("code-info", None, {}).r_value == pytest.approx(0.92103, abs=1e-5)


def test_resolve_layering():
    file_obj = {"type": "qec-sim", "config": {"cycles": 7, "scheme": "parity", "out": "file_out"}}
    env = {"threads": 3, "out": "env_out"}
    cfg = RunConfigFactory.resolve("qec-sim", file_obj, {"cycles": 2, "ancilla": None}, env=env)
    assert cfg.cycles == 2
    assert cfg.scheme == "parity"
    assert cfg.out == "file_out"
    assert cfg.threads == 3
    assert cfg.ancilla == "qutrit"


def test_resolve_merges_nested_overrides():
    file_obj = {"type": "optimize-z", "config": {"adam": {"learning_rate": 0.01, "max_iters": 500}}}
    cfg = RunConfigFactory.resolve("optimize-z", file_obj, {"adam": {"max_iters": 10}})
    assert isinstance(cfg, OptimizeZRunConfig)
    assert cfg.adam.max_iters == 10
    assert cfg.adam.learning_rate == 0.01


def test_resolve_rejects_mismatched_file_type():
    with pytest.raises(ValueError):
        RunConfigFactory.resolve("code-info", {"type": "kl-scan", "config": {}}, {})


def test_range_and_value_validators():
    with pytest.raises(ValidationError):
        KLScanRunConfig(r_min=2.0, r_max=1.0)
    with pytest.raises(ValidationError):
        QECCycleConfig(tau_w=0.0)
    with pytest.raises(ValidationError):
        QECCycleConfig(cycles=0)
    with pytest.raises(ValidationError):
        AdamConfig(beta1=1.5)


def test_noise_params():
    p = NoiseParams.from_ratio(1.0, 8.5, 0.01)
    assert p.kappa_phi == pytest.approx(1 / 8.5)
    with pytest.raises(ValueError):
        NoiseParams.from_ratio(1.0, 0.0, 0.01)
    cfg = QECCycleConfig(tau_w=0.02)
    assert cfg.design_noise().tau == 0.02
    assert cfg.ratio == pytest.approx(8.5)


@pytest.mark.parametrize("given, expected", [
    ("auto", "autonomous"), ("AUTO", "autonomous"), ("measurement", "parity"),
    ("autonomous", "autonomous"), ("parity", "parity"),
])
def test_scheme_aliases(given, expected):
    assert QECCycleConfig(scheme=given).scheme == expected
    cfg = QECSimRunConfig(scheme=given)
    assert cfg.cycle_config(0.01).scheme == expected


def test_unknown_scheme_is_rejected():
    with pytest.raises(ValidationError):
        QECCycleConfig(scheme="feedback")


def test_grape_default_target_is_displacement():
    assert GrapeRunConfig().target == "displacement"
