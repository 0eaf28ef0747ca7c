import json
import math

import pytest

from scbench.bench import (
    ExperimentConfig,
    RunResult,
    StoppingRule,
    build_spec,
    config_from_dict,
    per_round_ler,
    relative_ler,
    results_to_csv,
    run_experiment,
    run_point,
    total_rounds,
    wilson_ci,
)
from scbench.noise import FamilyConfig
from scbench.primitives import MemorySpec


def _cfg(**kw):
    base = dict(
        primitive="memory",
        family=FamilyConfig("uniform", 0.0),
        distances=(3,),
        error_rates=(0.01,),
        rounds="d",
        basis="Z",
        stopping=StoppingRule(max_shots=100_000, max_errors=200),
        seed=5,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_per_round_ler_fixed_points():
    assert per_round_ler(0.0, 5) == (0.0, False)
    assert per_round_ler(0.5, 3) == (0.5, False)
    eps, sat = per_round_ler(0.75, 3)
    assert eps == 0.5 and sat


def test_per_round_ler_identity_at_one_round():
    assert per_round_ler(0.123, 1)[0] == pytest.approx(0.123)


def test_per_round_ler_round_trip():
    # forward-compose a per-round rate then invert it
    eps = 0.1
    t = 2
    p_total = (1.0 - (1.0 - 2.0 * eps) ** t) / 2.0
    assert p_total == pytest.approx(0.18)
    back, _ = per_round_ler(p_total, t)
    assert back == pytest.approx(eps, rel=1e-12)


def test_per_round_monotone():
    vals = [per_round_ler(p, 4)[0] for p in (0.0, 0.01, 0.1, 0.3, 0.5)]
    assert vals == sorted(vals)


def test_wilson_ci_contains_point():
    lo, hi = wilson_ci(10, 1000)
    assert lo < 0.01 < hi
    lo0, hi0 = wilson_ci(0, 1000)
    assert lo0 == 0.0 and hi0 > 0.0


def test_rounds_policy_follows_protecting_distance():
    cz = _cfg(d_x=3, d_z=5, basis="Z")
    spec = build_spec(cz, 3)
    assert isinstance(spec, MemorySpec) and spec.rounds == 3  # t = d_X for Z basis
    cx = _cfg(d_x=3, d_z=5, basis="X")
    assert build_spec(cx, 3).rounds == 5  # t = d_Z for X basis


def test_run_point_zero_noise():
    cfg = _cfg(error_rates=(0.0,), stopping=StoppingRule(max_shots=70_000, max_errors=10))
    r = run_point(cfg, 3, 0.0)
    assert r.errors == 0
    assert r.shots >= 70_000
    assert r.ler_total == 0.0
    assert r.volume == 27


def test_stopping_on_errors_within_one_chunk():
    cfg = _cfg(stopping=StoppingRule(max_shots=10_000_000, max_errors=50))
    r = run_point(cfg, 3, 0.01)
    assert r.errors >= 50
    # stopped within one chunk of crossing
    assert r.shots <= 2 * 65536
    assert r.ci_lo <= r.ler_per_round <= r.ci_hi


def test_shot_cap_respected():
    cfg = _cfg(stopping=StoppingRule(max_shots=65_536, max_errors=100_000))
    r = run_point(cfg, 3, 0.01)
    assert r.shots == 65_536


def test_raised_cap_on_low_ler():
    # p=0 hits max_shots with zero errors; the raised cap then applies
    cfg = _cfg(
        error_rates=(0.0,),
        stopping=StoppingRule(max_shots=65_536, max_errors=100, low_ler_cap=131_072),
    )
    r = run_point(cfg, 3, 0.0)
    assert r.shots == 131_072


def test_run_experiment_reproducible_and_relative():
    cfg = _cfg(
        family=FamilyConfig("measurement-biased", 0.0, eta=4.0),
        error_rates=(0.008,),
        stopping=StoppingRule(max_shots=131_072, max_errors=100_000),
    )
    res1 = run_experiment(cfg)
    res2 = run_experiment(cfg)
    assert results_to_csv(res1, deterministic_time=True) == results_to_csv(
        res2, deterministic_time=True
    )
    assert len(res1) == 2  # structured + baseline
    structured, baseline = res1
    assert baseline.family == "uniform"
    assert structured.rel_ler == pytest.approx(
        structured.ler_per_round / baseline.ler_per_round
    )
    assert structured.rel_ci_lo < structured.rel_ler < structured.rel_ci_hi


def test_relative_ler_identity():
    cfg = _cfg(stopping=StoppingRule(max_shots=65_536, max_errors=100_000))
    r = run_point(cfg, 3, 0.01)
    rel = relative_ler(r, r)
    assert rel.ratio == 1.0


def test_relative_ler_zero_baseline():
    cfg = _cfg(error_rates=(0.0,), stopping=StoppingRule(max_shots=65_536, max_errors=10))
    r = run_point(cfg, 3, 0.0)
    rel = relative_ler(r, r)
    assert rel.ratio is None


def test_relative_ler_mismatch_rejected():
    cfg = _cfg(stopping=StoppingRule(max_shots=65_536, max_errors=100_000))
    a = run_point(cfg, 3, 0.01)
    b = run_point(cfg, 3, 0.02)
    with pytest.raises(ValueError, match="mismatched"):
        relative_ler(a, b)


def test_config_round_trip_and_validation():
    raw = {
        "primitive": "memory",
        "distances": [3, 5],
        "error_rates": [0.001],
        "family": {"family": "biased", "eta": 10, "axis": "Z"},
        "stopping": {"max_shots": 1000, "max_errors": 10},
    }
    cfg = config_from_dict(raw)
    assert cfg.distances == (3, 5)
    assert cfg.family.eta == 10
    with pytest.raises(ValueError, match="unknown config keys"):
        config_from_dict({**raw, "bogus": 1})
    with pytest.raises(ValueError, match="requires parameter 'eta'"):
        config_from_dict({**raw, "family": {"family": "biased", "axis": "Z"}})
    with pytest.raises(ValueError, match="family"):
        config_from_dict({k: v for k, v in raw.items() if k != "family"})


def test_csv_schema():
    cfg = _cfg(stopping=StoppingRule(max_shots=65_536, max_errors=100_000))
    text = results_to_csv([run_point(cfg, 3, 0.01)], deterministic_time=True)
    lines = text.splitlines()
    assert lines[0] == "# schema=scbench.results.v1"
    assert lines[1].startswith("primitive,d_x,d_z,bridge,rounds,family,p,")
    assert len(lines) == 3


def test_total_rounds_per_primitive():
    from scbench.primitives import (
        HadamardSpec,
        LatticeSurgerySpec,
        PatchGeometry,
        PhaseGateSpec,
    )

    g = PatchGeometry(3, 3)
    assert total_rounds(MemorySpec(g, 4)) == 4
    assert total_rounds(HadamardSpec(g, 2, 3)) == 6
    assert total_rounds(LatticeSurgerySpec(g, 1, 1, 2, 3)) == 6
    assert total_rounds(PhaseGateSpec(3, 1, 3, 2)) == 5
