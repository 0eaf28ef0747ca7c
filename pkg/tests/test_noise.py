import math

import numpy as np
import pytest

from scbench.circuit import Circuit, Instruction, emit_text, parse_text
from scbench.noise import (
    CoherenceSpec,
    FamilyConfig,
    NoiseAssignment,
    PAIR_LETTERS,
    ParamSet,
    PauliChannel1,
    PauliChannel2,
    SpamSpec,
    apply_noise,
    circuit_context,
    make_builtin_family,
    pair_key,
    pta_idle_channel,
    resolve_ticks,
)
from scbench.primitives import MemorySpec, PatchGeometry, gen_memory


def _noisy_memory(family: FamilyConfig, d=3, rounds=2, basis="Z"):
    c = gen_memory(MemorySpec(PatchGeometry(d, d), rounds, basis))
    return apply_noise(c, make_builtin_family(family, circuit_context(c)))


# ---------------------------------------------------------------------------
# Family channel values
# ---------------------------------------------------------------------------


def test_uniform_two_qubit_rates():
    a = make_builtin_family(FamilyConfig("uniform", 0.001))
    assert a.base.gate2.probs == (0.001 / 15,) * 15
    assert a.base.gate1.args() == (0.001 / 3,) * 3
    assert a.base.spam == SpamSpec(0.001, 0.001, 0.001, 0.001)


@pytest.mark.parametrize("eta", [1.0, 10.0, 100.0])
@pytest.mark.parametrize("p", [1e-3, 1e-2])
def test_biased_closed_forms(eta, p):
    a = make_builtin_family(FamilyConfig("biased", p, eta=eta, axis="Z"))
    g1 = a.base.gate1
    assert math.isclose(g1.pz, eta * p / (eta + 2), rel_tol=1e-12)
    assert math.isclose(g1.px, p / (eta + 2), rel_tol=1e-12)
    assert g1.px == g1.py
    # budget conservation
    assert math.isclose(g1.total, p, rel_tol=1e-12)
    assert math.isclose(a.base.gate2.total, p, rel_tol=1e-12)
    heavy = {k for k in range(15) if set(PAIR_LETTERS[k]) <= {0, 3}}
    for k, q in enumerate(a.base.gate2.probs):
        want = eta * p / (12 + 3 * eta) if k in heavy else p / (12 + 3 * eta)
        assert math.isclose(q, want, rel_tol=1e-12)
    assert math.isclose(a.base.spam.p_meas_z, 2 * p / (1 + eta), rel_tol=1e-12)
    assert math.isclose(a.base.spam.p_meas_x, 2 * eta * p / (1 + eta), rel_tol=1e-12)


def test_biased_z_eta10_matches_ten_twelfths():
    a = make_builtin_family(FamilyConfig("biased", 0.004, eta=10.0, axis="Z"))
    assert math.isclose(a.base.gate1.pz, (10 / 12) * 0.004, rel_tol=1e-12)


def test_biased_x_axis_swaps_components():
    a = make_builtin_family(FamilyConfig("biased", 0.01, eta=5.0, axis="X"))
    assert a.base.gate1.px > a.base.gate1.pz
    assert a.base.spam.p_meas_x < a.base.spam.p_meas_z


def test_measurement_biased_rescales_spam_only():
    a = make_builtin_family(FamilyConfig("measurement-biased", 0.002, eta=10.0))
    assert a.base.spam.p_meas_z == 0.02
    assert a.base.spam.p_reset_x == 0.02
    assert a.base.gate1.args() == (0.002 / 3,) * 3


def test_family_parameter_validation():
    with pytest.raises(ValueError, match="requires parameter 'eta'"):
        FamilyConfig("biased", 0.001, axis="Z")
    with pytest.raises(ValueError, match="does not take parameter 'sigma'"):
        FamilyConfig("uniform", 0.001, sigma=0.1)
    with pytest.raises(ValueError, match="eta"):
        FamilyConfig("biased", 0.001, eta=0.5, axis="Z")
    with pytest.raises(ValueError, match="sigma"):
        FamilyConfig("non-uniform-spatial", 0.001, sigma=-1.0, seed=0)


# ---------------------------------------------------------------------------
# Family reductions (byte-identical circuits)
# ---------------------------------------------------------------------------


def test_biased_eta1_reduces_to_uniform():
    u = _noisy_memory(FamilyConfig("uniform", 0.003))
    b = _noisy_memory(FamilyConfig("biased", 0.003, eta=1.0, axis="Z"))
    assert emit_text(u) == emit_text(b)


def test_measurement_biased_eta1_reduces_to_uniform():
    u = _noisy_memory(FamilyConfig("uniform", 0.003))
    m = _noisy_memory(FamilyConfig("measurement-biased", 0.003, eta=1.0))
    assert emit_text(u) == emit_text(m)


@pytest.mark.parametrize("family", ["non-uniform-spatial", "non-uniform-spatio-temporal"])
def test_nonuniform_sigma0_reduces_to_uniform(family):
    u = _noisy_memory(FamilyConfig("uniform", 0.003))
    n = _noisy_memory(FamilyConfig(family, 0.003, sigma=0.0, seed=99))
    assert emit_text(u) == emit_text(n)


def test_nonuniform_determinism_and_variation():
    f = FamilyConfig("non-uniform-spatial", 0.003, sigma=0.5, seed=42)
    a = emit_text(_noisy_memory(f))
    b = emit_text(_noisy_memory(f))
    assert a == b
    c = emit_text(_noisy_memory(FamilyConfig("non-uniform-spatial", 0.003, sigma=0.5, seed=43)))
    assert a != c
    # rates vary across components but stay clipped
    noisy = _noisy_memory(f)
    rates = {
        inst.args
        for inst in noisy.instructions
        if inst.name == "PAULI_CHANNEL_1"
    }
    assert len(rates) > 3
    for args in rates:
        assert 0.0 <= sum(args) <= 0.5 + 1e-12


def test_nonuniform_spatio_temporal_varies_by_round():
    f = FamilyConfig("non-uniform-spatio-temporal", 0.003, sigma=0.5, seed=7)
    noisy = _noisy_memory(f, rounds=3)
    # some qubit's reset flip rate should differ across rounds
    per_qubit: dict[int, set[float]] = {}
    for inst in noisy.instructions:
        if inst.name == "X_ERROR":
            for q in inst.targets:
                per_qubit.setdefault(q, set()).add(inst.args[0])
    assert any(len(v) > 1 for v in per_qubit.values())


# ---------------------------------------------------------------------------
# PTA idle channel
# ---------------------------------------------------------------------------


def test_pta_zero_duration():
    assert pta_idle_channel(0.0, 100.0, 150.0).args() == (0.0, 0.0, 0.0)


def test_pta_pure_dephasing_point():
    t2 = 300.0
    ch = pta_idle_channel(t2 * math.log(2.0), 1e30, t2)
    assert abs(ch.px) < 1e-12 and abs(ch.py) < 1e-12
    assert math.isclose(ch.pz, 0.25, rel_tol=1e-12)


def test_pta_against_high_precision():
    import mpmath

    mpmath.mp.dps = 50
    rng = np.random.default_rng(5)
    for _ in range(100):
        t1 = float(rng.uniform(1e3, 1e5))
        t2 = float(rng.uniform(0.2, 2.0)) * t1
        t2 = min(t2, 2 * t1)
        t = float(rng.uniform(0.0, 5e3))
        ch = pta_idle_channel(t, t1, t2)
        pxy = (1 - mpmath.e ** (-mpmath.mpf(t) / t1)) / 4
        pz = (1 - mpmath.e ** (-mpmath.mpf(t) / t2)) / 2 - pxy
        assert abs(ch.px - float(pxy)) <= 1e-12 * max(float(pxy), 1e-30)
        assert abs(ch.pz - float(pz)) <= 1e-12 * max(abs(float(pz)), 1e-30)
        assert ch.px >= 0 and ch.pz >= -1e-15
        assert ch.total <= 0.75


def test_pta_invalid_coherence():
    with pytest.raises(ValueError, match="T2"):
        pta_idle_channel(10.0, 100.0, 250.0)


# ---------------------------------------------------------------------------
# Tick resolution
# ---------------------------------------------------------------------------


def test_resolve_ticks_single_gate():
    c = parse_text("QUBIT_COORDS(0, 0) 0\nQUBIT_COORDS(1, 0) 1\nH 0\nM 1\nTICK\nH 0\n")
    # layer 0: H(20) on q0 and M(1) on q1 is a conflict-free layer
    ticks = resolve_ticks(c, {"H": 20.0, "M": 1.0})
    assert ticks[0].duration == 20.0
    assert ticks[0].idle == ((1, 19.0),)


def test_resolve_ticks_fully_idle_qubit():
    c = parse_text("H 0\nTICK\nCX 0 1\nM 2\n")
    ticks = resolve_ticks(c, {"H": 20.0, "CX": 30.0, "M": 30.0})
    assert ticks[0].duration == 20.0
    assert ticks[0].idle == ((1, 20.0), (2, 20.0))


def test_resolve_ticks_mixed_durations():
    c = parse_text("CX 0 1\nH 2\n")
    ticks = resolve_ticks(c, {"CX": 30.0, "H": 20.0})
    assert ticks[0].duration == 30.0
    assert ticks[0].idle == ((2, 10.0),)


def test_resolve_ticks_empty_tick():
    c = parse_text("H 0\nTICK\nTICK\nH 0\n")
    ticks = resolve_ticks(c, {})
    assert ticks[1].duration == 0.0
    assert ticks[1].idle == ()


def test_resolve_ticks_conflict():
    with pytest.raises(ValueError, match="scheduling conflict"):
        resolve_ticks(parse_text("H 0\nCX 0 1\n"))


# ---------------------------------------------------------------------------
# apply_noise placement
# ---------------------------------------------------------------------------


def test_apply_noise_placement_minimal():
    c = parse_text("R 0\nTICK\nH 0\nTICK\nM 0\n")
    a = make_builtin_family(FamilyConfig("uniform", 0.01))
    a.durations = {k: 0.0 for k in ("R", "H", "M")}
    noisy = apply_noise(c, a)
    names = [(i.name, i.args) for i in noisy.instructions if i.name != "TICK"]
    assert names == [
        ("R", ()),
        ("X_ERROR", (0.01,)),
        ("H", ()),
        ("PAULI_CHANNEL_1", (0.01 / 3,) * 3),
        ("X_ERROR", (0.01,)),
        ("M", ()),
    ]


def test_apply_noise_idle_channels_inserted():
    c = parse_text("R 0 1\nTICK\nH 0\nTICK\nM 0 1\n")
    noisy = apply_noise(c, make_builtin_family(FamilyConfig("uniform", 0.01)))
    # qubit 1 idles during the H layer
    idles = [
        i
        for i in noisy.instructions
        if i.name == "PAULI_CHANNEL_1" and i.targets == (1,)
    ]
    assert len(idles) == 1


def test_apply_noise_zero_rate_channels_emitted():
    noisy = _noisy_memory(FamilyConfig("uniform", 0.0))
    channels = [i for i in noisy.instructions if i.name in ("PAULI_CHANNEL_1", "PAULI_CHANNEL_2", "X_ERROR", "Z_ERROR")]
    assert channels
    assert all(all(a == 0.0 for a in i.args) for i in channels)


def test_apply_noise_rejects_noisy_input():
    noisy = _noisy_memory(FamilyConfig("uniform", 0.001))
    with pytest.raises(ValueError, match="noiseless"):
        apply_noise(noisy, make_builtin_family(FamilyConfig("uniform", 0.001)))


def test_mpp_receives_no_channels():
    c = parse_text("RX 0 1\nTICK\nMPP Y0*Y1\n")
    noisy = apply_noise(c, make_builtin_family(FamilyConfig("uniform", 0.01)))
    mpp_idx = [k for k, i in enumerate(noisy.instructions) if i.name == "MPP"][0]
    before = noisy.instructions[mpp_idx - 1]
    assert before.name in ("TICK", "Z_ERROR")  # reset flips only, no measure flip
    assert all(
        i.name != "X_ERROR" or i is not noisy.instructions[mpp_idx - 1]
        for i in noisy.instructions
    )


# ---------------------------------------------------------------------------
# Tier resolution
# ---------------------------------------------------------------------------


def test_tier_override_precedence():
    base = ParamSet(gate1=PauliChannel1(0.1, 0.1, 0.1))
    spatial = {3: ParamSet(gate1=PauliChannel1(0.2, 0.0, 0.0))}
    temporal = {1: ParamSet(gate1=PauliChannel1(0.0, 0.3, 0.0))}
    st = {(3, 1): ParamSet(gate1=PauliChannel1(0.0, 0.0, 0.4))}
    a = NoiseAssignment(base=base, spatial=spatial, temporal=temporal, spatio_temporal=st)
    assert a.gate1(0, 0).args() == (0.1, 0.1, 0.1)  # global
    assert a.gate1(3, 0).args() == (0.2, 0.0, 0.0)  # spatial beats global
    assert a.gate1(0, 1).args() == (0.0, 0.3, 0.0)  # temporal beats global
    assert a.gate1(3, 1).args() == (0.0, 0.0, 0.4)  # spatio-temporal beats all


def test_tier_partial_fields_fall_through():
    base = ParamSet(
        gate1=PauliChannel1(0.1, 0.1, 0.1),
        spam=SpamSpec(0.2, 0.2, 0.2, 0.2),
    )
    a = NoiseAssignment(base=base, spatial={5: ParamSet(spam=SpamSpec(0.5, 0.5, 0.5, 0.5))})
    assert a.spam(5, 0).p_meas_z == 0.5
    assert a.gate1(5, 0).args() == (0.1, 0.1, 0.1)


def test_missing_parameters_raise():
    a = NoiseAssignment(base=ParamSet())
    with pytest.raises(KeyError, match="gate1"):
        a.gate1(0, 0)


def test_pair_key_canonical():
    assert pair_key(7, 3) == (3, 7)


def test_coherence_idle_path():
    a = NoiseAssignment(
        base=ParamSet(
            gate1=PauliChannel1(0, 0, 0),
            gate2=PauliChannel2((0.0,) * 15),
            spam=SpamSpec(0, 0, 0, 0),
            idle=CoherenceSpec(t1=20000.0, t2=15000.0),
        ),
        durations={"H": 20.0, "R": 100.0, "M": 100.0},
    )
    c = parse_text("R 0 1\nTICK\nH 0\nTICK\nM 0 1\n")
    noisy = apply_noise(c, a)
    idles = [i for i in noisy.instructions if i.name == "PAULI_CHANNEL_1" and i.targets == (1,)]
    assert len(idles) == 1
    want = pta_idle_channel(20.0, 20000.0, 15000.0)
    assert idles[0].args == want.args()
