import numpy as np
import pytest

from scbench.circuit import CHANNEL_NAMES, Circuit, Instruction, parse_text
from scbench.dem import (
    build_dem,
    emit_dem_text,
    parse_dem_text,
    split_graphlike,
    _component_subfaults,
)
from scbench.framesim import sample_batch
from scbench.noise import FamilyConfig, apply_noise, circuit_context, make_builtin_family
from scbench.primitives import (
    HadamardSpec,
    LatticeSurgerySpec,
    MemorySpec,
    PatchGeometry,
    gen_hadamard,
    gen_lattice_surgery,
    gen_memory,
)


def _noisy(circuit, p=0.001, family="uniform", **kw):
    fam = FamilyConfig(family, p, **kw)
    return apply_noise(circuit, make_builtin_family(fam, circuit_context(circuit)))


def test_single_flip_between_measurements():
    c = parse_text(
        "R 0\nM 0\nX_ERROR(0.01) 0\nM 0\n"
        "DETECTOR(0, 0, 0, 0) rec[-2]\nDETECTOR(0, 0, 1, 0) rec[-1] rec[-2]\n"
    )
    d = build_dem(c)
    assert len(d.mechanisms) == 1
    m = d.mechanisms[0]
    assert m.probability == 0.01
    assert m.detectors == (1,)


def test_identical_signatures_merge():
    c = parse_text(
        "R 0\nM 0\nX_ERROR(0.01) 0\nX_ERROR(0.01) 0\nM 0\n"
        "DETECTOR(0, 0, 0, 0) rec[-1] rec[-2]\n"
    )
    d = build_dem(c)
    assert len(d.mechanisms) == 1
    assert d.mechanisms[0].probability == pytest.approx(0.0198)


def test_zero_probability_components_dropped():
    c = parse_text("R 0\nPAULI_CHANNEL_1(0, 0.02, 0) 0\nM 0\nDETECTOR(0, 0, 0, 0) rec[-1]\n")
    d = build_dem(c)
    assert len(d.mechanisms) == 1
    assert d.mechanisms[0].probability == pytest.approx(0.02)


def test_y_mechanism_has_two_parts():
    c = gen_memory(MemorySpec(PatchGeometry(3, 3), 2, "Z"))
    d = build_dem(_noisy(c))
    two_part = [m for m in d.mechanisms if len(m.parts) == 2]
    assert two_part
    for m in two_part:
        total = set()
        for dets, _ in m.parts:
            total ^= set(dets)
        assert total == set(m.detectors)


def test_memory_dem_graphlike_and_no_undetectable():
    for basis in ("Z", "X"):
        c = gen_memory(MemorySpec(PatchGeometry(3, 3), 3, basis))
        d = build_dem(_noisy(c))
        assert not d.undetectable_faults()
        g = split_graphlike(d)
        for part in g.z_parts + g.x_parts:
            assert 1 <= len(part.dets) <= 2


def test_hadamard_and_surgery_graphlike():
    circuits = [
        gen_hadamard(HadamardSpec(PatchGeometry(3, 3), 2, 2, "Z")),
        gen_lattice_surgery(LatticeSurgerySpec(PatchGeometry(3, 3), 1, 1, 2, 1, "ZZ")),
    ]
    for c in circuits:
        d = build_dem(_noisy(c))
        assert not d.undetectable_faults()
        split_graphlike(d)  # must not raise


def test_split_requires_side_labels():
    c = parse_text("R 0\nX_ERROR(0.01) 0\nM 0\nDETECTOR(0, 0) rec[-1]\n")
    d = build_dem(c)
    with pytest.raises(ValueError, match="side label"):
        split_graphlike(d)


def test_y_fault_link_recorded():
    c = gen_memory(MemorySpec(PatchGeometry(3, 3), 3, "Z"))
    d = build_dem(_noisy(c))
    g = split_graphlike(d)
    assert g.links
    for zi, xi in g.links:
        assert g.z_parts[zi].mech_id == g.x_parts[xi].mech_id


def test_dem_text_round_trip():
    c = gen_memory(MemorySpec(PatchGeometry(3, 3), 2, "Z"))
    d = build_dem(_noisy(c, p=0.004))
    text = emit_dem_text(d)
    d2 = parse_dem_text(text)
    assert d2.num_detectors == d.num_detectors
    s1 = {(m.detectors, m.observables, m.parts): m.probability for m in d.mechanisms}
    s2 = {(m.detectors, m.observables, m.parts): m.probability for m in d2.mechanisms}
    assert s1.keys() == s2.keys()
    for k in s1:
        assert s2[k] == pytest.approx(s1[k], rel=1e-12)
    assert d2.detector_coords == d.detector_coords


def test_nonuniform_priors_vary():
    c = gen_memory(MemorySpec(PatchGeometry(3, 3), 2, "Z"))
    d = build_dem(_noisy(c, family="non-uniform-spatial", sigma=0.8, seed=11))
    du = build_dem(_noisy(c))
    probs = sorted(m.probability for m in d.mechanisms)
    probs_u = sorted(m.probability for m in du.mechanisms)
    assert len(set(round(p, 14) for p in probs)) > len(set(round(p, 14) for p in probs_u))


def _injection_circuit(noisy, site, comp):
    inst = noisy.instructions[site]
    sub = {c: (p, terms) for c, p, terms in _component_subfaults(inst)}
    _, terms = sub[comp]
    inj = []
    for q, hx, hz in terms:
        if hx:
            inj.append(Instruction("X_ERROR", (q,), (1.0,)))
        if hz:
            inj.append(Instruction("Z_ERROR", (q,), (1.0,)))
    out = []
    for k, ins in enumerate(noisy.instructions):
        if k == site:
            out.extend(inj)
        if ins.name in CHANNEL_NAMES:
            continue
        out.append(ins)
    return Circuit(out)


def test_injection_matches_dem_signatures():
    c = gen_memory(MemorySpec(PatchGeometry(3, 3), 2, "Z"))
    noisy = _noisy(c, p=0.002)
    d = build_dem(noisy)
    rng = np.random.default_rng(0)
    mechs = [m for m in d.mechanisms if m.sources]
    for m in (mechs[i] for i in rng.choice(len(mechs), size=30, replace=False)):
        site, comp = m.sources[0]
        table = sample_batch(_injection_circuit(noisy, site, comp), 64, seed=1)
        det = np.unpackbits(table.detectors[0], bitorder="little")[: table.num_detectors]
        obs = np.unpackbits(table.observables[0], bitorder="little")[: table.num_observables]
        assert tuple(np.nonzero(det)[0]) == m.detectors
        assert tuple(np.nonzero(obs)[0]) == m.observables


def test_marginals_match_sampler():
    # first-order DEM prediction of per-detector firing rates vs empirical
    c = gen_memory(MemorySpec(PatchGeometry(3, 3), 3, "Z"))
    noisy = _noisy(c, p=0.002)
    d = build_dem(noisy)
    pred = np.zeros(d.num_detectors)
    for m in d.mechanisms:
        for det in m.detectors:
            pred[det] = pred[det] * (1 - m.probability) + m.probability * (1 - pred[det])
    shots = 200_000
    table = sample_batch(noisy, shots, seed=2)
    det = np.unpackbits(table.detectors, axis=1, bitorder="little")[:, : d.num_detectors]
    emp = det.mean(axis=0)
    sigma = np.sqrt(pred * (1 - pred) / shots)
    assert np.all(np.abs(emp - pred) < 5 * sigma + 1e-9)
