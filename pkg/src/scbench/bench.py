"""Sweep orchestration: adaptive stopping, LER metrics, result persistence.

A sweep point is (primitive instance, noise family at p, decoder); sampling
proceeds in fixed 2^16-shot chunks until either the shot cap or the error cap
trips.  When the standard shot cap is reached with fewer than 10 errors the
raised low-LER cap applies.  Identical configs and seeds reproduce identical
results byte for byte (wall_time excepted).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .circuit import Circuit
from .dem import build_dem
from .decoder import Decoder
from .framesim import CHUNK, CompiledCircuit
from .noise import FamilyConfig, apply_noise, circuit_context, make_builtin_family
from .primitives import (
    HadamardSpec,
    LatticeSurgerySpec,
    MemorySpec,
    PatchGeometry,
    PhaseGateSpec,
    gen_hadamard,
    gen_lattice_surgery,
    gen_memory,
    gen_phase_gate,
    spacetime_volume,
)

__all__ = [
    "StoppingRule",
    "ExperimentConfig",
    "RunResult",
    "run_experiment",
    "run_point",
    "per_round_ler",
    "wilson_ci",
    "relative_ler",
    "results_to_csv",
    "config_from_dict",
]

CSV_SCHEMA = "scbench.results.v1"
CSV_COLUMNS = [
    "primitive",
    "d_x",
    "d_z",
    "bridge",
    "rounds",
    "family",
    "p",
    "eta",
    "axis",
    "sigma",
    "noise_seed",
    "seed",
    "decoder",
    "observable",
    "shots",
    "errors",
    "ler_total",
    "ler_per_round",
    "ci_lo",
    "ci_hi",
    "rel_ler",
    "rel_ci_lo",
    "rel_ci_hi",
    "volume",
    "wall_time",
]


@dataclass(frozen=True)
class StoppingRule:
    max_shots: int = 10_000_000
    max_errors: int = 1_000
    low_ler_cap: int = 100_000_000
    low_ler_errors: int = 10  # raised cap applies below this count at max_shots

    def __post_init__(self):
        if min(self.max_shots, self.max_errors, self.low_ler_cap) <= 0:
            raise ValueError("stopping thresholds must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    primitive: str  # memory | hadamard | lattice-surgery | phase-gate
    family: FamilyConfig
    distances: tuple[int, ...]
    error_rates: tuple[float, ...]
    rounds: int | str = "d"
    basis: str = "Z"
    parity: str = "ZZ"
    bridge: int = 1
    d_x: int | None = None  # explicit rectangle; None follows the distance sweep
    d_z: int | None = None
    t_boundary: int | str = "auto"
    decoder: str = "uncorrelated"
    first_side: str = "Z"
    observable: int | str = "auto"
    stopping: StoppingRule = StoppingRule()
    seed: int = 0
    baseline: str = "auto"  # 'auto' computes the uniform reference in-run

    def __post_init__(self):
        if self.primitive not in ("memory", "hadamard", "lattice-surgery", "phase-gate"):
            raise ValueError(f"unknown primitive {self.primitive!r}")
        if not self.distances:
            raise ValueError("distance list must be non-empty")
        if self.decoder not in ("uncorrelated", "correlated"):
            raise ValueError("decoder must be uncorrelated or correlated")
        if isinstance(self.rounds, str) and self.rounds != "d":
            raise ValueError("rounds policy must be an integer or 'd'")


@dataclass
class RunResult:
    primitive: str
    d_x: int
    d_z: int
    bridge: int
    rounds: int
    family: str
    p: float
    eta: float | None
    axis: str | None
    sigma: float | None
    noise_seed: int | None
    seed: int
    decoder: str
    observable: int
    shots: int
    errors: int
    ler_total: float
    ler_per_round: float
    ci_lo: float
    ci_hi: float
    volume: int
    wall_time: float
    saturated: bool = False
    rel_ler: float | None = None
    rel_ci_lo: float | None = None
    rel_ci_hi: float | None = None


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def wilson_ci(errors: int, shots: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if shots <= 0:
        return (0.0, 1.0)
    phat = errors / shots
    denom = 1.0 + z * z / shots
    center = (phat + z * z / (2 * shots)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / shots + z * z / (4 * shots * shots))
    return (max(0.0, center - half), min(1.0, center + half))


def per_round_ler(p_total: float, rounds: int) -> tuple[float, bool]:
    """Convert a total failure probability to an equivalent per-round rate.

    Uses the independent-round relation e = (1 - (1-2P)^(1/t))/2, which is
    the identity at t=1 and invertible.  Saturated inputs (P > 1/2) report
    e = 1/2 with the flag set.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if not 0.0 <= p_total <= 1.0:
        raise ValueError("probability out of range")
    if p_total > 0.5:
        return 0.5, True
    return (1.0 - (1.0 - 2.0 * p_total) ** (1.0 / rounds)) / 2.0, False


@dataclass(frozen=True)
class RelativeLer:
    ratio: float | None  # None when the baseline rate is zero
    ci_lo: float | None
    ci_hi: float | None


def relative_ler(structured: RunResult, baseline: RunResult) -> RelativeLer:
    """Ratio of per-round LERs with independent-binomial CI propagation."""
    if baseline.family != "uniform":
        raise ValueError("baseline must use the uniform family")
    for f in ("primitive", "d_x", "d_z", "bridge", "rounds", "p"):
        if getattr(structured, f) != getattr(baseline, f):
            raise ValueError(f"mismatched {f} between structured run and baseline")
    if baseline.ler_per_round == 0.0:
        return RelativeLer(None, None, None)
    ratio = structured.ler_per_round / baseline.ler_per_round
    lo = structured.ci_lo / baseline.ci_hi if baseline.ci_hi > 0 else None
    hi = structured.ci_hi / baseline.ci_lo if baseline.ci_lo > 0 else math.inf
    return RelativeLer(ratio, lo, hi)


# ---------------------------------------------------------------------------
# Point construction
# ---------------------------------------------------------------------------


def _rounds_value(config: ExperimentConfig, d_x: int, d_z: int) -> int:
    if isinstance(config.rounds, int):
        return config.rounds
    # rounds = d: match the distance protecting the measured basis
    if config.primitive == "memory":
        return d_x if config.basis == "Z" else d_z
    return min(d_x, d_z)


def build_spec(config: ExperimentConfig, distance: int):
    d_x = config.d_x if config.d_x is not None else distance
    d_z = config.d_z if config.d_z is not None else distance
    geom = PatchGeometry(d_x, d_z)
    r = _rounds_value(config, d_x, d_z)
    if config.primitive == "memory":
        return MemorySpec(geom, rounds=r, basis=config.basis)
    if config.primitive == "hadamard":
        return HadamardSpec(geom, t_pre=r, t_post=r, basis=config.basis)
    if config.primitive == "lattice-surgery":
        return LatticeSurgerySpec(
            geom, bridge=config.bridge, t_pre=r, t_merge=r, t_post=r, parity=config.parity
        )
    if d_x != d_z:
        raise ValueError("phase gate requires square patches")
    tb = (d_x + 1) // 2 if config.t_boundary == "auto" else int(config.t_boundary)
    return PhaseGateSpec(d=d_x, bridge=config.bridge, t_merge=r, t_boundary=tb)


def generate(spec) -> Circuit:
    if isinstance(spec, MemorySpec):
        return gen_memory(spec)
    if isinstance(spec, HadamardSpec):
        return gen_hadamard(spec)
    if isinstance(spec, LatticeSurgerySpec):
        return gen_lattice_surgery(spec)
    return gen_phase_gate(spec)


def total_rounds(spec) -> int:
    """Temporal extent used for the per-round conversion (matches volume)."""
    if isinstance(spec, MemorySpec):
        return spec.rounds
    if isinstance(spec, HadamardSpec):
        return spec.t_pre + spec.t_post + 1
    if isinstance(spec, LatticeSurgerySpec):
        return spec.t_pre + spec.t_merge + spec.t_post
    return spec.t_merge + spec.t_boundary


def _default_observable(spec) -> int:
    # Lattice surgery benchmarks the joint parity; others have one observable.
    return 2 if isinstance(spec, LatticeSurgerySpec) else 0


def run_point(
    config: ExperimentConfig, distance: int, p: float, family: FamilyConfig | None = None
) -> RunResult:
    """Generate, noisify, decode, and sample one sweep point to stopping."""
    t_start = time.perf_counter()
    spec = build_spec(config, distance)
    circuit = generate(spec)
    fam = replace(family or config.family, p=p)
    assignment = make_builtin_family(fam, circuit_context(circuit))
    noisy = apply_noise(circuit, assignment)
    dem = build_dem(noisy)
    decoder = Decoder(dem, mode=config.decoder, first_side=config.first_side)
    comp = CompiledCircuit(noisy)
    obs = _default_observable(spec) if config.observable == "auto" else int(config.observable)

    stopping = config.stopping
    shots = errors = 0
    cap = stopping.max_shots
    chunk_index = 0
    while shots < cap and errors < stopping.max_errors:
        det, ob = comp.run_chunk(config.seed, chunk_index)
        n = min(CHUNK, cap - shots)
        bits = (
            np.unpackbits(det.view(np.uint8), axis=1, bitorder="little")[:, :n].T.astype(bool)
            if det.shape[0]
            else np.zeros((n, 0), dtype=bool)
        )
        actual = np.unpackbits(ob.view(np.uint8), axis=1, bitorder="little")[obs, :n].astype(
            np.int64
        )
        pred = decoder.predict_bits(bits)
        errors += int(np.sum(((pred >> obs) & 1) != actual))
        shots += n
        chunk_index += 1
        if shots >= stopping.max_shots and errors < stopping.low_ler_errors:
            cap = stopping.low_ler_cap
    ler = errors / shots
    lo, hi = wilson_ci(errors, shots)
    rounds = total_rounds(spec)
    eps, saturated = per_round_ler(min(ler, 1.0), rounds)
    eps_lo, _ = per_round_ler(min(lo, 0.5), rounds)
    eps_hi, _ = per_round_ler(min(hi, 0.5), rounds)
    g = spec.geometry if hasattr(spec, "geometry") else PatchGeometry(spec.d, spec.d)
    return RunResult(
        primitive=config.primitive,
        d_x=g.d_x,
        d_z=g.d_z,
        bridge=getattr(spec, "bridge", 0),
        rounds=rounds,
        family=fam.family,
        p=p,
        eta=fam.eta,
        axis=fam.axis,
        sigma=fam.sigma,
        noise_seed=fam.seed,
        seed=config.seed,
        decoder=config.decoder,
        observable=obs,
        shots=shots,
        errors=errors,
        ler_total=ler,
        ler_per_round=eps,
        ci_lo=eps_lo,
        ci_hi=eps_hi,
        volume=spacetime_volume(spec),
        wall_time=time.perf_counter() - t_start,
        saturated=saturated,
    )


def _run_point_args(args):
    config_dict, d, p, use_family = args
    config = config_from_dict(config_dict)
    fam = config.family if use_family else FamilyConfig("uniform", p)
    return run_point(config, d, p, family=fam)


def run_experiment(config: ExperimentConfig) -> list[RunResult]:
    """Run the full sweep; appends the uniform baseline and relative LER when
    the config's family is structured and baseline == 'auto'."""
    points = [(d, p) for d in config.distances for p in config.error_rates]
    need_baseline = config.baseline == "auto" and config.family.family != "uniform"
    tasks = [(_config_to_dict(config), d, p, True) for d, p in points]
    if need_baseline:
        tasks += [(_config_to_dict(config), d, p, False) for d, p in points]
    workers = int(os.environ.get("SCBENCH_WORKERS", "1"))
    if workers > 1 and len(tasks) > 1:
        import multiprocessing as mp

        with mp.Pool(workers) as pool:
            results = pool.map(_run_point_args, tasks)
    else:
        results = [_run_point_args(t) for t in tasks]
    main = results[: len(points)]
    if need_baseline:
        base = results[len(points):]
        for r, b in zip(main, base):
            rel = relative_ler(r, b)
            r.rel_ler, r.rel_ci_lo, r.rel_ci_hi = rel.ratio, rel.ci_lo, rel.ci_hi
        return main + base
    return main


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def results_to_csv(results: list[RunResult], deterministic_time: bool = False) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={CSV_SCHEMA}\n")
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in results:
        row = {k: getattr(r, k) for k in CSV_COLUMNS if k != "wall_time"}
        row["wall_time"] = 0.0 if deterministic_time else round(r.wall_time, 3)
        for k, v in row.items():
            if v is None:
                row[k] = ""
        writer.writerow(row)
    return buf.getvalue()


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    fam_raw = data.pop("family", None)
    if fam_raw is None:
        raise ValueError("config is missing the noise 'family' table")
    if "family" not in fam_raw:
        raise ValueError("noise family table is missing the 'family' name")
    fam = FamilyConfig(
        family=fam_raw["family"],
        p=fam_raw.get("p", 0.0),
        eta=fam_raw.get("eta"),
        axis=fam_raw.get("axis"),
        sigma=fam_raw.get("sigma"),
        seed=fam_raw.get("seed"),
    )
    stopping = StoppingRule(**data.pop("stopping", {}))
    known = {
        "primitive",
        "distances",
        "error_rates",
        "rounds",
        "basis",
        "parity",
        "bridge",
        "d_x",
        "d_z",
        "t_boundary",
        "decoder",
        "first_side",
        "observable",
        "seed",
        "baseline",
    }
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "distances" in data:
        data["distances"] = tuple(data["distances"])
    if "error_rates" in data:
        data["error_rates"] = tuple(data["error_rates"])
    return ExperimentConfig(family=fam, stopping=stopping, **data)


def _config_to_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["family"] = {k: v for k, v in d["family"].items() if v is not None}
    d["stopping"] = asdict(config.stopping)
    return d


def load_config(path: str) -> ExperimentConfig:
    with open(path) as f:
        return config_from_dict(json.load(f))
