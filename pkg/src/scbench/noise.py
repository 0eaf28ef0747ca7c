"""Pauli channel parameterizations, built-in noise families, and the noisifier.

A :class:`NoiseAssignment` binds channel parameters to components (qubits and
interaction pairs) at four granularities: global, per-component, per-round,
and per-(component, round); more specific entries shadow less specific ones
field by field.  ``apply_noise`` converts a noiseless circuit into a noisy one
by inserting channels at the standard locations: after gates and resets,
before measurements, and on idle windows derived from tick resolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .circuit import (
    CHANNEL_NAMES,
    Circuit,
    GATE1_NAMES,
    GATE2_NAMES,
    Instruction,
    MEASURE_NAMES,
    RESET_NAMES,
)

__all__ = [
    "PauliChannel1",
    "PauliChannel2",
    "SpamSpec",
    "CoherenceSpec",
    "ParamSet",
    "NoiseAssignment",
    "FamilyConfig",
    "CircuitContext",
    "circuit_context",
    "make_builtin_family",
    "pta_idle_channel",
    "resolve_ticks",
    "apply_noise",
]

# Canonical two-qubit Pauli order (matches the interchange channel order):
# index k in 0..14 encodes letters (a, b) = divmod(k + 1, 4) with 0=I 1=X 2=Y 3=Z.
PAIR_LETTERS = [divmod(k + 1, 4) for k in range(15)]


@dataclass(frozen=True)
class PauliChannel1:
    px: float
    py: float
    pz: float

    def __post_init__(self):
        for v in (self.px, self.py, self.pz):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"channel probability out of range: {v}")
        if self.px + self.py + self.pz > 1.0 + 1e-12:
            raise ValueError("single-qubit channel probabilities sum past 1")

    @property
    def total(self) -> float:
        return self.px + self.py + self.pz

    def args(self) -> tuple[float, float, float]:
        return (self.px, self.py, self.pz)


@dataclass(frozen=True)
class PauliChannel2:
    probs: tuple[float, ...]  # 15 entries, PAIR_LETTERS order

    def __post_init__(self):
        if len(self.probs) != 15:
            raise ValueError("two-qubit channel takes 15 probabilities")
        for v in self.probs:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"channel probability out of range: {v}")
        if sum(self.probs) > 1.0 + 1e-12:
            raise ValueError("two-qubit channel probabilities sum past 1")

    @property
    def total(self) -> float:
        return sum(self.probs)

    def args(self) -> tuple[float, ...]:
        return tuple(self.probs)


@dataclass(frozen=True)
class SpamSpec:
    p_reset_z: float
    p_reset_x: float
    p_meas_z: float
    p_meas_x: float

    def __post_init__(self):
        for v in (self.p_reset_z, self.p_reset_x, self.p_meas_z, self.p_meas_x):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"SPAM probability out of range: {v}")


@dataclass(frozen=True)
class CoherenceSpec:
    """Relaxation/dephasing times in ns; idle channels come from the PTA."""

    t1: float
    t2: float

    def __post_init__(self):
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError("coherence times must be positive")
        if self.t2 > 2 * self.t1 + 1e-9:
            raise ValueError("T2 must not exceed 2*T1")


def pta_idle_channel(t: float, t1: float, t2: float) -> PauliChannel1:
    """Pauli-twirled amplitude-damping/dephasing idle channel.

    px = py = (1 - exp(-t/T1))/4 and pz = (1 - exp(-t/T2))/2 - px.
    """
    if t < 0:
        raise ValueError("idle duration must be non-negative")
    CoherenceSpec(t1, t2)
    pxy = (1.0 - math.exp(-t / t1)) / 4.0
    pz = (1.0 - math.exp(-t / t2)) / 2.0 - pxy
    if pz < 0:
        pz = 0.0 if pz > -1e-15 else pz
    return PauliChannel1(pxy, pxy, pz)


@dataclass(frozen=True)
class ParamSet:
    """Partial parameter set; None fields fall through to a coarser tier."""

    gate1: PauliChannel1 | None = None
    gate2: PauliChannel2 | None = None
    spam: SpamSpec | None = None
    idle: PauliChannel1 | CoherenceSpec | None = None


# A component key is a qubit index (int) or a canonical (lo, hi) pair tuple.


def pair_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass
class NoiseAssignment:
    """Four-tier lookup from (component, round) to channel parameters."""

    base: ParamSet
    spatial: dict = None
    temporal: dict = None
    spatio_temporal: dict = None
    durations: dict[str, float] | None = None  # instruction kind -> duration

    def __post_init__(self):
        self.spatial = dict(self.spatial or {})
        self.temporal = dict(self.temporal or {})
        self.spatio_temporal = dict(self.spatio_temporal or {})

    def _field(self, name: str, component, round_index: int):
        for table, key in (
            (self.spatio_temporal, (component, round_index)),
            (self.temporal, round_index),
            (self.spatial, component),
        ):
            entry = table.get(key)
            if entry is not None:
                v = getattr(entry, name)
                if v is not None:
                    return v
        v = getattr(self.base, name)
        if v is None:
            raise KeyError(f"no {name} parameters for component {component} round {round_index}")
        return v

    def gate1(self, qubit: int, round_index: int) -> PauliChannel1:
        return self._field("gate1", qubit, round_index)

    def gate2(self, a: int, b: int, round_index: int) -> PauliChannel2:
        return self._field("gate2", pair_key(a, b), round_index)

    def spam(self, qubit: int, round_index: int) -> SpamSpec:
        return self._field("spam", qubit, round_index)

    def idle(self, qubit: int, round_index: int, window: float) -> PauliChannel1:
        v = self._field("idle", qubit, round_index)
        if isinstance(v, CoherenceSpec):
            return pta_idle_channel(window, v.t1, v.t2)
        return v


# ---------------------------------------------------------------------------
# Built-in families
# ---------------------------------------------------------------------------

FAMILIES = (
    "uniform",
    "biased",
    "measurement-biased",
    "non-uniform-spatial",
    "non-uniform-spatio-temporal",
)


@dataclass(frozen=True)
class FamilyConfig:
    family: str
    p: float
    eta: float | None = None
    axis: str | None = None
    sigma: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not 0.0 <= self.p <= 0.5:
            raise ValueError("base probability must be in [0, 0.5]")
        need = {
            "uniform": (),
            "biased": ("eta", "axis"),
            "measurement-biased": ("eta",),
            "non-uniform-spatial": ("sigma", "seed"),
            "non-uniform-spatio-temporal": ("sigma", "seed"),
        }[self.family]
        for f in ("eta", "axis", "sigma", "seed"):
            v = getattr(self, f)
            if f in need and v is None:
                raise ValueError(f"family {self.family!r} requires parameter {f!r}")
            if f not in need and v is not None:
                raise ValueError(f"family {self.family!r} does not take parameter {f!r}")
        if self.eta is not None and self.eta < 1:
            raise ValueError("bias factor eta must be >= 1")
        if self.axis is not None and self.axis not in ("X", "Z"):
            raise ValueError("bias axis must be X or Z")
        if self.sigma is not None and self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class CircuitContext:
    """Component/round extents a NoiseAssignment must cover."""

    qubits: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]
    rounds: int


def circuit_context(circuit: Circuit) -> CircuitContext:
    qubits = set(range(circuit.qubit_count))
    pairs = set()
    rounds = 0
    in_reset_layer = False
    for inst in circuit.instructions:
        if inst.name == "TICK":
            in_reset_layer = False
        elif inst.name in RESET_NAMES and not in_reset_layer:
            rounds += 1
            in_reset_layer = True
        if inst.name in GATE2_NAMES:
            for i in range(0, len(inst.targets), 2):
                pairs.add(pair_key(inst.targets[i], inst.targets[i + 1]))
    return CircuitContext(tuple(sorted(qubits)), tuple(sorted(pairs)), max(rounds, 1))


def _full_set(p: float) -> ParamSet:
    return ParamSet(
        gate1=PauliChannel1(p / 3, p / 3, p / 3),
        gate2=PauliChannel2((p / 15,) * 15),
        spam=SpamSpec(p, p, p, p),
        idle=PauliChannel1(p / 3, p / 3, p / 3),
    )


def _biased_set(p: float, eta: float, axis: str) -> ParamSet:
    lo = p / (eta + 2)
    hi = eta * p / (eta + 2)
    gate1 = PauliChannel1(lo, lo, hi) if axis == "Z" else PauliChannel1(hi, lo, lo)
    axis_code = 3 if axis == "Z" else 1
    lo2 = p / (12 + 3 * eta)
    hi2 = eta * p / (12 + 3 * eta)
    probs = tuple(
        hi2 if set(PAIR_LETTERS[k]) <= {0, axis_code} else lo2 for k in range(15)
    )
    aligned = 2 * p / (1 + eta)
    ortho = 2 * eta * p / (1 + eta)
    spam = (
        SpamSpec(aligned, ortho, aligned, ortho)
        if axis == "Z"
        else SpamSpec(ortho, aligned, ortho, aligned)
    )
    return ParamSet(gate1=gate1, gate2=PauliChannel2(probs), spam=spam, idle=gate1)


def _nonuniform_delta(seed: int, component, round_index: int | None) -> float:
    if isinstance(component, tuple):
        key2 = (2 << 60) | (component[0] << 40) | (component[1] << 20)
    else:
        key2 = (1 << 60) | (component << 20)
    key2 |= (0 if round_index is None else round_index + 1)
    rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), key2]))
    return float(rng.standard_normal())


def _nonuniform_set(p: float, sigma: float, seed: int, component, round_index):
    delta = sigma * _nonuniform_delta(seed, component, round_index)
    pc = min(max(p * (1.0 + delta), 0.0), 0.5)
    if isinstance(component, tuple):
        return ParamSet(gate2=PauliChannel2((pc / 15,) * 15))
    return ParamSet(
        gate1=PauliChannel1(pc / 3, pc / 3, pc / 3),
        spam=SpamSpec(pc, pc, pc, pc),
        idle=PauliChannel1(pc / 3, pc / 3, pc / 3),
    )


def make_builtin_family(config: FamilyConfig, context: CircuitContext | None = None) -> NoiseAssignment:
    """Instantiate one of the built-in noise families over a circuit context."""
    if config.family == "uniform":
        return NoiseAssignment(base=_full_set(config.p))
    if config.family == "biased":
        return NoiseAssignment(base=_biased_set(config.p, config.eta, config.axis))
    if config.family == "measurement-biased":
        sp = config.eta * config.p
        base = replace(_full_set(config.p), spam=SpamSpec(sp, sp, sp, sp))
        return NoiseAssignment(base=base)
    if context is None:
        raise ValueError("non-uniform families need a circuit context")
    components = list(context.qubits) + list(context.pairs)
    p, sigma, seed = config.p, config.sigma, int(config.seed)
    if config.family == "non-uniform-spatial":
        spatial = {c: _nonuniform_set(p, sigma, seed, c, None) for c in components}
        return NoiseAssignment(base=_full_set(p), spatial=spatial)
    st = {
        (c, r): _nonuniform_set(p, sigma, seed, c, r)
        for c in components
        for r in range(context.rounds)
    }
    return NoiseAssignment(base=_full_set(p), spatio_temporal=st)


# ---------------------------------------------------------------------------
# Tick resolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TickWindow:
    duration: float
    idle: tuple[tuple[int, float], ...]  # (qubit, idle window)


def _instruction_qubits(inst: Instruction) -> list[int]:
    out = []
    for t in inst.targets:
        if isinstance(t, int):
            out.append(t)
        elif hasattr(t, "terms"):
            out.extend(q for q, _ in t.terms)
    return out


def _layers(circuit: Circuit) -> list[list[Instruction]]:
    layers: list[list[Instruction]] = [[]]
    for inst in circuit.instructions:
        if inst.name == "TICK":
            layers.append([])
        else:
            layers[-1].append(inst)
    return layers


def resolve_ticks(circuit: Circuit, durations: dict[str, float] | None = None) -> list[TickWindow]:
    """Tick schedule: per tick, its duration and each qubit's idle window.

    The tick duration is the longest duration among that tick's operations; a
    qubit active for a shorter operation idles for the remainder, and a fully
    inactive qubit idles for the whole tick.  Ticks with no operations have
    duration zero and no idle windows.
    """
    durations = durations or {}
    layers = _layers(circuit)
    op_layers: list[list[tuple[Instruction, list[int]]]] = []
    for li, layer in enumerate(layers):
        ops = []
        seen: set[int] = set()
        for inst in layer:
            if inst.name in CHANNEL_NAMES or inst.name in ("DETECTOR", "OBSERVABLE_INCLUDE", "QUBIT_COORDS"):
                continue
            qs = _instruction_qubits(inst)
            for q in qs:
                if q in seen:
                    raise ValueError(f"scheduling conflict: qubit {q} used twice in tick {li}")
                seen.add(q)
            ops.append((inst, qs))
        op_layers.append(ops)
    out = []
    all_qubits = range(circuit.qubit_count)
    for li, ops in enumerate(op_layers):
        if not ops:
            out.append(TickWindow(0.0, ()))
            continue
        dur = max(durations.get(inst.name, 1.0) for inst, _ in ops)
        busy: dict[int, float] = {}
        for inst, qs in ops:
            d = durations.get(inst.name, 1.0)
            for q in qs:
                busy[q] = d
        idle = []
        for q in all_qubits:
            window = dur - busy.get(q, 0.0)
            if window > 0:
                idle.append((q, window))
        out.append(TickWindow(dur, tuple(idle)))
    return out


# ---------------------------------------------------------------------------
# Noise application
# ---------------------------------------------------------------------------


def _group_targets(pairs: list[tuple[int, tuple[float, ...]]]) -> list[tuple[tuple[float, ...], list[int]]]:
    """Group (target, args) by identical args, preserving first-seen order."""
    groups: dict[tuple[float, ...], list[int]] = {}
    order: list[tuple[float, ...]] = []
    for tgt, args in pairs:
        if args not in groups:
            groups[args] = []
            order.append(args)
        groups[args].append(tgt)
    return [(args, groups[args]) for args in order]


def apply_noise(circuit: Circuit, assignment: NoiseAssignment) -> Circuit:
    """Insert channels into a noiseless circuit per the assignment.

    Gate channels follow their gate, reset flips follow the reset, measurement
    flips precede the readout, and idle channels are appended at the end of
    each tick.  MPP instructions stay noiseless (they are reserved for the
    noiseless logical readout).  Round indices for tier lookups advance at
    each reset layer.
    """
    for inst in circuit.instructions:
        if inst.name in CHANNEL_NAMES:
            raise ValueError("apply_noise expects a noiseless circuit")
    ticks = resolve_ticks(circuit, assignment.durations)
    layers = _layers(circuit)
    out: list[Instruction] = []
    rnd = -1
    for li, layer in enumerate(layers):
        if li:
            out.append(Instruction("TICK"))
        if any(inst.name in RESET_NAMES for inst in layer):
            rnd += 1
        r = max(rnd, 0)
        for inst in layer:
            name = inst.name
            if name in MEASURE_NAMES:
                flip = "X_ERROR" if name == "M" else "Z_ERROR"
                rates = [
                    (q, (assignment.spam(q, r).p_meas_z if name == "M" else assignment.spam(q, r).p_meas_x,))
                    for q in inst.targets
                ]
                for args, qs in _group_targets(rates):
                    out.append(Instruction(flip, tuple(qs), args))
                out.append(inst)
            elif name in RESET_NAMES:
                out.append(inst)
                flip = "X_ERROR" if name == "R" else "Z_ERROR"
                rates = [
                    (q, (assignment.spam(q, r).p_reset_z if name == "R" else assignment.spam(q, r).p_reset_x,))
                    for q in inst.targets
                ]
                for args, qs in _group_targets(rates):
                    out.append(Instruction(flip, tuple(qs), args))
            elif name in GATE1_NAMES:
                out.append(inst)
                rates = [(q, assignment.gate1(q, r).args()) for q in inst.targets]
                for args, qs in _group_targets(rates):
                    out.append(Instruction("PAULI_CHANNEL_1", tuple(qs), args))
            elif name in GATE2_NAMES:
                out.append(inst)
                pair_rates = []
                for i in range(0, len(inst.targets), 2):
                    a, b = inst.targets[i], inst.targets[i + 1]
                    pair_rates.append(((a, b), assignment.gate2(a, b, r).args()))
                groups: dict[tuple[float, ...], list[int]] = {}
                order = []
                for (a, b), args in pair_rates:
                    if args not in groups:
                        groups[args] = []
                        order.append(args)
                    groups[args] += [a, b]
                for args in order:
                    out.append(Instruction("PAULI_CHANNEL_2", tuple(groups[args]), args))
            else:
                out.append(inst)
        idle_rates = []
        for q, window in ticks[li].idle:
            ch = assignment.idle(q, r, window)
            idle_rates.append((q, ch.args()))
        for args, qs in _group_targets(idle_rates):
            out.append(Instruction("PAULI_CHANNEL_1", tuple(qs), args))
    return Circuit(out)
