"""Detector error model: the decoder's prior, matched to realized rates.

Every Pauli component of every channel instance in the noisy circuit is
propagated through the downstream circuit to find the detectors and
observables it flips.  Components are decomposed into their X-type and
Z-type sub-faults (a Y is the product of both), which after the X/Z detector
bipartition become the graphlike parts used by matching; the correlation
between the two parts of one component is retained for correlated matching.

Propagation is batched: each sub-fault occupies one bit lane of the frame
simulator's word representation, so the whole enumeration is a single pass
over the circuit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import CHANNEL_NAMES, Circuit, Instruction, PauliProduct, Rec, parse_text

__all__ = [
    "ErrorMechanism",
    "DetectorErrorModel",
    "build_dem",
    "split_graphlike",
    "GraphlikeDEM",
    "emit_dem_text",
    "parse_dem_text",
]

_PAIR_LETTERS = [divmod(k + 1, 4) for k in range(15)]


@dataclass(frozen=True)
class ErrorMechanism:
    """One independent error mechanism of the model.

    ``parts`` holds the graphlike decomposition: one or two
    (detectors, observables) groups whose symmetric difference reproduces the
    total signature.
    """

    probability: float
    detectors: tuple[int, ...]
    observables: tuple[int, ...]
    parts: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    sources: tuple[tuple[int, int], ...] = ()  # (instruction index, component)


@dataclass
class DetectorErrorModel:
    mechanisms: list[ErrorMechanism]
    detector_coords: list[tuple[float, ...]]
    num_detectors: int
    num_observables: int

    def detector_sides(self) -> list[str]:
        """Per-detector X/Z side label from the 4th coordinate component."""
        sides = []
        for k, c in enumerate(self.detector_coords):
            if len(c) < 4 or c[3] not in (0.0, 1.0):
                raise ValueError(f"detector {k} carries no X/Z side label")
            sides.append("X" if c[3] == 1.0 else "Z")
        return sides

    def undetectable_faults(self) -> list[ErrorMechanism]:
        """Mechanisms flipping an observable while firing no detector."""
        return [m for m in self.mechanisms if m.observables and not m.detectors]


def _component_subfaults(inst: Instruction):
    """Yield (component_index, probability, [(qubit, has_x, has_z), ...])."""
    name = inst.name
    if name in ("X_ERROR", "Z_ERROR"):
        p = inst.args[0]
        for s, q in enumerate(inst.targets):
            yield s, p, [(q, name == "X_ERROR", name == "Z_ERROR")]
    elif name in ("PAULI_CHANNEL_1", "DEPOLARIZE1"):
        probs = inst.args if name == "PAULI_CHANNEL_1" else (inst.args[0] / 3,) * 3
        for s, q in enumerate(inst.targets):
            for c, (p, xz) in enumerate(zip(probs, ((1, 0), (1, 1), (0, 1)))):
                yield 3 * s + c, p, [(q, bool(xz[0]), bool(xz[1]))]
    elif name in ("PAULI_CHANNEL_2", "DEPOLARIZE2"):
        probs = inst.args if name == "PAULI_CHANNEL_2" else (inst.args[0] / 15,) * 15
        for s in range(0, len(inst.targets), 2):
            a, b = inst.targets[s], inst.targets[s + 1]
            for c, p in enumerate(probs):
                la, lb = _PAIR_LETTERS[c]
                terms = []
                for q, l in ((a, la), (b, lb)):
                    if l:
                        terms.append((q, l in (1, 2), l in (2, 3)))
                yield 15 * (s // 2) + c, p, terms


def build_dem(noisy: Circuit) -> DetectorErrorModel:
    """Propagate every single-fault Pauli component; merge equal signatures."""
    nq = noisy.qubit_count
    # Enumerate sub-faults: (instr_idx, comp_idx, prob, kind, terms)
    # kind 0 = X-type sub-fault, 1 = Z-type; a component owns one or both.
    components: list[tuple[int, int, float, list[int]]] = []  # lanes per component
    lanes: list[tuple[int, list[int]]] = []  # (instr position in stream, qubits) per lane
    lane_x: list[list[int]] = []  # qubits whose X frame the lane flips
    lane_z: list[list[int]] = []
    lane_site: list[int] = []
    for idx, inst in enumerate(noisy.instructions):
        if inst.name not in CHANNEL_NAMES:
            continue
        for comp, p, terms in _component_subfaults(inst):
            if p <= 0.0:
                continue
            xq = [q for q, hx, _ in terms if hx]
            zq = [q for q, _, hz in terms if hz]
            lane_ids = []
            if xq:
                lane_ids.append(len(lane_x))
                lane_x.append(xq)
                lane_z.append([])
                lane_site.append(idx)
            if zq:
                lane_ids.append(len(lane_x))
                lane_x.append([])
                lane_z.append(zq)
                lane_site.append(idx)
            components.append((idx, comp, p, lane_ids))
    n_lanes = len(lane_x)
    det_flips, obs_flips, det_coords = _propagate(noisy, n_lanes, lane_site, lane_x, lane_z)

    merged: dict[tuple, list] = {}
    order: list[tuple] = []
    for idx, comp, p, lane_ids in components:
        parts = []
        dets_total: set[int] = set()
        obs_total: set[int] = set()
        for lid in lane_ids:
            d = tuple(sorted(det_flips[lid]))
            o = tuple(sorted(obs_flips[lid]))
            if d or o:
                parts.append((d, o))
            dets_total ^= set(d)
            obs_total ^= set(o)
        if not dets_total and not obs_total:
            continue
        key = (tuple(sorted(dets_total)), tuple(sorted(obs_total)))
        if key not in merged:
            merged[key] = [0.0, tuple(parts), []]
            order.append(key)
        ent = merged[key]
        ent[0] = ent[0] * (1.0 - p) + p * (1.0 - ent[0])
        ent[2].append((idx, comp))
    mechanisms = [
        ErrorMechanism(
            probability=merged[key][0],
            detectors=key[0],
            observables=key[1],
            parts=merged[key][1],
            sources=tuple(merged[key][2]),
        )
        for key in sorted(order)
    ]
    return DetectorErrorModel(
        mechanisms=mechanisms,
        detector_coords=det_coords,
        num_detectors=noisy.detector_count,
        num_observables=noisy.observable_count,
    )


def _propagate(circuit: Circuit, n_lanes: int, lane_site, lane_x, lane_z):
    """Batched noiseless frame propagation with per-lane fault injection."""
    nq = circuit.qubit_count
    nw = max((n_lanes + 63) // 64, 1)
    xs = np.zeros((nq, nw), dtype=np.uint64)
    zs = np.zeros((nq, nw), dtype=np.uint64)
    rec: list[np.ndarray] = []
    det_flips: list[list[int]] = [[] for _ in range(n_lanes)]
    obs_flips: list[list[int]] = [[] for _ in range(n_lanes)]
    det_coords: list[tuple[float, ...]] = []
    inject: dict[int, list[int]] = {}
    for lid, site in enumerate(lane_site):
        inject.setdefault(site, []).append(lid)
    ndet = 0
    for idx, inst in enumerate(circuit.instructions):
        name = inst.name
        if name in CHANNEL_NAMES:
            for lid in inject.get(idx, ()):  # inject this channel's sub-faults
                w, bit = lid >> 6, np.uint64(1 << (lid & 63))
                for q in lane_x[lid]:
                    xs[q, w] ^= bit
                for q in lane_z[lid]:
                    zs[q, w] ^= bit
            continue
        if name in ("TICK", "QUBIT_COORDS"):
            continue
        if name == "H":
            qs = list(inst.targets)
            tmp = xs[qs].copy()
            xs[qs] = zs[qs]
            zs[qs] = tmp
        elif name == "S":
            qs = list(inst.targets)
            zs[qs] ^= xs[qs]
        elif name == "CX":
            c = list(inst.targets[0::2])
            t = list(inst.targets[1::2])
            xs[t] ^= xs[c]
            zs[c] ^= zs[t]
        elif name == "CZ":
            a = list(inst.targets[0::2])
            b = list(inst.targets[1::2])
            ta = xs[a].copy()
            zs[a] ^= xs[b]
            zs[b] ^= ta
        elif name in ("R", "RX"):
            qs = list(inst.targets)
            xs[qs] = 0
            zs[qs] = 0
        elif name == "M":
            for q in inst.targets:
                rec.append(xs[q].copy())
        elif name == "MX":
            for q in inst.targets:
                rec.append(zs[q].copy())
        elif name == "MPP":
            for prod in inst.targets:
                row = np.zeros(nw, dtype=np.uint64)
                for q, letter in prod.terms:
                    if letter in ("X", "Y"):
                        row ^= zs[q]
                    if letter in ("Z", "Y"):
                        row ^= xs[q]
                rec.append(row)
        elif name == "DETECTOR":
            row = np.zeros(nw, dtype=np.uint64)
            for tgt in inst.targets:
                row ^= rec[len(rec) + tgt.offset]
            for lid in _set_lanes(row):
                det_flips[lid].append(ndet)
            det_coords.append(tuple(inst.args))
            ndet += 1
        elif name == "OBSERVABLE_INCLUDE":
            row = np.zeros(nw, dtype=np.uint64)
            for tgt in inst.targets:
                row ^= rec[len(rec) + tgt.offset]
            k = int(inst.args[0])
            for lid in _set_lanes(row):
                if k in obs_flips[lid]:
                    obs_flips[lid].remove(k)
                else:
                    obs_flips[lid].append(k)
        else:  # pragma: no cover
            raise ValueError(f"cannot propagate through {name}")
    return det_flips, obs_flips, det_coords


def _set_lanes(row: np.ndarray):
    out = []
    for w in np.nonzero(row)[0]:
        v = int(row[w])
        while v:
            low = v & -v
            out.append((w << 6) + low.bit_length() - 1)
            v ^= low
    return out


# ---------------------------------------------------------------------------
# Graphlike split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitPart:
    dets: tuple[int, ...]  # at most 2, side-local global detector ids
    obs: tuple[int, ...]
    prob: float
    mech_id: int
    side: str


@dataclass
class GraphlikeDEM:
    z_parts: list[SplitPart]
    x_parts: list[SplitPart]
    links: list[tuple[int, int]]  # (index into z_parts, index into x_parts)
    sides: list[str]
    dem: DetectorErrorModel


def split_graphlike(dem: DetectorErrorModel) -> GraphlikeDEM:
    """Bipartition each mechanism into X-side and Z-side graph parts.

    A part with more than two detector flips is non-graphlike and reported
    with its originating fault location.
    """
    sides = dem.detector_sides()
    z_parts: list[SplitPart] = []
    x_parts: list[SplitPart] = []
    links: list[tuple[int, int]] = []
    for mid, mech in enumerate(dem.mechanisms):
        groups: dict[str, tuple[list[int], list[int]]] = {}
        for dets, obs in mech.parts:
            part_sides = {sides[d] for d in dets}
            if len(part_sides) > 1:
                raise ValueError(
                    f"non-graphlike mechanism at fault {mech.sources[:1]}: "
                    f"one sub-fault spans both detector sides"
                )
            side = part_sides.pop() if part_sides else ("Z" if not groups else "X")
            g = groups.setdefault(side, ([], []))
            for d in dets:
                g[0].append(d)
            for o in obs:
                if o in g[1]:
                    g[1].remove(o)
                else:
                    g[1].append(o)
        made: dict[str, int] = {}
        for side, (dets, obs) in groups.items():
            if len(dets) > 2:
                raise ValueError(
                    f"non-graphlike mechanism at fault {mech.sources[:1]}: "
                    f"{len(dets)} {side}-side detector flips"
                )
            part = SplitPart(tuple(sorted(dets)), tuple(sorted(obs)), mech.probability, mid, side)
            if side == "Z":
                made["Z"] = len(z_parts)
                z_parts.append(part)
            else:
                made["X"] = len(x_parts)
                x_parts.append(part)
        if "Z" in made and "X" in made:
            links.append((made["Z"], made["X"]))
    return GraphlikeDEM(z_parts, x_parts, links, sides, dem)


# ---------------------------------------------------------------------------
# DEM text interchange
# ---------------------------------------------------------------------------


def _fmt_prob(p: float) -> str:
    if p == int(p):
        return str(int(p))
    return repr(p)


def emit_dem_text(dem: DetectorErrorModel) -> str:
    lines = []
    for k, coords in enumerate(dem.detector_coords):
        body = ", ".join(_fmt_prob(c) for c in coords)
        lines.append(f"detector({body}) D{k}")
    for mech in dem.mechanisms:
        groups = []
        for dets, obs in mech.parts:
            toks = [f"D{d}" for d in dets] + [f"L{o}" for o in obs]
            groups.append(" ".join(toks))
        lines.append(f"error({_fmt_prob(mech.probability)}) " + " ^ ".join(groups))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_dem_text(text: str) -> DetectorErrorModel:
    mechanisms: list[ErrorMechanism] = []
    coords: dict[int, tuple[float, ...]] = {}
    ndet = 0
    nobs = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, tail = line.partition(")")
        name, _, arg = head.partition("(")
        name = name.strip()
        tail = tail.strip()
        if name == "detector":
            cs = tuple(float(a) for a in arg.split(","))
            toks = tail.split()
            if len(toks) != 1 or not toks[0].startswith("D"):
                raise ValueError(f"line {line_no}: detector line needs one D target")
            k = int(toks[0][1:])
            coords[k] = cs
            ndet = max(ndet, k + 1)
        elif name == "error":
            p = float(arg)
            if not 0.0 < p < 1.0:
                raise ValueError(f"line {line_no}: error probability out of range")
            parts = []
            dets_total: set[int] = set()
            obs_total: set[int] = set()
            for group in tail.split("^"):
                dets = []
                obs = []
                for tok in group.split():
                    if tok.startswith("D"):
                        dets.append(int(tok[1:]))
                    elif tok.startswith("L"):
                        obs.append(int(tok[1:]))
                    else:
                        raise ValueError(f"line {line_no}: bad target {tok!r}")
                parts.append((tuple(sorted(dets)), tuple(sorted(obs))))
                dets_total ^= set(dets)
                obs_total ^= set(obs)
                for d in dets:
                    ndet = max(ndet, d + 1)
                for o in obs:
                    nobs = max(nobs, o + 1)
            mechanisms.append(
                ErrorMechanism(
                    probability=p,
                    detectors=tuple(sorted(dets_total)),
                    observables=tuple(sorted(obs_total)),
                    parts=tuple(parts),
                )
            )
        else:
            raise ValueError(f"line {line_no}: unknown DEM line {name!r}")
    coord_list = [coords.get(k, ()) for k in range(ndet)]
    return DetectorErrorModel(mechanisms, coord_list, ndet, nobs)
