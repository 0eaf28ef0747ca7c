"""Noiseless annotated circuit generators for the four logical primitives.

Every generator emits a circuit wired so that all detectors are deterministic
zero-parities and every observable is a deterministic parity of measurement
records (verified against the tableau oracle in the test suite).  Rounds are
unrolled; each layer (resets, the four entangling layers, measurements) is
closed by a TICK so the noise pipeline can account for idle windows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .circuit import Circuit, Instruction, PauliProduct, Rec
from .layout import Check, Pos, Rect, schedule_offsets

__all__ = [
    "PatchGeometry",
    "MemorySpec",
    "HadamardSpec",
    "LatticeSurgerySpec",
    "PhaseGateSpec",
    "gen_memory",
    "gen_hadamard",
    "gen_lattice_surgery",
    "gen_phase_gate",
    "spacetime_volume",
]


def _conj(basis: str) -> str:
    return "X" if basis == "Z" else "Z"


@dataclass(frozen=True)
class PatchGeometry:
    """Patch dimensions: minimal logical-X weight d_x, logical-Z weight d_z."""

    d_x: int
    d_z: int
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.d_x < 2 or self.d_z < 2:
            raise ValueError("patch distances must be >= 2")

    def rect(self) -> Rect:
        return Rect(self.origin[0], self.origin[1], self.d_z, self.d_x)


@dataclass(frozen=True)
class MemorySpec:
    geometry: PatchGeometry
    rounds: int
    basis: str = "Z"

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.basis not in ("X", "Z"):
            raise ValueError("basis must be X or Z")


@dataclass(frozen=True)
class HadamardSpec:
    geometry: PatchGeometry
    t_pre: int
    t_post: int
    basis: str = "Z"

    def __post_init__(self):
        if self.t_pre < 1 or self.t_post < 1:
            raise ValueError("t_pre and t_post must be >= 1")
        if self.basis not in ("X", "Z"):
            raise ValueError("basis must be X or Z")


@dataclass(frozen=True)
class LatticeSurgerySpec:
    """Two identical patches joined through a bridge of ``bridge`` data rows
    (M_ZZ) or columns (M_XX)."""

    geometry: PatchGeometry
    bridge: int
    t_pre: int
    t_merge: int
    t_post: int
    parity: str = "ZZ"

    def __post_init__(self):
        if self.bridge < 1:
            raise ValueError("bridge length must be >= 1")
        if min(self.t_pre, self.t_merge, self.t_post) < 1:
            raise ValueError("round counts must be >= 1")
        if self.parity not in ("ZZ", "XX"):
            raise ValueError("parity must be ZZ or XX")


@dataclass(frozen=True)
class PhaseGateSpec:
    """Lattice-surgery S gate on square patches; no pre-merge rounds."""

    d: int
    bridge: int
    t_merge: int
    t_boundary: int

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if self.bridge < 1 or self.t_merge < 1 or self.t_boundary < 0:
            raise ValueError("bad round/bridge parameters")


# ---------------------------------------------------------------------------
# Shared emission machinery
# ---------------------------------------------------------------------------


class _Builder:
    def __init__(self, positions: list[Pos]):
        order = sorted(set(positions), key=lambda p: (p[1], p[0]))
        self.index = {pos: k for k, pos in enumerate(order)}
        self.inst: list[Instruction] = []
        self.nmeas = 0
        for pos in order:
            self.inst.append(
                Instruction("QUBIT_COORDS", (self.index[pos],), (pos[0] / 2, pos[1] / 2))
            )
        self.tick()

    def q(self, pos: Pos) -> int:
        return self.index[pos]

    def op(self, name: str, positions: list[Pos], args: tuple = ()):
        if positions:
            self.inst.append(Instruction(name, tuple(self.q(p) for p in positions), args))

    def op_pairs(self, name: str, pairs: list[tuple[Pos, Pos]]):
        if pairs:
            flat = []
            for a, b in pairs:
                flat += [self.q(a), self.q(b)]
            self.inst.append(Instruction(name, tuple(flat)))

    def tick(self):
        self.inst.append(Instruction("TICK"))

    def measure(self, name: str, positions: list[Pos]) -> dict[Pos, int]:
        """Append one measurement instruction; returns absolute record indices."""
        ordered = sorted(positions, key=lambda p: self.index[p])
        recs = {}
        for p in ordered:
            recs[p] = self.nmeas
            self.nmeas += 1
        self.op(name, ordered)
        return recs

    def mpp(self, terms: list[tuple[Pos, str]], invert: bool = False) -> int:
        terms = sorted(terms, key=lambda t: self.index[t[0]])
        prod = PauliProduct(tuple((self.q(p), letter) for p, letter in terms), invert=invert)
        self.inst.append(Instruction("MPP", (prod,)))
        rec = self.nmeas
        self.nmeas += 1
        return rec

    def detector(self, abs_recs: list[int], coord: tuple):
        targets = tuple(Rec(r - self.nmeas) for r in sorted(abs_recs, reverse=True))
        self.inst.append(Instruction("DETECTOR", targets, tuple(coord)))

    def observable(self, idx: int, abs_recs: list[int]):
        targets = tuple(Rec(r - self.nmeas) for r in sorted(abs_recs, reverse=True))
        self.inst.append(Instruction("OBSERVABLE_INCLUDE", targets, (float(idx),)))

    def circuit(self) -> Circuit:
        # Drop a trailing TICK so circuits end on their last operation layer.
        inst = list(self.inst)
        while inst and inst[-1].name == "TICK":
            inst.pop()
        return Circuit(inst)


def _det_coord(check: Check, t: int) -> tuple:
    side = 1.0 if check.basis == "X" else 0.0
    return (check.pos[0] / 2, check.pos[1] / 2, float(t), side)


def _se_round(
    b: _Builder,
    checks: list[Check],
    extra_reset_z: list[Pos] = (),
    extra_reset_x: list[Pos] = (),
) -> dict[Pos, int]:
    """Emit one syndrome-extraction round; returns check measurement records."""
    rz = [c.pos for c in checks if c.basis == "Z"] + list(extra_reset_z)
    rx = [c.pos for c in checks if c.basis == "X"] + list(extra_reset_x)
    b.op("R", sorted(rz, key=lambda p: b.index[p]))
    b.op("RX", sorted(rx, key=lambda p: b.index[p]))
    b.tick()
    ordered = sorted(checks, key=lambda c: b.index[c.pos])
    for layer in range(4):
        pairs = []
        for c in ordered:
            dx, dy = schedule_offsets(c.pos)[layer]
            dpos = (c.pos[0] + dx, c.pos[1] + dy)
            if dpos in c.data:
                pairs.append((c.pos, dpos) if c.basis == "X" else (dpos, c.pos))
        b.op_pairs("CX", pairs)
        b.tick()
    recs = {}
    recs.update(b.measure("M", [c.pos for c in checks if c.basis == "Z"]))
    recs.update(b.measure("MX", [c.pos for c in checks if c.basis == "X"]))
    return recs


def _final_readout(
    b: _Builder,
    basis: str,
    data: list[Pos],
    checks: list[Check],
    last: dict[Pos, int],
    t: int,
) -> dict[Pos, int]:
    """Transversal data measurement plus reconstruction detectors."""
    recs = b.measure("M" if basis == "Z" else "MX", data)
    for c in sorted(checks, key=lambda c: b.index[c.pos]):
        if c.basis == basis:
            b.detector([last[c.pos]] + [recs[p] for p in c.data], _det_coord(c, t))
    return recs


# ---------------------------------------------------------------------------
# Memory
# ---------------------------------------------------------------------------


def gen_memory(spec: MemorySpec) -> Circuit:
    rect = spec.geometry.rect()
    checks = rect.checks()
    data = rect.data_positions()
    b = _Builder(data + [c.pos for c in checks])
    last: dict[Pos, int] = {}
    for r in range(spec.rounds):
        extra_z = data if (r == 0 and spec.basis == "Z") else []
        extra_x = data if (r == 0 and spec.basis == "X") else []
        recs = _se_round(b, checks, extra_z, extra_x)
        for c in sorted(checks, key=lambda c: b.index[c.pos]):
            if r == 0:
                if c.basis == spec.basis:
                    b.detector([recs[c.pos]], _det_coord(c, 0))
            else:
                b.detector([recs[c.pos], last[c.pos]], _det_coord(c, r))
        last = recs
        b.tick()
    data_recs = _final_readout(b, spec.basis, data, checks, last, spec.rounds)
    b.observable(0, [data_recs[p] for p in rect.logical(spec.basis)])
    return b.circuit()


# ---------------------------------------------------------------------------
# Transversal Hadamard
# ---------------------------------------------------------------------------


def gen_hadamard(spec: HadamardSpec) -> Circuit:
    rect = spec.geometry.rect()
    pre_checks = rect.checks()
    post_checks = rect.checks(swap_basis=True)
    data = rect.data_positions()
    b = _Builder(data + [c.pos for c in pre_checks])
    last: dict[Pos, int] = {}

    def pre_coord(c: Check, t: int) -> tuple:
        # Side labels follow each plaquette's post-layer role so that error
        # chains crossing the transversal layer stay on one side of the
        # detector bipartition.
        side = 0.0 if c.basis == "X" else 1.0
        return (c.pos[0] / 2, c.pos[1] / 2, float(t), side)

    for r in range(spec.t_pre):
        extra_z = data if (r == 0 and spec.basis == "Z") else []
        extra_x = data if (r == 0 and spec.basis == "X") else []
        recs = _se_round(b, pre_checks, extra_z, extra_x)
        for c in sorted(pre_checks, key=lambda c: b.index[c.pos]):
            if r == 0:
                if c.basis == spec.basis:
                    b.detector([recs[c.pos]], pre_coord(c, 0))
            else:
                b.detector([recs[c.pos], last[c.pos]], pre_coord(c, r))
        last = recs
        b.tick()
    b.op("H", data)
    b.tick()
    for r in range(spec.t_post):
        recs = _se_round(b, post_checks)
        # The first post-layer round compares every plaquette against its own
        # pre-layer measurement: the transversal layer maps each check onto
        # the opposite-basis check at the same plaquette.
        for c in sorted(post_checks, key=lambda c: b.index[c.pos]):
            b.detector([recs[c.pos], last[c.pos]], _det_coord(c, spec.t_pre + r))
        last = recs
        b.tick()
    out_basis = _conj(spec.basis)
    data_recs = _final_readout(b, out_basis, data, post_checks, last, spec.t_pre + spec.t_post)
    b.observable(0, [data_recs[p] for p in rect.logical(spec.basis)])
    return b.circuit()


# ---------------------------------------------------------------------------
# Lattice surgery
# ---------------------------------------------------------------------------


@dataclass
class _SurgeryLayout:
    patch1: Rect
    patch2: Rect
    bridge: Rect
    merged: Rect
    basis: str  # joint-parity basis: 'Z' for M_ZZ, 'X' for M_XX


def _surgery_layout(geometry: PatchGeometry, bridge: int, parity: str) -> _SurgeryLayout:
    dx, dz = geometry.d_x, geometry.d_z
    i0, j0 = geometry.origin
    if parity == "ZZ":
        # The seam must run parallel to the horizontal Z strings: patches are
        # stacked vertically with `bridge` data rows in between.
        p1 = Rect(i0, j0, dz, dx)
        br = Rect(i0, j0 + dx, dz, bridge)
        p2 = Rect(i0, j0 + dx + bridge, dz, dx)
        merged = Rect(i0, j0, dz, 2 * dx + bridge)
        return _SurgeryLayout(p1, p2, br, merged, "Z")
    p1 = Rect(i0, j0, dz, dx)
    br = Rect(i0 + dz, j0, bridge, dx)
    p2 = Rect(i0 + dz + bridge, j0, dz, dx)
    merged = Rect(i0, j0, 2 * dz + bridge, dx)
    return _SurgeryLayout(p1, p2, br, merged, "X")


def _merge_classify(lay: _SurgeryLayout):
    """Split the merged check set by relation to the pre-merge checks."""
    pre = {c.pos: c for c in lay.patch1.checks() + lay.patch2.checks()}
    merged = lay.merged.checks()
    unchanged, extended, new_joint, new_ortho = [], [], [], []
    for c in merged:
        if c.pos in pre:
            if set(c.data) == set(pre[c.pos].data):
                unchanged.append(c)
            else:
                assert c.basis == _conj(lay.basis), "only seam-facing boundary checks extend"
                extended.append(c)
        elif c.basis == lay.basis:
            new_joint.append(c)
        else:
            assert all(lay.bridge.contains(p) for p in c.data)
            new_ortho.append(c)
    return pre, merged, unchanged, extended, new_joint, new_ortho


def _emit_split(b, lay, pre, extended, new_ortho, last, t):
    """Measure out the bridge and reconcile checks across the split."""
    bp = _conj(lay.basis)
    bridge_recs = b.measure("MX" if bp == "X" else "M", lay.bridge.data_positions())
    for c in sorted(new_ortho, key=lambda c: b.index[c.pos]):
        b.detector([last[c.pos]] + [bridge_recs[p] for p in c.data], _det_coord(c, t))
    b.tick()
    removed = {
        c.pos: [p for p in c.data if p not in pre[c.pos].data]
        for c in extended
    }
    return bridge_recs, removed


def gen_lattice_surgery(spec: LatticeSurgerySpec) -> Circuit:
    lay = _surgery_layout(spec.geometry, spec.bridge, spec.parity)
    basis, bp = lay.basis, _conj(lay.basis)
    pre, merged, unchanged, extended, new_joint, new_ortho = _merge_classify(lay)
    pre_checks = list(pre.values())
    patch_data = lay.patch1.data_positions() + lay.patch2.data_positions()
    bridge_data = lay.bridge.data_positions()
    b = _Builder(lay.merged.data_positions() + [c.pos for c in merged])

    last: dict[Pos, int] = {}
    t = 0
    for r in range(spec.t_pre):
        extra_z = patch_data if (r == 0 and basis == "Z") else []
        extra_x = patch_data if (r == 0 and basis == "X") else []
        recs = _se_round(b, pre_checks, extra_z, extra_x)
        for c in sorted(pre_checks, key=lambda c: b.index[c.pos]):
            if r == 0:
                if c.basis == basis:
                    b.detector([recs[c.pos]], _det_coord(c, t))
            else:
                b.detector([recs[c.pos], last[c.pos]], _det_coord(c, t))
        last.update(recs)
        t += 1
        b.tick()

    for r in range(spec.t_merge):
        extra_z = bridge_data if (r == 0 and bp == "Z") else []
        extra_x = bridge_data if (r == 0 and bp == "X") else []
        recs = _se_round(b, merged, extra_z, extra_x)
        for c in sorted(merged, key=lambda c: b.index[c.pos]):
            if r == 0:
                if c.pos in last:
                    # Unchanged checks continue; extended checks gain only
                    # freshly initialized orthogonal-basis bridge qubits.
                    b.detector([recs[c.pos], last[c.pos]], _det_coord(c, t))
                elif c.basis == bp:
                    b.detector([recs[c.pos]], _det_coord(c, t))
                # New joint-basis checks are individually random in their
                # first round; their product is the joint logical parity.
            else:
                b.detector([recs[c.pos], last[c.pos]], _det_coord(c, t))
        if r == 0:
            b.observable(2, [recs[c.pos] for c in new_joint])
        last.update(recs)
        t += 1
        b.tick()

    bridge_recs, removed = _emit_split(b, lay, pre, extended, new_ortho, last, t)

    for r in range(spec.t_post):
        recs = _se_round(b, pre_checks)
        for c in sorted(pre_checks, key=lambda c: b.index[c.pos]):
            base = [recs[c.pos], last[c.pos]]
            if r == 0 and c.pos in removed:
                base += [bridge_recs[p] for p in removed[c.pos]]
            b.detector(base, _det_coord(c, t + r))
        last.update(recs)
        b.tick()
    t += spec.t_post

    data_recs = _final_readout(b, basis, patch_data, pre_checks, last, t)
    b.observable(0, [data_recs[p] for p in lay.patch1.logical(basis)])
    b.observable(1, [data_recs[p] for p in lay.patch2.logical(basis)])
    return b.circuit()


# ---------------------------------------------------------------------------
# Phase gate
# ---------------------------------------------------------------------------

# Per-qubit gate strings realizing the mixed-basis readout of the ancilla
# patch: region A (above the diagonal) reads X, region B below reads Z, the
# diagonal reads Y.  The primed variants measure the opposite sign; sign
# assignments are solved at generation time so every derived transition
# detector has reference value zero.
_READOUT_GATES = {
    ("A", 0): "",
    ("A", 1): "SS",
    ("B", 0): "",
    ("B", 1): "HSSH",
    ("D", 0): "HS",
    ("D", 1): "HSSS",
}


def _transition_rows(checks: list[Check], rect: Rect):
    """GF(2) detector derivation for the mixed-basis transversal readout.

    Returns (region, basis vectors): each basis vector is a subset of checks
    whose product has letters compatible with the per-qubit readout bases
    (X in region A, Z in B, Y on the diagonal); such a product is exactly
    reconstructable from the final single-qubit measurements.
    """
    data = rect.data_positions()
    region: dict[Pos, str] = {}
    for p in data:
        u, v = (p[0] - 1) // 2 - rect.i0, (p[1] - 1) // 2 - rect.j0
        region[p] = "D" if u == v else ("A" if u < v else "B")
    nq = len(data)
    qidx = {p: k for k, p in enumerate(data)}
    ordered = sorted(checks, key=lambda c: c.pos)
    nc = len(ordered)
    # Constraint matrix columns = checks; one GF(2) constraint per qubit:
    #   A: z(q) = 0, B: x(q) = 0, D: x(q) + z(q) = 0.
    rows = [0] * nq
    for ci, c in enumerate(ordered):
        for p in c.data:
            k = qidx[p]
            if region[p] == "A" and c.basis == "Z":
                rows[k] ^= 1 << ci
            elif region[p] == "B" and c.basis == "X":
                rows[k] ^= 1 << ci
            elif region[p] == "D":
                rows[k] ^= 1 << ci
    # Nullspace via Gaussian elimination on the transposed system.
    pivots: dict[int, int] = {}
    reduced = []
    for r in rows:
        for pc, pr in pivots.items():
            if (r >> pc) & 1:
                r ^= pr
        if r:
            pc = r.bit_length() - 1
            pivots[pc] = r
            reduced.append(r)
    # Free columns give the nullspace basis.
    basis_vectors = []
    for ci in range(nc):
        if ci in pivots:
            continue
        vec = 1 << ci
        # Back-substitute: flip pivot columns to satisfy all constraints.
        for _ in range(nc):
            changed = False
            for r in rows:
                # recompute r·vec parity
                if bin(r & vec).count("1") % 2:
                    # find a pivot column in r to flip
                    for pc in sorted(pivots, reverse=True):
                        if (r >> pc) & 1 and pc != ci:
                            vec ^= 1 << pc
                            changed = True
                            break
                    else:
                        raise AssertionError("inconsistent transition system")
            if not changed:
                break
        basis_vectors.append(vec)
    return region, ordered, basis_vectors


def _solve_gf2(rows: list[int], rhs: list[int], nvars: int):
    """Solve A f = r over GF(2); returns (solution bitmask, consistent_rows)."""
    aug = [(rows[i] << 1) | rhs[i] for i in range(len(rows))]
    pivots: dict[int, int] = {}
    consistent = [True] * len(rows)
    order = []
    for i, a in enumerate(aug):
        for pc, pr in pivots.items():
            if (a >> (pc + 1)) & 1:
                a ^= pr
        if a >> 1:
            pc = (a >> 1).bit_length() - 1
            pivots[pc] = a
            order.append(i)
        elif a & 1:
            consistent[i] = False
    f = 0
    for pc in sorted(pivots):
        a = pivots[pc]
        row = a >> 1
        val = a & 1
        acc = val ^ (bin((row & ~(1 << pc)) & f).count("1") % 2)
        if acc:
            f |= 1 << pc
    return f, consistent


def gen_phase_gate(spec: PhaseGateSpec) -> Circuit:
    geometry = PatchGeometry(spec.d, spec.d)
    lay = _surgery_layout(geometry, spec.bridge, "ZZ")
    d = spec.d
    # Patch 1 (top) holds the data qubit; patch 2 (bottom) is the ancilla
    # that gets measured in the logical Y basis.
    flips = {}  # pos -> sign flip bit, filled by the solver pass
    mpp_invert = False

    def build(flips: dict[Pos, int], mpp_invert: bool):
        pre, merged, unchanged, extended, new_joint, new_ortho = _merge_classify(lay)
        p1_positions = {c.pos for c in lay.patch1.checks()}
        p2_checks = lay.patch2.checks()
        all_data = lay.merged.data_positions()
        b = _Builder(all_data + [c.pos for c in merged])
        last: dict[Pos, int] = {}
        t = 0
        for r in range(spec.t_merge):
            extra_x = all_data if r == 0 else []
            recs = _se_round(b, merged, [], extra_x)
            for c in sorted(merged, key=lambda c: b.index[c.pos]):
                if r == 0:
                    if c.basis == "X":
                        b.detector([recs[c.pos]], _det_coord(c, t))
                else:
                    b.detector([recs[c.pos], last[c.pos]], _det_coord(c, t))
            if r == 0:
                s1_recs = [recs[c.pos] for c in new_joint]
                # Representative transport: the data patch's Y readout uses
                # its top-row Z string, while the joint parity is anchored on
                # its bottom row; the mismatch is the product of the data
                # patch's Z checks, whose first-round syndromes are random
                # under X-basis initialization and must enter the observable.
                z_comp = [
                    recs[c.pos]
                    for c in merged
                    if c.basis == "Z" and c.pos in p1_positions
                ]
            last.update(recs)
            t += 1
            b.tick()

        bridge_recs, removed = _emit_split(b, lay, pre, extended, new_ortho, last, t)
        # Likewise the two patches' X strings combine into the merged logical
        # X only through the bridge column, which the split reads out.
        col = 2 * lay.bridge.i0 + 1
        x_comp = [bridge_recs[p] for p in lay.bridge.data_positions() if p[0] == col]

        # Data patch is read out immediately after the split so it stops
        # accumulating exposure; the product is measured noiselessly.
        y_terms = [(lay.patch1.data_positions()[0], "Y")]
        y_terms += [(p, "X") for p in lay.patch1.x_logical()[1:]]
        y_terms += [(p, "Z") for p in lay.patch1.z_logical()[1:]]
        mpp_rec = b.mpp(y_terms, invert=mpp_invert)
        b.tick()

        for r in range(spec.t_boundary):
            recs = _se_round(b, p2_checks)
            for c in sorted(p2_checks, key=lambda c: b.index[c.pos]):
                base = [recs[c.pos], last[c.pos]]
                if r == 0 and c.pos in removed:
                    base += [bridge_recs[p] for p in removed[c.pos]]
                b.detector(base, _det_coord(c, t + r))
            last.update(recs)
            b.tick()
        t += spec.t_boundary

        # Transition round: mixed-basis transversal readout of the ancilla.
        region, ordered_checks, combos = _transition_rows(p2_checks, lay.patch2)
        p2_data = lay.patch2.data_positions()
        gate_seq = {p: _READOUT_GATES[(region[p], flips.get(p, 0))] for p in p2_data}
        for layer in range(max((len(s) for s in gate_seq.values()), default=0)):
            b.op("H", sorted([p for p, s in gate_seq.items() if len(s) > layer and s[layer] == "H"],
                             key=lambda p: b.index[p]))
            b.op("S", sorted([p for p, s in gate_seq.items() if len(s) > layer and s[layer] == "S"],
                             key=lambda p: b.index[p]))
            b.tick()
        singles = {}
        singles.update(b.measure("M", [p for p in p2_data if region[p] == "B"]))
        singles.update(b.measure("MX", [p for p in p2_data if region[p] != "B"]))

        det_specs = []
        for vec in combos:
            chosen = [c for k, c in enumerate(ordered_checks) if (vec >> k) & 1]
            xs: dict[Pos, int] = {}
            zs: dict[Pos, int] = {}
            recs_list = []
            for c in chosen:
                recs_list.append(last[c.pos])
                for p in c.data:
                    if c.basis == "X":
                        xs[p] = xs.get(p, 0) ^ 1
                    else:
                        zs[p] = zs.get(p, 0) ^ 1
            support = sorted(
                {p for p in set(xs) | set(zs) if xs.get(p, 0) or zs.get(p, 0)},
                key=lambda p: b.index[p],
            )
            recs_list += [singles[p] for p in support]
            anchor = chosen[0]
            det_specs.append((recs_list, support, _det_coord(anchor, t)))

        # Ancilla logical-Y reconstruction from the mixed readout.
        y_anc = [singles[lay.patch2.data_positions()[0]]]
        y_anc += [singles[p] for p in lay.patch2.x_logical()[1:]]
        y_anc += [singles[p] for p in lay.patch2.z_logical()[1:]]

        for recs_list, _, coord in det_specs:
            b.detector(recs_list, coord)
        b.observable(0, s1_recs + z_comp + x_comp + y_anc + [mpp_rec])
        return b.circuit(), det_specs, region

    circuit, det_specs, region = build(flips, mpp_invert)
    from . import tableau

    dets, obs = tableau.reference_sample(circuit)
    n_transition = len(det_specs)
    trans_refs = dets[len(dets) - n_transition:]
    if any(trans_refs) or obs[0]:
        # Solve for per-qubit measured-sign flips that zero every transition
        # detector's reference; the observable sign is absorbed by the MPP.
        p2_data = lay.patch2.data_positions()
        qcol = {p: k for k, p in enumerate(p2_data)}
        rows = []
        for recs_list, support, _ in det_specs:
            r = 0
            for p in support:
                r |= 1 << qcol[p]
            rows.append(r)
        f, consistent = _solve_gf2(rows, trans_refs, len(p2_data))
        if not all(consistent):
            raise AssertionError("transition sign system inconsistent")
        flips = {p: (f >> qcol[p]) & 1 for p in p2_data}
        circuit, det_specs, region = build(flips, False)
        dets, obs = tableau.reference_sample(circuit)
        if obs[0]:
            circuit, det_specs, region = build(flips, True)
            dets, obs = tableau.reference_sample(circuit)
        assert not any(dets) and not obs[0], "phase-gate reference not normalized"
    return circuit


# ---------------------------------------------------------------------------
# Spacetime volume
# ---------------------------------------------------------------------------


def spacetime_volume(spec) -> int:
    """Closed-form resource cost (data-qubit footprint times rounds)."""
    if isinstance(spec, MemorySpec):
        g = spec.geometry
        return g.d_x * g.d_z * spec.rounds
    if isinstance(spec, HadamardSpec):
        g = spec.geometry
        return g.d_x * g.d_z * (spec.t_pre + spec.t_post + 1)
    if isinstance(spec, LatticeSurgerySpec):
        g = spec.geometry
        d_b = g.d_x if spec.parity == "ZZ" else g.d_z
        return 2 * g.d_x * g.d_z * (spec.t_pre + spec.t_post) + (
            2 * g.d_x * g.d_z + spec.bridge * d_b
        ) * spec.t_merge
    if isinstance(spec, PhaseGateSpec):
        return (2 * spec.d**2 + spec.bridge * spec.d) * spec.t_merge + spec.d**2 * spec.t_boundary
    raise TypeError(f"not a primitive spec: {spec!r}")
