"""Circuit intermediate representation with a bit-exact text emitter and parser.

The text dialect is the Stim circuit format restricted to the instruction
subset used by the generators and the noise pipeline:

    QUBIT_COORDS R RX M MX MPP H S CX CZ TICK
    PAULI_CHANNEL_1 PAULI_CHANNEL_2 DEPOLARIZE1 DEPOLARIZE2
    X_ERROR Z_ERROR DETECTOR OBSERVABLE_INCLUDE

Emission is deterministic: equal circuits produce byte-identical text, and
``parse_text(emit_text(c)) == c`` for every circuit the package constructs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

__all__ = [
    "Rec",
    "PauliProduct",
    "Instruction",
    "Circuit",
    "CircuitError",
    "emit_text",
    "parse_text",
    "validate",
]


class CircuitError(ValueError):
    """Raised on malformed circuit text or malformed instructions."""


@dataclass(frozen=True)
class Rec:
    """Measurement-record look-back reference; ``offset`` is strictly negative."""

    offset: int

    def __post_init__(self):
        if self.offset >= 0:
            raise CircuitError(f"record reference must be negative, got {self.offset}")


@dataclass(frozen=True)
class PauliProduct:
    """One Pauli product measured by an MPP instruction.

    ``terms`` is a tuple of ``(qubit, letter)`` pairs with letter in XYZ.
    ``invert`` flips the recorded outcome (the ``!`` prefix in the text form).
    """

    terms: tuple[tuple[int, str], ...]
    invert: bool = False

    def __post_init__(self):
        seen = set()
        for q, letter in self.terms:
            if letter not in ("X", "Y", "Z"):
                raise CircuitError(f"bad pauli letter {letter!r}")
            if q < 0:
                raise CircuitError(f"bad qubit index {q}")
            if q in seen:
                raise CircuitError(f"qubit {q} repeated within a pauli product")
            seen.add(q)


Target = Union[int, Rec, PauliProduct]

# Canonical instruction names and their aliases accepted on parse.
_ALIASES = {
    "RZ": "R",
    "MZ": "M",
    "CNOT": "CX",
    "ZCX": "CX",
}

RESET_NAMES = frozenset({"R", "RX"})
MEASURE_NAMES = frozenset({"M", "MX"})
GATE1_NAMES = frozenset({"H", "S"})
GATE2_NAMES = frozenset({"CX", "CZ"})
CHANNEL_NAMES = frozenset(
    {"PAULI_CHANNEL_1", "PAULI_CHANNEL_2", "DEPOLARIZE1", "DEPOLARIZE2", "X_ERROR", "Z_ERROR"}
)
ANNOTATION_NAMES = frozenset({"DETECTOR", "OBSERVABLE_INCLUDE", "QUBIT_COORDS", "TICK"})
ALL_NAMES = RESET_NAMES | MEASURE_NAMES | {"MPP"} | GATE1_NAMES | GATE2_NAMES | CHANNEL_NAMES | ANNOTATION_NAMES

# Number of probability args each channel instruction carries.
_CHANNEL_ARity = {
    "PAULI_CHANNEL_1": 3,
    "PAULI_CHANNEL_2": 15,
    "DEPOLARIZE1": 1,
    "DEPOLARIZE2": 1,
    "X_ERROR": 1,
    "Z_ERROR": 1,
}


@dataclass(frozen=True)
class Instruction:
    name: str
    targets: tuple[Target, ...] = ()
    args: tuple[float, ...] = ()

    def num_measurements(self) -> int:
        if self.name in MEASURE_NAMES:
            return len(self.targets)
        if self.name == "MPP":
            return len(self.targets)
        return 0


@dataclass
class Circuit:
    """An ordered instruction list over densely indexed qubits.

    Instances are treated as immutable once built; every accessor is a pure
    function of ``instructions``.
    """

    instructions: list[Instruction] = field(default_factory=list)

    # -- derived counts -------------------------------------------------

    @property
    def qubit_count(self) -> int:
        n = 0
        for inst in self.instructions:
            for t in inst.targets:
                if isinstance(t, int):
                    n = max(n, t + 1)
                elif isinstance(t, PauliProduct):
                    for q, _ in t.terms:
                        n = max(n, q + 1)
        return n

    @property
    def measurement_count(self) -> int:
        return sum(inst.num_measurements() for inst in self.instructions)

    @property
    def detector_count(self) -> int:
        return sum(1 for inst in self.instructions if inst.name == "DETECTOR")

    @property
    def observable_count(self) -> int:
        n = 0
        for inst in self.instructions:
            if inst.name == "OBSERVABLE_INCLUDE":
                n = max(n, int(inst.args[0]) + 1)
        return n

    def __eq__(self, other) -> bool:
        return isinstance(other, Circuit) and self.instructions == other.instructions

    def copy(self) -> "Circuit":
        return Circuit(list(self.instructions))

    def __str__(self) -> str:
        return emit_text(self)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def _fmt_arg(a: float) -> str:
    # Integral values print as integers (matches the reference dialect's own
    # output); everything else uses the shortest repr that round-trips.
    if a == int(a) and abs(a) < 2**53:
        return str(int(a))
    return repr(a)


def _fmt_target(t: Target) -> str:
    if isinstance(t, int):
        return str(t)
    if isinstance(t, Rec):
        return f"rec[{t.offset}]"
    if isinstance(t, PauliProduct):
        body = "*".join(f"{letter}{q}" for q, letter in t.terms)
        return ("!" if t.invert else "") + body
    raise CircuitError(f"unknown target {t!r}")


def emit_text(circuit: Circuit) -> str:
    """Serialize to the interchange text format; deterministic, byte-stable."""
    lines = []
    for inst in circuit.instructions:
        parts = [inst.name]
        if inst.args:
            parts[0] += "(" + ", ".join(_fmt_arg(a) for a in inst.args) + ")"
        parts.extend(_fmt_target(t) for t in inst.targets)
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_target(tok: str, line_no: int) -> Target:
    if tok.startswith("rec[") and tok.endswith("]"):
        try:
            off = int(tok[4:-1])
        except ValueError:
            raise CircuitError(f"line {line_no}: bad record reference {tok!r}")
        if off >= 0:
            raise CircuitError(f"line {line_no}: record reference must be negative: {tok!r}")
        return Rec(off)
    invert = tok.startswith("!")
    body = tok[1:] if invert else tok
    if "*" in body or (body and body[0] in "XYZ" and len(body) > 1 and body[1:].isdigit()):
        terms = []
        for factor in body.split("*"):
            if not factor or factor[0] not in "XYZ" or not factor[1:].isdigit():
                raise CircuitError(f"line {line_no}: bad pauli target {tok!r}")
            terms.append((int(factor[1:]), factor[0]))
        try:
            return PauliProduct(tuple(terms), invert=invert)
        except CircuitError as e:
            raise CircuitError(f"line {line_no}: {e}")
    if invert:
        raise CircuitError(f"line {line_no}: '!' prefix only valid on pauli targets: {tok!r}")
    if not tok.isdigit():
        raise CircuitError(f"line {line_no}: bad target {tok!r}")
    return int(tok)


def parse_text(text: str) -> Circuit:
    """Parse interchange text.

    Raises :class:`CircuitError` with a line number on syntax errors, on
    unknown instruction names, on out-of-range probabilities, and on record
    references that do not resolve to an earlier measurement.
    """
    instructions: list[Instruction] = []
    meas_so_far = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        paren = line.find("(")
        space = line.find(" ")
        if paren != -1 and (space == -1 or paren < space):
            close = line.find(")")
            if close == -1:
                raise CircuitError(f"line {line_no}: malformed argument list in {line!r}")
            head, tail = line[: close + 1], line[close + 1 :].strip()
        else:
            head, _, tail = line.partition(" ")
        args: tuple[float, ...] = ()
        if "(" in head:
            if not head.endswith(")"):
                raise CircuitError(f"line {line_no}: malformed argument list in {head!r}")
            name, arg_body = head[:-1].split("(", 1)
            try:
                args = tuple(float(a) for a in arg_body.split(",")) if arg_body.strip() else ()
            except ValueError:
                raise CircuitError(f"line {line_no}: bad arguments {arg_body!r}")
        else:
            name = head
        name = name.upper()
        name = _ALIASES.get(name, name)
        if name not in ALL_NAMES:
            raise CircuitError(f"line {line_no}: unsupported instruction {name!r}")
        targets = tuple(_parse_target(tok, line_no) for tok in tail.split()) if tail else ()
        inst = Instruction(name, targets, args)
        err = _check_instruction(inst, meas_so_far)
        if err:
            raise CircuitError(f"line {line_no}: {err}")
        meas_so_far += inst.num_measurements()
        instructions.append(inst)
    return Circuit(instructions)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _check_instruction(inst: Instruction, meas_so_far: int) -> str | None:
    """Return a violation message for one instruction, or None."""
    name = inst.name
    if name == "TICK":
        if inst.targets or inst.args:
            return "TICK takes no targets or arguments"
        return None
    if name == "QUBIT_COORDS":
        if len(inst.targets) != 1 or not isinstance(inst.targets[0], int):
            return "QUBIT_COORDS takes exactly one qubit target"
        if len(inst.args) != 2:
            return "QUBIT_COORDS takes two coordinates"
        return None
    if name in ("DETECTOR", "OBSERVABLE_INCLUDE"):
        if name == "OBSERVABLE_INCLUDE":
            if len(inst.args) != 1 or inst.args[0] != int(inst.args[0]) or inst.args[0] < 0:
                return "OBSERVABLE_INCLUDE takes one non-negative integer argument"
        for t in inst.targets:
            if not isinstance(t, Rec):
                return f"{name} targets must be measurement records"
            if -t.offset > meas_so_far:
                return (
                    f"unresolved record reference rec[{t.offset}] "
                    f"with only {meas_so_far} prior measurements"
                )
        return None
    if name in CHANNEL_NAMES:
        arity = _CHANNEL_ARity[name]
        if len(inst.args) != arity:
            return f"{name} takes {arity} probability arguments, got {len(inst.args)}"
        for a in inst.args:
            if not (0.0 <= a <= 1.0):
                return f"probability out of range in {name}: {a!r}"
        if name.startswith("PAULI_CHANNEL") and sum(inst.args) > 1.0 + 1e-12:
            return f"{name} probabilities sum to {sum(inst.args)!r} > 1"
        if not all(isinstance(t, int) for t in inst.targets):
            return f"{name} targets must be qubits"
        if name in ("PAULI_CHANNEL_2", "DEPOLARIZE2") and len(inst.targets) % 2:
            return f"{name} takes an even number of qubit targets"
        return None
    if name in GATE2_NAMES:
        if len(inst.targets) % 2:
            return f"{name} takes an even number of qubit targets"
        if not all(isinstance(t, int) for t in inst.targets):
            return f"{name} targets must be qubits"
        for i in range(0, len(inst.targets), 2):
            if inst.targets[i] == inst.targets[i + 1]:
                return f"{name} pair endpoints must be distinct"
        return None
    if name in RESET_NAMES | MEASURE_NAMES | GATE1_NAMES:
        if inst.args:
            return f"{name} takes no arguments"
        if not all(isinstance(t, int) for t in inst.targets):
            return f"{name} targets must be qubits"
        return None
    if name == "MPP":
        if not inst.targets:
            return "MPP requires at least one pauli product"
        if not all(isinstance(t, PauliProduct) for t in inst.targets):
            return "MPP targets must be pauli products"
        return None
    return f"unsupported instruction {name!r}"


def validate(circuit: Circuit) -> list[str]:
    """Scan for invariant violations; empty list iff the circuit is well formed."""
    violations: list[str] = []
    meas_so_far = 0
    coords_seen: set[int] = set()
    for idx, inst in enumerate(circuit.instructions):
        err = _check_instruction(inst, meas_so_far)
        if err:
            violations.append(f"instruction {idx} ({inst.name}): {err}")
        if inst.name == "QUBIT_COORDS" and not err:
            q = inst.targets[0]
            if q in coords_seen:
                violations.append(f"instruction {idx}: duplicate coordinates for qubit {q}")
            coords_seen.add(q)
        meas_so_far += inst.num_measurements()
    return violations
