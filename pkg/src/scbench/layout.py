"""Rotated-surface-code patch geometry.

Positions use doubled lattice coordinates: data qubits sit at (odd, odd),
plaquette centers (ancilla qubits) at (even, even).  Emitted coordinates are
halved, so data qubits land on half-integer points and ancillas on integers.

Conventions fixed here and relied on everywhere else:

* A patch covering data columns ``[i0, i0+w)`` and rows ``[j0, j0+h)`` has a
  horizontal logical-Z string (weight ``w``) and a vertical logical-X string
  (weight ``h``).  With ``w = d_Z`` columns and ``h = d_X`` rows, the minimal
  logical-A operator has weight ``d_A``.
* Plaquette type alternates on a global checkerboard: X-type where the
  plaquette-coordinate parity is odd.  Top/bottom patch boundaries keep only
  X-type weight-2 checks, left/right only Z-type, so Z strings terminate on
  the left/right boundaries and X strings on top/bottom.
* The entangling schedule is tied to the plaquette parity class, not to the
  basis currently measured there.  The two orders are mirror images; the pair
  keeps same-tick gates disjoint and orients hook errors perpendicular to the
  logical string they could otherwise shorten.
"""
from __future__ import annotations

from dataclasses import dataclass

Pos = tuple[int, int]

# Offsets from a plaquette center to its data qubits, in schedule order.
# Parity-odd plaquettes use _ORDER_A, parity-even use _ORDER_B.
_ORDER_A = ((1, 1), (-1, 1), (1, -1), (-1, -1))
_ORDER_B = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def plaquette_parity(pos: Pos) -> int:
    return ((pos[0] // 2) + (pos[1] // 2)) % 2


def plaquette_basis(pos: Pos) -> str:
    return "X" if plaquette_parity(pos) else "Z"


def schedule_offsets(pos: Pos) -> tuple[Pos, ...]:
    return _ORDER_A if plaquette_parity(pos) else _ORDER_B


@dataclass(frozen=True)
class Check:
    """One stabilizer check: plaquette position, measured basis, data support."""

    pos: Pos
    basis: str
    data: tuple[Pos, ...]


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle of data qubits, in data-index units."""

    i0: int
    j0: int
    w: int
    h: int

    def data_positions(self) -> list[Pos]:
        return [
            (2 * i + 1, 2 * j + 1)
            for j in range(self.j0, self.j0 + self.h)
            for i in range(self.i0, self.i0 + self.w)
        ]

    def contains(self, pos: Pos) -> bool:
        i, j = (pos[0] - 1) // 2, (pos[1] - 1) // 2
        return self.i0 <= i < self.i0 + self.w and self.j0 <= j < self.j0 + self.h

    def checks(self, swap_basis: bool = False) -> list[Check]:
        """Stabilizer set of a standalone rotated patch on this rectangle.

        ``swap_basis`` exchanges the X/Z roles (used after a transversal H).
        """
        out: list[Check] = []
        for a in range(self.i0, self.i0 + self.w + 1):
            for b in range(self.j0, self.j0 + self.h + 1):
                pos = (2 * a, 2 * b)
                basis = plaquette_basis(pos)
                interior = (self.i0 < a < self.i0 + self.w) and (self.j0 < b < self.j0 + self.h)
                on_tb = b in (self.j0, self.j0 + self.h) and self.i0 < a < self.i0 + self.w
                on_lr = a in (self.i0, self.i0 + self.w) and self.j0 < b < self.j0 + self.h
                if not (interior or (on_tb and basis == "X") or (on_lr and basis == "Z")):
                    continue
                support = tuple(
                    (pos[0] + dx, pos[1] + dy)
                    for dx, dy in schedule_offsets(pos)
                    if self.contains((pos[0] + dx, pos[1] + dy))
                )
                measured = ("Z" if basis == "X" else "X") if swap_basis else basis
                out.append(Check(pos, measured, support))
        assert len(out) == self.w * self.h - 1, "rotated patch must have n-1 checks"
        return out

    def z_logical(self) -> list[Pos]:
        """Horizontal Z string along the top data row (weight w)."""
        return [(2 * i + 1, 2 * self.j0 + 1) for i in range(self.i0, self.i0 + self.w)]

    def x_logical(self) -> list[Pos]:
        """Vertical X string along the left data column (weight h)."""
        return [(2 * self.i0 + 1, 2 * j + 1) for j in range(self.j0, self.j0 + self.h)]

    def logical(self, basis: str) -> list[Pos]:
        return self.z_logical() if basis == "Z" else self.x_logical()
