"""Stabilizer tableau simulator used as a noiseless validation oracle.

The frame sampler (:mod:`scbench.framesim`) reports detector *flips* relative
to an all-zero reference, so it cannot by itself establish that a generated
circuit's detectors are deterministic parities of value zero in the actual
quantum sense.  This module runs the full Aaronson-Gottesman tableau so tests
(and the phase-gate generator, for observable sign normalization) can check
exactly that.

Only noiseless circuits are accepted: channel instructions must carry
probability zero.
"""
from __future__ import annotations

import numpy as np

from .circuit import Circuit, PauliProduct, Rec

__all__ = ["TableauSimulator", "reference_sample", "is_deterministic"]


def _g(x1, z1, x2, z2):
    # Phase exponent contribution (mod 4) when multiplying single-qubit
    # Paulis (x1,z1)*(x2,z2); vectorized over qubits.
    return (
        x1 * z1 * (z2.astype(np.int64) - x2)
        + x1 * (1 - z1) * z2 * (2 * x2.astype(np.int64) - 1)
        + (1 - x1) * z1 * x2 * (1 - 2 * z2.astype(np.int64))
    )


class TableauSimulator:
    """CHP-style tableau over ``n`` qubits with general Pauli measurement."""

    def __init__(self, n: int, rng: np.random.Generator | None = None, force_zero: bool = False):
        self.n = n
        # rows 0..n-1 destabilizers, n..2n-1 stabilizers; starts in |0...0>.
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.x[np.arange(n), np.arange(n)] = 1
        self.z[np.arange(n, 2 * n), np.arange(n)] = 1
        self.r = np.zeros(2 * n, dtype=np.uint8)
        self.rng = rng or np.random.default_rng(0)
        self.force_zero = force_zero  # indeterminate outcomes forced to 0

    # -- row algebra ----------------------------------------------------

    def _rowsum_into(self, xh, zh, rh, i, strict=True):
        phase = 2 * rh + 2 * int(self.r[i]) + int(_g(self.x[i], self.z[i], xh, zh).sum())
        phase %= 4
        # Destabilizer-row phases are never read, so anticommuting products
        # (odd phase) are tolerated there.
        assert not strict or phase in (0, 2)
        xh ^= self.x[i]
        zh ^= self.z[i]
        return xh, zh, phase // 2

    def _rowsum(self, h, i):
        self.x[h], self.z[h], self.r[h] = self._rowsum_into(
            self.x[h], self.z[h], int(self.r[h]), i, strict=h >= self.n
        )

    # -- gates ------------------------------------------------------------

    def h(self, q):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def s(self, q):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.z[:, q] ^= self.x[:, q]

    def cx(self, c, t):
        self.r ^= self.x[:, c] & self.z[:, t] & (self.x[:, t] ^ self.z[:, c] ^ 1)
        self.x[:, t] ^= self.x[:, c]
        self.z[:, c] ^= self.z[:, t]

    def cz(self, a, b):
        self.h(b)
        self.cx(a, b)
        self.h(b)

    def apply_x(self, q):
        self.r ^= self.z[:, q]

    def apply_z(self, q):
        self.r ^= self.x[:, q]

    # -- measurement ------------------------------------------------------

    def measure_pauli(self, xp: np.ndarray, zp: np.ndarray, sign: int) -> int:
        """Measure the Hermitian Pauli (-1)^sign * prod(letters from xp,zp).

        Returns the outcome bit (0 for the +1 eigenvalue).
        """
        anti = ((self.x & zp).sum(axis=1) + (self.z & xp).sum(axis=1)) % 2
        n = self.n
        stab_anti = np.nonzero(anti[n:])[0]
        if stab_anti.size:
            p = n + int(stab_anti[0])
            for i in np.nonzero(anti)[0]:
                if i != p:
                    self._rowsum(int(i), p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            outcome = 0 if self.force_zero else int(self.rng.integers(2))
            self.x[p] = xp
            self.z[p] = zp
            self.r[p] = (outcome + sign) % 2
            return outcome
        # Deterministic: accumulate stabilizer rows whose destabilizer
        # partner anticommutes with the measured Pauli.
        xh = np.zeros(n, dtype=np.uint8)
        zh = np.zeros(n, dtype=np.uint8)
        rh = 0
        for i in np.nonzero(anti[:n])[0]:
            xh, zh, rh = self._rowsum_into(xh, zh, rh, int(i) + n)
        assert np.array_equal(xh, xp) and np.array_equal(zh, zp), "pauli not in stabilizer span"
        return (rh + sign) % 2

    def measure_z(self, q) -> int:
        zp = np.zeros(self.n, dtype=np.uint8)
        zp[q] = 1
        return self.measure_pauli(np.zeros(self.n, dtype=np.uint8), zp, 0)

    def measure_x(self, q) -> int:
        xp = np.zeros(self.n, dtype=np.uint8)
        xp[q] = 1
        return self.measure_pauli(xp, np.zeros(self.n, dtype=np.uint8), 0)

    def reset_z(self, q):
        if self.measure_z(q):
            self.apply_x(q)

    def reset_x(self, q):
        if self.measure_x(q):
            self.apply_z(q)


def _product_vectors(n: int, prod: PauliProduct):
    # Hermitian product of distinct single-qubit letters; Y letters are literal
    # Y so the Pauli is (-1)^0 * letters in row convention.
    xp = np.zeros(n, dtype=np.uint8)
    zp = np.zeros(n, dtype=np.uint8)
    for q, letter in prod.terms:
        if letter in ("X", "Y"):
            xp[q] = 1
        if letter in ("Z", "Y"):
            zp[q] = 1
    return xp, zp


def run_circuit(circuit: Circuit, rng: np.random.Generator | None = None, force_zero: bool = False):
    """Run a noiseless circuit; returns (measurements, detectors, observables)."""
    n = circuit.qubit_count
    sim = TableauSimulator(n, rng=rng, force_zero=force_zero)
    meas: list[int] = []
    detectors: list[int] = []
    observables: dict[int, int] = {}
    for inst in circuit.instructions:
        name = inst.name
        if name in ("TICK", "QUBIT_COORDS"):
            continue
        if name in ("PAULI_CHANNEL_1", "PAULI_CHANNEL_2", "DEPOLARIZE1", "DEPOLARIZE2", "X_ERROR", "Z_ERROR"):
            if any(a != 0.0 for a in inst.args):
                raise ValueError("tableau oracle only accepts noiseless circuits")
            continue
        if name == "H":
            for q in inst.targets:
                sim.h(q)
        elif name == "S":
            for q in inst.targets:
                sim.s(q)
        elif name == "CX":
            for i in range(0, len(inst.targets), 2):
                sim.cx(inst.targets[i], inst.targets[i + 1])
        elif name == "CZ":
            for i in range(0, len(inst.targets), 2):
                sim.cz(inst.targets[i], inst.targets[i + 1])
        elif name == "R":
            for q in inst.targets:
                sim.reset_z(q)
        elif name == "RX":
            for q in inst.targets:
                sim.reset_x(q)
        elif name == "M":
            for q in inst.targets:
                meas.append(sim.measure_z(q))
        elif name == "MX":
            for q in inst.targets:
                meas.append(sim.measure_x(q))
        elif name == "MPP":
            for prod in inst.targets:
                xp, zp = _product_vectors(n, prod)
                out = sim.measure_pauli(xp, zp, 0)
                meas.append(out ^ int(prod.invert))
        elif name == "DETECTOR":
            par = 0
            for t in inst.targets:
                assert isinstance(t, Rec)
                par ^= meas[len(meas) + t.offset]
            detectors.append(par)
        elif name == "OBSERVABLE_INCLUDE":
            idx = int(inst.args[0])
            par = observables.get(idx, 0)
            for t in inst.targets:
                assert isinstance(t, Rec)
                par ^= meas[len(meas) + t.offset]
            observables[idx] = par
        else:
            raise ValueError(f"tableau oracle cannot run {name}")
    obs = [observables.get(i, 0) for i in range(circuit.observable_count)]
    return meas, detectors, obs


def reference_sample(circuit: Circuit):
    """Detector and observable values with indeterminate outcomes forced to 0."""
    _, dets, obs = run_circuit(circuit, force_zero=True)
    return dets, obs


def is_deterministic(circuit: Circuit, runs: int = 8, seed: int = 0):
    """Check detectors are constant-zero and observables constant across runs.

    Each nondeterministic parity escapes detection with probability 2^-runs;
    returns (ok, message).
    """
    base_dets: list[int] | None = None
    base_obs: list[int] | None = None
    for k in range(runs):
        rng = np.random.default_rng(seed + k)
        _, dets, obs = run_circuit(circuit, rng=rng)
        if base_dets is None:
            base_dets, base_obs = dets, obs
            bad = [i for i, v in enumerate(dets) if v]
            if bad:
                return False, f"detector {bad[0]} has reference value 1"
        else:
            for i, (a, b) in enumerate(zip(base_dets, dets)):
                if a != b:
                    return False, f"detector {i} is not deterministic"
            for i, (a, b) in enumerate(zip(base_obs, obs)):
                if a != b:
                    return False, f"observable {i} is not deterministic"
    return True, ""
