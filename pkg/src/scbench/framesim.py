"""Batch Pauli-frame Monte-Carlo sampler.

Frames are bit-packed across shots: per qubit, one X-frame row and one
Z-frame row of 64-bit words, so Clifford propagation is word-parallel XOR.
Measurements record frame-induced flips relative to an all-zero reference
sample; after each reset or measurement the frame component that the collapse
renders unobservable is re-randomized, which is what makes miswired
(non-deterministic) detectors visibly fire even on noiseless circuits.

Randomness is counter-based: every randomness-consuming instruction gets a
fixed stream keyed by (seed, instruction event index, shot chunk), so results
are reproducible and independent of how shots are split across chunks or
workers.  Channel draws are categorical per (channel instance, shot): a shot
suffers at most one Pauli from a given channel instance.  The categorical is
sampled sparsely (geometric gaps select the afflicted shots, then one uniform
picks the component), which is distribution-identical to thresholding one
uniform per shot against the cumulative component probabilities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Instruction, PauliProduct, Rec

__all__ = ["CompiledCircuit", "DetectionTable", "sample_batch", "check_determinism"]

CHUNK = 1 << 16
W = CHUNK // 64
_MASK64 = (1 << 64) - 1
_ONE = np.uint64(1)
_SIX = np.uint64(6)
_LOW6 = np.uint64(63)

# Two-qubit Pauli components in channel-argument order: letters (a, b) with
# 0=I 1=X 2=Y 3=Z.
_PAIR_LETTERS = [divmod(k + 1, 4) for k in range(15)]


def _letter_bits(code: int) -> tuple[int, int]:
    return (1 if code in (1, 2) else 0, 1 if code in (2, 3) else 0)


class CompiledCircuit:
    """Flattened instruction stream with preassigned randomness events."""

    def __init__(self, circuit: Circuit):
        self.num_qubits = circuit.qubit_count
        self.num_measurements = circuit.measurement_count
        self.num_detectors = circuit.detector_count
        self.num_observables = circuit.observable_count
        self.ops: list[tuple] = []
        det_groups: list[list[int]] = []
        obs_groups: list[list[int]] = [[] for _ in range(self.num_observables)]
        nmeas = 0
        event = 0
        for inst in circuit.instructions:
            name = inst.name
            if name in ("TICK", "QUBIT_COORDS"):
                continue
            if name == "H":
                self.ops.append(("h", np.array(inst.targets, dtype=np.intp)))
            elif name == "S":
                self.ops.append(("s", np.array(inst.targets, dtype=np.intp)))
            elif name in ("CX", "CZ"):
                t = np.array(inst.targets, dtype=np.intp)
                self.ops.append((name.lower(), t[0::2], t[1::2]))
            elif name in ("R", "RX"):
                self.ops.append((name.lower(), np.array(inst.targets, dtype=np.intp), event))
                event += 1
            elif name in ("M", "MX"):
                self.ops.append(
                    (name.lower(), np.array(inst.targets, dtype=np.intp), event, nmeas)
                )
                event += 1
                nmeas += len(inst.targets)
            elif name == "MPP":
                for prod in inst.targets:
                    xq = np.array([q for q, l in prod.terms if l in ("X", "Y")], dtype=np.intp)
                    zq = np.array([q for q, l in prod.terms if l in ("Z", "Y")], dtype=np.intp)
                    self.ops.append(("mpp", xq, zq, event, nmeas))
                    event += 1
                    nmeas += 1
            elif name in ("X_ERROR", "Z_ERROR"):
                comp_x = np.array([[1 if name == "X_ERROR" else 0]], dtype=np.uint8)
                comp_z = np.array([[0 if name == "X_ERROR" else 1]], dtype=np.uint8)
                tgts = np.array(inst.targets, dtype=np.intp).reshape(-1, 1)
                cum = np.array([inst.args[0]])
                self.ops.append(("chan", tgts, cum, comp_x, comp_z, event))
                event += 1
            elif name in ("PAULI_CHANNEL_1", "DEPOLARIZE1"):
                probs = (
                    list(inst.args)
                    if name == "PAULI_CHANNEL_1"
                    else [inst.args[0] / 3] * 3
                )
                comp_x = np.array([[1], [1], [0]], dtype=np.uint8)
                comp_z = np.array([[0], [1], [1]], dtype=np.uint8)
                tgts = np.array(inst.targets, dtype=np.intp).reshape(-1, 1)
                self.ops.append(("chan", tgts, np.cumsum(probs), comp_x, comp_z, event))
                event += 1
            elif name in ("PAULI_CHANNEL_2", "DEPOLARIZE2"):
                probs = (
                    list(inst.args)
                    if name == "PAULI_CHANNEL_2"
                    else [inst.args[0] / 15] * 15
                )
                bits = [
                    (_letter_bits(a), _letter_bits(b)) for a, b in _PAIR_LETTERS
                ]
                comp_x = np.array([[xa, xb] for (xa, _), (xb, _) in bits], dtype=np.uint8)
                comp_z = np.array([[za, zb] for (_, za), (_, zb) in bits], dtype=np.uint8)
                tgts = np.array(inst.targets, dtype=np.intp).reshape(-1, 2)
                self.ops.append(("chan", tgts, np.cumsum(probs), comp_x, comp_z, event))
                event += 1
            elif name == "DETECTOR":
                det_groups.append([nmeas + t.offset for t in inst.targets])
            elif name == "OBSERVABLE_INCLUDE":
                obs_groups[int(inst.args[0])].extend(nmeas + t.offset for t in inst.targets)
            else:
                raise ValueError(f"cannot sample instruction {name}")
        self.det_groups = det_groups
        self.obs_groups = obs_groups
        # reduceat layout for fast parity evaluation
        self._det_idx = np.array([i for g in det_groups for i in g], dtype=np.intp)
        self._det_off = np.cumsum([0] + [len(g) for g in det_groups[:-1]]).astype(np.intp)

    # -- per-chunk simulation --------------------------------------------

    def _rng(self, seed: int, event: int, chunk: int) -> np.random.Generator:
        key2 = ((event << 24) | chunk) & _MASK64
        return np.random.Generator(np.random.Philox(key=[seed & _MASK64, key2]))

    def _channel_hits(self, rng, cum, slots: int):
        total = float(cum[-1])
        if total <= 0.0:
            return None
        n_virtual = slots * CHUNK
        if total >= 1.0:
            pos = np.arange(n_virtual, dtype=np.int64)
        elif total < 1e-9:
            # Geometric gaps would overflow; the collision probability of
            # with-replacement placement is negligible at this rate.
            k = rng.binomial(n_virtual, total)
            if k == 0:
                return None
            pos = np.sort(rng.integers(0, n_virtual, size=k))
        else:
            expect = n_virtual * total
            block = int(expect + 6.0 * math.sqrt(expect + 1.0) + 16)
            chunks = []
            last = -1
            while True:
                gaps = rng.geometric(total, size=block)
                cs = np.cumsum(gaps) + last
                chunks.append(cs)
                last = int(cs[-1])
                if last >= n_virtual:
                    break
            pos = np.concatenate(chunks)
            pos = pos[pos < n_virtual]
        if pos.size == 0:
            return None
        comps = np.searchsorted(cum, rng.random(pos.size) * total, side="right")
        comps = np.minimum(comps, len(cum) - 1)
        return pos, comps

    def run_chunk(self, seed: int, chunk_index: int):
        """Simulate one chunk of CHUNK shots; returns (det, obs) word arrays."""
        nq = self.num_qubits
        xs = np.zeros((nq, W), dtype=np.uint64)
        zs = np.zeros((nq, W), dtype=np.uint64)
        rec = np.zeros((self.num_measurements, W), dtype=np.uint64)
        xs_flat = xs.reshape(-1)
        zs_flat = zs.reshape(-1)
        for op in self.ops:
            kind = op[0]
            if kind == "cx":
                _, c, t = op
                xs[t] ^= xs[c]
                zs[c] ^= zs[t]
            elif kind == "chan":
                _, tgts, cum, comp_x, comp_z, event = op
                hits = self._channel_hits(self._rng(seed, event, chunk_index), cum, len(tgts))
                if hits is None:
                    continue
                pos, comps = hits
                slot = pos >> 16
                shot = pos & (CHUNK - 1)
                word = (shot >> 6).astype(np.int64)
                bit = _ONE << (shot.astype(np.uint64) & _LOW6)
                for a in range(tgts.shape[1]):
                    qs = tgts[slot, a]
                    xm = comp_x[comps, a].astype(bool)
                    if xm.any():
                        np.bitwise_xor.at(xs_flat, qs[xm] * W + word[xm], bit[xm])
                    zm = comp_z[comps, a].astype(bool)
                    if zm.any():
                        np.bitwise_xor.at(zs_flat, qs[zm] * W + word[zm], bit[zm])
            elif kind == "h":
                qs = op[1]
                tmp = xs[qs].copy()
                xs[qs] = zs[qs]
                zs[qs] = tmp
            elif kind == "s":
                qs = op[1]
                zs[qs] ^= xs[qs]
            elif kind == "cz":
                _, a, b = op
                ta = xs[a].copy()
                zs[a] ^= xs[b]
                zs[b] ^= ta
            elif kind == "r":
                _, qs, event = op
                rnd = self._rng(seed, event, chunk_index)
                xs[qs] = 0
                zs[qs] = rnd.integers(0, 1 << 64, size=(len(qs), W), dtype=np.uint64)
            elif kind == "rx":
                _, qs, event = op
                rnd = self._rng(seed, event, chunk_index)
                zs[qs] = 0
                xs[qs] = rnd.integers(0, 1 << 64, size=(len(qs), W), dtype=np.uint64)
            elif kind == "m":
                _, qs, event, start = op
                rec[start : start + len(qs)] = xs[qs]
                rnd = self._rng(seed, event, chunk_index)
                zs[qs] ^= rnd.integers(0, 1 << 64, size=(len(qs), W), dtype=np.uint64)
            elif kind == "mx":
                _, qs, event, start = op
                rec[start : start + len(qs)] = zs[qs]
                rnd = self._rng(seed, event, chunk_index)
                xs[qs] ^= rnd.integers(0, 1 << 64, size=(len(qs), W), dtype=np.uint64)
            elif kind == "mpp":
                _, xq, zq, event, start = op
                row = np.zeros(W, dtype=np.uint64)
                # flip iff the frame anticommutes with the product
                for q in xq:
                    row ^= zs[q]
                for q in zq:
                    row ^= xs[q]
                rec[start] = row
                rnd = self._rng(seed, event, chunk_index)
                word = rnd.integers(0, 1 << 64, size=W, dtype=np.uint64)
                for q in xq:
                    xs[q] ^= word
                for q in zq:
                    zs[q] ^= word
            else:  # pragma: no cover
                raise AssertionError(kind)
        if self._det_idx.size:
            det = np.bitwise_xor.reduceat(rec[self._det_idx], self._det_off, axis=0)
        else:
            det = np.zeros((0, W), dtype=np.uint64)
        obs = np.zeros((self.num_observables, W), dtype=np.uint64)
        for k, g in enumerate(self.obs_groups):
            for i in g:
                obs[k] ^= rec[i]
        return det, obs

    def iter_chunks(self, shots: int, seed: int):
        """Yield (shots_in_chunk, det_words, obs_words) over ceil(shots/CHUNK) chunks."""
        done = 0
        chunk_index = 0
        while done < shots:
            n = min(CHUNK, shots - done)
            det, obs = self.run_chunk(seed, chunk_index)
            yield n, det, obs
            done += n
            chunk_index += 1


@dataclass
class DetectionTable:
    """Bit-packed detection events: shots-major rows, little-endian bit order."""

    shots: int
    num_detectors: int
    num_observables: int
    detectors: np.ndarray  # (shots, ceil(D/8)) uint8
    observables: np.ndarray  # (shots, ceil(O/8)) uint8


def _words_to_rows(words: np.ndarray, n_cols: int, n_shots: int) -> np.ndarray:
    """Transpose (n_cols, W) channel-major words into shot-major packed rows."""
    if n_cols == 0:
        return np.zeros((n_shots, 0), dtype=np.uint8)
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")[:, :n_shots]
    return np.packbits(bits.T, axis=1, bitorder="little")


def sample_batch(circuit: Circuit | CompiledCircuit, shots: int, seed: int) -> DetectionTable:
    """Sample detector and observable flip tables for ``shots`` shots."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    comp = circuit if isinstance(circuit, CompiledCircuit) else CompiledCircuit(circuit)
    det_rows = []
    obs_rows = []
    for n, det, obs in comp.iter_chunks(shots, seed):
        det_rows.append(_words_to_rows(det, comp.num_detectors, n))
        obs_rows.append(_words_to_rows(obs, comp.num_observables, n))
    return DetectionTable(
        shots=shots,
        num_detectors=comp.num_detectors,
        num_observables=comp.num_observables,
        detectors=np.concatenate(det_rows, axis=0),
        observables=np.concatenate(obs_rows, axis=0),
    )


def check_determinism(circuit: Circuit, shots: int = 256, seed: int = 2024):
    """Sample a noiseless circuit; pass iff detectors are all zero and each
    observable is constant across shots.  Returns (ok, message)."""
    comp = CompiledCircuit(circuit)
    for n, det, obs in comp.iter_chunks(shots, seed):
        bits = np.arange(CHUNK) < n
        live = np.packbits(bits, bitorder="little").view(np.uint64)
        for k in range(det.shape[0]):
            if np.any(det[k] & live):
                return False, f"detector {k} fired on a noiseless circuit"
        for k in range(obs.shape[0]):
            masked = obs[k] & live
            if np.any(masked) and not np.array_equal(masked, live):
                return False, f"observable {k} varies across shots"
    return True, ""
