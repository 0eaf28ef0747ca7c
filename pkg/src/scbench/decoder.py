"""Minimum-weight perfect matching decoding over the bipartitioned graphs.

Each side's detectors form a weighted graph with a single virtual boundary
node; edge weights are log-likelihood ratios ln((1-p)/p).  Batch decoding
reduces each shot to its defect set, looks up precomputed all-pairs shortest
paths, and matches exactly: small defect sets by direct enumeration over all
pair/boundary partitions, larger ones through the blossom solver.  Both
routes are exact; they are cross-checked against each other in the tests.

Correlated mode decodes one side first, then reweights every opposite-side
edge that shares an error mechanism with a matched edge to its conditional
probability before decoding the second side (per-shot Dijkstra on the
reweighted graph).
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dem import DetectorErrorModel, GraphlikeDEM, SplitPart, split_graphlike

__all__ = ["MatchingGraph", "build_matching_graphs", "solve_mwpm", "Decoder"]

BOUNDARY = -1
_P_CLAMP = 0.5 - 1e-9


def _combine(a: float, b: float) -> float:
    return a * (1.0 - b) + b * (1.0 - a)


def _weight(p: float) -> float:
    p = min(p, _P_CLAMP)
    return math.log((1.0 - p) / p)


@dataclass
class Edge:
    u: int  # local node id
    v: int  # local node id or BOUNDARY
    prob: float
    weight: float
    obs_mask: int
    components: list[tuple[float, int | None]]  # (prob, linked opposite edge id)

    def conditional(self, other_edge: int) -> float:
        p_link = 0.0
        p_indep = 0.0
        for p, link in self.components:
            if link == other_edge:
                p_link = _combine(p_link, p)
            else:
                p_indep = _combine(p_indep, p)
        return p_link / (p_link + p_indep) if p_link + p_indep > 0 else 0.0


class MatchingGraph:
    """One side's weighted detector graph plus boundary, with path caches."""

    def __init__(self, side: str, det_ids: list[int], num_observables: int):
        self.side = side
        self.det_ids = np.array(sorted(det_ids), dtype=np.intp)
        self.local = {d: i for i, d in enumerate(self.det_ids)}
        self.n = len(det_ids)
        self.num_observables = num_observables
        self.edges: list[Edge] = []
        self._by_key: dict[tuple[int, int], int] = {}
        self._best_part: dict[int, tuple[float, int]] = {}
        self.mask_conflicts: list[tuple[int, int, int]] = []
        self.linked_edges: set[int] = set()
        self._built = False

    # -- construction ------------------------------------------------------

    def add_part(self, dets_local: tuple[int, ...], obs_mask: int, prob: float) -> int:
        if len(dets_local) == 2:
            key = (min(dets_local), max(dets_local))
        else:
            key = (dets_local[0], BOUNDARY)
        eid = self._by_key.get(key)
        if eid is None:
            eid = len(self.edges)
            self._by_key[key] = eid
            self.edges.append(Edge(key[0], key[1], prob, 0.0, obs_mask, []))
            self._best_part[eid] = (prob, obs_mask)
        else:
            e = self.edges[eid]
            e.prob = _combine(e.prob, prob)
            best_p, best_mask = self._best_part[eid]
            if obs_mask != best_mask:
                self.mask_conflicts.append((e.u, e.v, eid))
                if prob > best_p:
                    self._best_part[eid] = (prob, obs_mask)
                    e.obs_mask = obs_mask
            elif prob > best_p:
                self._best_part[eid] = (prob, obs_mask)
        return eid

    def finalize(self, track_paths: bool = False):
        for e in self.edges:
            e.weight = _weight(e.prob)
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        self.boundary_edge = [-1] * self.n
        for eid, e in enumerate(self.edges):
            if e.v == BOUNDARY:
                self.boundary_edge[e.u] = eid
            else:
                self.adj[e.u].append((e.v, eid))
                self.adj[e.v].append((e.u, eid))
        self._precompute(track_paths)
        self._built = True

    def _precompute(self, track_paths: bool):
        n = self.n
        INF = math.inf
        self.dist = np.full((n, n), INF)
        self.mask = np.zeros((n, n), dtype=np.int64)
        self.bdist = np.full(n, INF)
        self.bmask = np.zeros(n, dtype=np.int64)
        self.paths: list[list[tuple[int, ...]]] | None = (
            [[() for _ in range(n)] for _ in range(n)] if track_paths else None
        )
        self.bpaths: list[tuple[int, ...]] | None = [() for _ in range(n)] if track_paths else None
        for src in range(n):
            dist, mask, pedges = self._dijkstra(src)
            self.dist[src] = dist[:n]
            self.mask[src] = mask[:n]
            self.bdist[src] = dist[n]
            self.bmask[src] = mask[n]
            if track_paths:
                for v in range(n):
                    self.paths[src][v] = pedges[v]
                self.bpaths[src] = pedges[n]

    def _dijkstra(self, src: int, overrides: dict[int, float] | None = None):
        """Shortest paths from src to all nodes and the boundary (index n)."""
        n = self.n
        dist = [math.inf] * (n + 1)
        mask = [0] * (n + 1)
        pedges: list[tuple[int, ...]] = [()] * (n + 1)
        dist[src] = 0.0
        heap = [(0.0, src)]
        done = [False] * (n + 1)
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            if u == n:
                continue  # boundary is absorbing
            be = self.boundary_edge[u]
            nbrs = list(self.adj[u])
            if be >= 0:
                nbrs.append((n, be))
            for v, eid in nbrs:
                w = overrides.get(eid) if overrides else None
                if w is None:
                    w = self.edges[eid].weight
                nd = d + w
                if nd < dist[v] - 1e-12:
                    dist[v] = nd
                    mask[v] = mask[u] ^ self.edges[eid].obs_mask
                    pedges[v] = pedges[u] + (eid,)
                    heapq.heappush(heap, (nd, v))
        return dist, mask, pedges


def build_matching_graphs(
    split: GraphlikeDEM | DetectorErrorModel, track_paths: str | None = None
) -> tuple[MatchingGraph, MatchingGraph]:
    """Build the (Z-graph, X-graph) pair from a graphlike-split DEM.

    ``track_paths`` ('Z' or 'X') additionally caches shortest-path edge lists
    on that side so correlated decoding can inspect matched edges.
    """
    if isinstance(split, DetectorErrorModel):
        split = split_graphlike(split)
    sides = split.sides
    nobs = split.dem.num_observables
    if nobs > 63:
        raise ValueError("at most 63 observables supported")
    z_ids = [d for d, s in enumerate(sides) if s == "Z"]
    x_ids = [d for d, s in enumerate(sides) if s == "X"]
    gz = MatchingGraph("Z", z_ids, nobs)
    gx = MatchingGraph("X", x_ids, nobs)

    def _mask(obs):
        m = 0
        for o in obs:
            m |= 1 << o
        return m

    part_edge_z: dict[int, int] = {}
    part_edge_x: dict[int, int] = {}
    for i, part in enumerate(split.z_parts):
        if not part.dets:
            continue
        loc = tuple(gz.local[d] for d in part.dets)
        part_edge_z[i] = gz.add_part(loc, _mask(part.obs), part.prob)
    for i, part in enumerate(split.x_parts):
        if not part.dets:
            continue
        loc = tuple(gx.local[d] for d in part.dets)
        part_edge_x[i] = gx.add_part(loc, _mask(part.obs), part.prob)
    # Correlation links become per-edge component lists.
    linked_z: dict[int, dict[int, float]] = {}
    linked_x: dict[int, dict[int, float]] = {}
    for zi, xi in split.links:
        ez = part_edge_z.get(zi)
        ex = part_edge_x.get(xi)
        if ez is None or ex is None:
            continue
        p = split.z_parts[zi].prob
        gz.edges[ez].components.append((p, ex))
        gx.edges[ex].components.append((p, ez))
        gz.linked_edges.add(ez)
        gx.linked_edges.add(ex)
    linked_parts_z = {zi for zi, _ in split.links}
    linked_parts_x = {xi for _, xi in split.links}
    for i, part in enumerate(split.z_parts):
        if i not in linked_parts_z and i in part_edge_z:
            gz.edges[part_edge_z[i]].components.append((part.prob, None))
    for i, part in enumerate(split.x_parts):
        if i not in linked_parts_x and i in part_edge_x:
            gx.edges[part_edge_x[i]].components.append((part.prob, None))
    gz.finalize(track_paths == "Z")
    gx.finalize(track_paths == "X")
    return gz, gx


# ---------------------------------------------------------------------------
# Exact matching on defect sets
# ---------------------------------------------------------------------------


def _partition_patterns(k: int):
    """All ways to split k labeled defects into pairs and boundary singles,
    in a fixed deterministic order (lexicographic by sorted pair list)."""
    items = tuple(range(k))
    out: list[tuple[tuple[tuple[int, int], ...], tuple[int, ...]]] = []

    def rec(rem: tuple[int, ...], pairs):
        if not rem:
            out.append((tuple(pairs), ()))
            return
        u = rem[0]
        # u matched to boundary
        rec(rem[1:], pairs + [(u, BOUNDARY)])
        for j, v in enumerate(rem[1:], start=1):
            rec(rem[1:j] + rem[j + 1 :], pairs + [(u, v)])

    rec(items, [])
    cleaned = []
    for pairs, _ in out:
        ps = tuple(p for p in pairs if p[1] != BOUNDARY)
        ss = tuple(p[0] for p in pairs if p[1] == BOUNDARY)
        cleaned.append((ps, ss))
    return cleaned


_PATTERNS = {k: _partition_patterns(k) for k in range(1, 9)}
_ENUM_MAX = 8


def solve_mwpm(graph: MatchingGraph, defects) -> tuple[list[tuple[int, int]], float]:
    """Exact minimum-weight matching of a defect set (global detector ids).

    Every defect may match another defect (along its least-weight path) or
    the boundary.  Returns (pairs, total weight); boundary appears as -1.
    """
    defs = [graph.local[d] for d in defects]
    pairs = _match_blossom(graph.dist, graph.bdist, defs)
    total = 0.0
    out = []
    for a, b in pairs:
        if b == BOUNDARY:
            total += graph.bdist[defs[a]]
            out.append((int(graph.det_ids[defs[a]]), BOUNDARY))
        else:
            total += graph.dist[defs[a], defs[b]]
            out.append((int(graph.det_ids[defs[a]]), int(graph.det_ids[defs[b]])))
    return out, total


def _match_blossom(dist, bdist, defs: list[int]) -> list[tuple[int, int]]:
    """Blossom matching on defect indices; returns local pairs with BOUNDARY."""
    from .matching import min_weight_perfect_matching

    k = len(defs)
    if k == 0:
        return []
    edges = []
    for a in range(k):
        for b in range(a + 1, k):
            w = dist[defs[a], defs[b]]
            if math.isfinite(w):
                edges.append((a, b, w))
        if math.isfinite(bdist[defs[a]]):
            edges.append((a, k + a, bdist[defs[a]]))
    for a in range(k):
        for b in range(a + 1, k):
            edges.append((k + a, k + b, 0.0))
    pairs = min_weight_perfect_matching(2 * k, edges)
    out = []
    for u, v in pairs:
        if u < k and v < k:
            out.append((u, v))
        elif u < k:
            out.append((u, BOUNDARY))
        elif v < k:
            out.append((v, BOUNDARY))
    return out


def _match_enumerate(dist, bdist, defs: list[int]) -> tuple[list[tuple[int, int]], float]:
    best = None
    for pairs, singles in _PATTERNS[len(defs)]:
        w = 0.0
        for a, b in pairs:
            w += dist[defs[a], defs[b]]
        for s in singles:
            w += bdist[defs[s]]
        if best is None or w < best[0] - 1e-12:
            best = (w, pairs, singles)
    _, pairs, singles = best
    return [(a, b) for a, b in pairs] + [(s, BOUNDARY) for s in singles], best[0]


# ---------------------------------------------------------------------------
# Batch decoder
# ---------------------------------------------------------------------------


class Decoder:
    """Batch MWPM decoder over the X/Z graph pair.

    ``mode`` is 'uncorrelated' or 'correlated'; correlated decoding runs the
    ``first_side`` graph first and reweights linked opposite-side edges to
    their conditional probabilities before the second pass.
    """

    def __init__(
        self,
        dem: DetectorErrorModel | GraphlikeDEM,
        mode: str = "uncorrelated",
        first_side: str = "Z",
    ):
        if mode not in ("uncorrelated", "correlated"):
            raise ValueError("mode must be uncorrelated or correlated")
        if first_side not in ("Z", "X"):
            raise ValueError("first_side must be Z or X")
        self.mode = mode
        self.first_side = first_side
        track = first_side if mode == "correlated" else None
        gz, gx = build_matching_graphs(dem, track_paths=track)
        self.graphs = {"Z": gz, "X": gx}
        self.num_observables = gz.num_observables

    # -- per-side batch decode ---------------------------------------------

    def _decode_side(self, graph: MatchingGraph, sub: np.ndarray, want_pairs: bool):
        """Decode one side for all shots.

        ``sub`` is (shots, n_side) bool.  Returns (pred_masks int64 array,
        matched pair lists per shot or None).
        """
        nshots = sub.shape[0]
        preds = np.zeros(nshots, dtype=np.int64)
        pair_lists: list[list[tuple[int, int]]] | None = [None] * nshots if want_pairs else None
        counts = sub.sum(axis=1)
        rows, cols = np.nonzero(sub)
        # group shots by defect count
        order = np.argsort(rows, kind="stable")
        cols = cols[order]
        starts = np.zeros(nshots + 1, dtype=np.intp)
        np.cumsum(counts, out=starts[1:])
        for k in np.unique(counts):
            if k == 0:
                continue
            shot_ids = np.nonzero(counts == k)[0]
            defs = np.empty((len(shot_ids), k), dtype=np.intp)
            for i, s in enumerate(shot_ids):
                defs[i] = cols[starts[s] : starts[s + 1]]
            if k <= _ENUM_MAX:
                self._decode_group_enum(graph, shot_ids, defs, int(k), preds, pair_lists)
            else:
                for i, s in enumerate(shot_ids):
                    d = list(defs[i])
                    pairs = _match_blossom(graph.dist, graph.bdist, d)
                    m = 0
                    for a, b in pairs:
                        m ^= (
                            int(graph.bmask[d[a]])
                            if b == BOUNDARY
                            else int(graph.mask[d[a], d[b]])
                        )
                    preds[s] = m
                    if want_pairs:
                        pair_lists[s] = [
                            (d[a], BOUNDARY if b == BOUNDARY else d[b]) for a, b in pairs
                        ]
        return preds, pair_lists

    def _decode_group_enum(self, graph, shot_ids, defs, k, preds, pair_lists):
        patterns = _PATTERNS[k]
        m = len(shot_ids)
        cost = np.zeros((m, len(patterns)))
        for pi, (pairs, singles) in enumerate(patterns):
            c = np.zeros(m)
            for a, b in pairs:
                c += graph.dist[defs[:, a], defs[:, b]]
            for s in singles:
                c += graph.bdist[defs[:, s]]
            cost[:, pi] = c
        choice = np.argmin(cost, axis=1)
        for pi in np.unique(choice):
            sel = choice == pi
            pairs, singles = patterns[pi]
            msk = np.zeros(int(sel.sum()), dtype=np.int64)
            d = defs[sel]
            for a, b in pairs:
                msk ^= graph.mask[d[:, a], d[:, b]]
            for s in singles:
                msk ^= graph.bmask[d[:, s]]
            preds[shot_ids[sel]] = msk
            if pair_lists is not None:
                for i in np.nonzero(sel)[0]:
                    row = defs[i]
                    pair_lists[shot_ids[i]] = [(row[a], row[b]) for a, b in pairs] + [
                        (row[s], BOUNDARY) for s in singles
                    ]

    # -- correlated second pass ---------------------------------------------

    def _reweights_for(self, graph: MatchingGraph, pairs: list[tuple[int, int]]):
        """Conditional reweights on the opposite graph from matched edges."""
        out: dict[int, float] = {}
        for a, b in pairs:
            eids = graph.bpaths[a] if b == BOUNDARY else graph.paths[a][b]
            for eid in eids:
                if eid not in graph.linked_edges:
                    continue
                e = graph.edges[eid]
                targets = {l for _, l in e.components if l is not None}
                for ex in targets:
                    p = e.conditional(ex)
                    out[ex] = _combine(out[ex], p) if ex in out else p
        return out

    def _decode_shot_overrides(self, graph: MatchingGraph, defs: list[int], overrides):
        """Exact decode of one shot on a reweighted graph (per-shot Dijkstra)."""
        w_over = {eid: _weight(p) for eid, p in overrides.items()}
        k = len(defs)
        dist = {}
        mask = {}
        bdist = [math.inf] * k
        bmask = [0] * k
        for i, src in enumerate(defs):
            d, m, _ = graph._dijkstra(src, overrides=w_over)
            for j, v in enumerate(defs):
                dist[(i, j)] = d[v]
                mask[(i, j)] = m[v]
            bdist[i] = d[graph.n]
            bmask[i] = m[graph.n]

        class _D:
            def __getitem__(_, ij):
                return dist[ij]

        class _B:
            def __getitem__(_, i):
                return bdist[i]

        idx = list(range(k))
        if k <= _ENUM_MAX:
            pairs, _ = _match_enumerate(_D(), _B(), idx)
        else:
            pairs = _match_blossom(_D(), _B(), idx)
        m = 0
        for a, b in pairs:
            m ^= bmask[a] if b == BOUNDARY else mask[(a, b)]
        return m

    # -- public batch API ----------------------------------------------------

    def predict_bits(self, det_bits: np.ndarray) -> np.ndarray:
        """Decode (shots, num_detectors) boolean detection events.

        Returns int64 observable-flip bitmasks per shot.
        """
        gz, gx = self.graphs["Z"], self.graphs["X"]
        if self.mode == "uncorrelated":
            pz, _ = self._decode_side(gz, det_bits[:, gz.det_ids], False)
            px, _ = self._decode_side(gx, det_bits[:, gx.det_ids], False)
            return pz ^ px
        first = self.graphs[self.first_side]
        second = self.graphs["X" if self.first_side == "Z" else "Z"]
        p1, pairs1 = self._decode_side(first, det_bits[:, first.det_ids], True)
        sub2 = det_bits[:, second.det_ids]
        p2, _ = self._decode_side(second, sub2, False)
        # Re-decode the second side per shot wherever the first matching
        # traversed a correlation-linked edge.
        for s in range(det_bits.shape[0]):
            pl = pairs1[s]
            if not pl:
                continue
            overrides = self._reweights_for(first, pl)
            if not overrides:
                continue
            defs = list(np.nonzero(sub2[s])[0])
            if not defs:
                continue
            p2[s] = self._decode_shot_overrides(second, defs, overrides)
        return p1 ^ p2

    def predict_table(self, table) -> np.ndarray:
        """Decode a DetectionTable; returns (shots, num_observables) uint8."""
        bits = np.unpackbits(table.detectors, axis=1, bitorder="little")[
            :, : table.num_detectors
        ].astype(bool)
        masks = self.predict_bits(bits)
        out = np.zeros((table.shots, self.num_observables), dtype=np.uint8)
        for k in range(self.num_observables):
            out[:, k] = (masks >> k) & 1
        return out
