"""Enumeration of independent sets and the single-site-update state graph."""
from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np

from .errors import ValidationError
from .graph import Graph

DEFAULT_SITE_CAP = 36
_FIXED_WIDTH = 63


@dataclass(frozen=True, eq=False)
class StateSpace:
    """All independent sets of ``graph`` in increasing bitmask order.

    ``indptr``/``indices``/``delta`` hold the single-site-update neighbours
    of each state in CSR form; ``delta[k]`` is the energy increase
    ``[H(y) - H(x)]^+`` of the move, 1 for a removal and 0 for an addition.
    """

    graph: Graph
    states: np.ndarray
    energy: np.ndarray
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)
    _lookup: dict | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def fixed_width(self) -> bool:
        return self.states.dtype == np.uint64

    def index_of(self, config: int) -> int:
        if self.fixed_width:
            if not 0 <= config < 1 << 64:
                raise ValidationError(f"configuration {config:#x} is not in the state space")
            key = np.uint64(config)
            i = int(np.searchsorted(self.states, key))
            if i < len(self.states) and self.states[i] == key:
                return i
        else:
            if self._lookup is None:
                object.__setattr__(self, "_lookup", {int(c): i for i, c in enumerate(self.states)})
            if config in self._lookup:
                return self._lookup[config]
        raise ValidationError(f"configuration {config:#x} is not an admissible state")

    def config(self, index: int) -> int:
        return int(self.states[index])

    def neighbors(self, index: int) -> list[tuple[int, int]]:
        lo, hi = self.indptr[index], self.indptr[index + 1]
        return list(zip(self.indices[lo:hi].tolist(), self.delta[lo:hi].tolist()))

    def counts_by_energy(self) -> dict[int, int]:
        values, counts = np.unique(self.energy, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def to_json(self) -> dict:
        return {
            "vertex_count": self.graph.vertex_count,
            "adjacency": [list(a) for a in self.graph.adjacency],
            "states": [hex(int(s)) for s in self.states],
            "energy": self.energy.tolist(),
            "neighbors": [self.indices[self.indptr[i]:self.indptr[i + 1]].tolist() for i in range(len(self))],
        }


def count_bound(graph: Graph) -> int:
    """Upper bound on the number of independent sets.

    Each edge ``uv`` contributes ``(2^d_u + 2^d_v - 1)^(1/(d_u d_v))`` and each
    isolated vertex a factor 2 (the Sah-Sawhney-Stoner-Zhao bound).
    """
    deg = [len(a) for a in graph.adjacency]
    log_bound = float(sum(1 for d in deg if d == 0))
    for u, nbrs in enumerate(graph.adjacency):
        for v in nbrs:
            if u < v:
                log_bound += np.log2(2.0 ** deg[u] + 2.0 ** deg[v] - 1) / (deg[u] * deg[v])
    return int(np.ceil(2.0 ** min(log_bound, graph.vertex_count)))


def enumerate_states(graph: Graph, cap: int = DEFAULT_SITE_CAP) -> StateSpace:
    """Materialize every independent set of ``graph`` with its move graph.

    Graphs with more than ``cap`` vertices are rejected.  States are built
    breadth-wise: for each vertex in turn, every partial state whose
    lower-indexed neighbours of that vertex are all vacant is copied with
    the vertex occupied.
    """
    n = graph.vertex_count
    if n > cap:
        raise ValidationError(
            f"graph has {n} sites, above the cap of {cap}; "
            f"the state space could hold up to {count_bound(graph)} configurations"
        )
    if n <= _FIXED_WIDTH:
        states = _enumerate_fixed(graph)
    else:
        states = _enumerate_wide(graph)
    if states.dtype == np.uint64:
        energy = -_popcount64(states)
    else:
        energy = -np.array([bin(int(s)).count("1") for s in states], dtype=np.int64)
    indptr, indices, delta = _moves(graph, states)
    return StateSpace(graph, states, energy, indptr, indices, delta)


def _enumerate_fixed(graph: Graph) -> np.ndarray:
    states = np.zeros(1, dtype=np.uint64)
    for v in range(graph.vertex_count):
        lower = 0
        for w in graph.adjacency[v]:
            if w < v:
                lower |= 1 << w
        free = states[(states & np.uint64(lower)) == 0]
        states = np.concatenate([states, free | np.uint64(1 << v)])
    states.sort()
    return states


def _enumerate_wide(graph: Graph) -> np.ndarray:
    masks = graph.neighbor_masks
    out: list[int] = []
    stack = [(0, 0, 0)]  # (next vertex, config, blocked mask)
    n = graph.vertex_count
    while stack:
        v, config, blocked = stack.pop()
        while v < n and blocked >> v & 1:
            v += 1
        if v == n:
            out.append(config)
            continue
        stack.append((v + 1, config, blocked))
        stack.append((v + 1, config | (1 << v), blocked | masks[v]))
    out.sort()
    arr = np.empty(len(out), dtype=object)
    arr[:] = out
    return arr


_BYTE_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def _popcount64(a: np.ndarray) -> np.ndarray:
    return _BYTE_POPCOUNT[a.view(np.uint8).reshape(-1, 8)].sum(axis=1)


def _moves(graph: Graph, states: np.ndarray):
    """CSR neighbour lists: every addition move and its reverse removal."""
    n_states = len(states)
    src_parts, dst_parts = [], []
    if states.dtype == np.uint64:
        for v in range(graph.vertex_count):
            bit = np.uint64(1 << v)
            block = np.uint64(graph.neighbor_masks[v] | (1 << v))
            low = np.nonzero((states & block) == 0)[0]
            high = np.searchsorted(states, states[low] | bit)
            src_parts.append(low)
            dst_parts.append(high)
    else:
        lookup = {int(s): i for i, s in enumerate(states)}
        for v in range(graph.vertex_count):
            block = graph.neighbor_masks[v] | (1 << v)
            low = [i for i, s in enumerate(states) if not s & block]
            src_parts.append(np.array(low, dtype=np.int64))
            dst_parts.append(np.array([lookup[int(states[i]) | (1 << v)] for i in low], dtype=np.int64))
    add_src = np.concatenate(src_parts) if src_parts else np.zeros(0, np.int64)
    add_dst = np.concatenate(dst_parts) if dst_parts else np.zeros(0, np.int64)
    src = np.concatenate([add_src, add_dst])
    dst = np.concatenate([add_dst, add_src])
    delta = np.concatenate([np.zeros(len(add_src), np.int8), np.ones(len(add_src), np.int8)])
    order = np.lexsort((dst, src))
    src, dst, delta = src[order], dst[order], delta[order]
    indptr = np.zeros(n_states + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst.astype(np.int64), delta


def as_landscape(space: StateSpace, site_count: int | None = None):
    """Energy landscape with connectivity ``1/N`` per single-site move.

    The residual probability mass of each state sits on its self-loop.
    """
    from .landscape import EnergyLandscape

    n_sites = space.graph.vertex_count if site_count is None else site_count
    if n_sites < space.graph.vertex_count:
        raise ValidationError("site_count cannot be smaller than the number of vertices")
    weights = np.full(len(space.indices), 1.0 / n_sites)
    return EnergyLandscape.from_csr(
        space.energy.tolist(), space.indptr, space.indices, weights, labels=space.states
    )


def save_state_space(space: StateSpace, path) -> None:
    with open(path, "w") as fh:
        json.dump({"schema": 1, "state_space": space.to_json()}, fh, sort_keys=True)
