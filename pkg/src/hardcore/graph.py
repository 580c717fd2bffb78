"""Plain undirected simple graphs with bitmask helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ValidationError


@dataclass(frozen=True)
class Graph:
    """Finite undirected simple graph on vertices ``0..vertex_count-1``.

    ``adjacency[v]`` is a sorted tuple of the neighbours of ``v``.
    """

    vertex_count: int
    adjacency: tuple[tuple[int, ...], ...]
    neighbor_masks: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.vertex_count < 1:
            raise ValidationError("a graph needs at least one vertex")
        if len(self.adjacency) != self.vertex_count:
            raise ValidationError("adjacency length does not match vertex_count")
        masks = []
        for v, nbrs in enumerate(self.adjacency):
            m = 0
            for w in nbrs:
                if not 0 <= w < self.vertex_count:
                    raise ValidationError(f"vertex {v} has out-of-range neighbour {w}")
                if w == v:
                    raise ValidationError(f"self-loop at vertex {v}")
                if v not in self.adjacency[w]:
                    raise ValidationError(f"edge {v}-{w} is not symmetric")
                m |= 1 << w
            masks.append(m)
        object.__setattr__(self, "neighbor_masks", tuple(masks))

    @classmethod
    def from_edges(cls, vertex_count: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        nbrs: list[set[int]] = [set() for _ in range(vertex_count)]
        for a, b in edges:
            if a == b:
                raise ValidationError(f"self-loop at vertex {a}")
            nbrs[a].add(b)
            nbrs[b].add(a)
        return cls(vertex_count, tuple(tuple(sorted(s)) for s in nbrs))

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def is_independent(self, config: int) -> bool:
        """True when no two occupied vertices of ``config`` are adjacent."""
        c = config
        while c:
            low = c & -c
            v = low.bit_length() - 1
            if config & self.neighbor_masks[v]:
                return False
            c ^= low
        return True

    def conflict(self, config: int) -> tuple[int, int] | None:
        """First adjacent occupied pair, or ``None`` for an independent set."""
        for v in iter_bits(config):
            clash = config & self.neighbor_masks[v]
            if clash:
                return v, (clash & -clash).bit_length() - 1
        return None


def iter_bits(mask: int):
    """Yield the indices of set bits in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def mask_of(sites: Sequence[int]) -> int:
    m = 0
    for s in sites:
        m |= 1 << s
    return m
