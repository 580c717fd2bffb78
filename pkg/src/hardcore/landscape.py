"""Exact analysis of finite energy landscapes.

An :class:`EnergyLandscape` is a finite connected graph of states with an
exact energy per state (``int`` or :class:`fractions.Fraction`) and a
symmetric connectivity weight on each edge.  Every quantity here is a
combinatorial function of the energies and the edge set; floating point
never enters a comparison.

The workhorse is the sublevel filtration: for each distinct energy level
``h`` the connected components of ``{z : H(z) <= h}``.  Communication
heights, cycles, partitions into maximal cycles and the cycle tree are all
read off it.

Queries with a target set ``A`` first add to ``A`` every state that cannot
be reached from the starting state without passing through ``A``; the
added states are reported alongside each result.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ComputationError, ValidationError

INF = math.inf
_FILTRATION_LIMIT = 60_000_000


def _as_exact(value):
    if isinstance(value, (bool, np.bool_)):
        raise ValidationError("energies must be numbers")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValidationError("energies must be finite")
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise ValidationError(f"unsupported energy type {type(value).__name__}")


@dataclass(frozen=True)
class Cycle:
    """A cycle with its depth, bottom and principal boundary.

    For a trivial cycle (a singleton with a neighbour at equal or lower
    energy) the principal boundary is the set of such neighbours, the exits
    that cost nothing.
    """

    members: frozenset[int]
    depth: object
    bottom: frozenset[int]
    principal_boundary: frozenset[int]
    is_trivial: bool

    def __contains__(self, state: int) -> bool:
        return state in self.members

    def __len__(self) -> int:
        return len(self.members)

    def to_json(self) -> dict:
        return {
            "members": sorted(self.members),
            "depth": _json_energy(self.depth),
            "bottom": sorted(self.bottom),
            "principal_boundary": sorted(self.principal_boundary),
            "is_trivial": self.is_trivial,
        }


def _json_energy(value):
    if value is None:
        return None
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else str(value)
    return value


@dataclass(frozen=True)
class Verdict:
    verdict: str
    reason: str
    witness: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict.startswith("holds")

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "reason": self.reason,
                "witness": {k: _json_energy(v) if not isinstance(v, (list, tuple)) else list(v)
                            for k, v in self.witness.items()}}


@dataclass(frozen=True)
class ExponentReport:
    """Exponents of the hitting problem from ``x`` to ``A``."""

    x: int
    target: frozenset[int]
    completed_target: frozenset[int]
    added_to_target: frozenset[int]
    energy_x: object
    communication_height: object
    gamma_init: object
    psi_min: object
    psi_max: object
    theta_min: object
    theta_max: object
    gamma_tilde_complement: object
    gamma_tilde_without_x: object
    optimality_gap: object
    assumption_A: Verdict
    assumption_B: Verdict

    def chain(self) -> tuple:
        return (self.gamma_init, self.psi_min, self.theta_min, self.theta_max,
                self.psi_max, self.gamma_tilde_complement)

    def chain_holds(self) -> bool:
        c = self.chain()
        return all(a <= b for a, b in zip(c, c[1:]))

    def to_json(self, labels=None) -> dict:
        def show(states):
            states = sorted(states)
            return [hex(int(labels[s])) for s in states] if labels is not None else states

        return {
            "x": hex(int(labels[self.x])) if labels is not None else self.x,
            "target": show(self.target),
            "completed_target": show(self.completed_target),
            "added_to_target": show(self.added_to_target),
            "energy_x": _json_energy(self.energy_x),
            "communication_height": _json_energy(self.communication_height),
            "gamma_init": _json_energy(self.gamma_init),
            "psi_min": _json_energy(self.psi_min),
            "psi_max": _json_energy(self.psi_max),
            "theta_min": _json_energy(self.theta_min),
            "theta_max": _json_energy(self.theta_max),
            "gamma_tilde_complement": _json_energy(self.gamma_tilde_complement),
            "gamma_tilde_without_x": _json_energy(self.gamma_tilde_without_x),
            "optimality_gap": _json_energy(self.optimality_gap),
            "assumption_A": self.assumption_A.to_json(),
            "assumption_B": self.assumption_B.to_json(),
            "inequality_chain_holds": self.chain_holds(),
        }


@dataclass(frozen=True)
class CycleTreeNode:
    members: tuple[int, ...]
    depth: object
    parent: int | None
    children: tuple[int, ...]


@dataclass(frozen=True)
class CycleTree:
    """Nested cycles: root is the whole state space, leaves are singletons."""

    nodes: tuple[CycleTreeNode, ...]
    root: int

    def to_text(self, labels=None) -> str:
        lines = []

        def name(node):
            m = node.members
            shown = [hex(int(labels[s])) if labels is not None else str(s) for s in m[:6]]
            more = f" +{len(m) - 6}" if len(m) > 6 else ""
            return f"[{len(m)}] {{{', '.join(shown)}{more}}} depth={_json_energy(node.depth)}"

        stack = [(self.root, 0)]
        while stack:
            i, level = stack.pop()
            lines.append("  " * level + name(self.nodes[i]))
            for c in reversed(self.nodes[i].children):
                stack.append((c, level + 1))
        return "\n".join(lines)

    def to_edge_list(self) -> str:
        out = ["digraph cycle_tree {"]
        for i, node in enumerate(self.nodes):
            out.append(f'  n{i} [label="{len(node.members)} states, depth {_json_energy(node.depth)}"];')
        for i, node in enumerate(self.nodes):
            for c in node.children:
                out.append(f"  n{i} -> n{c};")
        out.append("}")
        return "\n".join(out)


@dataclass(frozen=True)
class _Partition:
    ids: np.ndarray          # cycle id per state, -1 outside the partitioned set
    exit_rank: np.ndarray    # rank of Phi(z, outside) per state
    count: int
    min_in: np.ndarray
    min_out: np.ndarray
    trivial: np.ndarray
    depth: np.ndarray
    exit_cycle: np.ndarray   # principal-boundary pairs (cycle id, boundary state)
    exit_state: np.ndarray


class EnergyLandscape:
    """States ``0..n-1`` with exact energies, symmetric edges and weights ``q``.

    Parameters
    ----------
    energies : sequence of int or Fraction
    edges : iterable of (i, j) pairs, each undirected edge listed once
    weights : optional sequence of connectivity weights aligned with ``edges``;
        defaults to ``1 / max_degree`` on every edge
    labels : optional array of external names (e.g. bitmask configurations)
    """

    def __init__(self, energies: Sequence, edges: Iterable[tuple[int, int]],
                 weights: Sequence[float] | None = None, labels=None, validate: bool = True):
        edges = [(int(a), int(b)) for a, b in edges]
        n = len(energies)
        if weights is None:
            w_list = None
        else:
            w_list = [float(w) for w in weights]
            if len(w_list) != len(edges):
                raise ValidationError("weights must align with edges")
        src, dst, wts = [], [], []
        seen = set()
        for k, (a, b) in enumerate(edges):
            if not (0 <= a < n and 0 <= b < n):
                raise ValidationError(f"edge ({a}, {b}) refers to a missing state")
            if a == b:
                raise ValidationError(f"self-loop at state {a}; self-loops carry the residual mass implicitly")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValidationError(f"edge {key} listed twice")
            seen.add(key)
            w = None if w_list is None else w_list[k]
            src += [a, b]
            dst += [b, a]
            wts += [w, w]
        if w_list is None:
            deg = np.bincount(np.array(src, dtype=np.int64), minlength=n) if src else np.zeros(n, int)
            top = max(int(deg.max()), 1) if n else 1
            wts = [1.0 / top] * len(src)
        src_a = np.array(src, dtype=np.int64)
        dst_a = np.array(dst, dtype=np.int64)
        order = np.lexsort((dst_a, src_a))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src_a + 1, 1)
        np.cumsum(indptr, out=indptr)
        self._init(list(energies), indptr, dst_a[order], np.array(wts, dtype=float)[order], labels, validate)

    @classmethod
    def from_csr(cls, energies, indptr, indices, weights, labels=None, validate=True):
        obj = cls.__new__(cls)
        obj._init(list(energies), np.asarray(indptr, dtype=np.int64),
                  np.asarray(indices, dtype=np.int64), np.asarray(weights, dtype=float), labels, validate)
        return obj

    @classmethod
    def from_matrix(cls, energies, q) -> "EnergyLandscape":
        """Landscape with connectivity given by a dense symmetric matrix ``q``."""
        q = np.asarray(q, dtype=float)
        edges, weights = [], []
        for i in range(q.shape[0]):
            for j in range(i + 1, q.shape[0]):
                if q[i, j] != q[j, i]:
                    raise ValidationError(f"q is not symmetric at ({i}, {j})")
                if q[i, j] > 0:
                    edges.append((i, j))
                    weights.append(q[i, j])
        return cls(energies, edges, weights)

    def _init(self, energies, indptr, indices, weights, labels, validate):
        n = len(energies)
        if n < 1:
            raise ValidationError("a landscape needs at least one state")
        exact = [_as_exact(e) for e in energies]
        self.n = n
        self.energies = tuple(exact)
        self.indptr = indptr
        self.indices = indices
        self.weights = weights
        self.labels = None if labels is None else np.asarray(labels)
        levels = sorted(set(exact))
        self.levels = tuple(levels)
        where = {v: i for i, v in enumerate(levels)}
        self.rank = np.array([where[e] for e in exact], dtype=np.int64)
        if all(isinstance(v, int) for v in levels):
            self._level_values = np.array(levels, dtype=np.int64)
        else:
            self._level_values = np.array([Fraction(v) for v in levels], dtype=object)
        self.sources = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
        self._filtration = None
        self._label_index = None
        if validate:
            self._validate()

    def _validate(self):
        n = self.n
        if len(self.levels) < 2:
            raise ValidationError("energy is constant; the landscape has no structure")
        a = csr_matrix((self.weights, self.indices, self.indptr), shape=(n, n))
        if (a != a.T).nnz:
            raise ValidationError("connectivity is not symmetric")
        if np.any(self.sources == self.indices):
            raise ValidationError("self-loops must not be listed")
        if np.any(self.weights <= 0):
            raise ValidationError("connectivity weights must be positive")
        rowsum = np.asarray(a.sum(axis=1)).ravel()
        if np.any(rowsum > 1 + 1e-12):
            worst = int(np.argmax(rowsum))
            raise ValidationError(f"connectivity row of state {worst} sums to {rowsum[worst]:.6g} > 1")
        count, _ = connected_components(a, directed=False)
        if count != 1:
            raise ValidationError(f"state graph is not connected ({count} components)")

    # ------------------------------------------------------------ basics

    def __len__(self) -> int:
        return self.n

    def neighbors(self, x: int) -> np.ndarray:
        return self.indices[self.indptr[x]:self.indptr[x + 1]]

    def energy(self, x: int):
        return self.energies[x]

    def value(self, rank: int):
        return self.levels[rank]

    def index_of(self, label) -> int:
        """State index of an external label (for hard-core spaces, a bitmask)."""
        if self.labels is None:
            return int(label)
        if self._label_index is None:
            self._label_index = {int(v): i for i, v in enumerate(self.labels)}
        try:
            return self._label_index[int(label)]
        except KeyError:
            raise ValidationError(f"{label!r} is not a state of this landscape") from None

    def connectivity(self, x: int, y: int) -> float:
        nb = self.neighbors(x)
        k = np.searchsorted(nb, y)
        if k < len(nb) and nb[k] == y:
            return float(self.weights[self.indptr[x] + k])
        if x == y:
            return 1.0 - float(self.weights[self.indptr[x]:self.indptr[x + 1]].sum())
        return 0.0

    def _mask(self, states) -> np.ndarray:
        if isinstance(states, np.ndarray) and states.dtype == bool:
            return states.copy()
        mask = np.zeros(self.n, dtype=bool)
        if isinstance(states, (int, np.integer)):
            states = [states]
        for s in states:
            s = int(s)
            if not 0 <= s < self.n:
                raise ValidationError(f"state {s} out of range")
            mask[s] = True
        return mask

    def _depths(self, top_rank: np.ndarray, states: np.ndarray):
        """Exact ``level(top_rank) - H(state)`` per entry."""
        return self._level_values[top_rank] - self._level_values[self.rank[states]]

    # -------------------------------------------------------- filtration

    def filtration(self) -> np.ndarray:
        """Component labels of ``{rank <= h}`` for every level ``h``; -1 if inactive."""
        if self._filtration is None:
            n, nlev = self.n, len(self.levels)
            if n * nlev > _FILTRATION_LIMIT:
                raise ComputationError(
                    f"sublevel filtration of {n} states x {nlev} levels exceeds the memory budget"
                )
            edge_level = np.maximum(self.rank[self.sources], self.rank[self.indices])
            labels = np.empty((nlev, n), dtype=np.int32)
            order = np.argsort(edge_level, kind="stable")
            src, dst, lev = self.sources[order], self.indices[order], edge_level[order]
            cut = np.searchsorted(lev, np.arange(nlev), side="right")
            for h in range(nlev):
                k = cut[h]
                g = coo_matrix((np.ones(k, dtype=np.int8), (src[:k], dst[:k])), shape=(n, n))
                _, lab = connected_components(g, directed=False)
                lab = lab.astype(np.int32)
                lab[self.rank > h] = -1
                labels[h] = lab
            self._filtration = labels
        return self._filtration

    def phi_rank_to_set(self, target) -> np.ndarray:
        """Rank of ``Phi(z, target)`` for every state ``z`` in one sweep."""
        mask = self._mask(target)
        if not mask.any():
            raise ValidationError("target set is empty")
        labels = self.filtration()
        out = np.full(self.n, -1, dtype=np.int64)
        for h in range(len(self.levels)):
            lab = labels[h]
            hit = np.zeros(self.n + 1, dtype=bool)
            t = lab[mask]
            hit[t[t >= 0]] = True
            new = (out < 0) & (lab >= 0) & hit[lab]
            out[new] = h
            if (out >= 0).all():
                break
        return out

    def communication_height(self, x: int, target):
        """Lowest possible maximum energy along a path from ``x`` to ``target``."""
        return self.levels[int(self.phi_rank_to_set(target)[x])]

    def communication_heights(self, target) -> list:
        return [self.levels[r] for r in self.phi_rank_to_set(target)]

    # ------------------------------------------------- stability levels

    def stability_levels(self) -> list:
        """Barrier from each state to a strictly lower one; ``inf`` at global minima."""
        labels = self.filtration()
        out = np.full(self.n, -1, dtype=np.int64)
        for h in range(len(self.levels)):
            lab = labels[h]
            active = lab >= 0
            comp_min = np.full(self.n, np.iinfo(np.int64).max, dtype=np.int64)
            np.minimum.at(comp_min, lab[active], self.rank[active])
            new = (out < 0) & active
            new[new] = comp_min[lab[new]] < self.rank[new]
            out[new] = h
        result = []
        for x in range(self.n):
            result.append(INF if out[x] < 0 else self.levels[out[x]] - self.energies[x])
        return result

    def stability_level(self, x: int):
        return self.stability_levels()[x]

    def stable_states(self) -> frozenset[int]:
        return frozenset(np.nonzero(self.rank == 0)[0].tolist())

    def metastable_states(self) -> frozenset[int]:
        v = self.stability_levels()
        finite = [(val, x) for x, val in enumerate(v) if val != INF]
        if not finite:
            return frozenset()
        top = max(val for val, _ in finite)
        return frozenset(x for val, x in finite if val == top)

    def local_minima(self) -> frozenset[int]:
        """States with no neighbour of lower energy."""
        lower = self.rank[self.indices] < self.rank[self.sources]
        has_lower = np.zeros(self.n, dtype=bool)
        has_lower[self.sources[lower]] = True
        return frozenset(np.nonzero(~has_lower)[0].tolist())

    # -------------------------------------------------------- cycles

    def is_cycle(self, states) -> bool:
        members = self._mask(states)
        idx = np.nonzero(members)[0]
        if len(idx) == 0:
            return False
        if len(idx) == 1:
            return True
        if not self._connected_within(members):
            return False
        boundary = self._boundary(members)
        if not boundary.any():
            return True
        return self.rank[idx].max() < self.rank[boundary].min()

    def _connected_within(self, members: np.ndarray) -> bool:
        idx = np.nonzero(members)[0]
        seen = {int(idx[0])}
        queue = deque(seen)
        while queue:
            u = queue.popleft()
            for v in self.neighbors(u):
                v = int(v)
                if members[v] and v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == len(idx)

    def _boundary(self, members: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        crossing = members[self.sources] & ~members[self.indices]
        out[self.indices[crossing]] = True
        return out

    def cycle(self, states) -> Cycle:
        """Build a :class:`Cycle` for a state set, checking that it is one."""
        members = self._mask(states)
        if not self.is_cycle(members):
            raise ValidationError("state set is not a cycle")
        idx = np.nonzero(members)[0]
        boundary = self._boundary(members)
        min_inside = self.rank[idx].min()
        bottom = frozenset(idx[self.rank[idx] == min_inside].tolist())
        if not boundary.any():
            return Cycle(frozenset(idx.tolist()), INF, bottom, frozenset(), False)
        b_idx = np.nonzero(boundary)[0]
        min_out = self.rank[b_idx].min()
        if self.rank[idx].max() < min_out:
            depth = self.levels[min_out] - self.levels[min_inside]
            principal = frozenset(b_idx[self.rank[b_idx] == min_out].tolist())
            return Cycle(frozenset(idx.tolist()), depth, bottom, principal, False)
        z = int(idx[0])
        exits = frozenset(b_idx[self.rank[b_idx] <= self.rank[z]].tolist())
        return Cycle(frozenset([z]), 0, bottom, exits, True)

    def _partition(self, inside: np.ndarray) -> "_Partition":
        """Maximal-cycle partition of ``inside`` with per-cycle statistics.

        A state ``z`` whose exit height ``t = Phi(z, outside)`` exceeds its
        energy belongs to the component of ``{rank < t}`` containing it;
        otherwise it is a singleton.
        """
        if inside.all():
            raise ValidationError("the whole state space has no external boundary")
        if not inside.any():
            raise ValidationError("state set is empty")
        t = self.phi_rank_to_set(~inside)
        labels = self.filtration()
        idx = np.nonzero(inside)[0]
        tz = t[idx]
        grown = tz > self.rank[idx]
        lab = np.where(grown, labels[np.maximum(tz - 1, 0), idx], idx)
        key = np.where(grown, tz + 1, 0) * (self.n + 1) + lab
        _, inverse = np.unique(key, return_inverse=True)
        ids = np.full(self.n, -1, dtype=np.int64)
        ids[idx] = inverse
        k = int(inverse.max()) + 1
        big = np.iinfo(np.int64).max
        rank = self.rank
        min_in = np.full(k, big, dtype=np.int64)
        max_in = np.full(k, -1, dtype=np.int64)
        np.minimum.at(min_in, inverse, rank[idx])
        np.maximum.at(max_in, inverse, rank[idx])
        cs = ids[self.sources]
        cross = (cs >= 0) & (ids[self.indices] != cs)
        c_src, v_dst, u_src = cs[cross], self.indices[cross], self.sources[cross]
        min_out = np.full(k, big, dtype=np.int64)
        np.minimum.at(min_out, c_src, rank[v_dst])
        trivial = max_in >= min_out
        depth = np.where(trivial, 0, self._level_values[np.minimum(min_out, len(self.levels) - 1)]
                         - self._level_values[min_in])
        principal = np.where(trivial[c_src], rank[v_dst] <= rank[u_src], rank[v_dst] == min_out[c_src])
        return _Partition(ids, t, k, min_in, min_out, trivial, depth, c_src[principal], v_dst[principal])

    def _cycles_from_partition(self, part: "_Partition", keep=None) -> list[Cycle]:
        keep = set(range(part.count)) if keep is None else set(keep)
        members: dict[int, list[int]] = {c: [] for c in keep}
        for z in np.nonzero(part.ids >= 0)[0].tolist():
            c = int(part.ids[z])
            if c in members:
                members[c].append(z)
        exits: dict[int, set[int]] = {c: set() for c in keep}
        for c, v in zip(part.exit_cycle.tolist(), part.exit_state.tolist()):
            if c in exits:
                exits[c].add(v)
        out = []
        for c in sorted(keep, key=lambda c: min(members[c])):
            m = members[c]
            bottom = frozenset(z for z in m if self.rank[z] == part.min_in[c])
            depth = part.depth[c]
            depth = depth.item() if hasattr(depth, "item") else depth
            out.append(Cycle(frozenset(m), depth, bottom, frozenset(exits[c]), bool(part.trivial[c])))
        return out

    def maximal_cycle_partition(self, states) -> list[Cycle]:
        """Partition of ``states`` into the cycles maximal by inclusion inside it."""
        return self._cycles_from_partition(self._partition(self._mask(states)))

    def max_depth(self, states):
        """Largest cycle depth in the maximal-cycle partition of ``states``.

        Computed from the partition and from the exit heights of individual
        states; the two must agree.
        """
        inside = self._mask(states)
        part = self._partition(inside)
        idx = np.nonzero(inside)[0]
        by_state = self._depths(part.exit_rank[idx], idx).max()
        by_partition = part.depth.max()
        if by_state != by_partition:
            raise ComputationError(
                f"maximum depth disagrees between formulas ({by_state} vs {by_partition})"
            )
        return by_state.item() if hasattr(by_state, "item") else by_state

    def _max_depth_or_none(self, inside: np.ndarray):
        if not inside.any():
            return None
        return self.max_depth(inside)

    # ------------------------------------------------------ cycle tree

    def cycle_tree(self) -> CycleTree:
        """All cycles of the landscape arranged by inclusion."""
        labels = self.filtration()
        nlev = len(self.levels)
        node_of: dict[tuple[int, ...], int] = {}
        members_list: list[tuple[int, ...]] = []
        parent_of_comp: list[int | None] = []

        def add(members: tuple[int, ...]) -> int:
            if members not in node_of:
                node_of[members] = len(members_list)
                members_list.append(members)
                parent_of_comp.append(None)
            return node_of[members]

        level_nodes = []
        for h in range(nlev):
            lab = labels[h]
            comps: dict[int, list[int]] = {}
            for z in np.nonzero(lab >= 0)[0]:
                comps.setdefault(int(lab[z]), []).append(int(z))
            level_nodes.append({c: add(tuple(m)) for c, m in comps.items()})
        singles = [add((z,)) for z in range(self.n)]
        parents: dict[int, int] = {}
        for h in range(nlev - 1):
            for c, node in level_nodes[h].items():
                z = members_list[node][0]
                up = level_nodes[h + 1][int(labels[h + 1, z])]
                if up != node:
                    parents.setdefault(node, up)
        for z, node in enumerate(singles):
            r = int(self.rank[z])
            home = level_nodes[r][int(labels[r, z])]
            if home != node:
                parents.setdefault(node, home)
        root = level_nodes[nlev - 1][int(labels[nlev - 1, 0])]
        children: dict[int, list[int]] = {i: [] for i in range(len(members_list))}
        for child, par in parents.items():
            children[par].append(child)
        nodes = []
        for i, m in enumerate(members_list):
            depth = INF if i == root else self.cycle(list(m)).depth
            nodes.append(CycleTreeNode(m, depth, parents.get(i), tuple(sorted(children[i], key=lambda c: members_list[c]))))
        return CycleTree(tuple(nodes), root)

    # ---------------------------------------------------- target sets

    def complete_target(self, x: int, target) -> tuple[frozenset[int], frozenset[int]]:
        """Add to ``target`` the states unreachable from ``x`` while avoiding it.

        Returns ``(completed target, added states)``.
        """
        a = self._mask(target)
        if not a.any():
            raise ValidationError("target set is empty")
        if a[x]:
            return frozenset(np.nonzero(a)[0].tolist()), frozenset()
        seen = self._reach(np.array([x]), expand=~a)
        added = ~a & ~seen
        done = a | added
        return frozenset(np.nonzero(done)[0].tolist()), frozenset(np.nonzero(added)[0].tolist())

    def _reach(self, sources: np.ndarray, expand: np.ndarray, allowed: np.ndarray | None = None) -> np.ndarray:
        """States reachable from ``sources``.

        Sources are always left; any other state only when ``expand`` marks it.
        """
        seen = np.zeros(self.n, dtype=bool)
        seen[sources] = True
        queue = deque(int(s) for s in sources)
        first = set(queue)
        while queue:
            u = queue.popleft()
            if not expand[u] and u not in first:
                continue
            for v in self.neighbors(u):
                v = int(v)
                if not seen[v] and (allowed is None or allowed[v]):
                    seen[v] = True
                    queue.append(v)
        return seen

    def _prepare(self, x: int, target):
        x = int(x)
        if not 0 <= x < self.n:
            raise ValidationError(f"state {x} out of range")
        full, added = self.complete_target(x, target)
        a = self._mask(full)
        return x, a, added

    def _require_outside(self, x: int, a: np.ndarray):
        if a[x]:
            raise ValidationError("the starting state belongs to the target set")

    # ------------------------------------------------- initial cycles

    def initial_cycle(self, x: int, target) -> Cycle:
        """Maximal cycle containing ``x`` that avoids the (completed) target."""
        x, a, _ = self._prepare(x, target)
        if a[x]:
            return self.cycle([x])
        part = self._partition(~a)
        return self._cycles_from_partition(part, [int(part.ids[x])])[0]

    def gamma(self, x: int, target):
        """Depth of the initial cycle of ``x``; zero when ``x`` is in the target.

        This is ``Phi(x, A)`` minus the energy of the cycle's bottom, which
        can exceed ``Phi(x, A) - H(x)`` when ``x`` is not at the bottom.
        """
        x, a, _ = self._prepare(x, target)
        if a[x]:
            return 0
        return self._gammas(a)[0][x]

    def _gammas(self, a: np.ndarray):
        """Initial-cycle depths of all states (zero on ``a``) and ``Phi`` ranks to ``a``."""
        phi = self.phi_rank_to_set(a)
        g = np.zeros(self.n, dtype=object)
        outside = ~a
        if outside.any():
            part = self._partition(outside)
            idx = np.nonzero(outside)[0]
            g[idx] = part.depth.astype(object)[part.ids[idx]]
        return g, phi

    def relevant_cycle(self, x: int, target) -> Cycle:
        """Smallest cycle strictly containing the initial cycle of ``x``."""
        x, a, _ = self._prepare(x, target)
        self._require_outside(x, a)
        return self.cycle(self._relevant_mask(x, a))

    def _relevant_mask(self, x: int, a: np.ndarray) -> np.ndarray:
        h = int(self.phi_rank_to_set(a)[x])
        lab = self.filtration()[h]
        return lab == lab[x]

    def optimality_gap(self, x: int, target):
        """Extra height of the best path from ``x`` to the target that leaves the relevant cycle.

        ``None`` when every path to the target stays inside the relevant cycle.
        """
        x, a, _ = self._prepare(x, target)
        self._require_outside(x, a)
        inner = self._relevant_mask(x, a)
        phi = self.levels[int(self.phi_rank_to_set(a)[x])]
        f = self._minimax_ranks([x], expand=~a)
        g = self._minimax_ranks(np.nonzero(a)[0].tolist(), expand=~a)
        best = None
        for y in np.nonzero(~inner)[0]:
            if f[y] < 0 or g[y] < 0:
                continue
            if a[y]:
                h = f[y]
            else:
                h = max(f[y], g[y])
            if best is None or h < best:
                best = h
        return None if best is None else self.levels[best] - phi

    def _minimax_ranks(self, sources, expand: np.ndarray, allowed: np.ndarray | None = None,
                       weight_rank: np.ndarray | None = None) -> np.ndarray:
        """Bottleneck distances: lowest possible maximum node weight from ``sources``."""
        w = self.rank if weight_rank is None else weight_rank
        best = np.full(self.n, -1, dtype=np.int64)
        heap = [(int(w[s]), int(s)) for s in sources]
        heapq.heapify(heap)
        done = np.zeros(self.n, dtype=bool)
        first = set()
        for d, s in heap:
            best[s] = d if best[s] < 0 else min(best[s], d)
            first.add(s)
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            if not expand[u] and u not in first:
                continue
            for v in self.neighbors(u):
                v = int(v)
                if done[v] or (allowed is not None and not allowed[v]):
                    continue
                nd = max(d, int(w[v]))
                if best[v] < 0 or nd < best[v]:
                    best[v] = nd
                    heapq.heappush(heap, (nd, v))
        return best

    # ------------------------------------------------ optimal paths

    def _optimal_mask(self, x: int, a: np.ndarray) -> np.ndarray:
        inner = self._relevant_mask(x, a)
        fwd = self._reach(np.array([x]), expand=~a, allowed=inner)
        sources = np.nonzero(a & inner)[0]
        bwd = self._reach(sources, expand=~a, allowed=inner & ~a)
        return fwd & bwd

    def optimal_states(self, x: int, target) -> frozenset[int]:
        """States lying on at least one optimal path from ``x`` to the target."""
        x, a, _ = self._prepare(x, target)
        self._require_outside(x, a)
        return frozenset(np.nonzero(self._optimal_mask(x, a))[0].tolist())

    def psi_exponents(self, x: int, target) -> tuple:
        """``(psi_min, psi_max)`` over optimal paths from ``x`` to the target."""
        x, a, _ = self._prepare(x, target)
        self._require_outside(x, a)
        return self._psi(x, a)

    def _psi(self, x: int, a: np.ndarray):
        gam, _ = self._gammas(a)
        optimal = self._optimal_mask(x, a)
        inner_opt = optimal & ~a
        psi_max = max(gam[inner_opt].tolist())
        tilde = self.max_depth(inner_opt)
        if tilde != psi_max:
            raise ComputationError(f"psi_max mismatch: {psi_max} vs maximum depth {tilde}")
        psi_min = self._bottleneck(x, a, self._relevant_mask(x, a), gam)
        return psi_min, psi_max

    def _bottleneck(self, x: int, a: np.ndarray, allowed: np.ndarray, gam) -> object:
        """Smallest threshold ``d`` letting ``x`` reach ``A`` through states with weight <= ``d``."""
        heap = [(gam[x], x)]
        best = {x: gam[x]}
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if a[u]:
                return d
            for v in self.neighbors(u):
                v = int(v)
                if not allowed[v] or v in done:
                    continue
                nd = max(d, gam[v])
                if v not in best or nd < best[v]:
                    best[v] = nd
                    heapq.heappush(heap, (nd, v))
        raise ComputationError("target unreachable inside the relevant cycle")

    # ---------------------------------------------- typical paths

    def _cycle_graph(self, a: np.ndarray):
        """Maximal cycles of the complement of ``a`` and their typical jumps.

        Returns ``(partition, jumps, exits)`` where ``jumps[c]`` is the set of
        cycles entered through principal-boundary states of ``c`` and
        ``exits[c]`` the target states among those boundary states.
        """
        part = self._partition(~a)
        jumps: list[set[int]] = [set() for _ in range(part.count)]
        exits: list[set[int]] = [set() for _ in range(part.count)]
        for c, v in zip(part.exit_cycle.tolist(), part.exit_state.tolist()):
            if a[v]:
                exits[c].add(v)
            else:
                jumps[c].add(int(part.ids[v]))
        return part, jumps, exits

    def typical_tube(self, x: int, target) -> tuple[frozenset[int], list[Cycle]]:
        """States on typical paths from ``x`` to the target, and the cycles they visit."""
        x, a, _ = self._prepare(x, target)
        self._require_outside(x, a)
        tube, cycles, _ = self._tube(x, a)
        return tube, cycles()

    def _tube(self, x: int, a: np.ndarray):
        graph = self._cycle_graph(a)
        part, jumps, exits = graph
        ids = part.ids
        start = int(ids[x])
        seen = {start}
        queue = deque([start])
        while queue:
            c = queue.popleft()
            for d in jumps[c]:
                if d not in seen:
                    seen.add(d)
                    queue.append(d)
        members = np.isin(ids, list(seen))
        hit = set()
        for c in seen:
            hit |= exits[c]
        tube = frozenset(np.nonzero(members)[0].tolist()) | frozenset(hit)
        return tube, (lambda: self._cycles_from_partition(part, seen)), (graph, seen)

    def theta_exponents(self, x: int, target) -> tuple:
        """``(theta_min, theta_max)`` over typical paths from ``x`` to the target."""
        x, a, _ = self._prepare(x, target)
        self._require_outside(x, a)
        return self._theta(x, a)[:2]

    def _theta(self, x: int, a: np.ndarray):
        _, _, (graph, seen) = self._tube(x, a)
        part, jumps, exits = graph
        ids, depth = part.ids, part.depth.tolist()
        theta_max = max(depth[c] for c in seen)
        start = int(ids[x])
        heap = [(depth[start], start)]
        best = {start: depth[start]}
        done = set()
        theta_min = None
        while heap:
            d, c = heapq.heappop(heap)
            if c in done:
                continue
            done.add(c)
            if exits[c]:
                theta_min = d
                break
            for e in jumps[c]:
                nd = max(d, depth[e])
                if e not in best or nd < best[e]:
                    best[e] = nd
                    heapq.heappush(heap, (nd, e))
        if theta_min is None:
            raise ComputationError("no typical cycle-path reaches the target")
        return theta_min, theta_max, graph

    def theta_max_all(self, a: np.ndarray, graph=None) -> np.ndarray:
        """``Theta_max(z, A)`` for every ``z`` outside ``a`` (object array; None inside ``a``)."""
        part, jumps, exits = graph if graph is not None else self._cycle_graph(a)
        ids, depth = part.ids, part.depth.tolist()
        k = part.count
        rows, cols = [], []
        for c in range(k):
            for d in jumps[c]:
                rows.append(c)
                cols.append(d)
        g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(k, k)).tocsr()
        ncomp, comp = connected_components(g, directed=True, connection="strong")
        comp_depth = [None] * ncomp
        for c in range(k):
            v = depth[c]
            if comp_depth[comp[c]] is None or v > comp_depth[comp[c]]:
                comp_depth[comp[c]] = v
        succ: list[set[int]] = [set() for _ in range(ncomp)]
        indeg = np.zeros(ncomp, dtype=np.int64)
        for r, c in zip(rows, cols):
            if comp[r] != comp[c] and comp[c] not in succ[comp[r]]:
                succ[comp[r]].add(int(comp[c]))
                indeg[comp[c]] += 1
        order = []
        queue = deque(np.nonzero(indeg == 0)[0].tolist())
        while queue:
            u = queue.popleft()
            order.append(u)
            for v in succ[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    queue.append(v)
        reach = list(comp_depth)
        for u in reversed(order):
            for v in succ[u]:
                if reach[v] > reach[u]:
                    reach[u] = reach[v]
        out = np.empty(self.n, dtype=object)
        for z in range(self.n):
            out[z] = None if ids[z] < 0 else reach[comp[ids[z]]]
        return out

    # ----------------------------------------------------- assumptions

    def check_assumption_A(self, x: int, target) -> Verdict:
        x, a, _ = self._prepare(x, target)
        self._require_outside(x, a)
        return self._assumption_A(x, a)

    def _assumption_A(self, x: int, a: np.ndarray, cache=None) -> Verdict:
        gam, phi = self._gammas(a)
        tilde = self.max_depth(~a)
        ascent = self.levels[int(phi[x])] - self.energies[x]
        if ascent == tilde:
            return Verdict("holds_by_sufficient_condition",
                           "the barrier from x to A equals the maximum depth outside A",
                           {"exponent": ascent})
        theta_min, theta_max, graph = cache if cache is not None else self._theta(x, a)
        reach = self.theta_max_all(a, graph)
        violators = [z for z in range(self.n) if reach[z] is not None and reach[z] > theta_min]
        if theta_min != theta_max:
            witness = {"theta_min": theta_min, "theta_max": theta_max}
            # also name the deepest state breaking the comparison with the shallowest route
            others = [z for z in violators if z != x]
            if others:
                z = max(others, key=lambda s: (reach[s], gam[s], -self.rank[s], -s))
                witness.update(state=z, state_theta_max=reach[z])
            return Verdict("fails", "typical paths from x meet cycles of different maximal depth", witness)
        if violators:
            z = max(violators, key=lambda s: (gam[s], -self.rank[s], -s))
            return Verdict("fails", "some state outside A has deeper typical cycles than x",
                           {"state": z, "theta_max": reach[z], "theta": theta_min})
        return Verdict("holds_directly", "all typical cycle depths agree with the one from x",
                       {"exponent": theta_min})

    def check_assumption_B(self, x: int, target) -> Verdict:
        x, a, _ = self._prepare(x, target)
        self._require_outside(x, a)
        return self._assumption_B(x, a)

    def _assumption_B(self, x: int, a: np.ndarray, verdict_A: Verdict | None = None, cache=None) -> Verdict:
        gam, _ = self._gammas(a)
        rest = ~a
        rest[x] = False
        others = self._max_depth_or_none(rest)
        if others is None:
            return Verdict("holds_by_sufficient_condition", "no state besides x lies outside A",
                           {"gamma": gam[x]})
        if gam[x] > others:
            return Verdict("holds_by_sufficient_condition",
                           "the barrier from x exceeds every cycle depth away from x and A",
                           {"gamma": gam[x], "max_depth_rest": others})
        tilde = self.max_depth(~a)
        if tilde <= others:
            deepest = max(self.maximal_cycle_partition(rest), key=lambda c: (c.depth, -min(c.bottom)))
            return Verdict("fails",
                           "the hitting exponent is at most the maximum depth outside A, "
                           "which a cycle away from x already attains",
                           {"state": min(deepest.bottom), "depth": deepest.depth,
                            "max_depth_rest": others, "max_depth_complement": tilde})
        verdict_A = verdict_A if verdict_A is not None else self._assumption_A(x, a, cache)
        theta_min, theta_max, _ = cache if cache is not None else self._theta(x, a)
        if verdict_A.holds:
            ok = theta_min > others
            return Verdict("holds_directly" if ok else "fails",
                           "compared the typical exponent with the depth away from x and A",
                           {"theta": theta_min, "max_depth_rest": others})
        if theta_min > others:
            return Verdict("holds_directly",
                           "even the shallowest typical exponent exceeds the depth away from x and A",
                           {"theta_min": theta_min, "max_depth_rest": others})
        return Verdict("inconclusive", "the hitting exponent is not pinned down without assumption A",
                       {"theta_min": theta_min, "theta_max": theta_max, "max_depth_rest": others})

    # ---------------------------------------------------------- report

    def exponent_report(self, x: int, target) -> ExponentReport:
        original = frozenset(int(s) for s in np.nonzero(self._mask(target))[0])
        x, a, added = self._prepare(x, target)
        self._require_outside(x, a)
        gam, phi = self._gammas(a)
        psi_min, psi_max = self._psi(x, a)
        cache = self._theta(x, a)
        theta_min, theta_max, _ = cache
        verdict_A = self._assumption_A(x, a, cache)
        verdict_B = self._assumption_B(x, a, verdict_A, cache)
        rest = ~a
        rest[x] = False
        return ExponentReport(
            x=x,
            target=original,
            completed_target=frozenset(np.nonzero(a)[0].tolist()),
            added_to_target=added,
            energy_x=self.energies[x],
            communication_height=self.levels[int(phi[x])],
            gamma_init=gam[x],
            psi_min=psi_min,
            psi_max=psi_max,
            theta_min=theta_min,
            theta_max=theta_max,
            gamma_tilde_complement=self.max_depth(~a),
            gamma_tilde_without_x=self._max_depth_or_none(rest),
            optimality_gap=self.optimality_gap(x, a),
            assumption_A=verdict_A,
            assumption_B=verdict_B,
        )
