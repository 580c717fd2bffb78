"""Grid graphs, chessboard configurations, wastage, bridges and sweep paths.

Sites are addressed as ``(column, row)`` with ``(0, 0)`` at the bottom-left
corner and stored at bit index ``row * L + column``.  A site is even when
``column + row`` is even.  Configurations are Python ``int`` bitmasks, so
there is no width limit on the grid itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .graph import Graph, iter_bits, popcount


class Boundary(str, Enum):
    TOROIDAL = "toroidal"
    CYLINDRICAL = "cylindrical"
    OPEN = "open"


_BOUNDARY_LETTER = {Boundary.TOROIDAL: "T", Boundary.CYLINDRICAL: "C", Boundary.OPEN: "G"}

EVEN, ODD = 0, 1


def _parity_value(parity) -> int:
    if parity in (EVEN, "even", "e"):
        return EVEN
    if parity in (ODD, "odd", "o"):
        return ODD
    raise ValidationError(f"unknown parity {parity!r}; use 'even' or 'odd'")


@dataclass(frozen=True)
class GridSpec:
    """A ``K x L`` lattice (``K`` rows, ``L`` columns) with a boundary condition.

    Toroidal grids wrap both axes and need ``K`` and ``L`` even.  Cylindrical
    grids wrap the vertical axis (rows mod ``K``) and need ``K`` even.
    """

    K: int
    L: int
    boundary: Boundary

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if not (isinstance(self.K, int) and isinstance(self.L, int)):
            raise ValidationError("grid dimensions must be integers")
        if self.K < 2 or self.L < 2:
            raise ValidationError(f"grid needs K >= 2 and L >= 2, got {self.K}x{self.L}")
        if self.boundary is Boundary.TOROIDAL and (self.K % 2 or self.L % 2):
            bad = "K" if self.K % 2 else "L"
            raise ValidationError(
                f"toroidal grid {self.K}x{self.L} is not bipartite: {bad} must be even"
            )
        if self.boundary is Boundary.CYLINDRICAL and self.K % 2:
            raise ValidationError(
                f"cylindrical grid {self.K}x{self.L} wraps rows mod K, so K must be even"
            )

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``"open:2x4"``, ``"toroidal:4x4"`` or ``"cylindrical:4x2"``."""
        try:
            kind, dims = text.split(":")
            k, l = dims.lower().split("x")
            return cls(int(k), int(l), Boundary(kind.strip().lower()))
        except ValidationError:
            raise
        except (ValueError, KeyError):
            raise ValidationError(
                f"cannot parse grid {text!r}; expected e.g. 'open:3x4'"
            ) from None

    @property
    def site_count(self) -> int:
        return self.K * self.L

    @property
    def label(self) -> str:
        return f"{_BOUNDARY_LETTER[self.boundary]}{self.K},{self.L}"

    def __str__(self) -> str:
        return f"{self.boundary.value}:{self.K}x{self.L}"


@dataclass(frozen=True)
class GridGraph:
    """Lattice graph for a :class:`GridSpec` plus precomputed site masks."""

    spec: GridSpec
    graph: Graph
    even_mask: int = field(repr=False)
    odd_mask: int = field(repr=False)

    @property
    def K(self) -> int:
        return self.spec.K

    @property
    def L(self) -> int:
        return self.spec.L

    def site(self, column: int, row: int) -> int:
        return row * self.L + column

    def coords(self, index: int) -> tuple[int, int]:
        return index % self.L, index // self.L

    def parity(self, index: int) -> int:
        c, r = self.coords(index)
        return (c + r) % 2

    def row_mask(self, row: int) -> int:
        return ((1 << self.L) - 1) << (row * self.L)

    def column_mask(self, column: int) -> int:
        m = 0
        for r in range(self.K):
            m |= 1 << self.site(column, r)
        return m

    def parity_mask(self, parity) -> int:
        return self.odd_mask if _parity_value(parity) == ODD else self.even_mask


def build_grid(spec: GridSpec) -> GridGraph:
    """Adjacency of the ``K x L`` lattice under the boundary condition of ``spec``.

    Coincident neighbours (a wrapped axis of length 2) are merged, so the
    result is always a simple graph.
    """
    K, L = spec.K, spec.L
    wrap_rows = spec.boundary in (Boundary.TOROIDAL, Boundary.CYLINDRICAL)
    wrap_cols = spec.boundary is Boundary.TOROIDAL
    nbrs: list[set[int]] = [set() for _ in range(K * L)]
    for r in range(K):
        for c in range(L):
            v = r * L + c
            for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                cc, rr = c + dc, r + dr
                if wrap_cols:
                    cc %= L
                if wrap_rows:
                    rr %= K
                if 0 <= cc < L and 0 <= rr < K:
                    w = rr * L + cc
                    if w != v:
                        nbrs[v].add(w)
    graph = Graph(K * L, tuple(tuple(sorted(s)) for s in nbrs))
    even = odd = 0
    for r in range(K):
        for c in range(L):
            if (c + r) % 2:
                odd |= 1 << (r * L + c)
            else:
                even |= 1 << (r * L + c)
    return GridGraph(spec, graph, even, odd)


def count_states(spec: GridSpec) -> int:
    """Number of admissible configurations, by a row transfer matrix.

    Cheap even when the state space is far too large to enumerate.
    """
    K, L = spec.K, spec.L
    wrap_cols = spec.boundary is Boundary.TOROIDAL
    wrap_rows = spec.boundary is not Boundary.OPEN
    rows = [m for m in range(1 << L)
            if not m & (m >> 1) and not (wrap_cols and L > 2 and m & 1 and m >> (L - 1) & 1)]
    compat = np.array([[int(not a & b) for b in rows] for a in rows], dtype=object)
    if not wrap_rows:
        vec = np.ones(len(rows), dtype=object)
        for _ in range(K - 1):
            vec = compat.dot(vec)
        return int(vec.sum())
    power = np.identity(len(rows), dtype=int).astype(object)
    for _ in range(K):
        power = power.dot(compat)
    return int(np.trace(power))


def _as_grid(grid) -> GridGraph:
    if isinstance(grid, GridGraph):
        return grid
    if isinstance(grid, GridSpec):
        return build_grid(grid)
    raise ValidationError(f"expected GridSpec or GridGraph, got {type(grid).__name__}")


def chessboard(grid, parity) -> int:
    """All even (``e``) or all odd (``o``) sites occupied."""
    return _as_grid(grid).parity_mask(parity)


def check_admissible(config: int, graph: Graph) -> None:
    if config < 0 or config >> graph.vertex_count:
        raise ValidationError("configuration has bits outside the site range")
    clash = graph.conflict(config)
    if clash is not None:
        raise ValidationError(f"configuration is not admissible: sites {clash[0]} and {clash[1]} are adjacent and both occupied")


def energy(config: int, graph: Graph | GridGraph | None = None) -> int:
    """Hard-core energy: minus the number of particles.

    When a graph is given the configuration is checked for admissibility.
    """
    if graph is not None:
        check_admissible(config, graph.graph if isinstance(graph, GridGraph) else graph)
    return -popcount(config)


def wastage(config: int, grid) -> int:
    """Energy above the even chessboard, ``H(config) - H(e)``."""
    g = _as_grid(grid)
    check_admissible(config, g.graph)
    return popcount(g.even_mask) - popcount(config)


def row_wastage(config: int, grid, row: int) -> int:
    """``ceil(L/2)`` minus the number of particles in ``row``."""
    g = _as_grid(grid)
    if not 0 <= row < g.K:
        raise ValidationError(f"row {row} out of range for {g.K} rows")
    return math.ceil(g.L / 2) - popcount(config & g.row_mask(row))


def stripe_rows(grid, stripe: int) -> tuple[int, int]:
    """Rows of horizontal stripe ``stripe`` (1-based): ``2*stripe-2`` and ``2*stripe-1``."""
    g = _as_grid(grid)
    count = g.K // 2
    if not 1 <= stripe <= count:
        extra = " (the top row of an odd-height grid is in no stripe)" if g.K % 2 and stripe == count + 1 else ""
        raise ValidationError(f"stripe {stripe} out of range 1..{count}{extra}")
    return 2 * stripe - 2, 2 * stripe - 1


def stripe_wastage(config: int, grid, stripe: int) -> int:
    """Even-site count of the stripe minus its particle count."""
    g = _as_grid(grid)
    r0, r1 = stripe_rows(g, stripe)
    mask = g.row_mask(r0) | g.row_mask(r1)
    return popcount(mask & g.even_mask) - popcount(config & mask)


def top_row_wastage(config: int, grid) -> int:
    """Wastage of the unpaired top row when ``K`` is odd."""
    g = _as_grid(grid)
    if g.K % 2 == 0:
        raise ValidationError("only grids with an odd number of rows have an unpaired top row")
    return row_wastage(config, g, g.K - 1)


# ---------------------------------------------------------------- bridges


@dataclass(frozen=True)
class BridgeReport:
    odd_vertical_bridges: tuple[int, ...]
    even_vertical_bridges: tuple[int, ...]
    odd_horizontal_bridges: tuple[int, ...]
    even_horizontal_bridges: tuple[int, ...]
    odd_double_bridges_vertical: tuple[int, ...]
    odd_double_bridges_horizontal: tuple[int, ...]
    even_double_bridges_vertical: tuple[int, ...]
    even_double_bridges_horizontal: tuple[int, ...]

    @property
    def has_odd_cross(self) -> bool:
        return bool(self.odd_vertical_bridges) and bool(self.odd_horizontal_bridges)

    @property
    def has_even_cross(self) -> bool:
        return bool(self.even_vertical_bridges) and bool(self.even_horizontal_bridges)


def _agrees(config: int, region: int, pattern: int) -> bool:
    return config & region == pattern & region


def detect_bridges(config: int, grid) -> BridgeReport:
    """Rows, columns and two-line stripes on which ``config`` matches ``e`` or ``o``.

    Row and column indices are 0-based; stripe indices are 1-based, stripe
    ``i`` covering lines ``2i-2`` and ``2i-1``.
    """
    g = _as_grid(grid)
    check_admissible(config, g.graph)
    rows = [g.row_mask(r) for r in range(g.K)]
    cols = [g.column_mask(c) for c in range(g.L)]
    hstripes = [rows[2 * i] | rows[2 * i + 1] for i in range(g.K // 2)]
    vstripes = [cols[2 * j] | cols[2 * j + 1] for j in range(g.L // 2)]

    def matching(regions, pattern, base=0):
        return tuple(i + base for i, m in enumerate(regions) if _agrees(config, m, pattern))

    return BridgeReport(
        odd_vertical_bridges=matching(cols, g.odd_mask),
        even_vertical_bridges=matching(cols, g.even_mask),
        odd_horizontal_bridges=matching(rows, g.odd_mask),
        even_horizontal_bridges=matching(rows, g.even_mask),
        odd_double_bridges_vertical=matching(vstripes, g.odd_mask, 1),
        odd_double_bridges_horizontal=matching(hstripes, g.odd_mask, 1),
        even_double_bridges_vertical=matching(vstripes, g.even_mask, 1),
        even_double_bridges_horizontal=matching(hstripes, g.even_mask, 1),
    )


# ------------------------------------------------------------------ paths


@dataclass(frozen=True)
class PathRecord:
    """A sequence of configurations differing by one site per step."""

    states: tuple[int, ...]
    height: int

    @classmethod
    def from_states(cls, states: Sequence[int]) -> "PathRecord":
        states = tuple(states)
        if not states:
            raise ValidationError("a path needs at least one state")
        return cls(states, max(-popcount(s) for s in states))

    @property
    def start(self) -> int:
        return self.states[0]

    @property
    def end(self) -> int:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.states)


class _PathBuilder:
    def __init__(self, start: int):
        self.states = [start]

    @property
    def current(self) -> int:
        return self.states[-1]

    def remove(self, site: int) -> None:
        if self.current >> site & 1:
            self.states.append(self.current & ~(1 << site))

    def add(self, site: int) -> None:
        if not self.current >> site & 1:
            self.states.append(self.current | (1 << site))

    def record(self) -> PathRecord:
        return PathRecord.from_states(self.states)


def _line_site(g: GridGraph, axis: str, line: int, pos: int) -> int:
    # axis "columns": lines are columns and positions run along rows
    return g.site(line, pos) if axis == "columns" else g.site(pos, line)


def _line_shape(g: GridGraph, axis: str) -> tuple[int, int, bool]:
    """(number of lines, line length, whether lines wrap around)."""
    spec = g.spec
    if axis == "columns":
        return g.L, g.K, spec.boundary is Boundary.TOROIDAL
    if axis == "rows":
        return g.K, g.L, spec.boundary in (Boundary.TOROIDAL, Boundary.CYLINDRICAL)
    raise ValidationError(f"axis must be 'columns' or 'rows', got {axis!r}")


def _line_mask(g: GridGraph, axis: str, line: int) -> int:
    return g.column_mask(line) if axis == "columns" else g.row_mask(line)


def _sweep(start: int, g: GridGraph, axis: str, target: int, wrapped: bool) -> PathRecord:
    """Turn every line into the ``target`` chessboard pattern, one line per stage.

    At a stage on line ``l``, each target-parity site of ``l`` is filled right
    after its same-position neighbour on line ``l+1`` (which has the opposite
    parity) is emptied.  The precondition is that the first line (the first
    two lines for a wrapped sweep) carries no opposite-parity particle.
    """
    n, length, _ = _line_shape(g, axis)
    opposite = g.parity_mask(1 - target)
    first_lines = (0, 1) if wrapped else (0,)
    for line in first_lines:
        bad = start & opposite & _line_mask(g, axis, line)
        if bad:
            site = (bad & -bad).bit_length() - 1
            kind = "even" if target == ODD else "odd"
            raise ValidationError(
                f"precondition violated: {kind} site {g.coords(site)} (column, row) is occupied "
                f"on {axis[:-1]} {line}"
            )
    builder = _PathBuilder(start)
    order = list(range(1, n)) + [0] if wrapped else list(range(n))
    for line in order:
        nxt = (line + 1) % n if wrapped else line + 1
        for pos in range(length):
            if (line + pos) % 2 != target:
                continue
            if nxt < n:
                builder.remove(_line_site(g, axis, nxt, pos))
            builder.add(_line_site(g, axis, line, pos))
    return builder.record()


def reduction_path_toric(start: int, grid, axis: str = "columns") -> PathRecord:
    """Path from ``start`` to ``o`` on a toroidal grid with height at most ``H(start)+1``.

    Requires the even sites of the first two columns (rows when
    ``axis="rows"``) to be empty.
    """
    g = _as_grid(grid)
    if g.spec.boundary is not Boundary.TOROIDAL:
        raise ValidationError("reduction_path_toric needs a toroidal grid")
    check_admissible(start, g.graph)
    return _sweep(start, g, axis, ODD, wrapped=True)


def reduction_path_open(start: int, grid, target="odd", axis: str = "columns") -> PathRecord:
    """Path from ``start`` to the ``target`` chessboard with height at most ``H(start)+1``.

    Works on open grids and on cylindrical grids swept along columns.  The
    first column (row) must carry no particle of the parity opposite to
    ``target``.
    """
    g = _as_grid(grid)
    t = _parity_value(target)
    n, _, wraps = _line_shape(g, axis)
    if wraps:
        raise ValidationError(f"the {axis} of a {g.spec.boundary.value} grid wrap; use the toric sweep")
    check_admissible(start, g.graph)
    return _sweep(start, g, axis, t, wrapped=False)


def reduction_path_wrapped(start: int, grid, target="odd", axis: str = "rows") -> PathRecord:
    """Toric-style sweep along a wrapping axis of any grid (e.g. rows of a cylinder)."""
    g = _as_grid(grid)
    _, _, wraps = _line_shape(g, axis)
    if not wraps:
        raise ValidationError(f"the {axis} of a {g.spec.boundary.value} grid do not wrap")
    check_admissible(start, g.graph)
    return _sweep(start, g, axis, _parity_value(target), wrapped=True)


def _concat(first: PathRecord, second: PathRecord) -> PathRecord:
    assert first.end == second.start
    return PathRecord.from_states(first.states + second.states[1:])


def _empty_sites(start: int, sites: Iterable[int]) -> PathRecord:
    builder = _PathBuilder(start)
    for s in sorted(sites):
        builder.remove(s)
    return builder.record()


def reference_path(grid) -> PathRecord:
    """A path from ``e`` to ``o`` whose height above ``H(e)`` equals :func:`gamma_formula`.

    The even sites of the first one or two lines of the shorter direction
    are removed one by one, then a sweep carries the result to ``o``.
    """
    g = _as_grid(grid)
    spec = g.spec
    e = g.even_mask
    if spec.boundary is Boundary.TOROIDAL:
        axis = "columns" if spec.K <= spec.L else "rows"
        lines, wrapped = (0, 1), True
    elif spec.boundary is Boundary.OPEN:
        axis = "columns" if spec.K <= spec.L else "rows"
        lines, wrapped = (0,), False
    elif spec.K // 2 >= spec.L:
        axis, lines, wrapped = "rows", (0, 1), True
    else:
        axis, lines, wrapped = "columns", (0,), False
    cleared = 0
    for line in lines:
        cleared |= _line_mask(g, axis, line) & e
    ascent = _empty_sites(e, iter_bits(cleared))
    return _concat(ascent, _sweep(ascent.end, g, axis, ODD, wrapped))


def gamma_formula(spec) -> int:
    """Closed-form barrier between ``e`` and ``o`` for the grid family."""
    spec = spec.spec if isinstance(spec, GridGraph) else spec
    K, L = spec.K, spec.L
    if spec.boundary is Boundary.TOROIDAL:
        return min(K, L) + 1
    if spec.boundary is Boundary.OPEN:
        return min(math.ceil(K / 2), math.ceil(L / 2)) + 1
    return min(K // 2, L) + 1


# -------------------------------------------------------------- formats


def to_ascii(config: int, grid) -> str:
    """One line per row, top row first, ``#`` occupied and ``.`` empty."""
    g = _as_grid(grid)
    lines = []
    for r in reversed(range(g.K)):
        lines.append("".join("#" if config >> g.site(c, r) & 1 else "." for c in range(g.L)))
    return "\n".join(lines)


def from_ascii(text: str, grid) -> int:
    """Inverse of :func:`to_ascii`; blank lines and surrounding spaces are ignored."""
    g = _as_grid(grid)
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != g.K or any(len(ln) != g.L for ln in lines):
        raise ValidationError(f"ASCII configuration must be {g.K} lines of {g.L} characters")
    config = 0
    for i, ln in enumerate(lines):
        r = g.K - 1 - i
        for c, ch in enumerate(ln):
            if ch == "#":
                config |= 1 << g.site(c, r)
            elif ch != ".":
                raise ValidationError(f"unexpected character {ch!r} in ASCII configuration")
    check_admissible(config, g.graph)
    return config


def to_hex(config: int) -> str:
    return hex(config)


def from_hex(text: str) -> int:
    try:
        value = int(text, 16)
    except ValueError:
        raise ValidationError(f"invalid hex configuration {text!r}") from None
    if value < 0:
        raise ValidationError("configuration must be non-negative")
    return value
