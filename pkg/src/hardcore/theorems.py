"""Exhaustive checks of the grid barrier results on enumerated landscapes.

For a grid with chessboard states ``e`` and ``o`` the closed-form barrier
``gamma_formula`` should match the exact communication height of ``o``
from ``e``, the deepest cycle away from ``{e, o}`` should sit at most one
level below it (strictly below on odd open grids), and the deepest cycle
of ``X \\ {o}`` should equal it.  On odd open grids ``o`` is metastable and
the reverse barrier is one lower.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grid import Boundary, GridSpec, build_grid, chessboard, count_states, gamma_formula
from .states import as_landscape, enumerate_states

STATE_BUDGET = 500_000


@dataclass(frozen=True)
class Clause:
    name: str
    relation: str
    observed: int
    expected: int

    @property
    def passed(self) -> bool:
        return {"==": self.observed == self.expected,
                "<=": self.observed <= self.expected,
                "<": self.observed < self.expected}[self.relation]

    def to_json(self) -> dict:
        return {"clause": self.name, "relation": self.relation, "observed": self.observed,
                "expected": self.expected, "passed": self.passed}


@dataclass(frozen=True)
class GridTheoremReport:
    spec: GridSpec
    state_count: int
    clauses: tuple[Clause, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def clause(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"grid": str(self.spec), "label": self.spec.label, "states": self.state_count,
                "clauses": [c.to_json() for c in self.clauses], "passed": self.passed}

    def to_text(self) -> str:
        lines = [f"{self.spec.label} ({self.state_count} states)"]
        for c in self.clauses:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"  {mark}  {c.name}: {c.observed} {c.relation} {c.expected}")
        return "\n".join(lines)


def odd_open(spec: GridSpec) -> bool:
    return spec.boundary is Boundary.OPEN and spec.K * spec.L % 2 == 1


def reverse_barrier(spec: GridSpec) -> int:
    """Barrier from ``o`` back to ``e`` on odd open grids."""
    return min(math.ceil(spec.K / 2), math.ceil(spec.L / 2))


def grid_landscape(spec: GridSpec, budget: int = STATE_BUDGET):
    """Enumerated landscape of the grid, refusing state spaces above ``budget``."""
    count = count_states(spec)
    if count > budget:
        raise ValidationError(f"{spec.label} has {count} states, above the budget of {budget}")
    grid = build_grid(spec)
    return grid, as_landscape(enumerate_states(grid.graph, cap=max(36, spec.site_count)))


def verify_grid_theorems(spec: GridSpec, budget: int = STATE_BUDGET) -> GridTheoremReport:
    grid, land = grid_landscape(spec, budget)
    e = land.index_of(chessboard(grid, "even"))
    o = land.index_of(chessboard(grid, "odd"))
    formula = gamma_formula(spec)
    strict = odd_open(spec)
    both = np.ones(land.n, dtype=bool)
    both[[e, o]] = False
    no_o = np.ones(land.n, dtype=bool)
    no_o[o] = False
    clauses = [
        Clause("depth_away_from_e_and_o", "<" if strict else "<=", int(land.max_depth(both)), formula - 1),
        Clause("barrier_e_to_o", "==", int(land.communication_height(e, [o]) - land.energies[e]), formula),
        Clause("depth_without_o", "==", int(land.max_depth(no_o)), formula),
    ]
    if strict:
        no_e = np.ones(land.n, dtype=bool)
        no_e[e] = False
        rev = reverse_barrier(spec)
        clauses += [
            Clause("barrier_o_to_e", "==", int(land.communication_height(o, [e]) - land.energies[o]), rev),
            Clause("depth_without_e", "==", int(land.max_depth(no_e)), rev),
        ]
    return GridTheoremReport(spec, land.n, tuple(clauses))


def valid_specs(max_side: int = 6):
    """Every grid with ``2 <= K, L <= max_side`` satisfying the parity rules."""
    for boundary in Boundary:
        for K in range(2, max_side + 1):
            for L in range(2, max_side + 1):
                try:
                    yield GridSpec(K, L, boundary)
                except ValidationError:
                    continue
