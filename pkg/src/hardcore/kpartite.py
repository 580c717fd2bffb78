"""Hard-core model on complete K-partite graphs.

Sites are split into components ``B_1, ..., B_K``; two sites are adjacent
exactly when they lie in different components, so an admissible
configuration occupies a subset of a single component.  ``sigma(k)`` is the
configuration filling component ``k`` (components are numbered from 1).

For a query from ``sigma(k1)`` to ``sigma(k2)`` the deepest competing wells
have size ``L* = max_{k != k2} L_k`` and ``K*`` collects the components
attaining it.  When ``k1`` is not in ``K*`` the chain first has to fall
into one of those wells or directly into ``sigma(k2)``, which makes the
scaled hitting time a geometric sum of exponentials rather than an
exponential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import Graph


@dataclass(frozen=True)
class KPartiteSpec:
    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(self.sizes)
        if len(sizes) < 2:
            raise ValidationError("a K-partite graph needs at least two components")
        if any(not isinstance(s, (int, np.integer)) or s < 1 for s in sizes):
            raise ValidationError(f"component sizes must be positive integers, got {sizes}")
        object.__setattr__(self, "sizes", tuple(int(s) for s in sizes))

    @classmethod
    def parse(cls, text: str) -> "KPartiteSpec":
        try:
            return cls(tuple(int(t) for t in text.split(",")))
        except ValueError as exc:
            raise ValidationError(f"cannot parse component sizes {text!r}") from exc

    @property
    def K(self) -> int:
        return len(self.sizes)

    @property
    def site_count(self) -> int:
        return sum(self.sizes)

    @property
    def state_count(self) -> int:
        return 1 + sum(2 ** s - 1 for s in self.sizes)

    def offset(self, k: int) -> int:
        self._check(k)
        return sum(self.sizes[: k - 1])

    def sigma(self, k: int) -> int:
        """Bitmask of the configuration filling component ``k``."""
        return ((1 << self.sizes[k - 1]) - 1) << self.offset(k)

    def component_of(self, site: int) -> int:
        if not 0 <= site < self.site_count:
            raise ValidationError(f"site {site} out of range")
        edge = 0
        for k, s in enumerate(self.sizes, start=1):
            edge += s
            if site < edge:
                return k

    def _check(self, k: int) -> None:
        if not 1 <= k <= self.K:
            raise ValidationError(f"component index {k} outside 1..{self.K}")

    def _pair(self, k1: int, k2: int) -> None:
        self._check(k1)
        self._check(k2)
        if k1 == k2:
            raise ValidationError("k1 and k2 must differ")

    def l_star(self, k2: int) -> int:
        self._check(k2)
        return max(s for k, s in enumerate(self.sizes, start=1) if k != k2)

    def k_star(self, k2: int) -> frozenset[int]:
        top = self.l_star(k2)
        return frozenset(k for k, s in enumerate(self.sizes, start=1) if k != k2 and s == top)

    def p(self, k2: int) -> float:
        """Probability that a descent from the empty state reaches ``sigma(k2)`` first."""
        top = self.l_star(k2)
        lk2 = self.sizes[k2 - 1]
        return lk2 / (len(self.k_star(k2)) * top + lk2)

    def label(self) -> str:
        return ",".join(map(str, self.sizes))


def build_kpartite(spec: KPartiteSpec) -> Graph:
    n = spec.site_count
    comp = [spec.component_of(v) for v in range(n)]
    adjacency = [tuple(w for w in range(n) if comp[w] != comp[v]) for v in range(n)]
    return Graph(n, tuple(adjacency))


def predicted_mean(spec: KPartiteSpec, k1: int, k2: int, beta: float) -> float:
    """Low-temperature asymptotic mean of the hitting time of ``sigma(k2)``."""
    spec._pair(k1, k2)
    top = spec.l_star(k2)
    ks = spec.k_star(k2)
    prefactor = spec.site_count * ((1.0 if k1 in ks else 0.0) / top + len(ks) / spec.sizes[k2 - 1])
    return prefactor * math.exp(beta * top)


@dataclass(frozen=True)
class LimitLaw:
    """Limit law of ``tau / E tau``.

    ``kind`` is ``"exponential"`` or ``"geometric_sum"``.  For the geometric
    sum ``Z = Y_1 + ... + Y_M`` with ``P(M = n) = (1 - p)^n p`` and unit
    exponentials ``Y_i``, ``Z`` has an atom ``p`` at zero and an
    exponential tail of rate ``p``: ``P(Z <= z) = 1 - (1 - p) exp(-p z)``.
    """

    kind: str
    p: float | None = None

    @property
    def mean(self) -> float:
        """``E Z``; 1 for the exponential law."""
        return 1.0 if self.kind == "exponential" else (1.0 - self.p) / self.p

    def cdf(self, z):
        """CDF of ``Z`` itself."""
        z = np.asarray(z, dtype=float)
        if self.kind == "exponential":
            return np.where(z < 0, 0.0, 1.0 - np.exp(-np.maximum(z, 0.0)))
        return np.where(z < 0, 0.0, 1.0 - (1.0 - self.p) * np.exp(-self.p * np.maximum(z, 0.0)))

    def unit_mean_cdf(self, u):
        """CDF of ``Z / E Z``, the law matched by samples scaled by their mean."""
        u = np.asarray(u, dtype=float)
        # test the sign before scaling: a tiny negative u can round to -0.0
        return np.where(u < 0, 0.0, self.cdf(np.maximum(u, 0.0) * self.mean))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "exponential":
            return rng.exponential(size=n)
        m = rng.geometric(self.p, size=n) - 1
        return rng.gamma(np.maximum(m, 1), size=n) * (m > 0)

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.p is not None:
            out.update(p=self.p, mean=self.mean, cdf="1 - (1 - p) exp(-p z) for z >= 0")
        return out


def limit_law(spec: KPartiteSpec, k1: int, k2: int) -> LimitLaw:
    spec._pair(k1, k2)
    if k1 in spec.k_star(k2):
        return LimitLaw("exponential")
    return LimitLaw("geometric_sum", spec.p(k2))


def kpartite_landscape(spec: KPartiteSpec):
    """Enumerated landscape with ``1/N`` connectivity per site move."""
    from .states import as_landscape, enumerate_states

    graph = build_kpartite(spec)
    return as_landscape(enumerate_states(graph, cap=max(36, graph.vertex_count)))


@dataclass(frozen=True)
class StructuralCheck:
    k1: int
    k2: int
    expected_gamma: int
    expected_psi_max: int
    gamma: object
    psi_min: object
    psi_max: object
    gamma_tilde: object

    @property
    def checks(self) -> dict[str, bool]:
        return {
            "gamma_equals_L_k1": self.gamma == self.expected_gamma,
            "psi_min_equals_L_k1": self.psi_min == self.expected_gamma,
            "psi_max_equals_L_star": self.psi_max == self.expected_psi_max,
            "gamma_tilde_equals_L_star": self.gamma_tilde == self.expected_psi_max,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {
            "k1": self.k1, "k2": self.k2,
            "L_k1": self.expected_gamma, "L_star": self.expected_psi_max,
            "gamma": int(self.gamma), "psi_min": int(self.psi_min),
            "psi_max": int(self.psi_max), "gamma_tilde": int(self.gamma_tilde),
            "checks": self.checks, "passed": self.passed,
        }


def structural_check(spec: KPartiteSpec, k1: int, k2: int, landscape=None) -> StructuralCheck:
    """Compare barrier exponents computed on the landscape with ``L_k1`` and ``L*``."""
    spec._pair(k1, k2)
    land = kpartite_landscape(spec) if landscape is None else landscape
    x = land.index_of(spec.sigma(k1))
    a = [land.index_of(spec.sigma(k2))]
    gamma = land.communication_height(x, a) - land.energies[x]
    psi_min, psi_max = land.psi_exponents(x, a)
    rest = np.ones(land.n, dtype=bool)
    rest[a[0]] = False
    return StructuralCheck(k1, k2, spec.sizes[k1 - 1], spec.l_star(k2), gamma, psi_min, psi_max,
                           land.max_depth(rest))
