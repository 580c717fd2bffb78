"""Monte Carlo simulation of Metropolis dynamics.

Two samplers share one replica/stream contract: replica ``r`` of a run with
seed ``s`` always draws from the Philox stream keyed by ``(s, r)``, so a
replica's trajectory does not depend on how replicas are batched or
scheduled across workers.

* ``baseline``: the discrete-time chain step by step.  On a hard-core
  graph each step inspects one uniformly chosen site; on a generic
  landscape each step samples the next state from its transition row.
* ``rejection_free``: jumps between distinct states only, with the number
  of steps spent in each state drawn from the geometric holding law.  The
  hitting-step distribution is identical to the baseline.

Replicas advance in lockstep (one move per replica per array operation),
each replica consuming its own uniforms in order.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ComputationError, ValidationError
from .exact import SlopeFit, fit_log_slope
from .graph import Graph
from .landscape import EnergyLandscape

_BLOCK = 512


@dataclass(frozen=True)
class SimConfig:
    beta: float
    seed: int
    max_steps: int = 10 ** 12
    replicas: int = 1000

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError("beta must be positive")
        if self.max_steps <= 0:
            raise ValidationError("max_steps must be positive")
        if self.replicas <= 0:
            raise ValidationError("replicas must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must be a 64-bit non-negative integer")


@dataclass(frozen=True)
class HittingSample:
    steps: int
    capped: bool
    final_state: int = -1


@dataclass(frozen=True)
class HittingRun:
    """Samples of one run plus the settings that produced them."""

    samples: tuple[HittingSample, ...]
    config: SimConfig
    method: str

    @property
    def steps(self) -> np.ndarray:
        return np.array([s.steps for s in self.samples], dtype=np.int64)

    @property
    def capped(self) -> np.ndarray:
        return np.array([s.capped for s in self.samples], dtype=bool)

    @property
    def capped_count(self) -> int:
        return int(self.capped.sum())

    @property
    def biased(self) -> bool:
        return self.capped_count > 0

    def uncapped_steps(self) -> np.ndarray:
        return self.steps[~self.capped]

    def mean(self) -> float:
        """Mean over uncapped replicas; raises when every replica hit the cap."""
        free = self.uncapped_steps()
        if len(free) == 0:
            raise ComputationError(f"all {len(self.samples)} replicas reached the cap of {self.config.max_steps} steps")
        return float(free.mean())

    def standard_error(self) -> float:
        free = self.uncapped_steps().astype(float)
        if len(free) < 2:
            return math.inf
        return float(free.std(ddof=1) / math.sqrt(len(free)))

    def summary(self) -> dict:
        free = self.uncapped_steps().astype(float)
        out = {
            "method": self.method,
            "beta": self.config.beta,
            "seed": int(self.config.seed),
            "replicas": len(self.samples),
            "max_steps": int(self.config.max_steps),
            "capped": self.capped_count,
            "biased": self.biased,
        }
        if len(free):
            out.update(mean=float(free.mean()), variance=float(free.var(ddof=1)) if len(free) > 1 else 0.0,
                       standard_error=self.standard_error(),
                       mean_log_over_beta=float(np.log(free).mean() / self.config.beta))
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replica", "steps", "capped"])
            for i, s in enumerate(self.samples):
                w.writerow([i, s.steps, int(s.capped)])


def replica_generator(seed: int, replica: int) -> np.random.Generator:
    """Independent Philox stream for one replica of a seeded run."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(replica),))))


# ------------------------------------------------------- single steps


def metropolis_step(config: int, graph: Graph, beta: float, rng: np.random.Generator) -> int:
    """One step of the hard-core Metropolis chain.

    A uniformly chosen occupied site is emptied with probability
    ``exp(-beta)``; a chosen vacant site is filled when all its neighbours
    are vacant; otherwise nothing happens.
    """
    v = int(rng.integers(graph.vertex_count))
    bit = 1 << v
    if config & bit:
        if rng.random() < math.exp(-beta):
            return config ^ bit
        return config
    if not config & graph.neighbor_masks[v]:
        return config | bit
    return config


def trajectory(graph: Graph, start: int, beta: float, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Configurations visited by ``steps`` baseline steps (length ``steps + 1``)."""
    if graph.vertex_count > 63:
        raise ValidationError("trajectory arrays hold at most 63 sites")
    masks = graph.neighbor_masks
    accept = math.exp(-beta)
    out = np.empty(steps + 1, dtype=np.uint64)
    out[0] = start
    config = start
    sites = rng.integers(graph.vertex_count, size=steps)
    coins = rng.random(steps)
    for t in range(steps):
        v = int(sites[t])
        bit = 1 << v
        if config & bit:
            if coins[t] < accept:
                config ^= bit
        elif not config & masks[v]:
            config |= bit
        out[t + 1] = config
    return out


# ---------------------------------------------------- lockstep engines


class _Streams:
    """Per-replica uniform blocks consumed in lockstep."""

    def __init__(self, seed: int, replicas: np.ndarray, width: int):
        self.gens = [replica_generator(seed, r) for r in replicas]
        self.width = width
        self.block = np.empty((len(replicas), _BLOCK, width))
        self.pos = _BLOCK

    def draw(self, active: np.ndarray) -> np.ndarray:
        if self.pos == _BLOCK:
            for i in np.nonzero(active)[0]:
                self.block[i] = self.gens[i].random((_BLOCK, self.width))
            self.pos = 0
        u = self.block[:, self.pos, :]
        self.pos += 1
        return u


def _positive(u: np.ndarray) -> np.ndarray:
    """Map ``[0, 1)`` uniforms to ``(0, 1]`` so logarithms stay finite."""
    return 1.0 - u


class _JumpTable:
    """Transition rows of a landscape in a vectorized inverse-CDF layout."""

    def __init__(self, landscape: EnergyLandscape, beta: float, include_self: bool):
        h = np.array([float(e) for e in landscape.energies])
        src, dst = landscape.sources, landscape.indices
        prob = landscape.weights * np.exp(-beta * np.maximum(h[dst] - h[src], 0.0))
        n = landscape.n
        escape = np.zeros(n)
        np.add.at(escape, src, prob)
        if include_self:
            src = np.concatenate([src, np.arange(n)])
            dst = np.concatenate([dst, np.arange(n)])
            prob = np.concatenate([prob, np.clip(1.0 - escape, 0.0, None)])
            order = np.lexsort((dst, src))
            src, dst, prob = src[order], dst[order], prob[order]
            total = np.ones(n)
        else:
            total = escape
        if np.any(total <= 0):
            raise ValidationError("some state has no outgoing move")
        cum = np.zeros(len(prob))
        starts = np.searchsorted(src, np.arange(n))
        ends = np.searchsorted(src, np.arange(n), side="right")
        for s in range(n):
            lo, hi = starts[s], ends[s]
            c = np.cumsum(prob[lo:hi]) / total[s]
            c[-1] = 1.0
            cum[lo:hi] = c
        self.key = cum + src.astype(float) * 2.0
        self.dst = dst
        self.ends = ends
        self.escape = escape
        with np.errstate(divide="ignore"):
            self.log_stay = np.log1p(-np.minimum(escape, 1.0))

    def jump(self, states: np.ndarray, u: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self.key, states * 2.0 + u, side="right")
        k = np.minimum(k, self.ends[states] - 1)
        return self.dst[k]

    def holding(self, states: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Geometric number of steps until the chain leaves each state."""
        ls = self.log_stay[states]
        with np.errstate(divide="ignore", invalid="ignore"):
            extra = np.floor(np.log(_positive(u)) / ls)
        extra = np.where(np.isfinite(extra) & (ls < 0), extra, 0.0)
        return 1.0 + extra


def _run_landscape(landscape: EnergyLandscape, x: int, target: np.ndarray, beta: float,
                   max_steps: int, seed: int, replicas: np.ndarray, rejection_free: bool):
    table = _JumpTable(landscape, beta, include_self=not rejection_free)
    m = len(replicas)
    state = np.full(m, x, dtype=np.int64)
    steps = np.zeros(m, dtype=np.float64)
    active = np.ones(m, dtype=bool)
    capped = np.zeros(m, dtype=bool)
    streams = _Streams(seed, replicas, 2 if rejection_free else 1)
    cap = float(max_steps)
    while active.any():
        u = streams.draw(active)
        idx = np.nonzero(active)[0]
        s = state[idx]
        if rejection_free:
            steps[idx] += table.holding(s, u[idx, 0])
            nxt = table.jump(s, u[idx, 1])
        else:
            steps[idx] += 1.0
            nxt = table.jump(s, u[idx, 0])
        state[idx] = nxt
        over = steps[idx] >= cap
        hit = target[nxt]
        capped[idx[over & ~hit]] = True
        steps[idx[over & ~hit]] = cap
        if rejection_free:
            # a jump that lands in the target after the cap still counts as capped
            late = over & hit & (steps[idx] > cap)
            capped[idx[late]] = True
            steps[idx[late]] = cap
        active[idx[hit | over]] = False
    return steps.astype(np.int64), capped, state


def _run_hardcore(graph: Graph, x: int, target: np.ndarray, beta: float, max_steps: int,
                  seed: int, replicas: np.ndarray):
    if graph.vertex_count > 63:
        raise ValidationError("the site-level sampler handles at most 63 sites")
    masks = np.array(graph.neighbor_masks, dtype=np.uint64)
    n_sites = graph.vertex_count
    accept = math.exp(-beta)
    m = len(replicas)
    config = np.full(m, x, dtype=np.uint64)
    steps = np.zeros(m, dtype=np.int64)
    active = np.ones(m, dtype=bool)
    capped = np.zeros(m, dtype=bool)
    streams = _Streams(seed, replicas, 2)
    one = np.uint64(1)
    while active.any():
        u = streams.draw(active)
        idx = np.nonzero(active)[0]
        c = config[idx]
        v = np.minimum((u[idx, 0] * n_sites).astype(np.int64), n_sites - 1)
        bit = one << v.astype(np.uint64)
        occupied = (c & bit) != 0
        remove = occupied & (u[idx, 1] < accept)
        add = ~occupied & ((c & masks[v]) == 0)
        c = np.where(remove, c ^ bit, np.where(add, c | bit, c))
        config[idx] = c
        steps[idx] += 1
        k = np.searchsorted(target, c)
        hit = (k < len(target)) & (target[np.minimum(k, len(target) - 1)] == c)
        over = ~hit & (steps[idx] >= max_steps)
        capped[idx[over]] = True
        active[idx[hit | over]] = False
    return steps, capped, config


def _worker(args):
    kind = args[0]
    if kind == "landscape":
        return _run_landscape(*args[1:])
    return _run_hardcore(*args[1:])


def sample_hitting(model, x, target, sim: SimConfig, method: str = "baseline",
                   workers: int = 1) -> HittingRun:
    """Independent hitting-time replicas from ``x`` to ``target``.

    ``model`` is a :class:`Graph` (configurations are bitmasks) or an
    :class:`EnergyLandscape` (states are indices).  ``rejection_free`` on a
    graph enumerates the state space first.
    """
    if method not in ("baseline", "rejection_free"):
        raise ValidationError(f"unknown method {method!r}")
    replicas = np.arange(sim.replicas)
    if isinstance(model, Graph) and method == "rejection_free":
        from .states import as_landscape, enumerate_states

        landscape = as_landscape(enumerate_states(model, cap=max(36, model.vertex_count)))
        x = landscape.index_of(x)
        target = [landscape.index_of(t) for t in target]
        model = landscape
    if isinstance(model, Graph):
        tgt = np.array(sorted(int(t) for t in target), dtype=np.uint64)
        if len(tgt) == 0:
            raise ValidationError("target set is empty")
        if int(x) in set(tgt.tolist()):
            raise ValidationError("the starting state belongs to the target set")
        for c in [int(x)] + tgt.tolist():
            if not model.is_independent(c):
                raise ValidationError(f"configuration {c:#x} is not admissible")
        base = ("hardcore", model, int(x), tgt, sim.beta, sim.max_steps, sim.seed)
    elif isinstance(model, EnergyLandscape):
        mask = model._mask(target)
        if not mask.any():
            raise ValidationError("target set is empty")
        if mask[int(x)]:
            raise ValidationError("the starting state belongs to the target set")
        base = ("landscape", model, int(x), mask, sim.beta, sim.max_steps, sim.seed)
    else:
        raise ValidationError("model must be a Graph or an EnergyLandscape")
    chunks = [c for c in np.array_split(replicas, max(1, workers)) if len(c)]
    jobs = [base + ((c,) if base[0] == "hardcore" else (c, method == "rejection_free")) for c in chunks]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]
    samples = []
    for steps, capped, final in results:
        for s, c, f in zip(steps.tolist(), capped.tolist(), final.tolist()):
            samples.append(HittingSample(int(s), bool(c), int(f)))
    run = HittingRun(tuple(samples), sim, method)
    return run


# -------------------------------------------------------- cycle exits


@dataclass(frozen=True)
class ExitStatistics:
    beta: float
    exits: int
    principal: int
    counts: dict = field(default_factory=dict)

    @property
    def principal_fraction(self) -> float:
        return self.principal / self.exits


def exit_statistics(landscape: EnergyLandscape, cycle, start: int, beta: float, exits: int,
                    seed: int, method: str = "rejection_free") -> ExitStatistics:
    """Where the chain started at ``start`` first leaves ``cycle``."""
    members = landscape._mask(cycle.members if hasattr(cycle, "members") else cycle)
    c = landscape.cycle(members)
    if not members[start]:
        raise ValidationError("start must lie inside the cycle")
    run = sample_hitting(landscape, start, ~members, SimConfig(beta, seed, replicas=exits), method)
    if run.biased:
        raise ComputationError("some exits did not happen within the step cap")
    finals = [s.final_state for s in run.samples]
    values, counts = np.unique(finals, return_counts=True)
    table = {int(v): int(k) for v, k in zip(values, counts)}
    principal = sum(k for v, k in table.items() if v in c.principal_boundary)
    return ExitStatistics(float(beta), exits, int(principal), table)


# ------------------------------------------------------- statistics


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical_value: float
    alpha: float
    p_value: float
    n: int

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical_value


def ks_exp1(samples, alpha: float = 0.01, prescaled: bool = False) -> KSResult:
    """Kolmogorov-Smirnov test of mean-scaled samples against the unit exponential.

    The critical value is the asymptotic Kolmogorov quantile over ``sqrt(n)``.
    """
    x = np.asarray(samples, dtype=float)
    if len(x) < 100:
        raise ValidationError(f"need at least 100 samples, got {len(x)}")
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie strictly between 0 and 1")
    scaled = x if prescaled else x / x.mean()
    res = stats.kstest(scaled, "expon")
    crit = float(stats.kstwobign.ppf(1 - alpha) / math.sqrt(len(x)))
    return KSResult(float(res.statistic), crit, alpha, float(res.pvalue), len(x))


def cdf_distance(samples, cdf, z_min: float = 0.0) -> float:
    """Largest gap between the empirical CDF and ``cdf`` over points ``>= z_min``.

    Both one-sided limits are compared at every distinct sample value, so
    atoms of ``cdf`` (and ties in the sample) are handled exactly.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    values, first = np.unique(x, return_index=True)
    after = np.append(first[1:], n) / n
    before = first / n
    f_at = np.asarray(cdf(values), dtype=float)
    f_left = np.asarray(cdf(np.nextafter(values, -np.inf)), dtype=float)
    gaps = np.maximum(np.abs(after - f_at), np.abs(before - f_left))
    keep = values >= z_min
    out = gaps[keep]
    if z_min > 0:
        below = np.searchsorted(x, z_min, side="left") / n
        out = np.append(out, abs(below - float(np.asarray(cdf(np.array([z_min])))[0])))
    return float(out.max()) if len(out) else 0.0


def estimate_exponent(points, allow_capped: bool = False) -> SlopeFit:
    """Least-squares slope of ``log(mean)`` against ``beta``.

    ``points`` holds ``(beta, mean)`` pairs or ``(beta, HittingRun)`` pairs;
    runs with capped replicas are rejected unless ``allow_capped``.
    """
    betas, means = [], []
    for beta, value in points:
        if isinstance(value, HittingRun):
            if value.biased and not allow_capped:
                raise ValidationError(f"run at beta={beta} has {value.capped_count} capped replicas")
            value = value.mean()
        betas.append(float(beta))
        means.append(float(value))
    return fit_log_slope(betas, means)


def write_summary_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
