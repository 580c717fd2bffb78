"""Exact finite-state computations at a fixed inverse temperature.

Everything here is dense linear algebra on the enumerated state space:
the Metropolis transition matrix, the Gibbs law, mean hitting times,
total-variation mixing times and the spectral gap.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, solve
from scipy.special import logsumexp

from .errors import ComputationError, ValidationError
from .landscape import EnergyLandscape

TV_GUARD = 1e-9


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic Metropolis matrix built at ``beta``."""

    matrix: np.ndarray
    beta: float

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def _energy_floats(landscape: EnergyLandscape) -> np.ndarray:
    return np.array([float(e) for e in landscape.energies])


def _off_diagonal(landscape: EnergyLandscape, beta: float) -> np.ndarray:
    """Dense matrix of ``q(x, y) exp(-beta [H(y) - H(x)]^+)`` with a zero diagonal."""
    if beta < 0:
        raise ValidationError("beta must be non-negative")
    h = _energy_floats(landscape)
    src, dst = landscape.sources, landscape.indices
    rise = np.maximum(h[dst] - h[src], 0.0)
    p = np.zeros((landscape.n, landscape.n))
    p[src, dst] = landscape.weights * np.exp(-beta * rise)
    return p


def build_transition_matrix(landscape: EnergyLandscape, beta: float) -> TransitionMatrix:
    """Metropolis matrix; the diagonal holds the rejected and void mass."""
    p = _off_diagonal(landscape, beta)
    np.fill_diagonal(p, 1.0 - p.sum(axis=1))
    return TransitionMatrix(p, float(beta))


def gibbs_distribution(landscape: EnergyLandscape, beta: float) -> np.ndarray:
    """Probability vector proportional to ``exp(-beta H)``."""
    logw = -beta * _energy_floats(landscape)
    return np.exp(logw - logsumexp(logw))


def reversibility_residual(tm: TransitionMatrix, mu: np.ndarray) -> float:
    flow = mu[:, None] * tm.matrix
    return float(np.abs(flow - flow.T).max())


@dataclass(frozen=True)
class HittingResult:
    """Mean hitting times from every state outside the target."""

    means: np.ndarray          # indexed by state; zero on the target
    relative_residual: float

    def __getitem__(self, x: int) -> float:
        return float(self.means[x])


def mean_hitting_times(landscape: EnergyLandscape, target, beta: float,
                       method: str = "gth") -> HittingResult:
    """Solve ``h = 1 + Q h`` on the complement of ``target``.

    ``method="gth"`` eliminates states one at a time keeping every pivot a
    sum of non-negative terms, so the answer keeps full relative accuracy
    even when the mean is astronomically large.  ``method="lu"`` is a plain
    dense solve, accurate only while the mean times the smallest escape
    rate stays well below one over machine epsilon.
    """
    a = landscape._mask(target)
    if not a.any():
        raise ValidationError("target set is empty")
    if a.all():
        return HittingResult(np.zeros(landscape.n), 0.0)
    p = _off_diagonal(landscape, beta)
    rest = np.nonzero(~a)[0]
    q = p[np.ix_(rest, rest)].copy()
    into_target = p[np.ix_(rest, np.nonzero(a)[0])].sum(axis=1)
    ones = np.ones(len(rest))
    if method == "gth":
        h = _gth_hitting(q, into_target)
    elif method == "lu":
        m = -q
        m[np.diag_indices_from(m)] = q.sum(axis=1) + into_target
        h = solve(m, ones)
    else:
        raise ValidationError(f"unknown method {method!r}")
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        raise ComputationError("hitting-time solve produced non-finite or non-positive means")
    lap = -q
    lap[np.diag_indices_from(lap)] = q.sum(axis=1) + into_target
    resid = lap @ h - ones
    scale = np.abs(lap).sum(axis=1) @ np.abs(h) / len(h) + 1.0
    out = np.zeros(landscape.n)
    out[rest] = h
    return HittingResult(out, float(np.abs(resid).max() / scale))


def _gth_hitting(q: np.ndarray, into_target: np.ndarray, rhs: np.ndarray | None = None) -> np.ndarray:
    """Censoring elimination for ``(diag(s) - Q_off) h = rhs`` (default all ones).

    ``s_i = sum_{j != i} Q_ij + e_i`` is recomputed from the updated
    off-diagonal entries and exit flows after each elimination.  ``rhs``
    may have several columns, all non-negative.
    """
    q = q.copy()
    np.fill_diagonal(q, 0.0)
    e = into_target.astype(float).copy()
    b = np.ones(len(e)) if rhs is None else np.array(rhs, dtype=float)
    m = len(e)
    pivots = np.zeros(m)
    for n in range(m - 1, -1, -1):
        s_n = q[n, :n].sum() + e[n]
        if s_n <= 0:
            raise ComputationError("target is unreachable from part of the state space")
        pivots[n] = s_n
        if n == 0:
            break
        col = q[:n, n] / s_n
        q[:n, :n] += np.outer(col, q[n, :n])
        e[:n] += col * e[n]
        b[:n] += np.multiply.outer(col, b[n]) if b.ndim > 1 else col * b[n]
        q[np.arange(n), np.arange(n)] = 0.0
    h = np.zeros(b.shape)
    for n in range(m):
        h[n] = (b[n] + q[n, :n] @ h[:n]) / pivots[n]
    return h


def mean_hitting_exact(landscape: EnergyLandscape, x: int, target, beta: float,
                       method: str = "gth") -> float:
    """Expected number of steps to reach ``target`` from ``x``."""
    a = landscape._mask(target)
    if a[x]:
        raise ValidationError("the starting state belongs to the target set")
    return mean_hitting_times(landscape, a, beta, method)[x]


def exit_distribution(landscape: EnergyLandscape, region, x: int, beta: float) -> dict[int, float]:
    """Law of the first state outside ``region`` for the chain started at ``x``."""
    inside = landscape._mask(region)
    if not inside[x]:
        raise ValidationError("x must lie in the region")
    if inside.all():
        raise ValidationError("region has no exterior")
    p = _off_diagonal(landscape, beta)
    rest = np.nonzero(inside)[0]
    out = np.nonzero(~inside)[0]
    cross = p[np.ix_(rest, out)]
    used = np.nonzero(cross.sum(axis=0) > 0)[0]
    prob = _gth_hitting(p[np.ix_(rest, rest)], cross.sum(axis=1), cross[:, used])
    row = prob[int(np.searchsorted(rest, x))]
    return {int(out[j]): float(v) for j, v in zip(used, row)}


# ------------------------------------------------------------- mixing


@dataclass(frozen=True)
class MixingResult:
    steps: int
    is_lower_bound: bool
    distance: float
    guard: float = TV_GUARD


def _tv_from_all(pn: np.ndarray, mu: np.ndarray) -> float:
    return float(0.5 * np.abs(pn - mu[None, :]).sum(axis=1).max())


def tv_mixing_time(landscape: EnergyLandscape, beta: float, eps: float = 0.25,
                   cap: int = 2 ** 50) -> MixingResult:
    """Smallest ``n`` with worst-start total variation ``<= eps - guard``.

    Powers of ``P`` come from repeated squaring until the bound is met,
    then a binary search between the last two powers of two.  If ``cap``
    steps are not enough the cap is returned flagged as a lower bound.
    """
    if not 0 < eps < 1:
        raise ValidationError("eps must lie strictly between 0 and 1")
    p = build_transition_matrix(landscape, beta).matrix
    mu = gibbs_distribution(landscape, beta)
    threshold = eps - TV_GUARD
    powers = [p]
    if _tv_from_all(p, mu) <= threshold:
        return MixingResult(1, False, _tv_from_all(p, mu))
    k = 0
    while True:
        if 2 ** (k + 1) > cap:
            d = _tv_from_all(_matrix_power(powers, cap), mu)
            if d > threshold:
                return MixingResult(cap, True, d)
            lo, hi, base = 2 ** k, cap, powers[k]
            break
        powers.append(powers[-1] @ powers[-1])
        k += 1
        if _tv_from_all(powers[-1], mu) <= threshold:
            lo, hi, base = 2 ** (k - 1), 2 ** k, powers[k - 1]
            break
    # invariant: d(lo) > threshold >= d(hi); base holds P^start
    start = lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        pm = base @ _matrix_power(powers, mid - start)
        if _tv_from_all(pm, mu) <= threshold:
            hi = mid
        else:
            lo = mid
    return MixingResult(hi, False, _tv_from_all(_matrix_power(powers, hi), mu))


def _matrix_power(powers: list[np.ndarray], n: int) -> np.ndarray:
    """``P^n`` from the table ``powers[i] = P^(2^i)``, extending it as needed."""
    while len(powers) <= n.bit_length():
        powers.append(powers[-1] @ powers[-1])
    out = None
    i = 0
    while n:
        if n & 1:
            out = powers[i] if out is None else out @ powers[i]
        n >>= 1
        i += 1
    return out if out is not None else np.eye(powers[0].shape[0])


def spectral_gap(landscape: EnergyLandscape, beta: float) -> float:
    """One minus the second largest eigenvalue of the transition matrix.

    Uses the symmetric form ``D^(1/2) (I - P) D^(-1/2)`` with ``D = diag(mu)``,
    whose off-diagonal entries are ``-q exp(-beta |H(x) - H(y)| / 2)`` and
    whose diagonal is the (subtraction-free) total escape probability.
    """
    h = _energy_floats(landscape)
    src, dst = landscape.sources, landscape.indices
    n = landscape.n
    sym = np.zeros((n, n))
    sym[src, dst] = -landscape.weights * np.exp(-0.5 * beta * np.abs(h[dst] - h[src]))
    escape = np.zeros(n)
    np.add.at(escape, src, landscape.weights * np.exp(-beta * np.maximum(h[dst] - h[src], 0.0)))
    sym[np.arange(n), np.arange(n)] = escape
    try:
        vals = eigh(sym, eigvals_only=True, subset_by_index=[0, 1])
    except np.linalg.LinAlgError as exc:
        raise ComputationError(f"eigen-solver failed: {exc}") from exc
    return float(vals[1])


# ---------------------------------------------------------- slopes


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    points: tuple


def fit_log_slope(betas, values) -> SlopeFit:
    """Least-squares slope of ``log(values)`` against ``betas``."""
    b = np.asarray(betas, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(np.unique(b)) < 2:
        raise ValidationError("need at least two distinct beta values")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValidationError("values must be finite and positive")
    y = np.log(v)
    design = np.column_stack([b, np.ones_like(b)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope, intercept = coef
    dof = len(b) - 2
    if dof > 0:
        resid = y - design @ coef
        sigma2 = resid @ resid / dof
        stderr = math.sqrt(sigma2 / ((b - b.mean()) ** 2).sum())
    else:
        stderr = 0.0
    return SlopeFit(float(slope), float(intercept), float(stderr), tuple(zip(b.tolist(), v.tolist())))


def write_rows_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def dump_matrix(tm: TransitionMatrix, path) -> None:
    """Nonzero entries as ``row column value`` lines."""
    rows, cols = np.nonzero(tm.matrix)
    with open(path, "w") as fh:
        fh.write(f"# {tm.dimension} {tm.beta!r}\n")
        for i, j in zip(rows.tolist(), cols.tolist()):
            fh.write(f"{i} {j} {tm.matrix[i, j]!r}\n")
