import csv
import math

import numpy as np
import pytest

from hardcore.errors import ComputationError, ValidationError
from hardcore.exact import exit_distribution, gibbs_distribution, mean_hitting_exact
from hardcore.grid import GridSpec, build_grid, chessboard
from hardcore.landscape import EnergyLandscape
from hardcore.sim import (HittingRun, HittingSample, SimConfig, cdf_distance, estimate_exponent,
                          exit_statistics, ks_exp1, metropolis_step, replica_generator,
                          sample_hitting, trajectory, write_summary_json)
from hardcore.states import as_landscape, enumerate_states


@pytest.fixture(scope="module")
def g22():
    g = build_grid(GridSpec.parse("open:2x2"))
    space = enumerate_states(g.graph)
    return g, space, as_landscape(space), chessboard(g, "even"), chessboard(g, "odd")


def within(run, exact, sigmas=4.0):
    return abs(run.mean() - exact) <= sigmas * run.standard_error()


# -------------------------------------------------------------- config


def test_config_validation():
    for kwargs in (dict(beta=0, seed=1), dict(beta=1, seed=1, max_steps=0),
                   dict(beta=1, seed=1, replicas=0), dict(beta=1, seed=-1)):
        with pytest.raises(ValidationError):
            SimConfig(**kwargs)


def test_replica_streams_are_reproducible_and_distinct():
    a = replica_generator(7, 0).random(4)
    assert np.array_equal(a, replica_generator(7, 0).random(4))
    assert not np.array_equal(a, replica_generator(7, 1).random(4))
    assert not np.array_equal(a, replica_generator(8, 0).random(4))


# ---------------------------------------------------------- single steps


def test_metropolis_step_fills_from_empty(g22, rng):
    g = g22[0]
    for _ in range(50):
        y = metropolis_step(0, g.graph, 1.0, rng)
        assert bin(y).count("1") == 1


def test_metropolis_step_removal_rate(g22, rng):
    g, _, _, e, _ = g22
    beta = 0.7
    removed = sum(metropolis_step(e, g.graph, beta, rng) != e for _ in range(20000))
    # both occupied sites can be removed, neither vacant site can be filled
    want = 0.5 * math.exp(-beta)
    assert abs(removed / 20000 - want) < 4 * math.sqrt(want * (1 - want) / 20000)


def test_trajectory_matches_gibbs(g22, rng):
    g, space, land, e, _ = g22
    beta = 1.0
    path = trajectory(g.graph, 0, beta, 200_000, rng)
    assert all(g.graph.is_independent(int(c)) for c in np.unique(path))
    counts = np.array([np.count_nonzero(path == np.uint64(s)) for s in space.states.tolist()])
    tv = 0.5 * np.abs(counts / counts.sum() - gibbs_distribution(land, beta)).sum()
    assert tv < 0.02


# ------------------------------------------------------------- hitting


def test_graph_baseline_matches_exact(g22):
    g, _, land, e, o = g22
    exact = mean_hitting_exact(land, land.index_of(e), [land.index_of(o)], 2.0)
    run = sample_hitting(g.graph, e, [o], SimConfig(2.0, 11, replicas=2000))
    assert not run.biased
    assert within(run, exact)


@pytest.mark.parametrize("method", ["baseline", "rejection_free"])
def test_landscape_methods_match_exact(g22, method):
    _, _, land, e, o = g22
    x, a = land.index_of(e), [land.index_of(o)]
    exact = mean_hitting_exact(land, x, a, 2.5)
    run = sample_hitting(land, x, a, SimConfig(2.5, 5, replicas=2000), method)
    assert within(run, exact)
    assert all(s.final_state in a for s in run.samples)


def test_rejection_free_on_graph_matches_exact():
    g = build_grid(GridSpec.parse("open:2x4"))
    land = as_landscape(enumerate_states(g.graph))
    e, o = chessboard(g, "even"), chessboard(g, "odd")
    exact = mean_hitting_exact(land, land.index_of(e), [land.index_of(o)], 3.0)
    run = sample_hitting(g.graph, e, [o], SimConfig(3.0, 3, replicas=2000), "rejection_free")
    assert within(run, exact)


def test_chain_with_rejections_matches_exact():
    land = EnergyLandscape([0, 2, 1, 3, -1], [(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)])
    exact = mean_hitting_exact(land, 0, [4], 1.0)
    for method in ("baseline", "rejection_free"):
        run = sample_hitting(land, 0, [4], SimConfig(1.0, 2, replicas=3000), method)
        assert within(run, exact)


@pytest.mark.parametrize("method", ["baseline", "rejection_free"])
def test_workers_do_not_change_results(g22, method):
    g, _, land, e, o = g22
    model = g.graph if method == "baseline" else land
    x, a = (e, [o]) if method == "baseline" else (land.index_of(e), [land.index_of(o)])
    cfg = SimConfig(1.5, 99, replicas=40)
    one = sample_hitting(model, x, a, cfg, method, workers=1)
    two = sample_hitting(model, x, a, cfg, method, workers=3)
    assert np.array_equal(one.steps, two.steps)


def test_seed_changes_results(g22):
    g, _, _, e, o = g22
    a = sample_hitting(g.graph, e, [o], SimConfig(1.0, 1, replicas=30))
    b = sample_hitting(g.graph, e, [o], SimConfig(1.0, 2, replicas=30))
    assert not np.array_equal(a.steps, b.steps)


def test_cap_marks_replicas(g22):
    g, _, land, e, o = g22
    run = sample_hitting(g.graph, e, [o], SimConfig(6.0, 1, max_steps=50, replicas=20))
    assert run.biased and run.capped_count == 20
    assert np.all(run.steps == 50)
    with pytest.raises(ComputationError):
        run.mean()
    summary = run.summary()
    assert summary["biased"] and "mean" not in summary
    with pytest.raises(ValidationError):
        estimate_exponent([(6.0, run), (7.0, run)])


def test_rejection_free_cap_counts_each_step(g22):
    _, _, land, e, o = g22
    run = sample_hitting(land, land.index_of(e), [land.index_of(o)],
                         SimConfig(8.0, 1, max_steps=1000, replicas=20), "rejection_free")
    assert run.capped_count == 20 and np.all(run.steps == 1000)


def test_sample_validation(g22):
    g, _, land, e, o = g22
    cfg = SimConfig(1.0, 1, replicas=2)
    with pytest.raises(ValidationError):
        sample_hitting(g.graph, e, [e], cfg)
    with pytest.raises(ValidationError):
        sample_hitting(g.graph, e, [], cfg)
    with pytest.raises(ValidationError):
        sample_hitting(g.graph, 0b11, [o], cfg)
    with pytest.raises(ValidationError):
        sample_hitting(g.graph, e, [o], cfg, method="gillespie")
    with pytest.raises(ValidationError):
        sample_hitting("grid", e, [o], cfg)


def test_run_outputs(tmp_path, g22):
    g, _, _, e, o = g22
    run = sample_hitting(g.graph, e, [o], SimConfig(1.0, 4, replicas=10))
    path = tmp_path / "r.csv"
    run.write_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["replica", "steps", "capped"] and len(rows) == 11
    summary = run.summary()
    assert summary["replicas"] == 10 and summary["seed"] == 4 and summary["mean"] == run.mean()
    write_summary_json(tmp_path / "s.json", summary)
    assert (tmp_path / "s.json").read_text().startswith("{")


# ----------------------------------------------------------- exits


def test_exit_statistics_match_exit_distribution():
    land = EnergyLandscape([0, 1, 2, 3, 3, -1], [(0, 1), (0, 2), (1, 3), (0, 4), (2, 5), (3, 5), (4, 5)])
    cycle = land.cycle([0, 1])
    law = exit_distribution(land, cycle.members, 0, 2.0)
    stats = exit_statistics(land, cycle, 0, 2.0, 4000, seed=3)
    assert sum(stats.counts.values()) == 4000
    for state, p in law.items():
        freq = stats.counts.get(state, 0) / 4000
        assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / 4000) + 1e-9
    assert stats.principal_fraction == pytest.approx(law[2], abs=0.03)
    with pytest.raises(ValidationError):
        exit_statistics(land, cycle, 5, 2.0, 10, seed=1)


# ------------------------------------------------------------ statistics


def test_ks_accepts_exponential_and_rejects_uniform(rng):
    assert ks_exp1(rng.exponential(3.0, 2000)).passed
    assert not ks_exp1(rng.uniform(0, 2, 2000)).passed
    r = ks_exp1(rng.exponential(1.0, 400), prescaled=True)
    assert r.n == 400 and r.critical_value == pytest.approx(1.6276 / 20, rel=1e-3)


def test_ks_validation(rng):
    with pytest.raises(ValidationError):
        ks_exp1(rng.exponential(1.0, 99))
    with pytest.raises(ValidationError):
        ks_exp1(rng.exponential(1.0, 200), alpha=0)


def test_cdf_distance_by_hand():
    def uniform(z):
        return np.clip(z, 0, 1)

    assert cdf_distance([0.25, 0.75], uniform) == pytest.approx(0.25)
    assert cdf_distance([0.5, 0.5], uniform) == pytest.approx(0.5)


def test_cdf_distance_handles_atoms():
    def atom(z):
        z = np.asarray(z, dtype=float)
        return np.where(z >= 0, 0.5 + 0.5 * (1 - np.exp(-np.maximum(z, 0))), 0.0)

    sample = np.r_[np.zeros(500), np.random.default_rng(1).exponential(1.0, 500)]
    assert cdf_distance(sample, atom) < 0.06
    assert cdf_distance(np.random.default_rng(2).exponential(1.0, 1000), atom) >= 0.5 - 1e-9
    assert cdf_distance(sample, atom, z_min=0.01) < 0.06


def test_estimate_exponent_from_means():
    fit = estimate_exponent([(1.0, math.exp(2)), (2.0, math.exp(4)), (3.0, math.exp(6))])
    assert fit.slope == pytest.approx(2)


def test_estimate_exponent_accepts_capped_on_request():
    cfg = SimConfig(1.0, 1, max_steps=10, replicas=2)
    run = lambda s: HittingRun((HittingSample(s, False), HittingSample(10, True)), cfg, "baseline")  # noqa: E731
    fit = estimate_exponent([(1.0, run(3)), (2.0, run(9))], allow_capped=True)
    assert fit.slope == pytest.approx(math.log(3))
