import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_landscapes
from hardcore.errors import ValidationError
from hardcore.exact import (build_transition_matrix, dump_matrix, exit_distribution, fit_log_slope,
                            gibbs_distribution, mean_hitting_exact, mean_hitting_times,
                            reversibility_residual, spectral_gap, tv_mixing_time)
from hardcore.grid import GridSpec, build_grid, chessboard
from hardcore.landscape import EnergyLandscape
from hardcore.states import as_landscape, enumerate_states


def grid_landscape(text):
    g = build_grid(GridSpec.parse(text))
    land = as_landscape(enumerate_states(g.graph))
    return g, land, land.index_of(chessboard(g, "even")), land.index_of(chessboard(g, "odd"))


@pytest.fixture(scope="module")
def g22():
    return grid_landscape("open:2x2")


def two_state(p):
    return EnergyLandscape([0, 1], [(0, 1)], weights=[p])


def brute_hitting(land, target, beta):
    p = build_transition_matrix(land, beta).matrix
    rest = [s for s in range(land.n) if s not in target]
    q = p[np.ix_(rest, rest)]
    h = np.linalg.solve(np.eye(len(rest)) - q, np.ones(len(rest)))
    return dict(zip(rest, h))


# ------------------------------------------------------------- matrices


def test_beta_zero_is_connectivity(g22):
    _, land, _, _ = g22
    p = build_transition_matrix(land, 0.0).matrix
    q = np.zeros_like(p)
    q[land.sources, land.indices] = land.weights
    np.fill_diagonal(q, 1 - q.sum(axis=1))
    assert np.allclose(p, q)


def test_entry_from_chessboard_to_one_fewer(g22):
    _, land, e, _ = g22
    p = build_transition_matrix(land, 1.0).matrix
    for y in land.neighbors(e):
        assert p[e, int(y)] == pytest.approx(0.25 * math.exp(-1))


@settings(max_examples=60)
@given(small_landscapes(), st.floats(0, 5))
def test_stochastic_and_reversible(land, beta):
    tm = build_transition_matrix(land, beta)
    assert np.all(tm.matrix >= -1e-15)
    assert np.allclose(tm.matrix.sum(axis=1), 1)
    mu = gibbs_distribution(land, beta)
    assert mu.sum() == pytest.approx(1)
    assert reversibility_residual(tm, mu) < 1e-12
    assert np.allclose(mu @ tm.matrix, mu)


def test_gibbs_uniform_at_beta_zero(g22):
    _, land, _, _ = g22
    assert np.allclose(gibbs_distribution(land, 0), 1 / land.n)


def test_negative_beta_rejected(g22):
    with pytest.raises(ValidationError):
        build_transition_matrix(g22[1], -1)


def test_dump_matrix(tmp_path, g22):
    tm = build_transition_matrix(g22[1], 1.0)
    path = tmp_path / "p.txt"
    dump_matrix(tm, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# 7")
    assert len(lines) - 1 == np.count_nonzero(tm.matrix)


# ----------------------------------------------------------- hitting


@pytest.mark.parametrize("p", [0.1, 0.5, 1.0])
def test_two_state_mean_is_inverse_probability(p):
    land = EnergyLandscape([0, 0.0001], [(0, 1)], weights=[p])
    assert mean_hitting_exact(land, 0, [1], 0.0) == pytest.approx(1 / p)


@settings(max_examples=60)
@given(small_landscapes(), st.floats(0, 3), st.data())
def test_gth_matches_fundamental_matrix(land, beta, data):
    target = data.draw(st.sets(st.integers(0, land.n - 1), min_size=1, max_size=land.n - 1))
    want = brute_hitting(land, target, beta)
    gth = mean_hitting_times(land, sorted(target), beta)
    lu = mean_hitting_times(land, sorted(target), beta, method="lu")
    for x, h in want.items():
        assert gth[x] == pytest.approx(h, rel=1e-9)
        assert lu[x] == pytest.approx(h, rel=1e-9)
    assert gth.relative_residual < 1e-10


def test_gth_keeps_accuracy_at_low_temperature():
    _, land, e, o = grid_landscape("toroidal:4x4")
    h10 = mean_hitting_exact(land, e, [o], 10.0)
    h12 = mean_hitting_exact(land, e, [o], 12.0)
    # the growth rate over two units of beta is exp(2 * barrier)
    assert math.log(h12 / h10) / 2 == pytest.approx(5, abs=0.05)


def test_hitting_validation(g22):
    _, land, e, o = g22
    with pytest.raises(ValidationError):
        mean_hitting_exact(land, o, [o], 1.0)
    with pytest.raises(ValidationError):
        mean_hitting_times(land, [], 1.0)
    with pytest.raises(ValidationError):
        mean_hitting_times(land, [o], 1.0, method="cg")


@settings(max_examples=60)
@given(small_landscapes(min_states=3), st.floats(0, 3), st.data())
def test_exit_distribution_matches_brute_force(land, beta, data):
    region = sorted(data.draw(st.sets(st.integers(0, land.n - 1), min_size=1, max_size=land.n - 1)))
    x = data.draw(st.sampled_from(region))
    law = exit_distribution(land, region, x, beta)
    assert sum(law.values()) == pytest.approx(1)
    p = build_transition_matrix(land, beta).matrix
    out = [s for s in range(land.n) if s not in region]
    q = p[np.ix_(region, region)]
    absorb = np.linalg.solve(np.eye(len(region)) - q, p[np.ix_(region, out)])
    row = absorb[region.index(x)]
    for j, s in enumerate(out):
        assert law.get(s, 0.0) == pytest.approx(row[j], abs=1e-12)


def test_exit_distribution_validation(g22):
    _, land, e, o = g22
    with pytest.raises(ValidationError):
        exit_distribution(land, [o], e, 1.0)
    with pytest.raises(ValidationError):
        exit_distribution(land, range(land.n), e, 1.0)


# ------------------------------------------------------------ mixing


def brute_mixing(land, beta, eps, cap):
    p = build_transition_matrix(land, beta).matrix
    mu = gibbs_distribution(land, beta)
    pn = p.copy()
    for n in range(1, cap + 1):
        if 0.5 * np.abs(pn - mu).sum(axis=1).max() <= eps - 1e-9:
            return n
        pn = pn @ p
    return None


def test_mixing_at_beta_zero(g22):
    r = tv_mixing_time(g22[1], 0.0)
    assert r.steps <= 20 and not r.is_lower_bound


@settings(max_examples=30)
@given(small_landscapes(max_states=6, max_energy=2), st.floats(0, 2), st.sampled_from([0.1, 0.25, 0.5]))
def test_mixing_matches_matrix_powers(land, beta, eps):
    # periodic chains never mix and must come back flagged at the cap
    cap = 3000
    got = tv_mixing_time(land, beta, eps, cap=cap)
    want = brute_mixing(land, beta, eps, cap)
    if want is None:
        assert got.is_lower_bound and got.steps == cap
    else:
        assert not got.is_lower_bound and got.steps == want


def test_mixing_slope_on_2x2(g22):
    betas = [2, 3, 4, 5]
    fit = fit_log_slope(betas, [tv_mixing_time(g22[1], b).steps for b in betas])
    assert abs(fit.slope - 2) <= 0.3


def test_mixing_cap_reports_lower_bound(g22):
    r = tv_mixing_time(g22[1], 8.0, cap=100)
    assert r.is_lower_bound and r.steps == 100 and r.distance > 0.25


def test_mixing_validation(g22):
    with pytest.raises(ValidationError):
        tv_mixing_time(g22[1], 1.0, eps=1.5)


# -------------------------------------------------------------- gap


@pytest.mark.parametrize("p", [0.1, 0.3, 0.5])
def test_two_state_gap(p):
    assert spectral_gap(two_state(p), 0.0) == pytest.approx(2 * p)


@settings(max_examples=40)
@given(small_landscapes(), st.floats(0, 3))
def test_gap_matches_eigenvalues(land, beta):
    p = build_transition_matrix(land, beta).matrix
    vals = np.sort(np.linalg.eigvals(p).real)[::-1]
    assert spectral_gap(land, beta) == pytest.approx(1 - vals[1], abs=1e-10)


# ------------------------------------------------------------ slopes


def test_fit_log_slope_recovers_exponent():
    betas = np.array([1.0, 2.0, 3.0, 4.0])
    fit = fit_log_slope(betas, 7 * np.exp(2.5 * betas))
    assert fit.slope == pytest.approx(2.5)
    assert fit.intercept == pytest.approx(math.log(7))
    assert fit.stderr == pytest.approx(0, abs=1e-9)


def test_fit_log_slope_validation():
    with pytest.raises(ValidationError):
        fit_log_slope([1, 1], [2, 3])
    with pytest.raises(ValidationError):
        fit_log_slope([1, 2], [0, 3])
