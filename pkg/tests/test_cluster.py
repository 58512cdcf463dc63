import itertools
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatfit.cluster import (
    OUTLIER,
    ClusterConfig,
    GridConfig,
    assign_and_trim,
    enumerate_combinations,
    grid_candidates,
    outlier_count,
    parse_reduction,
    reduce_dimension,
    run_clustering,
)
from flatfit.errors import DimensionMismatchError, InvalidParameterError, ResourceLimitError
from flatfit.fitting import FitConfig, fit_single_flat
from flatfit.geometry import Flat
from flatfit.verify import gen_planted

GRID_OFF = GridConfig(enabled=False)


def point_flat(x):
    return Flat([float(x)], np.zeros((0, 1)))


def test_parse_reduction():
    assert parse_reduction("identity") is None
    assert parse_reduction("rp:7") == 7
    for bad in ("rp:x", "rp:0", "pca"):
        with pytest.raises(InvalidParameterError):
            parse_reduction(bad)


def test_identity_reduction_is_a_no_op():
    X = np.random.default_rng(0).standard_normal((10, 4))
    Y, back = reduce_dimension(X)
    assert Y is X or np.array_equal(Y, X)
    F = Flat(np.ones(4), [[1.0, 0, 0, 0]])
    assert back.lift(F) is F


def test_random_projection_roughly_preserves_distances():
    gen = np.random.default_rng(1)
    X = gen.standard_normal((60, 50))
    Y, _ = reduce_dimension(X, "rp:20", 3)
    i, k = np.triu_indices(60, 1)
    ratio = np.linalg.norm(Y[i] - Y[k], axis=1) / np.linalg.norm(X[i] - X[k], axis=1)
    assert abs(float(np.median(ratio)) - 1) <= 0.15
    with pytest.raises(InvalidParameterError):
        reduce_dimension(X, "rp:51")


def test_lift_then_project_is_identity():
    gen = np.random.default_rng(2)
    X = gen.standard_normal((30, 8))
    _, back = reduce_dimension(X, "rp:3", 5)
    F = Flat(gen.standard_normal(3), [[1.0, 0, 0], [0, 0, 1.0]])
    G = back.project_flat(back.lift(F))
    assert np.allclose(G.anchor, F.anchor) and G.same_span(F)
    # lifted flat maps its own points onto F
    pts = back.lift(F).anchor + gen.standard_normal((5, 2)) @ back.lift(F).basis
    assert np.allclose(F.distances(back.points(pts)), 0, atol=1e-10)


def test_assign_and_trim_hand_instance():
    P = np.array([[0.0], [1.0], [10.0]])
    a, out, L = assign_and_trim(P, [point_flat(0), point_flat(10)], 2, 1 / 3)
    assert out.tolist() == [1]
    assert a.tolist() == [0, OUTLIER, 1]
    assert L == 0.0


def test_assign_and_trim_no_gamma_and_ties():
    P = np.array([[-1.0], [1.0], [3.0]])
    a, out, L = assign_and_trim(P, [point_flat(0)], 2, 0.0)
    assert out.size == 0 and L == pytest.approx(11 / 3)
    # equal distances at the threshold: the higher index is dropped
    P = np.array([[-1.0], [1.0], [0.0]])
    a, out, _ = assign_and_trim(P, [point_flat(0)], 2, 0.3)
    assert out.tolist() == [1]
    with pytest.raises(DimensionMismatchError):
        assign_and_trim(P, [Flat(np.zeros(2), np.zeros((0, 2)))])


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.1, 0.3, 0.99]), st.integers(1, 3))
def test_assign_and_trim_invariants(seed, gamma, k):
    gen = np.random.default_rng(seed)
    X = gen.standard_normal((23, 3))
    flats = [Flat.from_directions(gen.standard_normal(3), [gen.standard_normal(3)]) for _ in range(k)]
    a, out, L = assign_and_trim(X, flats, 2, gamma)
    assert out.size == outlier_count(23, gamma) == min(math.ceil(gamma * 23 - 1e-9), 22)
    D = np.column_stack([F.distances(X) for F in flats])
    inl = a != OUTLIER
    assert np.all(D[inl, a[inl]] == D[inl].min(axis=1))
    assert math.isclose(L, float(np.mean(D[inl].min(axis=1) ** 2)), rel_tol=1e-9)
    if out.size:
        assert D[out].min(axis=1).min() >= D[inl].min(axis=1).max()


def test_grid_candidates_examples():
    g = grid_candidates(np.zeros(2), math.sqrt(2), GridConfig(per_axis_resolution=3))
    assert len(g) == 9
    assert sorted(map(tuple, g)) == [(x, y) for x in (-1.0, 0.0, 1.0) for y in (-1.0, 0.0, 1.0)]
    one = grid_candidates(np.array([2.0, 3.0]), 1.0, GridConfig(per_axis_resolution=1))
    assert np.array_equal(one, [[2.0, 3.0]])
    # grid inside a subspace stays in it
    dirs = np.array([[0.0, 1.0, 0.0]])
    g = grid_candidates(np.zeros(3), 1.0, GridConfig(per_axis_resolution=5), directions=dirs)
    assert len(g) == 5 and np.all(g[:, [0, 2]] == 0)
    assert np.all(np.linalg.norm(g, axis=1) <= 1.0 + 1e-12)
    with pytest.raises(ResourceLimitError):
        grid_candidates(np.zeros(10), 1.0, GridConfig(per_axis_resolution=3, max_points=100))


def brute_combinations(pools, keep):
    best, best_val = None, math.inf
    for combo in itertools.product(*[range(p.shape[0]) for p in pools]):
        m = np.min(np.stack([p[i] for p, i in zip(pools, combo)]), axis=0)
        val = float(np.mean(np.sort(m)[:keep]))
        if val < best_val:
            best, best_val = combo, val
    return best, best_val


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.lists(st.integers(1, 5), min_size=1, max_size=3), st.integers(1, 9))
def test_enumerate_combinations_matches_itertools(seed, sizes, keep):
    gen = np.random.default_rng(seed)
    pools = [gen.integers(0, 4, size=(s, 9)).astype(float) for s in sizes]
    combo, val, count = enumerate_combinations(pools, keep, block_elems=20)
    oracle, oracle_val = brute_combinations(pools, keep)
    assert count == math.prod(sizes)
    assert tuple(combo) == oracle and math.isclose(val, oracle_val)


def test_enumeration_cap():
    pools = [np.zeros((100, 3))] * 3
    with pytest.raises(ResourceLimitError):
        enumerate_combinations(pools, 3, max_combinations=10**5)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        ClusterConfig(gamma=0.0)
    with pytest.raises(InvalidParameterError):
        ClusterConfig(k=0)
    with pytest.raises(InvalidParameterError):
        ClusterConfig(anchor="median")
    assert ClusterConfig(gamma=0.0, r_override=2).echo()["r_override"] == 2


def two_lines(seed, n=60, sigma=0.01):
    return gen_planted(3, 1, 2, n, sigma, 0.0, rng=seed, min_separation=1.0)


def test_k1_matches_single_flat_fit():
    P = np.random.default_rng(3).standard_normal((40, 3)) * [4.0, 1.0, 0.3]
    cfg = ClusterConfig(k=1, j=1, gamma=0.1, r_override=3, grid=GRID_OFF, seed=9)
    res = run_clustering(P, cfg)
    fit = fit_single_flat(P, 1, 0.1, rng=9,
                          config=FitConfig(r=3, anchor="subset_means", center_samples=3))
    assert math.isclose(res.objective, fit.trimmed_objective, rel_tol=1e-12)
    assert res.flats[0].same_span(fit.flat)


def test_two_planted_lines_and_outlier_budget():
    inst = two_lines(4)
    cfg = ClusterConfig(k=2, j=1, gamma=0.1, r_override=2, grid=GRID_OFF, seed=1)
    res = run_clustering(inst.points, cfg)
    assert res.outlier_indices.size == outlier_count(60, 0.1) == 6
    assert np.sum(res.assignment == OUTLIER) == 6
    assert res.objective < 1e-3
    assert res.n_combinations == math.prod(res.n_candidates)
    # reported objective is the recomputed one
    _, _, L = assign_and_trim(inst.points, res.flats, 2, 0.1)
    assert math.isclose(L, res.objective, rel_tol=1e-9)


def test_content_addressed_runs_are_permutation_invariant():
    inst = two_lines(5, n=40, sigma=0.05)
    cfg = ClusterConfig(k=2, j=1, gamma=0.1, r_override=2, grid=GRID_OFF, content_addressed=True)
    perm = np.random.default_rng(0).permutation(40)
    a = run_clustering(inst.points, cfg)
    b = run_clustering(inst.points[perm], cfg)
    assert a.objective == b.objective
    assert np.array_equal(a.assignment[perm], b.assignment)


def test_more_flats_do_not_hurt():
    inst = two_lines(6, n=50, sigma=0.05)
    objs = [run_clustering(inst.points, ClusterConfig(k=k, j=1, gamma=0.1, r_override=2,
                                                     grid=GRID_OFF, seed=2)).objective
            for k in (1, 2)]
    assert objs[1] <= objs[0]


def test_grid_round_never_worsens():
    inst = two_lines(7, n=40, sigma=0.05)
    cfg = ClusterConfig(k=2, j=1, gamma=0.1, r_override=1, center_samples=2,
                        grid=GridConfig(per_axis_resolution=3), seed=3)
    res = run_clustering(inst.points, cfg)
    assert res.step6_objective is not None and res.step6_objective <= res.step4_objective
    assert res.objective == res.step6_objective
    assert res.r_B > 0


def test_reduced_clustering_fits_in_the_reduced_space():
    inst = gen_planted(12, 1, 1, 60, 0.0, 0.0, rng=8)
    cfg = ClusterConfig(k=1, j=1, gamma=0.1, r_override=2, grid=GRID_OFF, reduction="rp:4")
    res = run_clustering(inst.points, cfg)
    assert res.flats[0].ambient_dim == 12
    # the lifted flat maps back onto an exact fit of the projected points
    Y, back = reduce_dimension(inst.points, "rp:4", 0)
    dist = back.project_flat(res.flats[0]).distances(Y)
    assert np.sort(dist)[:54].max() < 1e-9


def test_thread_count_does_not_change_results(monkeypatch):
    inst = two_lines(9, n=40, sigma=0.05)
    cfg = ClusterConfig(k=2, j=1, gamma=0.1, r_override=2, grid=GRID_OFF)
    out = []
    for threads in ("1", "4"):
        monkeypatch.setenv("FLATFIT_THREADS", threads)
        res = run_clustering(inst.points, cfg)
        out.append((res.objective, res.assignment.tolist(), [F.basis.tolist() for F in res.flats]))
    assert out[0] == out[1]
    assert os.environ["FLATFIT_THREADS"] == "4"
