import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flatfit.errors import DegenerateError, InvalidParameterError
from flatfit.fitting import optimal_flat_tau2
from flatfit.geometry import Flat, power_objective
from flatfit.regular import (
    coefficient_of_variation,
    fit_regular,
    fit_regular_clustering,
    regular_bound,
    regular_factor,
    regular_sample_size,
)
from flatfit.verify import assignment_accuracy, gen_planted


def test_cv_examples():
    assert coefficient_of_variation([-1.0, 1.0]) == 1.0
    # deviations 1, 1, 2: sqrt(2) / (4/3)
    assert math.isclose(coefficient_of_variation([0.0, 0.0, 3.0]), 3 * math.sqrt(2) / 4)
    assert coefficient_of_variation([0.0, 0.0, 3.0], tau=1) == 1.0
    with pytest.raises(DegenerateError):
        coefficient_of_variation([2.0, 2.0, 2.0])
    with pytest.raises(InvalidParameterError):
        coefficient_of_variation([1.0])


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.lists(finite, min_size=2, max_size=30), st.floats(0.01, 100), finite)
def test_cv_is_affine_invariant_and_at_least_one(xs, a, b):
    x = np.array(xs)
    try:
        cv = coefficient_of_variation(x)
    except DegenerateError:
        return
    assert cv >= 1 - 1e-12
    try:
        cv2 = coefficient_of_variation(a * x + b)
    except DegenerateError:
        return
    assert math.isclose(cv, cv2, rel_tol=1e-6)


def test_regular_factor_of_symmetric_pair_is_one():
    P = np.array([[-1.0, 0.0], [1.0, 0.0]])
    st_ = regular_factor(P, Flat(np.zeros(2), [[1.0, 0.0]]), n_directions=8)
    assert st_.omega == pytest.approx(1.0)
    assert st_.per_direction_cv.size == 8


def test_regular_factor_of_gaussian_plane():
    gen = np.random.default_rng(0)
    P = np.zeros((10_000, 4))
    P[:, :2] = gen.standard_normal((10_000, 2))
    F = Flat(np.zeros(4), [[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
    omega = regular_factor(P, F, rng=1).omega
    assert 1.15 <= omega <= 1.35


def test_regular_factor_grows_with_more_directions():
    gen = np.random.default_rng(2)
    P = gen.standard_normal((500, 3)) * [3.0, 1.0, 1.0]
    P[:, 1] = P[:, 1] ** 3
    F = Flat(np.zeros(3), [[1.0, 0, 0], [0, 1.0, 0]])
    few = regular_factor(P, F, n_directions=8, rng=4).omega
    many = regular_factor(P, F, n_directions=256, rng=4).omega
    assert many >= few
    # same stream: the first 8 directions are a prefix
    assert np.allclose(regular_factor(P, F, n_directions=256, rng=4).per_direction_cv[:8],
                       regular_factor(P, F, n_directions=8, rng=4).per_direction_cv)


def test_regular_sample_size_examples():
    assert regular_sample_size(math.sqrt(2), 0.5, 1) == 4
    assert regular_sample_size(1.0, 0.5, 1) == 1
    assert regular_sample_size(2.0, 0.5, 2) == 48
    with pytest.raises(InvalidParameterError):
        regular_sample_size(0.5, 0.5, 1)
    assert regular_bound(1.0, 0.25, 1) == pytest.approx(11.0**2)


def test_fit_regular_noiseless():
    inst = gen_planted(4, 2, 1, 200, 0.0, 0.0, rng=1)
    res = fit_regular(inst.points, 2, eps=0.5, rng=0)
    assert res.trimmed_objective <= 1e-18
    assert res.inlier_indices.size == 200
    assert res.info["omega"] >= 1


def test_fit_regular_meets_its_bound():
    hits = 0
    for seed in range(30):
        inst = gen_planted(3, 1, 1, 200, 0.2, 0.0, rng=seed)
        res = fit_regular(inst.points, 1, eps=0.5, rng=seed)
        opt = power_objective(inst.points, optimal_flat_tau2(inst.points, 1))
        assert res.inlier_indices.size == 200
        hits += res.trimmed_objective <= regular_bound(res.info["omega"], 0.5, 1) * opt
    assert hits >= 27


def test_regular_clustering_separates_two_lines():
    inst = gen_planted(3, 1, 2, 80, 0.01, 0.0, rng=3, min_separation=2.0)
    res = fit_regular_clustering(inst.points, 2, 1, eps=0.5, omega=1.3, seed=1)
    assert res.outlier_indices.size == 0
    assert assignment_accuracy(inst.true_assignment, res.assignment, 2) >= 0.95
