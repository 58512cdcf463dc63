import itertools

import numpy as np
import pytest

from flatfit.errors import InvalidParameterError
from flatfit.geometry import flat_distance
from flatfit.verify import (
    LEMMA_IDS,
    assignment_accuracy,
    brute_force_clustering,
    gen_planted,
    regenerate,
    set_partitions,
    verify_lemma,
)
from flatfit.verify.lemmas import power_mean_margin


def test_noiseless_planted_points_lie_on_their_flats():
    inst = gen_planted(5, 2, 3, 90, 0.0, 0.0, rng=1)
    assert inst.points.shape == (90, 5)
    for l, F in enumerate(inst.true_flats):
        pts = inst.points[inst.true_assignment == l]
        assert pts.shape[0] == 30
        assert F.distances(pts).max() < 1e-12


def test_outlier_count_and_labels():
    inst = gen_planted(3, 1, 2, 100, 0.1, 0.1, rng=2)
    assert inst.outlier_mask.sum() == 10
    assert np.all(inst.true_assignment[inst.outlier_mask] == -1)


def test_noise_variance_matches_sigma():
    sigma = 0.3
    inst = gen_planted(4, 1, 1, 10_000, sigma, 0.0, rng=3)
    d2 = inst.true_flats[0].distances(inst.points) ** 2
    # three normal directions, each N(0, sigma^2)
    assert abs(d2.mean() / (3 * sigma**2) - 1) <= 0.1


def test_erlang_and_regenerate():
    inst = gen_planted(3, 2, 2, 50, 0.05, 0.1, "erlang", rng=4)
    again = regenerate(inst.echo)
    assert np.array_equal(inst.points, again.points)
    assert np.array_equal(inst.true_assignment, again.true_assignment)
    with pytest.raises(InvalidParameterError):
        gen_planted(3, 1, 1, 10, distribution="cauchy")


def test_separation_is_respected():
    inst = gen_planted(3, 1, 2, 20, rng=5, min_separation=2.0)
    assert flat_distance(*inst.true_flats) >= 2.0


def test_assignment_accuracy_ignores_label_names():
    assert assignment_accuracy([0, 0, 1, 1], [1, 1, 0, 0], 2) == 1.0
    assert assignment_accuracy([0, 0, 1, -1], [0, 1, 1, 0], 2) == pytest.approx(2 / 3)


def test_set_partitions_count_bell_and_stirling():
    assert sum(1 for _ in set_partitions(5, 5)) == 52
    # Stirling S(6,1) + S(6,2) = 1 + 31
    assert sum(1 for _ in set_partitions(6, 2)) == 32


def test_brute_force_two_lines_is_zero():
    P = np.array([[x, 0.0] for x in range(4)] + [[0.0, y + 5] for y in range(4)], dtype=float)
    P[4:, 0] = 7.0
    flats, val = brute_force_clustering(P, 2, 1)
    assert val < 1e-20 and len(flats) == 2


def test_brute_force_k1_is_least_squares():
    gen = np.random.default_rng(6)
    P = gen.standard_normal((7, 3))
    _, val = brute_force_clustering(P, 1, 1)
    s = np.linalg.svd(P - P.mean(axis=0), compute_uv=False)
    assert val == pytest.approx(float(np.sum(s[1:] ** 2) / 7))


def test_brute_force_matches_bitmask_enumeration():
    gen = np.random.default_rng(7)
    P = gen.standard_normal((6, 2))

    def pca_cost(X):
        if X.shape[0] < 2:
            return 0.0
        s = np.linalg.svd(X - X.mean(axis=0), compute_uv=False)
        return float(np.sum(s[1:] ** 2))

    oracle = min(pca_cost(P[[i for i in range(6) if m >> i & 1]])
                 + pca_cost(P[[i for i in range(6) if not m >> i & 1]])
                 for m in range(1 << 6)) / 6
    _, val = brute_force_clustering(P, 2, 1)
    assert val <= oracle + 1e-12
    assert val == pytest.approx(oracle, abs=1e-9)


def test_brute_force_other_tau_and_limits():
    P = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 3.0], [1.0, 3.0]])
    _, val = brute_force_clustering(P, 2, 1, tau=1)
    assert val == 0.0
    with pytest.raises(InvalidParameterError):
        brute_force_clustering(np.zeros((11, 2)), 1, 1)


def test_unknown_lemma_and_bad_trials():
    with pytest.raises(InvalidParameterError):
        verify_lemma("no-such-lemma")
    with pytest.raises(InvalidParameterError):
        verify_lemma("hyperbox", trials=0)


@pytest.mark.parametrize("lemma_id", LEMMA_IDS)
def test_each_lemma_passes_at_small_scale_and_is_reproducible(lemma_id):
    a = verify_lemma(lemma_id, trials=200, rng=3)
    b = verify_lemma(lemma_id, trials=200, rng=3)
    assert a.passed, a.to_dict()
    assert a.to_dict() == b.to_dict()
    assert a.trials == 200 and set(a.to_dict()) >= {"lemma_id", "pass", "worst_margin"}


def test_power_mean_is_tight_at_zero_weight():
    for x, y, tau in itertools.product([0.5, 2.0], [0.1, 3.0], [1, 2, 5]):
        lhs, rhs = power_mean_margin(x, y, 0.0, tau)
        assert lhs == pytest.approx(rhs)

