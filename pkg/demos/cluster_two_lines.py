"""
Clustering points around two lines
==================================

"""

from flatfit import ClusterConfig, GridConfig, run_clustering
from flatfit.verify import assignment_accuracy, gen_planted

# two well separated lines in R^3 plus 5% stray points
inst = gen_planted(d=3, j=1, k=2, n=300, noise_sigma=0.05, outlier_fraction=0.05,
                   rng=4, min_separation=1.0)

# one rotation tree per line; every pair of leaves is tried
cfg = ClusterConfig(k=2, j=1, gamma=0.1, r_override=2, seed=0, grid=GridConfig(enabled=False))
res = run_clustering(inst.points, cfg)
print("trimmed objective:", res.objective)
print("candidates per line:", res.n_candidates, "pairs tried:", res.n_combinations)
print("points flagged as outliers:", res.outlier_indices.size)

acc = assignment_accuracy(inst.true_assignment, res.assignment, 2)
print("assignment accuracy on inliers:", round(acc, 4))

# a refinement round adds grid points around every candidate
cfg.grid = GridConfig(per_axis_resolution=3)
cfg.r_override = 1
cfg.center_samples = 2
res = run_clustering(inst.points, cfg)
print("before grid:", res.step4_objective, "after grid:", res.step6_objective)
