"""
Fitting one flat through noisy data with outliers
=================================================

"""

import numpy as np

from flatfit import FitConfig, fit_single_flat, optimal_flat_tau2, power_objective
from flatfit.verify import gen_planted

# a plane in R^4, a little noise off the plane and 10% gross outliers
inst = gen_planted(d=4, j=2, k=1, n=400, noise_sigma=0.05, outlier_fraction=0.1, rng=1)
P = inst.points
print("points:", P.shape, "outliers:", int(inst.outlier_mask.sum()))

# least squares is dragged around by the outliers
ls = optimal_flat_tau2(P, 2)
print("least-squares objective on all points:", power_objective(P, ls))

# the sampling fit trims the worst 10% and only looks at a few random points
cfg = FitConfig(r=3, anchor="subset_means", center_samples=4)
res = fit_single_flat(P, j=2, gamma=0.1, rng=7, config=cfg)
print("trimmed objective:", res.trimmed_objective)
print("candidate flats scored:", res.n_paths)

# the planted noise variance is sigma^2 per normal direction
print("noise floor:", 0.05**2 * (4 - 2))

# which of the dropped points were real outliers?
dropped = np.setdiff1d(np.arange(len(P)), res.inlier_indices)
print("dropped points that were planted outliers:",
      int(inst.outlier_mask[dropped].sum()), "of", dropped.size)
