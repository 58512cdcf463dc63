"""
Regular inputs need no trimming
===============================

"""

import math

import numpy as np

from flatfit import Flat, coefficient_of_variation, fit_regular, regular_factor
from flatfit.regular import regular_sample_size

# Gaussian data: the spread ratio is sqrt(pi/2) in every direction
x = np.random.default_rng(0).standard_normal(100_000)
print("CV of a Gaussian sample:", coefficient_of_variation(x), " sqrt(pi/2) =", math.sqrt(math.pi / 2))

# heavy tails push it up
print("CV of its cube:", coefficient_of_variation(x**3))

# the regular factor is the worst CV over directions inside a flat
gen = np.random.default_rng(1)
P = np.zeros((5000, 3))
P[:, :2] = gen.standard_normal((5000, 2))
plane = Flat(np.zeros(3), [[1.0, 0, 0], [0, 1.0, 0]])
omega = regular_factor(P, plane, rng=2).omega
print("regular factor:", round(omega, 4))
print("sample size for eps=0.5, j=2:", regular_sample_size(omega, 0.5, 2))

# fit every point, no outliers dropped
P[:, 2] = 0.01 * gen.standard_normal(5000)
res = fit_regular(P, j=2, eps=0.5, rng=3)
print("objective:", res.trimmed_objective, "points kept:", res.inlier_indices.size)
