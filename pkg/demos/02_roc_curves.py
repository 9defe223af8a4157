"""
Tracing ROC curves along a lambda path
======================================

Sensitivity and specificity are recorded at every lambda of a grid, for
several simulated replicates, and averaged pointwise. With no individual
edges (rho = 0) the joint fit should dominate the separate one.
"""

import numpy as np

from jointising import average_roc, fit_path, make_design, roc_curve, simulate

grid = np.geomspace(0.2, 0.005, 10)
design = make_design("nn", p=20, K=3, rho=0.0, sample_sizes=120, seed=4)

curves = {"joint": [], "separate": []}
for replicate in range(3):
    data = simulate(design, burnin=5000, replicate=replicate)
    for method in curves:
        _, pooled = roc_curve(design.truth(), fit_path(data, grid, method=method))
        curves[method].append(pooled)

for method, reps in curves.items():
    mean = average_roc(reps)
    print(f"{method:9s} AUC {mean.auc:.3f}")
    for lam, sens, spec in mean.points:
        print(f"    lambda {lam:.4f}  sensitivity {sens:.2f}  specificity {spec:.2f}")
