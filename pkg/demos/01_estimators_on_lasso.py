"""Swap gradient estimators under one proximal gradient solver.

A lasso problem is split row-wise into ten least-squares members.  The
same PGD loop is then run with the deterministic gradient and with the
SGD, SAGA, SVRG and loopless SVRG estimators; only the object passed as
``f`` changes.  Progress is printed against data passes, the unit in
which one full gradient costs 1.
"""
import numpy as np

from stochopt import PGD, Sampler, make_estimator
from stochopt.functions import L1Norm, LeastSquares, ScaledFunction
from stochopt.harness.problems import conditioned_matrix, partition
from stochopt.harness.reference import lasso_coordinate_descent
from stochopt.operators import MatrixOperator

rng = np.random.default_rng(0)
M = conditioned_matrix(200, 40, 100.0, seed=0)
x_true = np.where(rng.uniform(size=40) < 0.25, rng.normal(size=40), 0.0)
b = M @ x_true + 0.01 * rng.normal(size=200)
lam = 0.02

groups = partition(200, 10, "sequential")
members = [LeastSquares(MatrixOperator(M[g]), b[g]) for g in groups]
g = ScaledFunction(L1Norm(), lam)
x_star, _, _ = lasso_coordinate_descent(M, b, lam)
f_star = 0.5 * np.sum((M @ x_star - b) ** 2) + lam * np.abs(x_star).sum()

L_tilde = len(members) * members[0].L
steps = {"full_sum": 1.0 / sum(f.L for f in members), "sg": 0.05 / L_tilde,
         "saga": 1.0 / (3 * L_tilde), "svrg": 1.0 / L_tilde, "lsvrg": 1.0 / L_tilde}

print(f"{'estimator':>9} " + " ".join(f"{p:>10}" for p in ("5 passes", "10 passes", "20 passes")))
for kind, gamma in steps.items():
    est = make_estimator(kind, members, Sampler.random_with_replacement(len(members), seed=1))
    if kind == "saga":
        est.warm_start_approximate_gradients(np.zeros(40))
    alg = PGD(est, g, initial=np.zeros(40), step_size=gamma)
    gaps = []
    for target in (5, 10, 20):
        while est.data_passes < target:
            alg.step()
        gaps.append(alg.objective() - f_star)
    print(f"{kind:>9} " + " ".join(f"{gap:10.2e}" for gap in gaps))
