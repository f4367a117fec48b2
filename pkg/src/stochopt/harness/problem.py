"""Assemble a concrete optimisation problem from an :class:`ExperimentConfig`."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..functions import (IndicatorBox, L1Norm, LeastSquares, MixedL21Norm, RelativeDifferencePrior,
                         ScaledFunction, SumFunction, TotalVariation, ZeroFunction)
from ..operators import GradientOperator, IdentityOperator, MatrixOperator, ToyRadon, load_array
from .problems import (build_subproblems, conditioned_matrix, kappa_image, make_phantom, mlem, partition,
                       simulate_ct, simulate_pet)

__all__ = ["Problem", "build_problem"]


@dataclass
class Problem:
    """Data, finite-sum members and nonsmooth terms of one experiment.

    The objective is ``sum_i members[i](x) + g(x)``; ``h`` and ``K`` give the
    equivalent split ``g_pd(x) + h(K x)`` consumed by PD3O.
    """

    config: object
    A: object
    b: np.ndarray
    truth: np.ndarray
    members: list
    groups: list
    g: object
    monolithic: object
    lipschitz: float | None
    initial: np.ndarray
    eta: np.ndarray | None = None
    kappa: np.ndarray | None = None
    smooth_regulariser: object = None
    pd_g: object = None
    pd_h: object = None
    pd_K: object = None
    extras: dict = field(default_factory=dict)

    def objective(self, x):
        return float(sum(f(x) for f in self.members)) + float(self.g(x))

    @property
    def L_tilde(self):
        """Lipschitz constant of the first member times the number of members."""
        L0 = self.members[0].L
        return None if L0 is None else len(self.members) * L0


def _tv(config, grid, iterations, warm_start=False):
    tv = TotalVariation(grid, max_iteration=iterations, nonnegativity=config.nonnegativity,
                        warm_start=warm_start)
    return ScaledFunction(tv, config.alpha)


def _box(config):
    return IndicatorBox(lower=0.0) if config.nonnegativity else ZeroFunction()


def _ct(config):
    n = config.grid
    A = ToyRadon.uniform(n, config.angles, config.detectors)
    phantom = make_phantom(n)
    clean = A.direct(phantom.ravel())
    b = simulate_ct(phantom, A, config.noise_level * float(np.max(np.abs(clean))), seed=config.noise_seed)
    groups = partition(config.angles, config.subsets, config.partition, seed=config.partition_seed)
    members = [s.function for s in build_subproblems(A, b, groups)]
    mono = LeastSquares(A, b)
    g = _tv(config, (n, n), config.fgp_iterations) if config.alpha > 0 else _box(config)
    K = config.alpha * GradientOperator((n, n)) if config.alpha > 0 else None
    return Problem(config, A, b, phantom.ravel(), members, groups, g, mono, mono.L,
                   np.zeros(n * n), pd_g=_box(config), pd_h=MixedL21Norm(2), pd_K=K)


def _pet(config):
    n = config.grid
    R = ToyRadon.uniform(n, config.angles, config.detectors)
    phantom = make_phantom(n)
    counts, eta = simulate_pet(phantom, R, background=config.background, count_scale=config.count_scale,
                               seed=config.noise_seed)
    A = MatrixOperator(config.count_scale * R.matrix)
    x_mlem = mlem(A, counts, eta, config.mlem_iterations)
    kappa = kappa_image(A, counts, eta, x_mlem)
    prior = RelativeDifferencePrior((n, n), beta=config.alpha, kappa=kappa)
    groups = partition(config.angles, config.subsets, config.partition, seed=config.partition_seed)
    subs = build_subproblems(A, counts, groups, kind="kl", eta=eta, prior=prior, block=config.detectors)
    members = [s.function for s in subs]
    g = _box(config)
    return Problem(config, A, counts, phantom.ravel(), members, groups, g, SumFunction(members), None,
                   x_mlem, eta=eta, kappa=kappa, pd_g=g, pd_h=ZeroFunction(), pd_K=IdentityOperator((n * n,)),
                   extras={"prior": prior})


def _matrix(config):
    rng = np.random.Generator(np.random.PCG64(config.noise_seed))
    M = conditioned_matrix(config.rows, config.cols, config.condition, seed=config.noise_seed)
    A = MatrixOperator(M)
    if config.problem == "lasso":
        truth = np.where(rng.uniform(size=config.cols) < 0.2, rng.normal(size=config.cols), 0.0)
    else:
        truth = rng.normal(size=config.cols)
    b = M @ truth + config.noise_level * rng.normal(size=config.rows)
    groups = partition(config.rows, config.subsets, config.partition, seed=config.partition_seed)
    members = [s.function for s in build_subproblems(A, b, groups)]
    mono = LeastSquares(A, b)
    ident = IdentityOperator((config.cols,))
    if config.problem == "ridge":
        reg = LeastSquares(None, np.zeros(config.cols), c=config.alpha / 2.0)
        return Problem(config, A, b, truth, members, groups, reg, mono, mono.L, np.zeros(config.cols),
                       smooth_regulariser=reg, pd_g=ZeroFunction(), pd_h=reg, pd_K=ident)
    l1 = ScaledFunction(L1Norm(), config.alpha)
    return Problem(config, A, b, truth, members, groups, l1, mono, mono.L, np.zeros(config.cols),
                   pd_g=ZeroFunction(), pd_h=l1, pd_K=ident)


def build_problem(config):
    builder = {"ct_tv": _ct, "pet_rdp": _pet, "ridge": _matrix, "lasso": _matrix}[config.problem]
    problem = builder(config)
    init = config.initial
    if init in ("default", "mlem"):
        if init == "mlem" and config.problem != "pet_rdp":
            raise ConfigurationError("an MLEM start is only available for pet_rdp")
    elif init == "zeros":
        problem.initial = np.zeros_like(problem.initial)
    else:
        x0 = np.asarray(load_array(init), dtype=float).ravel()
        if x0.size != problem.initial.size:
            raise ConfigurationError(f"initial image {init} has {x0.size} values, expected {problem.initial.size}")
        problem.initial = x0
    return problem
