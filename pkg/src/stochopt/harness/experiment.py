"""Run one configured experiment and record metrics once per data pass."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..algorithms import APGD, GD, PD3O, PGD
from ..errors import ConfigurationError
from ..estimators import make_estimator
from ..functions import ScaledFunction, SumFunction, ZeroFunction
from ..operators import load_array, save_array
from ..sampling import Sampler
from ..tuning import ArmijoStepSize, BarzilaiBorweinStepSize, ConstantStepSize, DecreasingStepSize, \
    estimate_initial_step, make_preconditioner
from .config import ExperimentConfig
from .problem import build_problem
from .problems import nrmse
from .reference import compute_reference

__all__ = ["RunRecord", "run_experiment", "make_sampler", "write_outputs", "RECORD_COLUMNS"]

log = logging.getLogger(__name__)

RECORD_COLUMNS = ("data_passes", "objective", "nrmse", "subset_evals", "full_evals", "wall_seconds")


@dataclass
class RunRecord:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    x: np.ndarray | None = None
    reference_converged: bool | None = None

    def column(self, name):
        return [row[name] for row in self.rows]

    @property
    def final(self):
        return self.rows[-1]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RECORD_COLUMNS)
            for row in self.rows:
                w.writerow([repr(float(row["data_passes"])), repr(row["objective"]), repr(row["nrmse"]),
                            row["subset_evals"], row["full_evals"], repr(row["wall_seconds"])])

    @staticmethod
    def read_csv(path):
        with open(path, newline="") as fh:
            return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def make_sampler(config, n):
    kind = config.sampler
    if kind == "random_with_replacement":
        return Sampler.random_with_replacement(n, seed=config.seed)
    if kind == "random_without_replacement":
        return Sampler.random_without_replacement(n, seed=config.seed)
    if kind == "sequential":
        return Sampler.sequential(n)
    if kind == "staggered":
        return Sampler.staggered(n, min(config.sampler_stride, n))
    if kind == "herman_meyer":
        return Sampler.herman_meyer(n)
    raise ConfigurationError(f"unknown sampler {kind!r}")


def _estimator(config, members):
    opts = {}
    if config.estimator == "svrg" and config.svrg_period is not None:
        opts["update_frequency"] = config.svrg_period
    if config.estimator == "lsvrg":
        opts["seed"] = config.lsvrg_seed
        if config.lsvrg_prob is not None:
            opts["update_prob"] = config.lsvrg_prob
    return make_estimator(config.estimator, members, make_sampler(config, len(members)), **opts)


def _auto_step(config, problem, estimator):
    kind = config.estimator
    if kind == "full_sum":
        L = problem.lipschitz
    else:
        L = problem.L_tilde
    if L is None:
        raise ConfigurationError(f"no automatic step for {config.problem}; set step.kind and step.gamma0")
    if config.algorithm == "gd" and problem.smooth_regulariser is not None:
        L = L + problem.smooth_regulariser.L
    return 1.0 / (3.0 * L) if kind in ("saga", "sag") else 1.0 / L


def _step_rule(config, problem, estimator, g, preconditioner):
    params = dict(config.step)
    kind = params.pop("kind")
    gamma0 = params.get("gamma0")
    if gamma0 == "estimate":
        gamma0 = estimate_initial_step(SumFunction(problem.members), g, problem.initial,
                                       trials=int(params.get("trials", 5)), sigma=params.get("sigma", 0.2),
                                       preconditioner=preconditioner)
        log.info("estimated initial step %.6g", gamma0)
    elif gamma0 == "auto" or (gamma0 is None and kind in ("auto", "constant", "decreasing")):
        gamma0 = _auto_step(config, problem, estimator) * params.get("scale", 1.0)
    if kind in ("auto", "constant"):
        return ConstantStepSize(gamma0)
    if kind == "decreasing":
        return DecreasingStepSize(gamma0, params.get("beta", 0.0))
    if kind == "armijo":
        return ArmijoStepSize(gamma0 if gamma0 is not None else 1.0, params.get("sigma", 0.2),
                              params.get("halving_factor", 2.0), params.get("max_backtracks", 30))
    if kind == "barzilai_borwein":
        return BarzilaiBorweinStepSize(gamma0, params.get("mode", "long"))
    raise ConfigurationError(f"unknown step rule {kind!r}")


def _solver(config, problem, estimator):
    algo = config.algorithm
    x0 = problem.initial
    if algo == "pd3o":
        if config.precond.get("kind", "identity") not in ("identity", "none"):
            raise ConfigurationError("pd3o does not accept a preconditioner")
        if problem.pd_K is None:
            raise ConfigurationError("pd3o needs a nonzero regularisation operator (alpha > 0)")
        gamma = config.step.get("gamma0")
        delta = config.step.get("delta")
        gamma = None if gamma in (None, "auto") else float(gamma)
        return PD3O(estimator, problem.pd_g, problem.pd_h, problem.pd_K, initial=x0, gamma=gamma,
                    delta=None if delta is None else float(delta))
    precond = make_preconditioner(config.precond.get("kind", "identity"), A=problem.A, kappa=problem.kappa,
                                  epsilon=config.precond.get("epsilon", 1e-6))
    if algo == "gd":
        if not isinstance(problem.g, ZeroFunction) and problem.smooth_regulariser is None:
            raise ConfigurationError(f"gd cannot handle the nonsmooth term of {config.problem}")
        rule = _step_rule(config, problem, estimator, ZeroFunction(), precond)
        return GD(estimator, initial=x0, step_size=rule, preconditioner=precond)
    cls = {"pgd": PGD, "ista": PGD, "apgd": APGD, "fista": APGD}.get(algo)
    if cls is None:
        raise ConfigurationError(f"unknown algorithm {algo!r}")
    rule = _step_rule(config, problem, estimator, problem.g, precond)
    return cls(estimator, problem.g, initial=x0, step_size=rule, preconditioner=precond)


def _resolve_reference(config, problem, cache_dir):
    ref = config.reference
    if ref == "none":
        return None, None
    if ref == "compute":
        sol = compute_reference(config, cache_dir=cache_dir)
        return sol.x, sol.converged
    return np.asarray(load_array(ref), dtype=float).ravel(), None


def run_experiment(config, cache_dir=None, reference=None):
    """Run ``config`` until its pass budget is spent.

    Parameters
    ----------
    reference : ndarray, optional
        Reference point for NRMSE; computed (or loaded from cache) when omitted.

    Returns
    -------
    RunRecord
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    problem = build_problem(config)
    ref_converged = None
    if reference is None:
        reference, ref_converged = _resolve_reference(config, problem, cache_dir)
    members = problem.members
    if config.algorithm == "gd" and problem.smooth_regulariser is not None:
        share = ScaledFunction(problem.smooth_regulariser, 1.0 / len(members))
        members = [SumFunction([f, share]) for f in members]
        problem.members = members
        problem.g = ZeroFunction()
    estimator = _estimator(config, members)
    if config.warm_start and config.estimator in ("sag", "saga"):
        estimator.warm_start_approximate_gradients(problem.initial)
    solver = _solver(config, problem, estimator)
    record = RunRecord(config, reference_converged=ref_converged)
    start = time.perf_counter()

    def log_row():
        x = solver.x
        record.rows.append({
            "data_passes": estimator.data_passes,
            "objective": problem.objective(x),
            "nrmse": nrmse(x, reference) if reference is not None else math.nan,
            "subset_evals": estimator.work.subset_gradient_evals,
            "full_evals": estimator.work.full_gradient_evals,
            "wall_seconds": time.perf_counter() - start if config.record_wall_time else 0.0,
        })

    log_row()
    next_pass = math.floor(estimator.data_passes) + 1
    while estimator.data_passes < config.passes:
        solver.step()
        if estimator.data_passes >= next_pass:
            log_row()
            next_pass = math.floor(estimator.data_passes) + 1
    record.x = solver.x.copy()
    log.info("%s: %d iterations, %.4g passes, objective %.6g", config.name, solver.iteration,
             float(estimator.data_passes), record.final["objective"])
    return record


def write_outputs(record, output_dir):
    """Write ``record.csv``, ``final_iterate.txt`` and ``config.json`` into ``output_dir``."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    record.write_csv(out / "record.csv")
    cfg = record.config
    shape = (cfg.grid, cfg.grid) if cfg.problem in ("ct_tv", "pet_rdp") else None
    save_array(out / "final_iterate.txt", record.x, shape=shape)
    (out / "config.json").write_text(json.dumps(record.config.to_dict(), indent=2, sort_keys=True))
    return out
