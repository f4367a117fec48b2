"""High-accuracy reference solutions, cached on disk by a hash of the problem definition."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import warnings
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..algorithms import APGD, PGD
from ..errors import ConfigurationError
from ..functions import IndicatorBox, SumFunction, ZeroFunction
from ..operators import load_array, save_array
from ..tuning import ArmijoStepSize, BSREMPreconditioner
from .problem import _box, _tv, build_problem

__all__ = ["ReferenceSolution", "compute_reference", "lasso_coordinate_descent", "default_cache_dir"]

log = logging.getLogger(__name__)


class ReferenceSolution(NamedTuple):
    x: np.ndarray
    converged: bool
    iterations: int
    key: str


def default_cache_dir():
    return Path(os.environ.get("STOCHOPT_CACHE", Path.home() / ".cache" / "stochopt"))


def _key(config):
    blob = json.dumps(config.problem_key(), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:20]


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def lasso_coordinate_descent(A, b, lam, tol=1e-14, max_sweeps=100000):
    """Exact cyclic coordinate minimisation of ``1/2 ||A x - b||^2 + lam ||x||_1``.

    Returns ``(x, converged, sweeps)``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    gram = A.T @ A
    col_sq = np.diag(gram).copy()
    off = gram - np.diag(col_sq)
    if np.all(col_sq > 0) and np.max(np.abs(off), initial=0.0) <= 1e-12 * np.max(col_sq):
        # orthogonal columns decouple: closed form
        return soft_threshold(A.T @ b, lam) / col_sq, True, 0
    x = np.zeros(A.shape[1])
    r = b.copy()
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for j in range(A.shape[1]):
            if col_sq[j] == 0:
                continue
            old = x[j]
            rho = A[:, j] @ r + col_sq[j] * old
            new = soft_threshold(rho, lam) / col_sq[j]
            if new != old:
                r -= A[:, j] * (new - old)
                x[j] = new
                change = max(change, abs(new - old))
        if change <= tol * max(1.0, np.max(np.abs(x))):
            return x, True, sweep
    return x, False, max_sweeps


def _iterate_to_tolerance(alg, tol, max_iterations):
    prev = alg.x.copy()
    for k in range(1, max_iterations + 1):
        alg.step()
        scale = np.linalg.norm(alg.x)
        change = np.linalg.norm(alg.x - prev) / (scale if scale > 0 else 1.0)
        if change < tol:
            return alg.x.copy(), True, k
        prev = alg.x.copy()
    return alg.x.copy(), False, max_iterations


def _solve(config):
    problem = build_problem(config)
    if config.problem == "ridge":
        M = problem.A.todense()
        x = np.linalg.solve(M.T @ M + config.alpha * np.eye(M.shape[1]), M.T @ problem.b)
        return x, True, 0
    if config.problem == "lasso":
        return lasso_coordinate_descent(problem.A.todense(), problem.b, config.alpha)
    if config.problem == "ct_tv":
        n = config.grid
        if config.alpha > 0:
            g = _tv(config, (n, n), config.reference_fgp_iterations, warm_start=True)
        else:
            g = _box(config)
        f = problem.monolithic
        alg = APGD(f, g, initial=np.zeros(n * n), step_size=1.0 / f.L)
        return _iterate_to_tolerance(alg, config.reference_tol, config.reference_max_iterations)
    if config.problem == "pet_rdp":
        f = SumFunction(problem.members)
        alg = PGD(f, problem.g, initial=problem.initial, step_size=ArmijoStepSize(gamma0=1.0),
                  preconditioner=BSREMPreconditioner(problem.A))
        return _iterate_to_tolerance(alg, config.reference_tol, config.reference_max_iterations)
    raise ConfigurationError(f"no reference solver for {config.problem!r}")


def compute_reference(config, cache_dir=None, use_cache=True):
    """Reference minimiser for ``config`` (cached under ``cache_dir``).

    A run that hits the iteration budget is returned with
    ``converged=False`` and a warning.
    """
    key = _key(config)
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = cache / f"reference-{key}.txt"
    meta_path = cache / f"reference-{key}.json"
    if use_cache and path.exists() and meta_path.exists():
        meta = json.loads(meta_path.read_text())
        log.info("loaded cached reference %s", path)
        return ReferenceSolution(load_array(path).ravel(), meta["converged"], meta["iterations"], key)
    x, converged, iterations = _solve(config)
    if not converged:
        warnings.warn(f"reference solve for {config.problem} stopped after {iterations} iterations "
                      "without meeting the tolerance", RuntimeWarning, stacklevel=2)
    if use_cache:
        cache.mkdir(parents=True, exist_ok=True)
        save_array(path, x)
        meta = {"converged": bool(converged), "iterations": int(iterations), "problem": config.problem_key()}
        meta_path.write_text(json.dumps(meta, indent=2))
    return ReferenceSolution(np.asarray(x, dtype=float).ravel(), bool(converged), int(iterations), key)
