"""Synthetic test problems, data partitioning and metrics."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..errors import ConfigurationError, DomainError
from ..functions import (Function, KullbackLeibler, LeastSquares, ScaledFunction, SumFunction)
from ..operators import LinearOperator, MatrixOperator, ToyRadon

__all__ = [
    "partition",
    "Subproblem",
    "build_subproblems",
    "make_phantom",
    "simulate_ct",
    "simulate_pet",
    "mlem",
    "kappa_image",
    "nrmse",
    "conditioned_matrix",
]

PARTITION_MODES = ("sequential", "staggered", "random_permutation")


def _balanced_split(indices, n):
    # first len % n groups get one extra element
    size, extra = divmod(len(indices), n)
    groups, start = [], 0
    for i in range(n):
        stop = start + size + (1 if i < extra else 0)
        groups.append(np.asarray(indices[start:stop], dtype=np.int64))
        start = stop
    return groups


def partition(count, n, mode="sequential", seed=None):
    """Split ``range(count)`` into ``n`` disjoint groups.

    ``sequential`` cuts contiguous runs, ``staggered`` puts index ``j`` in
    group ``j mod n``, ``random_permutation`` shuffles with a seeded
    generator and cuts contiguous runs.  Group sizes differ by at most one.
    """
    if n < 1:
        raise ConfigurationError("number of subsets must be positive")
    if n > count:
        raise ConfigurationError(f"cannot split {count} items into {n} nonempty subsets")
    if mode == "sequential":
        return _balanced_split(np.arange(count), n)
    if mode == "staggered":
        return [np.arange(l, count, n, dtype=np.int64) for l in range(n)]
    if mode == "random_permutation":
        rng = np.random.Generator(np.random.PCG64(seed))
        return _balanced_split(rng.permutation(count), n)
    raise ConfigurationError(f"unknown partition mode {mode!r}; choose from {PARTITION_MODES}")


class Subproblem(NamedTuple):
    operator: LinearOperator
    data: np.ndarray
    function: Function
    rows: np.ndarray


def _row_index(A, group):
    """Measurement rows touched by a group of row blocks (angles for ToyRadon)."""
    group = np.asarray(group, dtype=np.int64)
    if isinstance(A, ToyRadon):
        nd = A.n_detectors
        return (group[:, None] * nd + np.arange(nd)[None, :]).ravel()
    return group


def _restrict(A, group):
    if isinstance(A, ToyRadon):
        return A.subset(group)
    if isinstance(A, MatrixOperator):
        return A.rows(_row_index(A, group))
    raise ConfigurationError(f"cannot restrict operator of type {type(A).__name__}")


def build_subproblems(A, b, groups, kind="least_squares", eta=None, prior=None, c=0.5, block=None):
    """Per-group operators, data and finite-sum members.

    Parameters
    ----------
    A : ToyRadon or MatrixOperator
        Forward model.  Groups index angles for ``ToyRadon`` and rows for a
        matrix (or blocks of ``block`` consecutive rows when given).
    kind : {"least_squares", "kl"}
        ``least_squares`` members are ``c ||A_i x - b_i||^2``.  ``kl``
        members are ``KL(b_i, eta_i; A_i x) + prior / N``.
    """
    b = np.asarray(b, dtype=float).ravel()
    n = len(groups)
    out = []
    for g in groups:
        g = np.asarray(g, dtype=np.int64)
        if isinstance(A, MatrixOperator) and block:
            rows = (g[:, None] * block + np.arange(block)[None, :]).ravel()
        else:
            rows = _row_index(A, g)
        if rows.size and (rows.min() < 0 or rows.max() >= b.size):
            raise IndexError(f"group references rows outside [0, {b.size})")
        Ai = A.rows(rows) if isinstance(A, MatrixOperator) else _restrict(A, g)
        bi = b[rows]
        if kind == "least_squares":
            fi = LeastSquares(Ai, bi, c=c)
        elif kind == "kl":
            eta_i = 0.0 if eta is None else np.broadcast_to(np.asarray(eta, dtype=float).ravel(), b.shape)[rows]
            fi = KullbackLeibler(bi, eta=eta_i, A=Ai)
            if prior is not None:
                fi = SumFunction([fi, ScaledFunction(prior, 1.0 / n)])
        else:
            raise ConfigurationError(f"unknown subproblem kind {kind!r}")
        out.append(Subproblem(Ai, bi, fi, rows))
    return out


# (value, semi-axis x, semi-axis y, centre x, centre y, angle in degrees)
_ELLIPSES = (
    (0.50, 0.69, 0.92, 0.0, 0.0, 0.0),
    (0.25, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (0.10, 0.11, 0.31, 0.22, 0.0, -18.0),
    (0.10, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.75, 0.21, 0.25, 0.0, 0.35, 0.0),
    (1.00, 0.08, 0.08, 0.0, 0.1, 0.0),
    (1.00, 0.08, 0.08, 0.0, -0.1, 0.0),
    (0.80, 0.09, 0.05, -0.08, -0.605, 0.0),
    (0.80, 0.05, 0.05, 0.06, -0.605, 0.0),
)


def make_phantom(n, peak=1.0):
    """Piecewise-constant ellipse phantom on an ``n x n`` grid, values in ``[0, peak]``.

    Later ellipses overwrite earlier ones, so every pixel holds one of the
    listed intensities scaled by ``peak`` (or zero outside the body).
    """
    c = (np.arange(n) - (n - 1) / 2.0) / (n / 2.0)
    X, Y = np.meshgrid(c, -c)
    img = np.zeros((n, n))
    for value, ax, ay, cx, cy, phi in _ELLIPSES:
        t = np.deg2rad(phi)
        u = (X - cx) * np.cos(t) + (Y - cy) * np.sin(t)
        v = -(X - cx) * np.sin(t) + (Y - cy) * np.cos(t)
        img[(u / ax) ** 2 + (v / ay) ** 2 <= 1.0] = value * peak
    return img


def simulate_ct(phantom, A, noise_std=0.0, seed=None):
    """``A phantom`` plus seeded Gaussian noise of standard deviation ``noise_std``."""
    clean = A.direct(np.asarray(phantom, dtype=float).ravel())
    if noise_std == 0:
        return clean
    rng = np.random.Generator(np.random.PCG64(seed))
    return clean + noise_std * rng.normal(size=clean.shape)


def simulate_pet(phantom, A, background=1.0, count_scale=1.0, seed=None):
    """Poisson counts with mean ``count_scale * A phantom + eta``.

    Returns
    -------
    counts, eta : ndarray
    """
    mean_signal = count_scale * A.direct(np.asarray(phantom, dtype=float).ravel())
    eta = np.broadcast_to(np.asarray(background, dtype=float), mean_signal.shape).astype(float)
    rng = np.random.Generator(np.random.PCG64(seed))
    counts = rng.poisson(mean_signal + eta).astype(float)
    return counts, eta


def mlem(A, b, eta=0.0, iterations=10, initial=None):
    """Maximum-likelihood expectation maximisation for ``b ~ Poisson(A x + eta)``."""
    b = np.asarray(b, dtype=float).ravel()
    eta = np.broadcast_to(np.asarray(eta, dtype=float), b.shape)
    sens = A.adjoint(np.ones(A.range_size))
    x = np.ones(A.domain_size) if initial is None else np.array(initial, dtype=float).ravel()
    safe = np.where(sens > 0, sens, 1.0)
    for _ in range(iterations):
        ratio = np.divide(b, A.direct(x) + eta, out=np.zeros_like(b), where=b > 0)
        x = np.where(sens > 0, x * A.adjoint(ratio) / safe, 0.0)
    return x


def kappa_image(A, b, eta, x):
    """``sqrt(A^T (b / (A x + eta)^2 * A 1))``, the negative Hessian row sum of the log-likelihood."""
    b = np.asarray(b, dtype=float).ravel()
    ax = A.direct(np.asarray(x, dtype=float).ravel()) + eta
    w = np.divide(b, ax * ax, out=np.zeros_like(b), where=b > 0)
    return np.sqrt(np.maximum(A.adjoint(w * A.direct(np.ones(A.domain_size))), 0.0))


def nrmse(x, x_ref):
    """``||x - x_ref|| / ||x_ref||``."""
    x_ref = np.asarray(x_ref, dtype=float).ravel()
    denom = np.linalg.norm(x_ref)
    if denom == 0:
        raise DomainError("reference image has zero norm")
    return float(np.linalg.norm(np.asarray(x, dtype=float).ravel() - x_ref) / denom)


def conditioned_matrix(m, n, condition, seed=None):
    """Dense ``m x n`` matrix whose Gram matrix ``A^T A`` has the given condition number."""
    if m < n:
        raise ConfigurationError("need at least as many rows as columns")
    rng = np.random.Generator(np.random.PCG64(seed))
    U, _ = np.linalg.qr(rng.normal(size=(m, n)))
    V, _ = np.linalg.qr(rng.normal(size=(n, n)))
    s = np.logspace(0.0, -0.5 * np.log10(condition), n)
    return (U * s) @ V.T
