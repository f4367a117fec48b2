"""Linear operators acting on flat numpy vectors.

Images and data are stored as 1D float arrays (row-major for
multi-dimensional grids); the shape metadata lives on the operator.
"""
from __future__ import annotations

import math
import warnings
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError

__all__ = [
    "LinearOperator",
    "MatrixOperator",
    "IdentityOperator",
    "BlockOperator",
    "GradientOperator",
    "ToyRadon",
    "ScaledOperator",
    "NormEstimate",
    "power_method",
    "dot_test",
    "save_array",
    "load_array",
]


def _size(shape):
    return int(np.prod(shape, dtype=np.int64))


class LinearOperator:
    """Base class: subclasses implement ``_direct`` and ``_adjoint`` on flat arrays."""

    kind = "abstract"

    def __init__(self, domain_shape, range_shape):
        self.domain_shape = tuple(int(s) for s in domain_shape)
        self.range_shape = tuple(int(s) for s in range_shape)
        self._norm = None

    @property
    def domain_size(self):
        return _size(self.domain_shape)

    @property
    def range_size(self):
        return _size(self.range_shape)

    def _check(self, v, expected, name):
        v = np.asarray(v, dtype=float)
        if v.size != _size(expected):
            raise DimensionError(
                f"{type(self).__name__}.{name}: expected {expected} "
                f"({_size(expected)} entries), got shape {v.shape}"
            )
        return v.ravel()

    def direct(self, x):
        return self._direct(self._check(x, self.domain_shape, "direct"))

    def adjoint(self, y):
        return self._adjoint(self._check(y, self.range_shape, "adjoint"))

    __call__ = direct

    def norm(self, tol=1e-10, max_iter=5000, seed=0):
        """Largest singular value, cached after the first power-method estimate."""
        if self._norm is None:
            est = power_method(self, tol=tol, max_iter=max_iter, seed=seed)
            if not est.converged:
                warnings.warn(
                    f"power method did not reach tol={tol} in {max_iter} iterations",
                    RuntimeWarning,
                )
            self._norm = est.value
        return self._norm

    def __rmul__(self, scalar):
        return ScaledOperator(self, scalar)

    def __mul__(self, scalar):
        return ScaledOperator(self, scalar)


class MatrixOperator(LinearOperator):
    kind = "matrix"

    def __init__(self, matrix):
        if sp.issparse(matrix):
            self.matrix = sp.csr_matrix(matrix, dtype=float)
        else:
            self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        rows, cols = self.matrix.shape
        super().__init__((cols,), (rows,))

    def _direct(self, x):
        return np.asarray(self.matrix @ x).ravel()

    def _adjoint(self, y):
        return np.asarray(self.matrix.T @ y).ravel()

    def rows(self, index):
        """Restriction to a subset of rows."""
        return MatrixOperator(self.matrix[np.asarray(index)])

    def todense(self):
        return self.matrix.toarray() if sp.issparse(self.matrix) else self.matrix.copy()

    def save(self, path):
        save_array(path, self.todense())

    @classmethod
    def load(cls, path):
        return cls(load_array(path))


class IdentityOperator(LinearOperator):
    kind = "identity"

    def __init__(self, shape):
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        super().__init__(shape, shape)
        self._norm = 1.0

    def _direct(self, x):
        return x.copy()

    def _adjoint(self, y):
        return y.copy()


class ScaledOperator(LinearOperator):
    kind = "scaled"

    def __init__(self, operator, scalar):
        super().__init__(operator.domain_shape, operator.range_shape)
        self.operator = operator
        self.scalar = float(scalar)

    def _direct(self, x):
        return self.scalar * self.operator._direct(x)

    def _adjoint(self, y):
        return self.scalar * self.operator._adjoint(y)

    def norm(self, *args, **kwargs):
        return abs(self.scalar) * self.operator.norm(*args, **kwargs)


class BlockOperator(LinearOperator):
    """Vertical stack ``[A_0; A_1; ...]``; the range is the concatenation of child ranges."""

    kind = "block_stack"

    def __init__(self, operators: Sequence[LinearOperator]):
        operators = list(operators)
        if not operators:
            raise ValueError("BlockOperator needs at least one operator")
        dom = operators[0].domain_shape
        for op in operators[1:]:
            if _size(op.domain_shape) != _size(dom):
                raise DimensionError(f"incompatible domains {dom} and {op.domain_shape}")
        self.operators = operators
        self.block_sizes = [op.range_size for op in operators]
        self._offsets = np.concatenate([[0], np.cumsum(self.block_sizes)])
        super().__init__(dom, (int(self._offsets[-1]),))

    def split(self, y):
        y = np.asarray(y, dtype=float).ravel()
        return [y[a:b] for a, b in zip(self._offsets[:-1], self._offsets[1:])]

    def _direct(self, x):
        return np.concatenate([op._direct(x) for op in self.operators])

    def _adjoint(self, y):
        out = np.zeros(self.domain_size)
        for op, yi in zip(self.operators, self.split(y)):
            out += op._adjoint(yi)
        return out

    def __len__(self):
        return len(self.operators)

    def __getitem__(self, i):
        return self.operators[i]


class GradientOperator(LinearOperator):
    """Forward differences with Neumann (replicate) boundary.

    Output has shape ``(ndim, *grid)``: component ``a`` holds the
    difference along axis ``a`` and is zero on the last slice of that axis.
    """

    kind = "fd_gradient"

    def __init__(self, grid):
        grid = (grid,) if np.isscalar(grid) else tuple(grid)
        super().__init__(grid, (len(grid),) + grid)
        self.grid = grid
        self.ndim = len(grid)

    def norm_bound(self):
        return math.sqrt(4.0 * self.ndim)

    def _direct(self, x):
        x = x.reshape(self.grid)
        out = np.zeros(self.range_shape)
        for a in range(self.ndim):
            lead = [slice(None)] * self.ndim
            lead[a] = slice(0, -1)
            out[(a, *lead)] = np.diff(x, axis=a)
        return out.ravel()

    def _adjoint(self, y):
        y = y.reshape(self.range_shape)
        out = np.zeros(self.grid)
        for a in range(self.ndim):
            p = y[a]
            head = [slice(None)] * self.ndim
            tail = [slice(None)] * self.ndim
            head[a] = slice(0, -1)
            tail[a] = slice(1, None)
            # D^T p = -p_i + p_{i-1}, with the (unused) last slice of p dropped
            out[tuple(head)] -= p[tuple(head)]
            out[tuple(tail)] += p[tuple(head)]
        return out.ravel()


class ToyRadon(LinearOperator):
    """Pixel-driven parallel-beam projector on an ``n x n`` grid.

    Each pixel centre is projected onto the detector axis
    ``s = x cos(theta) + y sin(theta)`` and its value is split between the
    two nearest detector bins by linear interpolation, scaled by
    ``1/bin_width`` so that every view integrates to the image mass.
    The operator is assembled once as a sparse matrix; rows are ordered
    angle-major, i.e. the range has shape ``(n_angles, n_detectors)``.
    """

    kind = "toy_radon"

    def __init__(self, n, angles, n_detectors=None, detector_width=None):
        self.n = int(n)
        self.angles = np.asarray(angles, dtype=float).ravel()
        self.n_detectors = int(n_detectors) if n_detectors is not None else 2 * self.n
        self.detector_width = (
            float(detector_width) if detector_width is not None else math.sqrt(2.0) * self.n
        )
        super().__init__((self.n, self.n), (self.angles.size, self.n_detectors))
        self.matrix = self._assemble()

    @classmethod
    def uniform(cls, n, n_angles, n_detectors=None):
        angles = np.arange(n_angles) * (np.pi / n_angles)
        return cls(n, angles, n_detectors)

    def _assemble(self):
        n, nd = self.n, self.n_detectors
        ds = self.detector_width / nd
        c = np.arange(n) - (n - 1) / 2.0
        xs = np.tile(c, n)  # column coordinate
        ys = np.repeat(-c, n)  # row 0 at the top
        cols = np.arange(n * n)
        rows_all, cols_all, vals_all = [], [], []
        for a, theta in enumerate(self.angles):
            s = xs * math.cos(theta) + ys * math.sin(theta)
            u = s / ds + (nd - 1) / 2.0
            lo = np.floor(u).astype(np.int64)
            frac = u - lo
            for b, w in ((lo, 1.0 - frac), (lo + 1, frac)):
                keep = (b >= 0) & (b < nd) & (w > 0)
                rows_all.append(a * nd + b[keep])
                cols_all.append(cols[keep])
                vals_all.append(w[keep] / ds)
        rows = np.concatenate(rows_all)
        cols = np.concatenate(cols_all)
        vals = np.concatenate(vals_all)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.range_size, self.domain_size))

    def _direct(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self.matrix.T @ y

    def subset(self, angle_index):
        """Projector restricted to the views in ``angle_index`` (in that order)."""
        return ToyRadon(self.n, self.angles[np.asarray(angle_index)], self.n_detectors, self.detector_width)


class NormEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int
    history: list


def power_method(op: LinearOperator, tol=1e-8, max_iter=1000, seed=0) -> NormEstimate:
    """Estimate ``||op||`` by power iteration on ``op^T op``.

    Stops once the relative change of the estimate drops below ``tol``.
    The returned ``history`` holds ``||op v_k||`` for the normalised
    iterates, which is non-decreasing in exact arithmetic.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    v = rng.uniform(size=op.domain_size)
    v /= np.linalg.norm(v)
    history = []
    est = 0.0
    for it in range(1, max_iter + 1):
        av = op._direct(v)
        new = float(np.linalg.norm(av))
        history.append(new)
        if new == 0.0:
            return NormEstimate(0.0, True, it, history)
        w = op._adjoint(av)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return NormEstimate(new, True, it, history)
        v = w / nw
        if it > 1 and abs(new - est) <= tol * new:
            return NormEstimate(new, True, it, history)
        est = new
    return NormEstimate(est, False, max_iter, history)


def dot_test(op: LinearOperator, trials=20, seed=0):
    """Largest relative mismatch ``|<Ax, y> - <x, A^T y>| / (||x|| ||y|| ||A||)``."""
    rng = np.random.default_rng(seed)
    scale = op.norm()
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(op.domain_size)
        y = rng.standard_normal(op.range_size)
        lhs = np.dot(op.direct(x), y)
        rhs = np.dot(x, op.adjoint(y))
        denom = np.linalg.norm(x) * np.linalg.norm(y) * max(scale, np.finfo(float).tiny)
        worst = max(worst, abs(lhs - rhs) / denom)
    return worst


def save_array(path, array, shape=None):
    """Write ``array`` as ``dims: d1 d2 ...`` followed by row-major values.

    One line per row of the trailing dimension; values use 17 significant
    digits so that a round trip is exact.
    """
    a = np.asarray(array, dtype=float)
    if shape is not None:
        a = a.reshape(shape)
    dims = a.shape if a.ndim else (1,)
    rows = a.reshape(-1, dims[-1]) if a.ndim else a.reshape(1, 1)
    with open(path, "w") as fh:
        fh.write("dims: " + " ".join(str(d) for d in dims) + "\n")
        for row in rows:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_array(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("dims:"):
            raise ValueError(f"{path}: missing 'dims:' header")
        dims = tuple(int(d) for d in header[5:].split())
        values = np.array(fh.read().split(), dtype=float)
    if values.size != _size(dims):
        raise DimensionError(f"{path}: header declares {dims} but file holds {values.size} values")
    return values.reshape(dims)
