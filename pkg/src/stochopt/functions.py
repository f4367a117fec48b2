"""Convex functions with values, gradients and proximal maps.

Every function works on flat float arrays.  Capabilities are advertised
through ``has_gradient`` / ``has_prox`` / ``has_conj_prox``; asking for a
missing one raises :class:`~stochopt.errors.CapabilityError`.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import CapabilityError, DimensionError, DomainError
from .operators import GradientOperator, LinearOperator

__all__ = [
    "Function",
    "LeastSquares",
    "KullbackLeibler",
    "L1Norm",
    "MixedL21Norm",
    "IndicatorBox",
    "RelativeDifferencePrior",
    "ZeroFunction",
    "ScaledFunction",
    "SumFunction",
    "OperatorCompositionFunction",
    "TotalVariation",
    "fgp_tv",
    "lipschitz",
]


class Function:
    kind = "abstract"
    has_gradient = False
    has_prox = False

    @property
    def has_conj_prox(self):
        return self.has_prox

    @property
    def L(self):
        """Lipschitz constant of the gradient, or ``None`` when not known."""
        return None

    def __call__(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise CapabilityError(f"{type(self).__name__} has no gradient")

    def proximal(self, x, tau):
        raise CapabilityError(f"{type(self).__name__} has no proximal map")

    def proximal_conjugate(self, x, tau):
        """``prox_{tau f*}`` through the Moreau identity."""
        if not self.has_prox:
            raise CapabilityError(f"{type(self).__name__} has no conjugate proximal map")
        if tau <= 0:
            raise ValueError("tau must be positive")
        x = np.asarray(x, dtype=float)
        return x - tau * self.proximal(x / tau, 1.0 / tau)

    def __add__(self, other):
        return SumFunction([self, other])

    def __rmul__(self, scalar):
        return ScaledFunction(self, scalar)


def _positive(tau):
    if tau <= 0:
        raise ValueError(f"step must be positive, got {tau}")
    return float(tau)


def lipschitz(f: Function):
    """Return ``f.L`` (``None`` means the constant is not set)."""
    if not f.has_gradient:
        raise CapabilityError(f"{type(f).__name__} is not differentiable")
    return f.L


class LeastSquares(Function):
    """``c * ||A x - b||^2``.  ``A=None`` means the identity."""

    kind = "least_squares"
    has_gradient = True

    def __init__(self, A: LinearOperator | None = None, b=None, c=0.5):
        self.A = A
        self.b = None if b is None else np.asarray(b, dtype=float).ravel()
        self.c = float(c)

    @property
    def has_prox(self):
        return self.A is None

    def _residual(self, x):
        x = np.asarray(x, dtype=float).ravel()
        ax = x if self.A is None else self.A.direct(x)
        if self.b is None:
            return ax
        if self.b.size != ax.size:
            raise DimensionError(f"data has {self.b.size} entries, A x has {ax.size}")
        return ax - self.b

    def __call__(self, x):
        r = self._residual(x)
        return self.c * float(np.dot(r, r))

    def gradient(self, x):
        r = self._residual(x)
        g = r if self.A is None else self.A.adjoint(r)
        return 2.0 * self.c * g

    @property
    def L(self):
        norm = 1.0 if self.A is None else self.A.norm()
        return 2.0 * self.c * norm**2

    def proximal(self, x, tau):
        if self.A is not None:
            raise CapabilityError("LeastSquares with an operator has no closed-form prox")
        tau = _positive(tau)
        x = np.asarray(x, dtype=float).ravel()
        b = 0.0 if self.b is None else self.b
        return (x + 2.0 * tau * self.c * b) / (1.0 + 2.0 * tau * self.c)


class KullbackLeibler(Function):
    """Poisson negative log-likelihood ``sum(A x) - b log(A x + eta)``.

    Bins with ``b == 0`` contribute ``(A x)_j`` only.
    """

    kind = "kl"
    has_gradient = True

    def __init__(self, b, eta=0.0, A: LinearOperator | None = None):
        self.b = np.asarray(b, dtype=float).ravel()
        if np.any(self.b < 0):
            raise ValueError("counts must be nonnegative")
        self.eta = np.broadcast_to(np.asarray(eta, dtype=float), self.b.shape).copy()
        self.A = A
        self._pos = self.b > 0

    def _forward(self, x):
        x = np.asarray(x, dtype=float).ravel()
        ax = x if self.A is None else self.A.direct(x)
        if ax.size != self.b.size:
            raise DimensionError(f"data has {self.b.size} entries, A x has {ax.size}")
        mean = ax + self.eta
        bad = self._pos & ~(mean > 0)
        if np.any(bad):
            raise DomainError(f"A x + eta must be positive where b > 0 (violated at {np.flatnonzero(bad)[:10]})")
        return ax, mean

    def __call__(self, x):
        ax, mean = self._forward(x)
        pos = self._pos
        return float(np.sum(ax) - np.dot(self.b[pos], np.log(mean[pos])))

    def gradient(self, x):
        _, mean = self._forward(x)
        ratio = np.ones_like(mean)
        ratio[self._pos] -= self.b[self._pos] / mean[self._pos]
        return ratio if self.A is None else self.A.adjoint(ratio)


class L1Norm(Function):
    kind = "l1"
    has_prox = True

    def __call__(self, x):
        return float(np.sum(np.abs(x)))

    def proximal(self, x, tau):
        tau = _positive(tau)
        x = np.asarray(x, dtype=float)
        return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)

    def proximal_conjugate(self, x, tau):
        _positive(tau)
        return np.clip(np.asarray(x, dtype=float), -1.0, 1.0)


class MixedL21Norm(Function):
    """Sum of Euclidean norms of groups.

    The flat input is read as ``ncomponents`` consecutive blocks; group
    ``j`` collects entry ``j`` of every block (the layout produced by
    :class:`~stochopt.operators.GradientOperator`).
    """

    kind = "mixed_l21"
    has_prox = True

    def __init__(self, ncomponents):
        self.ncomponents = int(ncomponents)

    def _groups(self, x):
        x = np.asarray(x, dtype=float)
        if x.size % self.ncomponents:
            raise DimensionError(f"{x.size} entries cannot form {self.ncomponents} blocks")
        return x.reshape(self.ncomponents, -1)

    def __call__(self, x):
        return float(np.sum(np.linalg.norm(self._groups(x), axis=0)))

    def proximal(self, x, tau):
        tau = _positive(tau)
        g = self._groups(x)
        nrm = np.linalg.norm(g, axis=0)
        scale = np.maximum(nrm - tau, 0.0) / np.where(nrm > 0, nrm, 1.0)
        return (g * scale).ravel()

    def proximal_conjugate(self, x, tau):
        _positive(tau)
        g = self._groups(x)
        nrm = np.linalg.norm(g, axis=0)
        return (g / np.maximum(nrm, 1.0)).ravel()


class IndicatorBox(Function):
    kind = "indicator_box"
    has_prox = True

    def __init__(self, lower=-np.inf, upper=np.inf):
        if np.any(np.asarray(lower) > np.asarray(upper)):
            raise ValueError("lower bound exceeds upper bound")
        self.lower = lower
        self.upper = upper

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.all(x >= self.lower) and np.all(x <= self.upper)
        return 0.0 if inside else np.inf

    def proximal(self, x, tau):
        _positive(tau)
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)


class ZeroFunction(Function):
    kind = "zero"
    has_gradient = True
    has_prox = True

    def __call__(self, x):
        return 0.0

    def gradient(self, x):
        return np.zeros(np.asarray(x).size)

    @property
    def L(self):
        return 0.0

    def proximal(self, x, tau):
        _positive(tau)
        return np.array(x, dtype=float).ravel()

    def proximal_conjugate(self, x, tau):
        _positive(tau)
        return np.zeros(np.asarray(x).size)


class ScaledFunction(Function):
    kind = "scaled"

    def __init__(self, function: Function, scalar):
        if scalar < 0:
            raise ValueError("negative scaling breaks convexity")
        self.function = function
        self.scalar = float(scalar)

    @property
    def has_gradient(self):
        return self.function.has_gradient

    @property
    def has_prox(self):
        return self.function.has_prox

    @property
    def L(self):
        L = self.function.L
        return None if L is None else self.scalar * L

    def __call__(self, x):
        if self.scalar == 0:
            return 0.0
        return self.scalar * self.function(x)

    def gradient(self, x):
        return self.scalar * self.function.gradient(x)

    def proximal(self, x, tau):
        if not self.has_prox:
            raise CapabilityError("scaled function has no proximal map")
        _positive(tau)
        step = tau * self.scalar
        # an underflowed step is the zero function's prox
        if step == 0:
            return np.array(x, dtype=float).ravel()
        return self.function.proximal(x, step)


class SumFunction(Function):
    kind = "sum"

    def __init__(self, functions):
        flat = []
        for f in functions:
            flat.extend(f.functions if type(f) is SumFunction else [f])
        if not flat:
            raise ValueError("SumFunction needs at least one member")
        self.functions = flat

    @property
    def has_gradient(self):
        return all(f.has_gradient for f in self.functions)

    @property
    def has_prox(self):
        return len(self.functions) == 1 and self.functions[0].has_prox

    @property
    def L(self):
        Ls = [f.L for f in self.functions]
        return None if any(L is None for L in Ls) else float(sum(Ls))

    def __call__(self, x):
        return float(sum(f(x) for f in self.functions))

    def gradient(self, x):
        out = self.functions[0].gradient(x)
        for f in self.functions[1:]:
            out = out + f.gradient(x)
        return out

    def proximal(self, x, tau):
        if not self.has_prox:
            raise CapabilityError("sum of several functions has no proximal map")
        return self.functions[0].proximal(x, tau)


class OperatorCompositionFunction(Function):
    """``h(K x)``; differentiable when ``h`` is."""

    kind = "composed"
    has_prox = False

    def __init__(self, function: Function, operator: LinearOperator):
        self.function = function
        self.operator = operator

    @property
    def has_gradient(self):
        return self.function.has_gradient

    @property
    def L(self):
        L = self.function.L
        return None if L is None else L * self.operator.norm() ** 2

    def __call__(self, x):
        return self.function(self.operator.direct(x))

    def gradient(self, x):
        return self.operator.adjoint(self.function.gradient(self.operator.direct(x)))


class RelativeDifferencePrior(Function):
    """Smoothed relative difference penalty on a regular grid.

    ``beta * 1/2 sum_i sum_{l in N(i)} w_il k_i k_l (x_i - x_l)^2 /
    (x_i + x_l + omega |x_i - x_l| + epsilon)`` over the full
    ``3^d - 1`` neighbourhood with ``w_il = 1 / distance``.
    """

    kind = "rdp"
    has_gradient = True

    def __init__(self, shape, beta=1.0, omega=2.0, epsilon=1e-9, kappa=None):
        self.shape = tuple(shape)
        self.beta = float(beta)
        self.omega = float(omega)
        self.epsilon = float(epsilon)
        self.kappa = None if kappa is None else np.asarray(kappa, dtype=float).reshape(self.shape)
        # one offset per unordered neighbour pair
        offsets = [o for o in itertools.product((-1, 0, 1), repeat=len(self.shape)) if o > (0,) * len(self.shape)]
        self._pairs = []
        for o in offsets:
            src, dst = [], []
            for d in o:
                if d == 1:
                    src.append(slice(0, -1))
                    dst.append(slice(1, None))
                elif d == -1:
                    src.append(slice(1, None))
                    dst.append(slice(0, -1))
                else:
                    src.append(slice(None))
                    dst.append(slice(None))
            w = 1.0 / math.sqrt(sum(d * d for d in o))
            if self.kappa is not None:
                w = w * self.kappa[tuple(src)] * self.kappa[tuple(dst)]
            self._pairs.append((tuple(src), tuple(dst), w))

    def _image(self, x):
        x = np.asarray(x, dtype=float)
        if x.size != math.prod(self.shape):
            raise DimensionError(f"expected {self.shape}, got {x.shape}")
        return x.reshape(self.shape)

    def _terms(self, a, b):
        d = a - b
        den = a + b + self.omega * np.abs(d) + self.epsilon
        if np.any(den <= 0):
            raise DomainError("relative difference denominator is not positive; image must be nonnegative")
        return d, den

    def __call__(self, x):
        img = self._image(x)
        total = 0.0
        for src, dst, w in self._pairs:
            d, den = self._terms(img[src], img[dst])
            total += np.sum(w * d * d / den)
        return self.beta * float(total)

    def gradient(self, x):
        img = self._image(x)
        grad = np.zeros(self.shape)
        for src, dst, w in self._pairs:
            d, den = self._terms(img[src], img[dst])
            sgn = np.sign(d)
            q = d * d / (den * den)
            grad[src] += w * (2 * d / den - q * (1 + self.omega * sgn))
            grad[dst] += w * (-2 * d / den - q * (1 - self.omega * sgn))
        return self.beta * grad.ravel()


def _ball_project(p):
    nrm = np.sqrt(np.sum(p * p, axis=0))
    return p / np.maximum(nrm, 1.0)


def fgp_tv(z, grid, tau, iterations=100, nonnegativity=False, lower=-np.inf, upper=np.inf,
           dual_start=None, return_info=False):
    """Approximate ``prox_{tau TV}(z)`` for isotropic TV with Neumann boundary.

    Fast gradient projection on the dual problem.  A new dual iterate is
    only accepted when it does not increase the dual objective, so the
    recorded objective is non-increasing; momentum follows the usual
    ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`` recursion.

    ``nonnegativity=True`` is shorthand for ``lower=0``.  With
    ``return_info=True`` a dict with the final dual variable and the
    objective history is returned alongside the image.
    """
    tau = _positive(tau)
    if iterations < 1:
        raise ValueError("need at least one inner iteration")
    grid = (grid,) if np.isscalar(grid) else tuple(grid)
    z = np.asarray(z, dtype=float).ravel()
    if z.size != math.prod(grid):
        raise DimensionError(f"image has {z.size} entries, grid {grid} needs {math.prod(grid)}")
    if nonnegativity:
        lower = np.maximum(lower, 0.0)
    constrained = np.any(np.isfinite(lower)) or np.any(np.isfinite(upper))

    def proj_c(w):
        return np.clip(w, lower, upper) if constrained else w

    def dual_obj(w):
        pw = proj_c(w)
        return 0.5 * (np.dot(w, w) - np.dot(w - pw, w - pw))

    D = GradientOperator(grid)
    lip = 4.0 * D.ndim  # ||D||^2 bound
    shape = D.range_shape
    p = np.zeros(shape) if dual_start is None else np.asarray(dual_start, float).reshape(shape).copy()
    p_w = z - tau * D._adjoint(p.ravel())
    p_h = dual_obj(p_w)
    r, r_w = p.copy(), p_w.copy()
    t = 1.0
    history = [p_h]
    step = 1.0 / (lip * tau)
    for _ in range(iterations):
        cand = _ball_project(r + step * D._direct(proj_c(r_w)).reshape(shape))
        c_w = z - tau * D._adjoint(cand.ravel())
        c_h = dual_obj(c_w)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if c_h <= p_h:
            beta = (t - 1.0) / t_next
            r = cand + beta * (cand - p)
            r_w = c_w + beta * (c_w - p_w)
            p, p_w, p_h = cand, c_w, c_h
        else:
            beta = t / t_next
            r = p + beta * (cand - p)
            r_w = p_w + beta * (c_w - p_w)
        t = t_next
        history.append(p_h)
    x = proj_c(p_w)
    if return_info:
        return x, {"dual": p, "dual_objective": history}
    return x


class TotalVariation(Function):
    """Isotropic total variation ``sum_i ||(D x)_i||_2`` with an FGP prox.

    ``warm_start=True`` reuses the dual variable of the previous prox call,
    which sharpens the prox when it is called many times on slowly
    changing inputs.
    """

    kind = "tv"
    has_prox = True

    def __init__(self, grid, max_iteration=100, nonnegativity=False, warm_start=False):
        self.grid = (grid,) if np.isscalar(grid) else tuple(grid)
        self.max_iteration = int(max_iteration)
        self.nonnegativity = nonnegativity
        self.warm_start = warm_start
        self._D = GradientOperator(self.grid)
        self._dual = None

    def __call__(self, x):
        tv = float(np.sum(np.linalg.norm(self._D.direct(x).reshape(self._D.range_shape), axis=0)))
        if self.nonnegativity and np.any(np.asarray(x) < 0):
            return np.inf
        return tv

    def proximal(self, x, tau):
        x, info = fgp_tv(x, self.grid, tau, self.max_iteration, self.nonnegativity,
                         dual_start=self._dual if self.warm_start else None, return_info=True)
        if self.warm_start:
            self._dual = info["dual"]
        return x
