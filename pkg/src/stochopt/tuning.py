"""Step-size rules and diagonal preconditioners for GD, PGD and APGD.

A step rule is called as ``rule(algorithm, x, gradient, direction)`` where
``direction`` is the (preconditioned) vector the algorithm will subtract,
``x - gamma * direction``.  A preconditioner maps ``(algorithm, x, gradient)``
to the preconditioned gradient.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, DomainError, NumericalError

__all__ = [
    "StepRule",
    "ConstantStepSize",
    "DecreasingStepSize",
    "ArmijoStepSize",
    "BarzilaiBorweinStepSize",
    "CustomStepSize",
    "as_step_rule",
    "Preconditioner",
    "IdentityPreconditioner",
    "SensitivityPreconditioner",
    "KappaSquaredPreconditioner",
    "BSREMPreconditioner",
    "estimate_initial_step",
    "make_step_rule",
    "make_preconditioner",
]


def _positive(name, value):
    if not value > 0:
        raise ConfigurationError(f"{name} must be positive, got {value}")
    return float(value)


class StepRule:
    def __call__(self, algorithm, x, gradient, direction):
        raise NotImplementedError

    def reset(self):
        pass


class ConstantStepSize(StepRule):
    def __init__(self, gamma):
        self.gamma = _positive("gamma", gamma)

    def __call__(self, algorithm, x, gradient, direction):
        return self.gamma


class DecreasingStepSize(StepRule):
    """``gamma0 / (1 + beta * k)`` with ``k`` the algorithm iteration."""

    def __init__(self, gamma0, beta):
        self.gamma0 = _positive("gamma0", gamma0)
        if beta < 0:
            raise ConfigurationError(f"beta must be nonnegative, got {beta}")
        self.beta = float(beta)

    def value(self, k):
        return self.gamma0 / (1.0 + self.beta * k)

    def __call__(self, algorithm, x, gradient, direction):
        return self.value(algorithm.iteration)


class ArmijoStepSize(StepRule):
    """Backtracking from ``gamma0`` by ``halving_factor`` until sufficient decrease.

    Accepts the first ``gamma`` with
    ``f(x - gamma d) <= f(x) - sigma * gamma * <grad f(x), d>``.
    If ``max_backtracks`` halvings all fail, the smallest trial is returned
    and ``exhausted`` is set.

    Parameters
    ----------
    function : Function, optional
        Objective to evaluate; defaults to the algorithm's smooth term ``f``.
    """

    def __init__(self, gamma0=1.0, sigma=0.2, halving_factor=2.0, max_backtracks=30, function=None):
        self.gamma0 = _positive("gamma0", gamma0)
        if not 0 < sigma < 1:
            raise ConfigurationError(f"sigma must lie in (0, 1), got {sigma}")
        self.sigma = float(sigma)
        if not halving_factor > 1:
            raise ConfigurationError("halving_factor must exceed 1")
        self.halving_factor = float(halving_factor)
        if max_backtracks < 0:
            raise ConfigurationError("max_backtracks must be nonnegative")
        self.max_backtracks = int(max_backtracks)
        self.function = function
        self.exhausted = False
        self.accepted = []

    @staticmethod
    def _value(f, x):
        # trial points outside the domain count as rejections
        try:
            v = float(f(x))
        except DomainError:
            return np.inf
        return v if np.isfinite(v) else np.inf

    def search(self, f, x, gradient, direction):
        fx = f(x)
        slope = float(np.dot(gradient, direction))
        gamma = self.gamma0
        for _ in range(self.max_backtracks + 1):
            if self._value(f, x - gamma * direction) <= fx - self.sigma * gamma * slope:
                self.exhausted = False
                self.accepted.append(gamma)
                return gamma
            gamma_last = gamma
            gamma = gamma / self.halving_factor
        self.exhausted = True
        return gamma_last

    def __call__(self, algorithm, x, gradient, direction):
        f = self.function if self.function is not None else algorithm.f
        return self.search(f, x, gradient, direction)

    def reset(self):
        self.exhausted = False
        self.accepted = []


class BarzilaiBorweinStepSize(StepRule):
    """Barzilai-Borwein ratio from successive iterates and gradients.

    ``mode="long"`` gives ``<dx, dx> / <dx, dg>``, ``mode="short"`` gives
    ``<dx, dg> / <dg, dg>``.  The first call, a repeated point, or
    nonpositive curvature reuse the previously accepted step (initially
    ``gamma0``).
    """

    def __init__(self, gamma0, mode="long"):
        self.gamma0 = _positive("gamma0", gamma0)
        if mode not in ("long", "short"):
            raise ConfigurationError(f"mode must be 'long' or 'short', got {mode!r}")
        self.mode = mode
        self.reset()

    def reset(self):
        self._x = None
        self._g = None
        self.gamma = self.gamma0

    def __call__(self, algorithm, x, gradient, direction):
        if self._x is not None:
            dx = x - self._x
            dg = gradient - self._g
            curv = float(np.dot(dx, dg))
            if np.any(dx) and curv > 0:
                if self.mode == "long":
                    self.gamma = float(np.dot(dx, dx)) / curv
                else:
                    self.gamma = curv / float(np.dot(dg, dg))
        self._x = np.array(x, dtype=float, copy=True)
        self._g = np.array(gradient, dtype=float, copy=True)
        return self.gamma


class CustomStepSize(StepRule):
    """Step given by ``callback(algorithm)``."""

    def __init__(self, callback):
        self.callback = callback

    def __call__(self, algorithm, x, gradient, direction):
        return float(self.callback(algorithm))


def as_step_rule(step):
    if step is None or isinstance(step, StepRule):
        return step
    if callable(step):
        return CustomStepSize(step)
    return ConstantStepSize(step)


# -- preconditioners ------------------------------------------------------

class Preconditioner:
    def multiplier(self, algorithm, x):
        raise NotImplementedError

    def __call__(self, algorithm, x, gradient):
        return self.multiplier(algorithm, x) * gradient

    @staticmethod
    def _validate(m, name):
        bad = ~(np.isfinite(m) & (m > 0))
        if np.any(bad):
            idx = np.flatnonzero(bad)
            shown = ", ".join(str(i) for i in idx[:10]) + (", ..." if idx.size > 10 else "")
            raise NumericalError(f"{name} multiplier is nonpositive or non-finite at entries [{shown}]")
        return m


class IdentityPreconditioner(Preconditioner):
    def __call__(self, algorithm, x, gradient):
        return gradient

    def multiplier(self, algorithm, x):
        return np.ones_like(x)


def _sensitivity(A):
    return np.asarray(A.adjoint(np.ones(A.range_size)), dtype=float).ravel()


class SensitivityPreconditioner(Preconditioner):
    """Multiply by ``1 / (A^T 1 + epsilon)``."""

    def __init__(self, A, epsilon=1e-6):
        self.epsilon = float(epsilon)
        self.sensitivity = _sensitivity(A)
        with np.errstate(divide="ignore"):
            self._m = self._validate(1.0 / (self.sensitivity + self.epsilon), "sensitivity")

    def multiplier(self, algorithm, x):
        return self._m


class KappaSquaredPreconditioner(Preconditioner):
    """Multiply by ``1 / (kappa**2 + epsilon)``."""

    def __init__(self, kappa, epsilon=1e-6):
        self.epsilon = float(epsilon)
        self.kappa = np.asarray(kappa, dtype=float).ravel()
        with np.errstate(divide="ignore"):
            self._m = self._validate(1.0 / (self.kappa ** 2 + self.epsilon), "kappa_sq")

    def multiplier(self, algorithm, x):
        return self._m


class BSREMPreconditioner(Preconditioner):
    """Multiply by ``max(x, epsilon) / (A^T 1 + epsilon)`` at the current iterate."""

    def __init__(self, A, epsilon=1e-6):
        self.epsilon = float(epsilon)
        self.sensitivity = _sensitivity(A)

    def multiplier(self, algorithm, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.maximum(x, self.epsilon) / (self.sensitivity + self.epsilon)
        return self._validate(m, "bsrem")


def estimate_initial_step(f, g=None, initial=None, trials=5, gamma0=1.0, sigma=0.2,
                          halving_factor=2.0, max_backtracks=30, preconditioner=None):
    """Minimum Armijo step over ``trials`` proximal gradient iterations.

    Parameters
    ----------
    f : Function
        Smooth term, evaluated and differentiated.
    g : Function, optional
        Term handled by its prox (default: none).
    initial : array_like
        Starting point.

    Returns
    -------
    float
    """
    if trials < 1:
        raise ConfigurationError("trials must be at least 1")
    if initial is None:
        raise ConfigurationError("estimate_initial_step needs an initial point")
    rule = ArmijoStepSize(gamma0, sigma, halving_factor, max_backtracks)
    x = np.asarray(initial, dtype=float).ravel().copy()
    steps = []
    for _ in range(trials):
        grad = f.gradient(x)
        d = grad if preconditioner is None else preconditioner(None, x, grad)
        gamma = rule.search(f, x, grad, d)
        steps.append(gamma)
        x = x - gamma * d
        if g is not None:
            x = g.proximal(x, gamma)
    return min(steps)


def make_step_rule(kind, **params):
    """Build a step rule from config keys (``gamma0``, ``beta``, ``sigma``, ...)."""
    if kind == "constant":
        return ConstantStepSize(params.get("gamma", params.get("gamma0")))
    if kind == "decreasing":
        return DecreasingStepSize(params["gamma0"], params.get("beta", 0.0))
    if kind == "armijo":
        return ArmijoStepSize(params.get("gamma0", 1.0), params.get("sigma", 0.2),
                              params.get("halving_factor", 2.0), params.get("max_backtracks", 30))
    if kind == "barzilai_borwein":
        return BarzilaiBorweinStepSize(params["gamma0"], params.get("mode", "long"))
    raise ConfigurationError(f"unknown step rule {kind!r}")


def make_preconditioner(kind, A=None, kappa=None, epsilon=1e-6):
    if kind in (None, "none"):
        return None
    if kind == "identity":
        return IdentityPreconditioner()
    if kind == "sensitivity":
        return SensitivityPreconditioner(A, epsilon)
    if kind == "kappa_sq":
        return KappaSquaredPreconditioner(kappa, epsilon)
    if kind == "bsrem":
        return BSREMPreconditioner(A, epsilon)
    raise ConfigurationError(f"unknown preconditioner {kind!r}")
