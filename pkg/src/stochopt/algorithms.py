"""Iterative solvers: GD, PGD (ISTA), APGD (FISTA), PD3O and PDHG.

The smooth term ``f`` is anything with ``gradient`` and ``__call__``; a
stochastic estimator from :mod:`stochopt.estimators` drops in unchanged.
"""
from __future__ import annotations

import csv
import math
import warnings
from fractions import Fraction

import numpy as np

from .errors import CallbackError, CapabilityError, ConfigurationError
from .functions import ZeroFunction
from .tuning import as_step_rule

__all__ = [
    "Algorithm",
    "GD",
    "PGD",
    "ISTA",
    "APGD",
    "FISTA",
    "NesterovMomentum",
    "ConstantMomentum",
    "PD3O",
    "PDHG",
]


def _infer_size(*objects):
    """Domain size from an operator attached to one of ``objects``, if any."""
    for obj in objects:
        if obj is None:
            continue
        for cand in (obj, getattr(obj, "A", None), getattr(obj, "operator", None)):
            size = getattr(cand, "domain_size", None)
            if size is not None:
                return size
        members = getattr(obj, "functions", None)
        if members:
            size = _infer_size(*members)
            if size is not None:
                return size
    return None


class Algorithm:
    """Shared iteration loop, objective log and callbacks.

    Subclasses implement ``update`` (one iteration) and ``objective``.
    """

    def __init__(self, initial=None, update_objective_interval=1, size_hint=()):
        if initial is None:
            size = _infer_size(*size_hint)
            if size is None:
                raise ConfigurationError("cannot infer the domain size; pass an initial point")
            initial = np.zeros(size)
        self.x = np.array(initial, dtype=float).ravel()
        self.initial = self.x.copy()
        if update_objective_interval < 1:
            raise ConfigurationError("update_objective_interval must be at least 1")
        self.update_objective_interval = int(update_objective_interval)
        self.iteration = 0
        self.loss = []
        self._gradient_calls = 0

    # -- work and logging -------------------------------------------------
    def _gradient(self, x):
        self._gradient_calls += 1
        return self.f.gradient(x)

    @property
    def data_passes(self) -> Fraction:
        passes = getattr(self.f, "data_passes", None)
        if passes is not None:
            return passes
        return Fraction(self._gradient_calls)

    def objective(self):
        raise NotImplementedError

    def update(self):
        raise NotImplementedError

    def _log(self):
        self.loss.append((self.iteration, self.data_passes, self.objective()))

    def step(self):
        self.update()
        self.iteration += 1

    def run(self, iterations, callbacks=(), verbose=False):
        """Run ``iterations`` steps.  Each callback receives the algorithm."""
        if iterations < 0:
            raise ConfigurationError("iterations must be nonnegative")
        if not self.loss:
            self._log()
        for _ in range(int(iterations)):
            self.step()
            if self.iteration % self.update_objective_interval == 0:
                self._log()
            for cb in callbacks:
                try:
                    cb(self)
                except Exception as exc:
                    raise CallbackError(self.iteration, exc) from exc
        return self

    @property
    def objective_values(self):
        return [v for _, _, v in self.loss]

    def save_objective(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "data_passes", "objective"])
            for k, passes, value in self.loss:
                w.writerow([k, repr(float(passes)), repr(float(value))])


class _GradientMethod(Algorithm):
    def __init__(self, f, initial=None, step_size=None, preconditioner=None,
                 update_objective_interval=1, g=None):
        if not getattr(f, "has_gradient", False):
            raise CapabilityError(f"{type(f).__name__} has no gradient")
        super().__init__(initial, update_objective_interval, size_hint=(f, g))
        self.f = f
        self.g = ZeroFunction() if g is None else g
        if not self.g.has_prox:
            raise CapabilityError(f"{type(self.g).__name__} has no proximal map")
        if step_size is None:
            L = f.L
            if not L:
                raise ConfigurationError("no step size given and the Lipschitz constant is unknown")
            step_size = 1.0 / L
        self.step_rule = as_step_rule(step_size)
        self.preconditioner = preconditioner
        self.gamma = None

    def _direction(self, x):
        grad = self._gradient(x)
        d = grad if self.preconditioner is None else self.preconditioner(self, x, grad)
        self.gamma = float(self.step_rule(self, x, grad, d))
        return d

    def objective(self):
        return float(self.f(self.x)) + float(self.g(self.x))


class GD(_GradientMethod):
    """``x <- x - gamma P grad f(x)``."""

    def __init__(self, f, initial=None, step_size=None, preconditioner=None, update_objective_interval=1):
        super().__init__(f, initial, step_size, preconditioner, update_objective_interval)

    def update(self):
        d = self._direction(self.x)
        self.x = self.x - self.gamma * d

    def objective(self):
        return float(self.f(self.x))


class PGD(_GradientMethod):
    """``x <- prox_{gamma g}(x - gamma P grad f(x))``."""

    def __init__(self, f, g=None, initial=None, step_size=None, preconditioner=None,
                 update_objective_interval=1):
        super().__init__(f, initial, step_size, preconditioner, update_objective_interval, g=g)

    def update(self):
        d = self._direction(self.x)
        self.x = self.g.proximal(self.x - self.gamma * d, self.gamma)


ISTA = PGD


class NesterovMomentum:
    """``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2``, ``beta_k = (t_k - 1) / t_{k+1}``, ``t_0 = 1``."""

    def __init__(self):
        self.t = 1.0

    def __call__(self, algorithm):
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * self.t ** 2))
        beta = (self.t - 1.0) / t_next
        self.t = t_next
        return beta


class ConstantMomentum:
    def __init__(self, beta):
        self.beta = float(beta)

    def __call__(self, algorithm):
        return self.beta


class APGD(_GradientMethod):
    """Accelerated proximal gradient.

    Parameters
    ----------
    momentum : callable or float, optional
        ``momentum(algorithm) -> beta_k``; a number means a constant
        ``beta``.  Defaults to :class:`NesterovMomentum`.
    """

    def __init__(self, f, g=None, initial=None, step_size=None, momentum=None, preconditioner=None,
                 update_objective_interval=1):
        super().__init__(f, initial, step_size, preconditioner, update_objective_interval, g=g)
        if momentum is None:
            momentum = NesterovMomentum()
        elif not callable(momentum):
            momentum = ConstantMomentum(momentum)
        self.momentum = momentum
        self.y = self.x.copy()
        self.beta = None

    def update(self):
        d = self._direction(self.y)
        x_new = self.g.proximal(self.y - self.gamma * d, self.gamma)
        self.beta = float(self.momentum(self))
        self.y = x_new + self.beta * (x_new - self.x)
        self.x = x_new


FISTA = APGD


def _check_primal_dual(g, h, K):
    if not g.has_prox:
        raise CapabilityError(f"{type(g).__name__} has no proximal map")
    if not h.has_conj_prox:
        raise CapabilityError(f"{type(h).__name__} has no conjugate proximal map")
    if K is None:
        raise ConfigurationError("a linear operator K is required")


class PD3O(Algorithm):
    """Primal-dual three-operator splitting for ``f(x) + g(x) + h(K x)``.

    Each iteration evaluates one new gradient; ``G(x_{k+1})`` is reused
    as ``G(x_k)`` on the next iteration.

    Parameters
    ----------
    gamma, delta : float, optional
        Primal and dual steps.  Default to ``0.99 * 2 / L`` and
        ``L / ||K||**2``.
    """

    def __init__(self, f, g, h, operator, initial=None, gamma=None, delta=None,
                 dual_initial=None, update_objective_interval=1):
        f = ZeroFunction() if f is None else f
        g = ZeroFunction() if g is None else g
        _check_primal_dual(g, h, operator)
        super().__init__(initial, update_objective_interval, size_hint=(operator,))
        self.f, self.g, self.h, self.operator = f, g, h, operator
        if gamma is None or delta is None:
            L = f.L
            if not L:
                raise ConfigurationError("PD3O default steps need a positive Lipschitz constant; pass gamma and delta")
            norm_sq = operator.norm() ** 2
            if gamma is None:
                gamma = 0.99 * 2.0 / L
            if delta is None:
                delta = L / norm_sq
        if gamma <= 0 or delta <= 0:
            raise ConfigurationError("gamma and delta must be positive")
        self.gamma, self.delta = float(gamma), float(delta)
        product = self.gamma * self.delta * operator.norm() ** 2
        if product > 1 + 1e-12:
            warnings.warn(f"gamma * delta * ||K||^2 = {product:.4g} exceeds 1", RuntimeWarning, stacklevel=2)
        self.y = (np.zeros(operator.range_size) if dual_initial is None
                  else np.array(dual_initial, dtype=float).ravel())
        self.x_bar = self.x.copy()
        self._grad = None

    def update(self):
        K, tau, sigma = self.operator, self.gamma, self.delta
        if self._grad is None:
            self._grad = self._gradient(self.x)
        x_new = self.g.proximal(self.x - tau * self._grad - tau * K.adjoint(self.y), tau)
        grad_new = self._gradient(x_new)
        self.x_bar = 2.0 * x_new - self.x + tau * (self._grad - grad_new)
        self.y = self.h.proximal_conjugate(self.y + sigma * K.direct(self.x_bar), sigma)
        self.x = x_new
        self._grad = grad_new

    def objective(self):
        return float(self.f(self.x)) + float(self.g(self.x)) + float(self.h(self.operator.direct(self.x)))


class PDHG(Algorithm):
    """Primal-dual hybrid gradient for ``g(x) + h(K x)``.

    Defaults to ``tau = sigma = 1 / ||K||``.
    """

    def __init__(self, g, h, operator, initial=None, tau=None, sigma=None, theta=1.0,
                 dual_initial=None, update_objective_interval=1):
        g = ZeroFunction() if g is None else g
        _check_primal_dual(g, h, operator)
        super().__init__(initial, update_objective_interval, size_hint=(operator,))
        self.f = ZeroFunction()
        self.g, self.h, self.operator = g, h, operator
        if tau is None or sigma is None:
            norm = operator.norm()
            tau = 1.0 / norm if tau is None else tau
            sigma = 1.0 / (tau * norm ** 2) if sigma is None else sigma
        if tau <= 0 or sigma <= 0:
            raise ConfigurationError("tau and sigma must be positive")
        self.tau, self.sigma, self.theta = float(tau), float(sigma), float(theta)
        product = self.tau * self.sigma * operator.norm() ** 2
        if product > 1 + 1e-12:
            warnings.warn(f"tau * sigma * ||K||^2 = {product:.4g} exceeds 1", RuntimeWarning, stacklevel=2)
        self.y = (np.zeros(operator.range_size) if dual_initial is None
                  else np.array(dual_initial, dtype=float).ravel())
        self.x_bar = self.x.copy()

    @property
    def data_passes(self):
        return Fraction(0)

    def update(self):
        K = self.operator
        x_new = self.g.proximal(self.x - self.tau * K.adjoint(self.y), self.tau)
        self.x_bar = x_new + self.theta * (x_new - self.x)
        self.y = self.h.proximal_conjugate(self.y + self.sigma * K.direct(self.x_bar), self.sigma)
        self.x = x_new

    def objective(self):
        return float(self.g(self.x)) + float(self.h(self.operator.direct(self.x)))
