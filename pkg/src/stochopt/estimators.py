"""Stochastic gradient estimators for ``f = sum_i f_i``.

An estimator behaves like a differentiable :class:`~stochopt.functions.Function`:
calling it returns the full sum ``sum_i f_i(x)``, while
:meth:`gradient` returns an approximation ``G_k(x)`` of ``sum_i grad f_i(x)``.
Any algorithm that only needs gradients therefore runs unchanged with an
estimator in place of the deterministic objective.

Scalings follow the sum convention (not the average): e.g. the plain
stochastic gradient is ``N * grad f_{i_k}(x)``.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import CapabilityError, ConfigurationError
from .functions import Function
from .sampling import Sampler

__all__ = [
    "WorkCounter",
    "ApproximateGradientSumFunction",
    "FullGradientFunction",
    "SGFunction",
    "SAGFunction",
    "SAGAFunction",
    "SVRGFunction",
    "LSVRGFunction",
    "make_estimator",
]


class WorkCounter:
    """Gradient work in units of subset gradients and full gradients."""

    def __init__(self, num_functions):
        self.num_functions = int(num_functions)
        self.subset_gradient_evals = 0
        self.full_gradient_evals = 0
        self.value_evals = 0

    @property
    def data_passes(self) -> Fraction:
        return Fraction(self.subset_gradient_evals, self.num_functions) + self.full_gradient_evals

    def __repr__(self):
        return (f"WorkCounter(subset={self.subset_gradient_evals}, full={self.full_gradient_evals}, "
                f"passes={float(self.data_passes):.4g})")


def _sum_gradients(functions, x):
    # same accumulation order as SumFunction.gradient
    out = functions[0].gradient(x)
    for f in functions[1:]:
        out = out + f.gradient(x)
    return out


class ApproximateGradientSumFunction(Function):
    """Base class; subclasses provide ``_gradient`` (stateful) and ``estimate`` (pure)."""

    kind = "estimator"
    has_gradient = True
    uses_sampler = True

    def __init__(self, functions, sampler: Sampler | None = None):
        self.functions = list(functions)
        if not self.functions:
            raise ConfigurationError("an estimator needs at least one function")
        self.num_functions = len(self.functions)
        if sampler is None:
            sampler = Sampler.random_with_replacement(self.num_functions)
        if sampler.num_indices != self.num_functions:
            raise ConfigurationError(
                f"sampler draws from {sampler.num_indices} indices but there are {self.num_functions} functions"
            )
        self.sampler = sampler
        self.work = WorkCounter(self.num_functions)
        self.call_count = 0
        self.last_index = None

    def __call__(self, x):
        self.work.value_evals += 1
        return float(sum(f(x) for f in self.functions))

    @property
    def L(self):
        Ls = [f.L for f in self.functions]
        return None if any(L is None for L in Ls) else float(sum(Ls))

    @property
    def data_passes(self) -> Fraction:
        return self.work.data_passes

    def full_gradient(self, x):
        self.work.full_gradient_evals += 1
        return _sum_gradients(self.functions, x)

    def subset_gradient(self, x, i):
        self.work.subset_gradient_evals += 1
        return self.functions[i].gradient(x)

    def next_index(self):
        self.last_index = self.sampler.next()
        return self.last_index

    def gradient(self, x):
        x = np.asarray(x, dtype=float).ravel()
        g = self._gradient(x)
        self.call_count += 1
        return g

    def _gradient(self, x):
        raise NotImplementedError

    def estimate(self, x, i):
        """``G`` for a given draw ``i`` at the current state, without side effects."""
        raise NotImplementedError

    def warm_start_approximate_gradients(self, x0):
        raise CapabilityError(f"{type(self).__name__} keeps no gradient table")


class FullGradientFunction(ApproximateGradientSumFunction):
    """Deterministic ``sum_i grad f_i``; the estimator route for plain algorithms."""

    kind = "full_sum"
    uses_sampler = False

    def __init__(self, functions, sampler=None):
        if sampler is None:
            sampler = Sampler.sequential(len(list(functions)) or 1)
        super().__init__(functions, sampler)

    def _gradient(self, x):
        return self.full_gradient(x)

    def estimate(self, x, i):
        return _sum_gradients(self.functions, x)


class SGFunction(ApproximateGradientSumFunction):
    kind = "sg"

    def _gradient(self, x):
        i = self.next_index()
        return self.num_functions * self.subset_gradient(x, i)

    def estimate(self, x, i):
        return self.num_functions * self.functions[i].gradient(x)


class _TableEstimator(ApproximateGradientSumFunction):
    """Shared storage of the gradient table ``delta`` and its running sum."""

    def __init__(self, functions, sampler=None):
        super().__init__(functions, sampler)
        self.table = None
        self.table_sum = None

    def _ensure_table(self, x):
        if self.table is None:
            self.table = np.zeros((self.num_functions, x.size))
            self.table_sum = np.zeros(x.size)

    def warm_start_approximate_gradients(self, x0):
        x0 = np.asarray(x0, dtype=float).ravel()
        self.work.full_gradient_evals += 1
        self.table = np.stack([f.gradient(x0) for f in self.functions])
        self.table_sum = self.table.sum(axis=0)

    def _combine(self, grad_i, i):
        raise NotImplementedError

    def _gradient(self, x):
        self._ensure_table(x)
        i = self.next_index()
        grad_i = self.subset_gradient(x, i)
        out = self._combine(grad_i, i)
        self.table_sum += grad_i - self.table[i]
        self.table[i] = grad_i
        return out

    def estimate(self, x, i):
        x = np.asarray(x, dtype=float).ravel()
        self._ensure_table(x)
        return self._combine(self.functions[i].gradient(x), i)


class SAGFunction(_TableEstimator):
    """``grad f_i(x) - delta_i + sum_j delta_j`` (biased)."""

    kind = "sag"

    def _combine(self, grad_i, i):
        return grad_i - self.table[i] + self.table_sum


class SAGAFunction(_TableEstimator):
    """``N (grad f_i(x) - delta_i) + sum_j delta_j`` (unbiased)."""

    kind = "saga"

    def _combine(self, grad_i, i):
        return self.num_functions * (grad_i - self.table[i]) + self.table_sum


class _SnapshotEstimator(ApproximateGradientSumFunction):
    def __init__(self, functions, sampler=None):
        super().__init__(functions, sampler)
        self.snapshot = None
        self.snapshot_gradient = None
        self.snapshots_taken = 0

    def _take_snapshot(self, x):
        self.snapshot = x.copy()
        self.snapshot_gradient = self.full_gradient(x)
        self.snapshots_taken += 1
        return self.snapshot_gradient.copy()

    def _variance_reduced(self, x):
        i = self.next_index()
        gx = self.subset_gradient(x, i)
        gs = self.subset_gradient(self.snapshot, i)
        return self.num_functions * (gx - gs) + self.snapshot_gradient

    def estimate(self, x, i):
        if self.snapshot is None:
            raise ConfigurationError("no snapshot has been taken yet")
        gx = self.functions[i].gradient(x)
        gs = self.functions[i].gradient(self.snapshot)
        return self.num_functions * (gx - gs) + self.snapshot_gradient


class SVRGFunction(_SnapshotEstimator):
    """Snapshot and full gradient whenever the call counter is a multiple of ``update_frequency``.

    ``update_frequency`` defaults to ``2 N``.  On snapshot calls the full
    gradient ``sum_i grad f_i(x)`` is returned.
    """

    kind = "svrg"

    def __init__(self, functions, sampler=None, update_frequency=None):
        super().__init__(functions, sampler)
        if update_frequency is None:
            update_frequency = 2 * self.num_functions
        if update_frequency < 1:
            raise ConfigurationError("update_frequency must be at least 1")
        self.update_frequency = int(update_frequency)

    def _gradient(self, x):
        if self.call_count % self.update_frequency == 0:
            return self._take_snapshot(x)
        return self._variance_reduced(x)


class LSVRGFunction(_SnapshotEstimator):
    """Loopless SVRG: a snapshot is refreshed with probability ``update_prob`` per call.

    The first call always takes a snapshot.  The coin flips come from their
    own generator (``seed``) so the index stream is the same as for the
    other estimators under a shared sampler seed.
    """

    kind = "lsvrg"

    def __init__(self, functions, sampler=None, update_prob=None, seed=None):
        super().__init__(functions, sampler)
        if update_prob is None:
            update_prob = 1.0 / self.num_functions
        if not 0 < update_prob <= 1:
            raise ConfigurationError("update_prob must lie in (0, 1]")
        self.update_prob = float(update_prob)
        self.seed = seed
        self._coin = np.random.Generator(np.random.PCG64(seed))

    def _gradient(self, x):
        c = self._coin.uniform()
        if self.snapshot is None or c < self.update_prob:
            return self._take_snapshot(x)
        return self._variance_reduced(x)


_KINDS = {
    "full_sum": FullGradientFunction,
    "sg": SGFunction,
    "sag": SAGFunction,
    "saga": SAGAFunction,
    "svrg": SVRGFunction,
    "lsvrg": LSVRGFunction,
}


def make_estimator(kind, functions, sampler=None, **options):
    """Construct an estimator by name (``full_sum``, ``sg``, ``sag``, ``saga``, ``svrg``, ``lsvrg``)."""
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ConfigurationError(f"unknown estimator {kind!r}; choose from {sorted(_KINDS)}") from None
    return cls(functions, sampler, **options)
