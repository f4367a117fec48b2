"""Index samplers that pick the subset ``i_k`` used at each estimator call.

Random strategies draw from numpy's PCG64 generator seeded with the
user seed, so a given ``(strategy, seed)`` always yields the same sequence.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

__all__ = ["Sampler", "staggered_order", "herman_meyer_order", "prime_factors"]


def prime_factors(n):
    """Prime factors of ``n`` in ascending order, with multiplicity."""
    out = []
    p = 2
    while p * p <= n:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def staggered_order(n, stride):
    """``0, s, 2s, ..., 1, 1+s, ...``: every index below ``n`` exactly once."""
    if not 1 <= stride <= n:
        raise ConfigurationError(f"stride must lie in [1, {n}], got {stride}")
    return [i for offset in range(stride) for i in range(offset, n, stride)]


def herman_meyer_order(n):
    """Generalised digit-reversal permutation of ``range(n)``.

    With ``n = p_1 * ... * p_m`` (ascending primes), position ``k`` is
    written in mixed radix with ``p_1`` as the least significant base and
    the digits are read back in reverse order.  For ``n = 2**m`` this is
    plain bit reversal.
    """
    factors = prime_factors(n)
    if n > 1 and len(factors) == 1:
        raise ConfigurationError(f"Herman-Meyer ordering needs a non-prime number of indices, got {n}")
    order = []
    for k in range(n):
        idx, rem = 0, k
        weight = n
        for p in factors:
            rem, digit = divmod(rem, p)
            weight //= p
            idx += digit * weight
        order.append(idx)
    return order


class Sampler:
    """Stateful index generator; use :func:`next` or :meth:`next`.

    Build instances through the named constructors (``Sampler.sequential``,
    ``Sampler.random_with_replacement``, ...).
    """

    def __init__(self, num_indices, strategy, seed=None, prob=None, order=None, function=None):
        if num_indices < 1:
            raise ConfigurationError("num_indices must be positive")
        self.num_indices = int(num_indices)
        self.strategy = strategy
        self.seed = seed
        self.prob = None if prob is None else np.asarray(prob, dtype=float)
        self.order = order
        self.function = function
        self.reset()

    # -- constructors ---------------------------------------------------
    @classmethod
    def sequential(cls, num_indices):
        return cls(num_indices, "sequential", order=list(range(num_indices)))

    @classmethod
    def staggered(cls, num_indices, stride):
        return cls(num_indices, "staggered", order=staggered_order(num_indices, stride))

    @classmethod
    def herman_meyer(cls, num_indices):
        return cls(num_indices, "herman_meyer", order=herman_meyer_order(num_indices))

    @classmethod
    def random_with_replacement(cls, num_indices, prob=None, seed=None):
        if prob is not None:
            prob = np.asarray(prob, dtype=float)
            if prob.shape != (num_indices,):
                raise ConfigurationError(f"need {num_indices} probabilities, got {prob.size}")
            if np.any(prob <= 0) or abs(prob.sum() - 1.0) > 1e-12:
                raise ConfigurationError("probabilities must be positive and sum to one")
        return cls(num_indices, "random_with_replacement", seed=seed, prob=prob)

    @classmethod
    def random_without_replacement(cls, num_indices, seed=None):
        return cls(num_indices, "random_without_replacement", seed=seed)

    @classmethod
    def from_function(cls, num_indices, function):
        return cls(num_indices, "from_function", function=function)

    # -- state ----------------------------------------------------------
    def reset(self):
        self.call_count = 0
        self._rng = np.random.Generator(np.random.PCG64(self.seed))
        self._epoch = None

    def fresh(self):
        """An independent sampler in its initial state."""
        return Sampler(self.num_indices, self.strategy, seed=self.seed, prob=self.prob,
                       order=self.order, function=self.function)

    def next(self):
        k = self.call_count
        n = self.num_indices
        if self.order is not None:
            idx = self.order[k % n]
        elif self.strategy == "random_with_replacement":
            if self.prob is None:
                idx = int(self._rng.integers(n))
            else:
                idx = int(self._rng.choice(n, p=self.prob))
        elif self.strategy == "random_without_replacement":
            if k % n == 0:
                self._epoch = self._rng.permutation(n)
            idx = int(self._epoch[k % n])
        elif self.strategy == "from_function":
            value = self.function(k)
            idx = int(value)
            if not 0 <= idx < n:
                raise ConfigurationError(f"sampling function returned {value!r} at call {k}, outside [0, {n})")
        else:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        self.call_count = k + 1
        return int(idx)

    __next__ = next

    def __iter__(self):
        return self

    def sequence(self, calls):
        """The first ``calls`` indices of a fresh copy (this sampler is untouched)."""
        s = self.fresh()
        return [s.next() for _ in range(calls)]

    def histogram(self, calls):
        """Per-index counts over ``calls`` draws from a fresh copy."""
        if calls < 1:
            raise ValueError("calls must be at least 1")
        return np.bincount(self.sequence(calls), minlength=self.num_indices)

    def __repr__(self):
        return f"Sampler({self.num_indices}, {self.strategy!r}, seed={self.seed})"
