"""Quasi-random draws for simulated likelihood: Halton sequences with
distinct prime bases per dimension, transformed to standard normal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import InvalidConfig

DEFAULT_PRIMES = (2, 3)
DEFAULT_BURN_IN = 10
DEFAULT_R = 250


def halton_sequence(base: int, length: int, burn_in: int = DEFAULT_BURN_IN) -> np.ndarray:
    """First ``length`` Halton points in (0, 1) for ``base``, after
    discarding ``burn_in`` initial elements."""
    total = length + burn_in
    out = np.zeros(total)
    for i in range(total):
        f, frac = i + 1, 1.0
        while f > 0:
            frac /= base
            out[i] += frac * (f % base)
            f //= base
    return out[burn_in:]


@dataclass(frozen=True)
class DrawSet:
    """Standard-normal quasi-random draws: (n_individuals, R, dims)."""

    values: np.ndarray
    primes: tuple
    burn_in: int

    @property
    def n_individuals(self) -> int:
        return self.values.shape[0]

    @property
    def r(self) -> int:
        return self.values.shape[1]

    @property
    def dims(self) -> int:
        return self.values.shape[2]


def halton_draws(n_individuals: int, r: int = DEFAULT_R, dims: int = 1,
                 primes=DEFAULT_PRIMES, burn_in: int = DEFAULT_BURN_IN) -> DrawSet:
    """Deterministic draw set shared by every model request in a session.

    One long Halton stream per dimension, cut into consecutive blocks of R
    draws per individual, then inverse-normal transformed.
    """
    if dims > len(primes):
        raise InvalidConfig(f"need {dims} prime bases, have {len(primes)}")
    if dims < 1 or n_individuals < 1 or r < 1:
        raise InvalidConfig("n_individuals, r and dims must be positive")
    total = n_individuals * r
    values = np.empty((n_individuals, r, dims))
    for d in range(dims):
        uniform = halton_sequence(primes[d], total, burn_in)
        values[:, :, d] = norm.ppf(uniform).reshape(n_individuals, r)
    values.setflags(write=False)
    return DrawSet(values, tuple(primes[:dims]), burn_in)
