"""Prime and Möbius sieving, multiplicative tables and checkpointed partial sums.

All arrays are indexed by the integer itself (slot 0 is unused) and are
marked read-only once built, so tables can be shared between workers.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np

from .errors import CapacityError, CoverageError, DomainError, EmptyRangeError

if TYPE_CHECKING:
    from .sampling import PrimeSignVector

DEFAULT_N_MAX = 10**8
DEFAULT_GRID_RATIO = 1.05
GRID_START = 10


def n_max() -> int:
    """Configured table capacity (``BMF_N_MAX`` overrides the default)."""
    env = os.environ.get("BMF_N_MAX")
    return int(float(env)) if env else DEFAULT_N_MAX


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=4)
def _primes_upto(limit: int) -> np.ndarray:
    is_p = np.ones(limit + 1, dtype=bool)
    is_p[:2] = False
    for i in range(2, math.isqrt(limit) + 1):
        if is_p[i]:
            is_p[i * i :: i] = False
    return _frozen(np.flatnonzero(is_p).astype(np.int64))


def sieve_primes(limit: int) -> np.ndarray:
    """Return the primes in ``[2, limit]`` in ascending order (int64 array)."""
    limit = int(limit)
    if limit < 2:
        raise EmptyRangeError(f"no primes below {limit}; limit must be >= 2")
    if limit > n_max():
        raise CapacityError(f"limit {limit} exceeds configured cap {n_max()}")
    return _primes_upto(limit)


def is_prime(n: int) -> bool:
    n = int(n)
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    for d in range(3, math.isqrt(n) + 1, 2):
        if n % d == 0:
            return False
    return True


def _dyadic_blocks(limit: int):
    # n // spf(n) <= n / 2, so block [lo, 2 lo) only reads earlier blocks
    lo = 2
    while lo <= limit:
        hi = min(2 * lo, limit + 1)
        yield lo, hi
        lo = hi


@dataclass(frozen=True)
class SieveTables:
    limit: int
    spf: np.ndarray  # int32, spf[1] = 1
    mobius: np.ndarray  # int8

    @property
    def primes(self) -> np.ndarray:
        return _primes_upto(self.limit) if self.limit >= 2 else np.zeros(0, np.int64)


def _spf_table(limit: int) -> np.ndarray:
    spf = np.zeros(limit + 1, dtype=np.int32)
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == 0:
            seg = spf[p * p :: p]
            seg[seg == 0] = p
    rest = np.flatnonzero(spf == 0)
    spf[rest] = rest.astype(np.int32)
    spf[0] = 0
    if limit >= 1:
        spf[1] = 1
    return spf


@lru_cache(maxsize=2)
def _cached_tables(limit: int) -> SieveTables:
    spf = _spf_table(limit)
    mu = np.zeros(limit + 1, dtype=np.int8)
    mu[1] = 1
    for lo, hi in _dyadic_blocks(limit):
        n = np.arange(lo, hi, dtype=np.int64)
        p = spf[lo:hi].astype(np.int64)
        cof = n // p
        mu[lo:hi] = np.where(cof % p == 0, 0, -mu[cof])
    return SieveTables(limit, _frozen(spf), _frozen(mu))


def build_sieve_tables(limit: int, max_limit: int | None = None) -> SieveTables:
    """Smallest-prime-factor and Möbius tables for ``1..limit``.

    Tables are cached per limit; the returned arrays are read-only.
    """
    limit = int(limit)
    cap = n_max() if max_limit is None else int(max_limit)
    if limit < 1:
        raise DomainError(f"limit must be >= 1, got {limit}")
    if limit > cap:
        raise CapacityError(f"limit {limit} exceeds configured cap {cap}")
    return _cached_tables(limit)


@dataclass(frozen=True)
class MultiplicativeTable:
    limit: int
    values: np.ndarray  # int8, values[0] unused
    profile_id: str = "custom"
    seed: int | None = None

    def __getitem__(self, n: int) -> int:
        return int(self.values[n])


def build_table(signs: PrimeSignVector, limit: int) -> MultiplicativeTable:
    """Extend prime signs to every ``n <= limit`` by the spf recursion.

    ``f(n) = 0`` when ``spf(n)**2 | n``; otherwise ``f(n) = f(n/spf(n)) f(spf(n))``.
    """
    limit = int(limit)
    if signs.p_max < limit:
        raise CoverageError(f"signs cover primes <= {signs.p_max}, need {limit}")
    tables = build_sieve_tables(limit)
    prime_sign = np.zeros(limit + 1, dtype=np.int8)
    keep = signs.primes <= limit
    prime_sign[signs.primes[keep]] = signs.values[keep]

    f = np.zeros(limit + 1, dtype=np.int8)
    f[1] = 1
    sqfree = tables.mobius != 0
    for lo, hi in _dyadic_blocks(limit):
        p = tables.spf[lo:hi].astype(np.int64)
        cof = np.arange(lo, hi, dtype=np.int64) // p
        f[lo:hi] = f[cof] * prime_sign[p] * sqfree[lo:hi]
    return MultiplicativeTable(limit, _frozen(f), signs.profile_id, signs.seed)


def mobius_table(limit: int) -> MultiplicativeTable:
    return MultiplicativeTable(int(limit), build_sieve_tables(limit).mobius, "mobius", None)


@dataclass(frozen=True)
class PartialSumSeries:
    grid: np.ndarray  # int64, strictly increasing, last entry = limit
    sums: np.ndarray  # int64 M_f(x_i)
    running_max: np.ndarray  # int64 max_{x <= x_i} |M_f(x)|
    limit: int
    profile_id: str = "custom"
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.grid)


def geometric_grid(limit: int, ratio: float = DEFAULT_GRID_RATIO) -> np.ndarray:
    """Checkpoints ``x_{i+1} = max(x_i + 1, ceil(ratio x_i))`` from 10, capped by ``limit``.

    ``limit`` itself is always the final checkpoint.
    """
    ratio = float(ratio)
    if not 1.0 < ratio <= 2.0:
        raise DomainError(f"grid ratio must lie in (1, 2], got {ratio}")
    pts = []
    x = GRID_START
    while x < limit:
        pts.append(x)
        x = max(x + 1, math.ceil(ratio * x))
    pts.append(limit)
    return np.asarray(pts, dtype=np.int64)


def partial_sums(
    table: MultiplicativeTable, grid_ratio: float = DEFAULT_GRID_RATIO, block: int = 1 << 20
) -> PartialSumSeries:
    """Exact ``M_f(x)`` and running max of ``|M_f|`` at geometric checkpoints.

    One pass over the table in fixed-size blocks, so memory stays O(block).
    """
    grid = geometric_grid(table.limit, grid_ratio)
    sums = np.empty(len(grid), dtype=np.int64)
    rmax = np.empty(len(grid), dtype=np.int64)
    carry = 0
    best = 0
    gi = 0
    for lo in range(1, table.limit + 1, block):
        hi = min(lo + block, table.limit + 1)
        cs = np.cumsum(table.values[lo:hi], dtype=np.int64)
        cs += carry
        run = np.maximum.accumulate(np.abs(cs))
        np.maximum(run, best, out=run)
        gj = int(np.searchsorted(grid, hi, side="left"))
        if gj > gi:
            idx = grid[gi:gj] - lo
            sums[gi:gj] = cs[idx]
            rmax[gi:gj] = run[idx]
            gi = gj
        carry = int(cs[-1])
        best = int(run[-1])
    return PartialSumSeries(
        grid=_frozen(grid),
        sums=_frozen(sums),
        running_max=_frozen(rmax),
        limit=table.limit,
        profile_id=table.profile_id,
        seed=table.seed,
        meta={"grid_ratio": float(grid_ratio)},
    )


def mertens(limit: int, grid_ratio: float = DEFAULT_GRID_RATIO) -> PartialSumSeries:
    """Checkpointed Mertens function ``M_mu(x)``."""
    return partial_sums(mobius_table(limit), grid_ratio)
