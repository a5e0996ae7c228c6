"""Independent slow reference implementations used by the tests."""

from __future__ import annotations

import math


def primes_by_trial_division(limit: int) -> list[int]:
    out = []
    for n in range(2, limit + 1):
        r = math.isqrt(n)
        if all(n % p for p in out if p <= r):
            out.append(n)
    return out


def factorize(n: int) -> dict[int, int]:
    f: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            f[d] = f.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        f[n] = f.get(n, 0) + 1
    return f


def mobius_naive(n: int) -> int:
    fac = factorize(n)
    if any(e > 1 for e in fac.values()):
        return 0
    return -1 if len(fac) % 2 else 1


def multiplicative_naive(n: int, sign_of) -> int:
    """``|mu(n)| prod_{p | n} sign_of(p)`` by direct factorization."""
    fac = factorize(n)
    if any(e > 1 for e in fac.values()):
        return 0
    out = 1
    for p in fac:
        out *= sign_of(p)
    return out


def mertens_by_factorization(limit: int) -> list[int]:
    """``M(x)`` for every ``0 <= x <= limit`` (index = x)."""
    primes = primes_by_trial_division(math.isqrt(limit) + 1)
    out = [0] * (limit + 1)
    acc = 0
    for n in range(1, limit + 1):
        m, mu = n, 1
        for p in primes:
            if p * p > m:
                break
            if m % p == 0:
                m //= p
                if m % p == 0:
                    mu = 0
                    break
                mu = -mu
        if mu and m > 1:
            mu = -mu
        acc += mu
        out[n] = acc
    return out


def dirichlet_convolution(u, h, limit: int):
    """``(u * h)(n) = sum_{d | n} u(d) h(n / d)`` for ``n <= limit`` in exact integers."""
    import numpy as np

    u = np.asarray(u[: limit + 1], dtype=np.int64)
    h = np.asarray(h[: limit + 1], dtype=np.int64)
    out = np.zeros(limit + 1, dtype=np.int64)
    for d in np.flatnonzero(u):
        if d == 0:
            continue
        m = limit // d
        out[d : d * m + 1 : d] += u[d] * h[1 : m + 1]
    return out
