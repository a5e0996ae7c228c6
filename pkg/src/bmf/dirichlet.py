"""Complex evaluation of zeta, truncated Dirichlet series and Euler products.

Sums run in ascending n (or p) and are accumulated with ``math.fsum`` on the
real and imaginary parts, so results are bit-stable regardless of how
evaluations are scheduled.  Cutoffs are always explicit arguments.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CoverageError, DomainError, NumericalError, PreconditionError
from .sampling import (
    BiasProfile,
    OmegaSample,
    PrimeSignVector,
    _checked_bias_for_exchange,
    exchange,
    in_I,
    in_J,
)
from .sieve import MultiplicativeTable, sieve_primes

ComplexValue = complex

_LOG_CPLUS = math.log(3.0 + math.sqrt(8.0))
# |1 - 2**(1-s)| below this switches zeta to Euler-Maclaurin
_ETA_DENOM_FLOOR = 1e-3
_LOG_SPREAD = 1e3


@dataclass(frozen=True)
class TruncatedEvaluation:
    s: complex
    cutoff: int
    value: complex
    mode: str
    warning: str | None = None

    def __complex__(self) -> complex:
        return self.value

    def __abs__(self) -> float:
        return abs(self.value)


def as_complex(s) -> complex:
    z = complex(s)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise NumericalError(f"non-finite argument {s!r}")
    return z


def _finite(z: complex, what: str) -> complex:
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise NumericalError(f"{what} produced a non-finite value {z!r}")
    return z


def csum(z: np.ndarray) -> complex:
    """Correctly rounded sum of a complex array (per component)."""
    z = np.asarray(z, dtype=np.complex128)
    return complex(math.fsum(z.real), math.fsum(z.imag))


def neg_power(n: np.ndarray, s: complex) -> np.ndarray:
    """``n**-s`` for positive integers ``n`` as a complex array."""
    logn = np.log(np.asarray(n, dtype=np.float64))
    mag = np.exp(-s.real * logn)
    ph = -s.imag * logn
    return mag * (np.cos(ph) + 1j * np.sin(ph))


# zeta -------------------------------------------------------------------------


def _eta_borwein(s: complex) -> complex:
    t = abs(s.imag)
    # error ~ (1 + 2|t|) e^{pi |t| / 2} (3 + sqrt 8)^{-n}; aim well below 1e-13
    n = math.ceil((math.pi * t / 2 + math.log(3 + 6 * t) + 32.0) / _LOG_CPLUS)
    e = 1.0
    d = [1.0]
    for i in range(n):
        e *= 4.0 * (n + i) * (n - i) / ((2 * i + 1) * (2 * i + 2))
        d.append(d[-1] + e)
    d = np.asarray(d)
    k = np.arange(n)
    w = (d[:n] - d[n]) / d[n]
    w[1::2] *= -1.0
    return -csum(w * neg_power(k + 1, s))


_BERNOULLI = [Fraction(1, 6), Fraction(-1, 30), Fraction(1, 42), Fraction(-1, 30), Fraction(5, 66),
              Fraction(-691, 2730), Fraction(7, 6), Fraction(-3617, 510), Fraction(43867, 798),
              Fraction(-174611, 330)]


def _zeta_euler_maclaurin(s: complex) -> complex:
    N = 30 + int(abs(s.imag))
    head = csum(neg_power(np.arange(1, N), s))
    tail = N ** (1 - s) / (s - 1) + 0.5 * N ** (-s)
    rising = s
    corr = []
    for k, b in enumerate(_BERNOULLI, start=1):
        fact = math.factorial(2 * k)
        corr.append(float(b) / fact * rising * N ** (-s - 2 * k + 1))
        rising *= (s + 2 * k - 1) * (s + 2 * k)
    return head + tail + csum(np.array(corr))


def zeta(s) -> complex:
    """Riemann zeta for ``Re(s) > 0``, ``s != 1``.

    Uses the Borwein-accelerated alternating series for eta and
    ``zeta = eta / (1 - 2**(1-s))``.  Close to the zeros of that denominator
    (``s = 1 + 2 pi i k / log 2``) an Euler-Maclaurin sum takes over.
    """
    s = as_complex(s)
    if s.real <= 0.0:
        raise DomainError(f"zeta needs Re(s) > 0, got {s}")
    if s == 1:
        raise DomainError("zeta has a pole at s = 1")
    denom = 1.0 - 2.0 ** (1.0 - s)
    if abs(denom) < _ETA_DENOM_FLOOR:
        val = _zeta_euler_maclaurin(s)
    else:
        val = _eta_borwein(s) / denom
    return _finite(val, "zeta")


# truncated series ------------------------------------------------------------


def _table_terms(table: MultiplicativeTable, s: complex, lo: int, hi: int) -> np.ndarray:
    """Terms ``f(n) n**-s`` for ``lo <= n <= hi`` with ``f(n) != 0``."""
    vals = table.values[lo : hi + 1]
    idx = np.flatnonzero(vals)
    return vals[idx].astype(np.float64) * neg_power(idx + lo, s)


def truncated_series(table: MultiplicativeTable, s, N: int) -> TruncatedEvaluation:
    """``sum_{n <= N} f(n) n**-s``."""
    s = as_complex(s)
    N = int(N)
    if N > table.limit:
        raise CoverageError(f"table covers n <= {table.limit}, asked for N = {N}")
    if N < 1:
        raise DomainError("N must be >= 1")
    val = csum(_table_terms(table, s, 1, N))
    return TruncatedEvaluation(s, N, _finite(val, "truncated_series"), "series")


def series_at_cutoffs(table: MultiplicativeTable, s, cutoffs) -> list[complex]:
    """Partial sums ``S(N_i)`` at increasing cutoffs, one pass over the table."""
    s = as_complex(s)
    cuts = [int(c) for c in cutoffs]
    if any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise DomainError("cutoffs must be strictly increasing")
    if cuts and cuts[-1] > table.limit:
        raise CoverageError(f"table covers n <= {table.limit}, asked for {cuts[-1]}")
    seg_re: list[float] = []
    seg_im: list[float] = []
    out = []
    lo = 1
    for c in cuts:
        seg = csum(_table_terms(table, s, lo, c))
        seg_re.append(seg.real)
        seg_im.append(seg.imag)
        out.append(complex(math.fsum(seg_re), math.fsum(seg_im)))
        lo = c + 1
    return out


def prime_series(
    signs: PrimeSignVector, s, P: int, centered: bool = False, profile: BiasProfile | None = None
) -> TruncatedEvaluation:
    """``sum_{p <= P} f(p) p**-s``, or the centered ``(f(p) - E f(p))`` version."""
    s = as_complex(s)
    primes, vals = signs.upto(int(P))
    coef = vals.astype(np.float64)
    if centered:
        if profile is None:
            raise PreconditionError("centered prime series needs the bias profile")
        coef = coef - profile.mean_sign(primes)
    val = csum(coef * neg_power(primes, s))
    mode = "centered_prime_series" if centered else "prime_series"
    return TruncatedEvaluation(s, int(P), _finite(val, mode), mode)


# Euler products --------------------------------------------------------------


def _product(factors: np.ndarray) -> complex:
    if len(factors) == 0:
        return 1.0 + 0.0j
    mags = np.abs(factors)
    if mags.max() / mags.min() > _LOG_SPREAD:
        return _log_product(factors)
    out = 1.0 + 0.0j
    for z in factors.tolist():
        out *= z
    return out


def _log_product(factors: np.ndarray) -> complex:
    # principal logs per factor; exp() absorbs any multiple of 2 pi in the angle sum
    lm = math.fsum(np.log(np.abs(factors)))
    ang = math.fsum(np.angle(factors))
    return cmath.rect(math.exp(lm), ang)


def _check_half_plane(s: complex, what: str) -> str | None:
    if s.real <= 0.5:
        raise DomainError(f"{what} needs Re(s) > 1/2, got {s}")
    if s.real <= 1.0:
        return "Re(s) <= 1: truncated product outside its absolute convergence region"
    return None


def euler_factors(primes: np.ndarray, coef: np.ndarray, s: complex) -> np.ndarray:
    return 1.0 + np.asarray(coef, dtype=np.float64) * neg_power(primes, s)


def euler_product(signs: PrimeSignVector, s, P: int) -> TruncatedEvaluation:
    """``prod_{p <= P} (1 + f(p) p**-s)``."""
    s = as_complex(s)
    warn = _check_half_plane(s, "euler_product")
    if P < 2:
        return TruncatedEvaluation(s, int(P), 1.0 + 0.0j, "euler_product", warn)
    primes, vals = signs.upto(int(P))
    fac = euler_factors(primes, vals, s)
    if np.any(fac == 0):
        raise DomainError(f"vanishing Euler factor at s = {s}")
    return TruncatedEvaluation(s, int(P), _finite(_product(fac), "euler_product"), "euler_product", warn)


def mean_euler_product(profile: BiasProfile, s, P: int) -> complex:
    """Truncation of ``E F(s) = prod_{p <= P} (1 + E f(p) p**-s)``."""
    s = as_complex(s)
    if P < 2:
        return 1.0 + 0.0j
    primes = sieve_primes(int(P))
    fac = euler_factors(primes, profile.mean_sign(primes), s)
    if np.any(fac == 0):
        raise DomainError(f"vanishing mean Euler factor at s = {s}")
    return _finite(_product(fac), "mean_euler_product")


def euler_remainder(h_value: float, p: int, s) -> complex:
    """``A_p(s) = log(1 + h p**-s) - h p**-s`` on the principal branch."""
    s = as_complex(s)
    x = complex(h_value) * complex(neg_power(np.array([p]), s)[0])
    if abs(x) >= 1.0:
        raise DomainError(f"|h p^-s| = {abs(x):.3g} >= 1 at p = {p}")
    if abs(x) < 0.125:
        # series from m = 2 avoids the cancellation in log1p(x) - x
        acc = 0.0j
        xm = x
        for m in range(2, 80):
            xm *= x
            term = xm / m
            acc += term if m % 2 == 0 else -term
            if abs(term) < 1e-18 * max(abs(acc), 1e-300):
                break
        return -acc
    return cmath.log(1.0 + x) - x


def euler_remainder_sum(h: PrimeSignVector, s, P: int) -> complex:
    """``A(h, s) = sum_{p <= P} A_p(s)``."""
    s = as_complex(s)
    primes, vals = h.upto(int(P))
    parts = [euler_remainder(float(v), int(p), s) for p, v in zip(primes, vals) if v != 0]
    return csum(np.array(parts, dtype=np.complex128))


def theta(signs: PrimeSignVector, profile: BiasProfile, s, P: int) -> TruncatedEvaluation:
    """Truncated ``F(s) / E F(s)`` as ``prod (1 + f(p) p^-s) / (1 + E f(p) p^-s)``.

    Accumulated in log space.
    """
    s = as_complex(s)
    warn = _check_half_plane(s, "theta")
    if P < 2:
        return TruncatedEvaluation(s, int(P), 1.0 + 0.0j, "theta", warn)
    primes, vals = signs.upto(int(P))
    x = neg_power(primes, s)
    mean = profile.mean_sign(primes)
    coef = vals.astype(np.float64)
    den = 1.0 + mean * x
    if np.any(den == 0):
        raise DomainError(f"vanishing mean Euler factor at s = {s}")
    if np.any(1.0 + coef * x == 0):
        raise DomainError(f"vanishing Euler factor at s = {s}")
    # 1 + (f - E f) x / den is exactly 1 wherever f(p) = E f(p)
    val = _log_product(1.0 + (coef - mean) * x / den)
    return TruncatedEvaluation(s, int(P), _finite(val, "theta"), "theta", warn)


# partial summation -----------------------------------------------------------


def abel_transform(source, s, N: int) -> complex:
    """``sum_{n <= N} f(n) n**-s`` rebuilt from partial sums ``M(k)``.

    ``M(N) N**-s + sum_{k < N} M(k) (k**-s - (k+1)**-s)``.  ``source`` is a
    :class:`MultiplicativeTable` or an integer array with ``source[k] = M(k)``.
    """
    s = as_complex(s)
    N = int(N)
    if isinstance(source, MultiplicativeTable):
        if N > source.limit:
            raise CoverageError(f"table covers n <= {source.limit}, asked for N = {N}")
        M = np.cumsum(source.values[: N + 1], dtype=np.int64)
    else:
        M = np.asarray(source, dtype=np.int64)
        if len(M) <= N:
            raise CoverageError(f"partial sums cover k <= {len(M) - 1}, asked for N = {N}")
    if N < 1:
        raise DomainError("N must be >= 1")
    k = np.arange(1, N, dtype=np.float64)
    kp = neg_power(k, s) if N > 1 else np.zeros(0, np.complex128)
    # k^-s - (k+1)^-s = -k^-s expm1(-s log1p(1/k)), free of cancellation
    delta = -kp * np.expm1(-s * np.log1p(1.0 / k))
    terms = M[1:N].astype(np.float64) * delta
    boundary = float(M[N]) * complex(neg_power(np.array([N]), s)[0])
    return _finite(csum(np.append(terms, boundary)), "abel_transform")


# product identity factors ----------------------------------------------------


def phi_psi_factor(omega: OmegaSample, profile: BiasProfile, p: int, s) -> tuple[complex, complex]:
    """Per-prime factors of ``zeta F`` at ``omega`` and of ``G / U`` at ``T omega``.

    ``phi = (p^s + 1_J(omega_p)) / (p^s - 1_J(omega_p))`` and ``psi`` is the
    same expression with ``1_I`` evaluated at the exchanged coordinate.
    """
    s = as_complex(s)
    if s.real <= 0.0:
        raise DomainError(f"need Re(s) > 0, got {s}")
    ps = complex(1.0 / neg_power(np.array([p]), s)[0])
    if ps == 1 or ps == -1:
        raise NumericalError(f"singular factor: p^s = {ps}")
    a = _checked_bias_for_exchange(profile, np.array([p]))
    w = np.array([omega.at(p)])
    j = float(in_J(w, a)[0])
    i = float(in_I(exchange(w, a), a)[0])
    return (ps + j) / (ps - j), (ps + i) / (ps - i)
