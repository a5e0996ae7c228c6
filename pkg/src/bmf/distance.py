"""Pretentious distances between sign sequences and tail-convergence diagnostics.

Convergence verdicts are heuristics over finite data and are labeled as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, DomainError, InsufficientDataError
from .sampling import PrimeSignVector
from .sieve import sieve_primes

DEFAULT_THRESHOLD = 1e-2
DEFAULT_GROWTH_RATIO = 1.5
DEFAULT_CEILING = 1e6
VERDICTS = ("converging", "inconclusive", "diverging")


@dataclass(frozen=True)
class DistanceValue:
    sigma: float
    p_bound: int
    squared_value: float
    diverged: bool = False

    @property
    def value(self) -> float:
        return math.sqrt(self.squared_value)


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not 0.5 < sigma <= 1.0:
        raise DomainError(f"sigma must lie in (1/2, 1], got {sigma}")
    return sigma


def _check_binary(v: PrimeSignVector, name: str) -> None:
    if v.support != "binary" or np.any(v.values == 0):
        raise DomainError(f"{name} must be a binary (+-1) sign vector")


def _disagreement_terms(f: PrimeSignVector, g: PrimeSignVector, sigma: float, P: int):
    pf, vf = f.upto(P)
    pg, vg = g.upto(P)
    if len(pf) != len(pg) or not np.array_equal(pf, pg):
        raise CoverageError("sign vectors do not cover the same primes")
    differ = vf != vg
    primes = pf[differ]
    return primes, 2.0 * primes.astype(np.float64) ** (-sigma)


def d_sigma(
    f: PrimeSignVector, g: PrimeSignVector, sigma: float, P: int, ceiling: float = DEFAULT_CEILING
) -> DistanceValue:
    """Squared distance ``sum_{p <= P} (1 - f(p) g(p)) / p**sigma``.

    A term is ``2 / p**sigma`` where the signs differ and 0 otherwise, so the
    result is exactly symmetric in ``f`` and ``g``.
    """
    sigma = _check_sigma(sigma)
    _check_binary(f, "f")
    _check_binary(g, "g")
    _, terms = _disagreement_terms(f, g, sigma, int(P))
    val = math.fsum(terms)
    return DistanceValue(sigma, int(P), val, val > ceiling)


def d_sigma_at_cutoffs(
    f: PrimeSignVector, g: PrimeSignVector, sigma: float, cutoffs, ceiling: float = DEFAULT_CEILING
) -> list[DistanceValue]:
    """Squared distances at several prime bounds, sharing one pass over the terms."""
    sigma = _check_sigma(sigma)
    _check_binary(f, "f")
    _check_binary(g, "g")
    cuts = [int(c) for c in cutoffs]
    if any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise DomainError("cutoffs must be strictly increasing")
    if not cuts:
        return []
    primes, terms = _disagreement_terms(f, g, sigma, cuts[-1])
    out = []
    parts: list[float] = []
    lo = 0
    for c in cuts:
        hi = int(np.searchsorted(primes, c, side="right"))
        parts.append(math.fsum(terms[lo:hi]))
        val = math.fsum(parts)
        out.append(DistanceValue(sigma, c, val, val > ceiling))
        lo = hi
    return out


def classical_distance(g, h, x: int) -> float:
    """``sqrt(sum_{p <= x} (1 - g(p) h(p)) / p)`` for real-valued tables.

    ``g`` and ``h`` are :class:`PrimeSignVector` objects or arrays indexed by
    the integer (as in a multiplicative table's ``values``).
    """
    x = int(x)
    if x < 2:
        return 0.0
    primes = sieve_primes(x)
    gv = _values_on_primes(g, primes, x, "g")
    hv = _values_on_primes(h, primes, x, "h")
    if np.any(np.abs(gv) > 1) or np.any(np.abs(hv) > 1):
        raise DomainError("table values must lie in [-1, 1]")
    terms = (1.0 - gv * hv) / primes.astype(np.float64)
    return math.sqrt(max(math.fsum(terms), 0.0))


def _values_on_primes(src, primes: np.ndarray, x: int, name: str) -> np.ndarray:
    if isinstance(src, PrimeSignVector):
        _, vals = src.upto(x)
        return vals.astype(np.float64)
    arr = np.asarray(getattr(src, "values", src), dtype=np.float64)
    if len(arr) <= x:
        raise CoverageError(f"{name} covers n <= {len(arr) - 1}, need {x}")
    return arr[primes]


# tail diagnostics ------------------------------------------------------------


@dataclass(frozen=True)
class TrendReport:
    cutoffs: list[int]
    values: list[complex]
    diffs: list[float]
    decay_slope: float
    early_mean_diff: float
    late_mean_diff: float
    verdict: str
    threshold: float
    growth_ratio: float
    meta: dict = field(default_factory=dict)

    @property
    def final_diff(self) -> float:
        return self.diffs[-1]

    def to_json(self) -> dict:
        vals = [complex(v) for v in self.values]
        return {
            "verdict": self.verdict,
            "final_diff": self.final_diff,
            "decay_slope": self.decay_slope,
            "early_mean_diff": self.early_mean_diff,
            "late_mean_diff": self.late_mean_diff,
            "threshold": self.threshold,
            "growth_ratio": self.growth_ratio,
            "cutoffs": list(self.cutoffs),
            "values_re": [v.real for v in vals],
            "values_im": [v.imag for v in vals],
            "diffs": list(self.diffs),
        }


def tail_diagnostic(
    cutoffs,
    values,
    threshold: float = DEFAULT_THRESHOLD,
    growth_ratio: float = DEFAULT_GROWTH_RATIO,
) -> TrendReport:
    """Heuristic convergence verdict for partial values ``S(N_i)`` at geometric cutoffs.

    With ``diffs = |S(N_{i+1}) - S(N_i)|`` split into an early and a late half:

    * ``converging``: the late diffs are smaller on average than the early
      ones and the final diff is below ``threshold``.
    * ``diverging``: every increment points the same way, the late diffs
      are at least ``1/growth_ratio`` of the early ones on average, and the
      final diff is at least ``threshold``.
    * ``inconclusive`` otherwise.

    ``decay_slope`` is the least-squares slope of ``log diff`` against ``log N``.
    """
    cuts = np.asarray([int(c) for c in cutoffs], dtype=np.int64)
    vals = np.asarray(values, dtype=np.complex128)
    if len(cuts) != len(vals):
        raise DomainError("cutoffs and values differ in length")
    if len(cuts) < 4:
        raise InsufficientDataError(f"need at least 4 cutoffs, got {len(cuts)}")
    if np.any(np.diff(cuts) <= 0):
        raise DomainError("cutoffs must be strictly increasing")
    if not np.all(np.isfinite(vals)):
        raise DomainError("values must be finite")

    steps = np.diff(vals)
    diffs = np.abs(steps)
    logn = np.log(cuts[1:].astype(np.float64))
    pos = diffs > 0
    if pos.sum() >= 2:
        decay_slope = float(np.polyfit(logn[pos], np.log(diffs[pos]), 1)[0])
    else:
        decay_slope = float("-inf")

    half = len(diffs) // 2
    early = math.fsum(diffs[:half]) / half
    late = math.fsum(diffs[half:]) / (len(diffs) - half)
    final = float(diffs[-1])

    ref = steps[np.argmax(diffs)]
    one_sign = bool(ref != 0 and np.all((steps * np.conj(ref)).real > 0))

    if final < threshold and late < early:
        verdict = "converging"
    elif one_sign and late >= early / growth_ratio and final >= threshold:
        verdict = "diverging"
    else:
        verdict = "inconclusive"
    return TrendReport(
        cutoffs=[int(c) for c in cuts],
        values=[complex(v) for v in vals],
        diffs=[float(d) for d in diffs],
        decay_slope=decay_slope,
        early_mean_diff=early,
        late_mean_diff=late,
        verdict=verdict,
        threshold=float(threshold),
        growth_ratio=float(growth_ratio),
    )


def geometric_cutoffs(lo: int, hi: int, ratio: float) -> list[int]:
    """Integer cutoffs ``lo, ~lo*ratio, ...`` ending exactly at ``hi``."""
    lo, hi, ratio = int(lo), int(hi), float(ratio)
    if lo < 1 or hi <= lo:
        raise DomainError(f"need 1 <= lo < hi, got {lo}, {hi}")
    if ratio <= 1.0:
        raise DomainError(f"cutoff ratio must exceed 1, got {ratio}")
    out = [lo]
    k = 1
    while True:
        nxt = int(round(lo * ratio**k))
        k += 1
        if nxt >= hi * (1 - 1e-12):
            break
        if nxt > out[-1]:
            out.append(nxt)
    out.append(hi)
    return out
