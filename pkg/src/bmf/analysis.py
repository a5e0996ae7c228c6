"""Ensemble experiments over sampled multiplicative functions.

Work is split per seed; each seed's pipeline touches only read-only shared
tables, so results do not depend on the worker count or on scheduling.
"""

from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .dirichlet import (
    as_complex,
    euler_product,
    phi_psi_factor,
    prime_series,
    series_at_cutoffs,
    theta,
    truncated_series,
    zeta,
)
from .distance import TrendReport, tail_diagnostic
from .errors import BMFError, DomainError, InsufficientDataError, PreconditionError
from .sampling import (
    BiasProfile,
    OmegaSample,
    PrimeSignVector,
    coupled_g_signs,
    interval_exchange,
    realize,
    sample_omega,
)
from .sieve import (
    DEFAULT_GRID_RATIO,
    MultiplicativeTable,
    PartialSumSeries,
    build_sieve_tables,
    build_table,
    n_max,
    partial_sums,
)

DEFAULT_WINDOW_FRACTION = 0.5
MIN_CHECKPOINTS = 20
MIN_WINDOW_POINTS = 5
EXPONENT_CEILING = 1.05
# sixteen cutoffs per decade, see critical_point_convergence
CRITICAL_CUTOFF_RATIO = 10 ** (1 / 16)
IDENTITY_TOLERANCE = 1e-10


# parallel map ----------------------------------------------------------------


def _run_one(fn, seed):
    try:
        return seed, fn(seed), None
    except BMFError as exc:
        return seed, None, f"{type(exc).__name__}: {exc}"


def map_seeds(fn, seeds, workers: int = 1) -> list[tuple[int, object, str | None]]:
    """Apply ``fn(seed)`` to every seed; returns ``(seed, result, error)`` in seed-list order.

    Package errors are caught per seed so one failure does not stop the rest.
    """
    seeds = [int(s) for s in seeds]
    workers = max(1, int(workers))
    if workers == 1 or len(seeds) == 1:
        return [_run_one(fn, s) for s in seeds]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=min(workers, len(seeds)), mp_context=ctx) as pool:
        return list(pool.map(partial(_run_one, fn), seeds))


# growth exponents ------------------------------------------------------------


@dataclass(frozen=True)
class GrowthFit:
    exponent: float
    stderr: float
    r_squared: float
    fit_window: tuple[int, int]
    n_points: int
    seed: int | None = None

    @property
    def flagged(self) -> bool:
        """True when the slope leaves the range possible for ``|M| <= x``."""
        return not 0.0 <= self.exponent <= EXPONENT_CEILING

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "exponent": self.exponent,
            "stderr": self.stderr,
            "r_squared": self.r_squared,
            "fit_window": list(self.fit_window),
            "n_points": self.n_points,
            "flagged": self.flagged,
        }


def series_from_checkpoints(grid, sums, limit: int | None = None, profile_id: str = "synthetic") -> PartialSumSeries:
    """Wrap given checkpoint values; the running max is taken over the checkpoints only."""
    grid = np.asarray(grid, dtype=np.int64)
    sums = np.asarray(sums, dtype=np.int64)
    rmax = np.maximum.accumulate(np.abs(sums))
    lim = int(grid[-1]) if limit is None else int(limit)
    return PartialSumSeries(grid, sums, rmax, lim, profile_id)


def fit_growth_exponent(series: PartialSumSeries, window_fraction: float = DEFAULT_WINDOW_FRACTION) -> GrowthFit:
    """Least-squares slope of ``log(running_max + 1)`` against ``log x``.

    Only checkpoints in the top ``window_fraction`` of the log-x range enter
    the fit.
    """
    if not 0.0 < window_fraction <= 1.0:
        raise DomainError(f"window_fraction must lie in (0, 1], got {window_fraction}")
    if len(series) < MIN_CHECKPOINTS:
        raise InsufficientDataError(f"need >= {MIN_CHECKPOINTS} checkpoints, got {len(series)}")
    logx = np.log(series.grid.astype(np.float64))
    cut = logx[-1] - window_fraction * (logx[-1] - logx[0])
    sel = logx >= cut - 1e-12
    n = int(sel.sum())
    if n < MIN_WINDOW_POINTS:
        raise InsufficientDataError(f"only {n} checkpoints in the fit window")
    x = logx[sel]
    y = np.log(series.running_max[sel].astype(np.float64) + 1.0)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    resid = y - (ym + slope * (x - xm))
    ssr = float(np.sum(resid**2))
    sst = float(np.sum((y - ym) ** 2))
    stderr = math.sqrt(ssr / (n - 2) / sxx) if n > 2 else 0.0
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    window = (int(series.grid[sel][0]), int(series.grid[sel][-1]))
    return GrowthFit(slope, stderr, r2, window, n, series.seed)


@dataclass(frozen=True)
class EnsembleSummary:
    profile: BiasProfile
    N: int
    seeds: list[int]
    fits: list[GrowthFit]
    failures: dict[int, str] = field(default_factory=dict)
    quantiles: dict[str, float] = field(default_factory=dict)
    grid_ratio: float = DEFAULT_GRID_RATIO
    window_fraction: float = DEFAULT_WINDOW_FRACTION

    @property
    def median(self) -> float:
        return self.quantiles["q50"]

    def to_json(self) -> dict:
        return {
            "profile": self.profile.to_json(),
            "profile_label": self.profile.label(),
            "N": self.N,
            "seeds": list(self.seeds),
            "grid_ratio": self.grid_ratio,
            "window_fraction": self.window_fraction,
            "quantiles": dict(self.quantiles),
            "fits": [f.to_json() for f in self.fits],
            "failures": {str(k): v for k, v in self.failures.items()},
        }


def seed_series(profile: BiasProfile, N: int, seed: int, grid_ratio: float = DEFAULT_GRID_RATIO) -> PartialSumSeries:
    """Sample, realize, sieve and sum for one seed."""
    omega = sample_omega(seed, N)
    table = build_table(realize(omega, profile), N)
    return partial_sums(table, grid_ratio)


def _ensemble_task(profile, N, grid_ratio, window_fraction, seed):
    return fit_growth_exponent(seed_series(profile, N, seed, grid_ratio), window_fraction)


def run_ensemble(
    profile: BiasProfile,
    N: int,
    seeds,
    grid_ratio: float = DEFAULT_GRID_RATIO,
    window_fraction: float = DEFAULT_WINDOW_FRACTION,
    workers: int = 1,
) -> EnsembleSummary:
    """Growth-exponent fits for each seed plus 10/50/90 % quantiles."""
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise InsufficientDataError("an ensemble needs at least 2 seeds")
    if len(set(seeds)) != len(seeds):
        raise DomainError("seeds must be distinct")
    N = int(N)
    build_sieve_tables(N)  # built once before forking workers
    task = partial(_ensemble_task, profile, N, float(grid_ratio), float(window_fraction))
    fits, failures = [], {}
    for seed, fit, err in map_seeds(task, seeds, workers):
        if err is None:
            fits.append(fit)
        else:
            failures[seed] = err
    if not fits:
        raise InsufficientDataError(f"every seed failed: {failures}")
    ex = np.array([f.exponent for f in fits])
    q10, q50, q90 = (float(v) for v in np.quantile(ex, [0.1, 0.5, 0.9]))
    return EnsembleSummary(
        profile, N, seeds, fits, failures, {"q10": q10, "q50": q50, "q90": q90}, float(grid_ratio), float(window_fraction)
    )


# vertical scans --------------------------------------------------------------


def _glog(x):
    return np.log(np.maximum(math.e, x))


def envelope(t, sigma: float, vartheta: int = 1) -> np.ndarray:
    """``L(t)**(vartheta (1 - sigma)) * L(L(L(t)))`` with ``L(x) = log(max(e, x))``."""
    t = np.asarray(t, dtype=np.float64)
    return _glog(t) ** (vartheta * (1.0 - sigma)) * _glog(_glog(_glog(t)))


@dataclass(frozen=True)
class VerticalScanDiagnostic:
    sigma: float
    t: np.ndarray
    values: np.ndarray
    envelope: np.ndarray
    windows: list[tuple[float, float, float]]  # (t_lo, t_hi, max ratio)
    vartheta: int = 1
    mode: str = "prime"
    cutoff: int = 0
    seed: int | None = None

    @property
    def ratios(self) -> np.ndarray:
        return self.values / self.envelope

    @property
    def window_growth(self) -> float:
        """Max ratio in the last dyadic window over that in the first."""
        return self.windows[-1][2] / self.windows[0][2]


def vertical_scan(
    signs: PrimeSignVector,
    profile: BiasProfile,
    sigma: float,
    t_max: float,
    n_points: int,
    N: int,
    mode: str = "prime",
    vartheta: int = 1,
) -> VerticalScanDiagnostic:
    """``|F|`` along ``sigma + it`` for log-spaced ``t`` in ``[2, t_max]``, against the envelope.

    ``mode="prime"`` uses the centered prime series up to ``N``; ``mode="theta"``
    uses ``|theta|`` truncated at ``N``.
    """
    sigma = float(sigma)
    if not 0.5 < sigma <= 1.0:
        raise DomainError(f"sigma must lie in (1/2, 1], got {sigma}")
    if t_max < 2.0:
        raise DomainError(f"t_max must be >= 2, got {t_max}")
    if int(n_points) < 1:
        raise DomainError("n_points must be >= 1")
    if mode not in ("prime", "theta"):
        raise DomainError(f"unknown scan mode {mode!r}")
    ts = np.geomspace(2.0, float(t_max), int(n_points)) if n_points > 1 else np.array([2.0])
    vals = np.empty(len(ts))
    for i, t in enumerate(ts):
        s = complex(sigma, t)
        if mode == "prime":
            v = prime_series(signs, s, N, centered=True, profile=profile).value
        else:
            v = theta(signs, profile, s, N).value
        vals[i] = abs(v)
    env = envelope(ts, sigma, vartheta)
    ratio = vals / env
    k = np.floor(np.log2(ts) + 1e-12).astype(int)
    windows = []
    for kk in np.unique(k):
        sel = k == kk
        windows.append((float(2.0**kk), float(2.0 ** (kk + 1)), float(ratio[sel].max())))
    return VerticalScanDiagnostic(sigma, ts, vals, env, windows, int(vartheta), mode, int(N), signs.seed)


# critical-point convergence --------------------------------------------------


@dataclass(frozen=True)
class CriticalReport:
    alpha: float
    t: float
    profile: BiasProfile
    cutoffs: list[int]
    reports: dict[int, TrendReport]
    failures: dict[int, str] = field(default_factory=dict)

    @property
    def fraction_converging(self) -> float:
        n = len(self.reports) + len(self.failures)
        return sum(r.verdict == "converging" for r in self.reports.values()) / n if n else 0.0

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "t": self.t,
            "profile": self.profile.to_json(),
            "cutoffs": list(self.cutoffs),
            "fraction_converging": self.fraction_converging,
            "seeds": {str(k): v.to_json() for k, v in self.reports.items()},
            "failures": {str(k): v for k, v in self.failures.items()},
        }


def _critical_task(profile, s, cutoffs, threshold, growth_ratio, seed):
    N = cutoffs[-1]
    table = build_table(realize(sample_omega(seed, N), profile), N)
    return tail_diagnostic(cutoffs, series_at_cutoffs(table, s, cutoffs), threshold, growth_ratio)


def critical_point_convergence(
    alpha: float,
    t: float,
    seeds,
    cutoffs,
    profile: BiasProfile | None = None,
    workers: int = 1,
    threshold: float = 1e-2,
    growth_ratio: float = 1.5,
) -> CriticalReport:
    """Tail diagnostics of ``S(N) = sum_{n <= N} f(n) / n**(1 - alpha + i t)`` per seed.

    ``f`` defaults to the family with ``E f(p) = -p**-alpha``.  The verdict
    compares single-step diffs to a fixed threshold, so it depends on cutoff
    density; :data:`CRITICAL_CUTOFF_RATIO` is the density used by default.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (0, 1/2), got {alpha}")
    cuts = [int(c) for c in cutoffs]
    if len(cuts) < 4:
        raise InsufficientDataError(f"need at least 4 cutoffs, got {len(cuts)}")
    if any(b <= a for a, b in zip(cuts, cuts[1:])) or cuts[0] < 1:
        raise DomainError("cutoffs must be positive and strictly increasing")
    if cuts[-1] > n_max():
        raise DomainError(f"largest cutoff {cuts[-1]} exceeds the table cap {n_max()}")
    prof = profile if profile is not None else BiasProfile.alpha_delta(alpha, 1.0)
    s = complex(1.0 - alpha, float(t))
    build_sieve_tables(cuts[-1])
    task = partial(_critical_task, prof, s, cuts, float(threshold), float(growth_ratio))
    reports, failures = {}, {}
    for seed, rep, err in map_seeds(task, seeds, workers):
        if err is None:
            reports[seed] = rep
        else:
            failures[seed] = err
    return CriticalReport(alpha, float(t), prof, cuts, reports, failures)


# shift check -----------------------------------------------------------------


@dataclass(frozen=True)
class PoloReport:
    a_grid: list[float]
    ratios: list[float]

    @property
    def max_ratio(self) -> float:
        return max(self.ratios)

    def to_json(self) -> dict:
        return {"a_grid": list(self.a_grid), "ratios": list(self.ratios), "max_ratio": self.max_ratio}


def _l_value(source, s: complex) -> complex:
    if isinstance(source, MultiplicativeTable):
        return truncated_series(source, s, source.limit).value
    c = float(source)
    return 1.0 + c * (zeta(s) - 1.0)


def polo_check(source, a_grid) -> PoloReport:
    """``|L(1+a) - L(1+b)| / ((b - a) / a**2)`` with ``b = a + a**2`` over ``a_grid``.

    ``source`` is a multiplicative table (``L`` is its full truncated series)
    or a constant ``c`` in ``[0, 1]`` giving coefficients ``c`` for every
    ``n >= 2``, so ``L = 1 + c (zeta - 1)``.
    """
    if isinstance(source, MultiplicativeTable):
        if np.any(source.values[1:] < 0):
            raise DomainError("coefficients must lie in [0, 1]")
    elif not 0.0 <= float(source) <= 1.0:
        raise DomainError(f"constant coefficient must lie in [0, 1], got {source}")
    grid = [float(a) for a in a_grid]
    if not grid:
        raise InsufficientDataError("empty a grid")
    ratios = []
    for a in grid:
        if not 0.0 < a <= 0.5:
            raise DomainError(f"a must lie in (0, 1/2], got {a}")
        b = a + a * a
        diff = abs(_l_value(source, 1.0 + a) - _l_value(source, 1.0 + b))
        ratios.append(diff / ((b - a) / (a * a)))
    return PoloReport(grid, ratios)


# product identity ------------------------------------------------------------


@dataclass(frozen=True)
class IdentityReport:
    s: complex
    P: int
    seed: int | None
    max_factor_gap: float
    lhs: complex
    rhs: complex
    relative_error: float
    tolerance: float = IDENTITY_TOLERANCE

    @property
    def passed(self) -> bool:
        return self.relative_error < self.tolerance and self.max_factor_gap < self.tolerance

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "s_re": self.s.real,
            "s_im": self.s.imag,
            "P": self.P,
            "max_factor_gap": self.max_factor_gap,
            "lhs_re": self.lhs.real,
            "lhs_im": self.lhs.imag,
            "rhs_re": self.rhs.real,
            "rhs_im": self.rhs.imag,
            "relative_error": self.relative_error,
            "passed": self.passed,
        }


def identity_suite(omega: OmegaSample, profile: BiasProfile, s, P: int) -> IdentityReport:
    """Check ``zeta F (omega) = G (T omega) / U (T omega)`` truncated at ``P``.

    ``F`` is realized from ``omega``; ``T`` exchanges ``I_p`` and ``J_p``;
    ``U`` is the unbiased function and ``G`` has ``P(g(p) = -1) = a_p - 1/2``,
    both read at ``T omega``.  Also compares the per-prime factors.
    """
    s = as_complex(s)
    if s.real <= 1.0:
        raise DomainError(f"identity check needs Re(s) > 1, got {s}")
    if profile.kind == "unbiased":
        raise PreconditionError("identity check needs a biased profile")
    P = int(P)
    omega = omega.restrict(P)
    t_omega = interval_exchange(omega, profile)  # raises if some q_p > 1/2
    primes = omega.primes

    gaps = [abs(phi - psi) for phi, psi in (phi_psi_factor(omega, profile, int(p), s) for p in primes)]

    zeta_part = 1.0 / euler_product(_all_minus(primes, P), s, P).value
    lhs = zeta_part * euler_product(realize(omega, profile), s, P).value
    g = coupled_g_signs(t_omega, profile, "mobius")
    u = realize(t_omega, BiasProfile.unbiased())
    rhs = euler_product(g, s, P).value / euler_product(u, s, P).value
    rel = abs(lhs - rhs) / abs(rhs)
    return IdentityReport(s, P, omega.seed, max(gaps, default=0.0), lhs, rhs, rel)


def _all_minus(primes: np.ndarray, P: int) -> PrimeSignVector:
    return PrimeSignVector(P, primes, np.full(len(primes), -1, np.int8), "binary", "mobius")


__all__ = [
    "CRITICAL_CUTOFF_RATIO",
    "CriticalReport",
    "EnsembleSummary",
    "GrowthFit",
    "IdentityReport",
    "PoloReport",
    "VerticalScanDiagnostic",
    "critical_point_convergence",
    "envelope",
    "fit_growth_exponent",
    "identity_suite",
    "map_seeds",
    "polo_check",
    "run_ensemble",
    "seed_series",
    "series_from_checkpoints",
    "vertical_scan",
]
