"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the summary lines appear at the
end of the report) or ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from bmf.analysis import CRITICAL_CUTOFF_RATIO, critical_point_convergence, identity_suite, run_ensemble, vertical_scan
from bmf.cli import main as cli_main
from bmf.dirichlet import abel_transform, truncated_series, zeta
from bmf.distance import d_sigma, d_sigma_at_cutoffs, geometric_cutoffs, tail_diagnostic
from bmf.sampling import BiasProfile, PrimeSignVector, decompose_uh, realize, sample_omega
from bmf.sieve import build_table, mertens, sieve_primes
from oracles import dirichlet_convolution, mertens_by_factorization

pytestmark = pytest.mark.slow


def report(record, number, passed, detail):
    record(number, passed, detail)
    print(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


def test_criterion_01_convolution(record_criterion):
    N, prof = 10**5, BiasProfile.alpha_delta(0.3, 1.0)
    start = time.perf_counter()
    mismatches = 0
    for seed in range(10):
        om = sample_omega(seed, N)
        u, h = decompose_uh(om, prof)
        f = build_table(realize(om, prof), N).values.astype(np.int64)
        conv = dirichlet_convolution(build_table(u, N).values, build_table(h, N).values, N)
        mismatches += int(np.count_nonzero(conv[1:] != f[1:]))
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 30
    report(record_criterion, 1, ok, f"mismatches={mismatches} time={elapsed:.1f}s")
    assert ok


def test_criterion_02_product_identity(record_criterion):
    prof = BiasProfile.strong(0.5, 0.8)
    start = time.perf_counter()
    errs = [identity_suite(sample_omega(seed, 1000), prof, 2, 1000).relative_error for seed in range(100)]
    elapsed = time.perf_counter() - start
    worst = max(errs)
    ok = worst < 1e-10 and elapsed < 10
    report(record_criterion, 2, ok, f"max_rel_err={worst:.2e} time={elapsed:.1f}s")
    assert ok


def test_criterion_03_mertens_oracle(record_criterion):
    start = time.perf_counter()
    ser = mertens(10**6)
    oracle = mertens_by_factorization(10**6)
    bad = sum(int(m) != oracle[int(x)] for x, m in zip(ser.grid, ser.sums))
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 60
    report(record_criterion, 3, ok, f"checkpoints={len(ser.grid)} mismatches={bad} time={elapsed:.1f}s")
    assert ok


def test_criterion_04_zeta_and_abel(record_criterion):
    start = time.perf_counter()
    zerr = abs(zeta(2) - math.pi**2 / 6)
    rng = np.random.default_rng(4)
    profiles = [BiasProfile.unbiased(), BiasProfile.alpha_delta(0.3, 1.0), BiasProfile.mobius()]
    tables = {i: build_table(realize(sample_omega(i, 10**4), profiles[i % 3]), 10**4) for i in range(10)}
    worst = 0.0
    for k in range(100):
        table = tables[k % 10]
        N = int(rng.integers(10, 10**4 + 1))
        s = complex(rng.uniform(0.5, 3.0), rng.uniform(-50, 50))
        a = abel_transform(table, s, N)
        b = truncated_series(table, s, N).value
        worst = max(worst, abs(a - b) / abs(b))
    elapsed = time.perf_counter() - start
    ok = zerr < 1e-10 and worst < 1e-11 and elapsed < 10
    report(record_criterion, 4, ok, f"zeta_err={zerr:.1e} abel_max_rel={worst:.1e} time={elapsed:.1f}s")
    assert ok


def test_criterion_05_unbiased_exponent(record_criterion):
    start = time.perf_counter()
    summary = run_ensemble(BiasProfile.unbiased(), 10**7, range(50))
    elapsed = time.perf_counter() - start
    med = summary.median
    ok = 0.45 <= med <= 0.65 and not summary.failures and elapsed < 15 * 60
    report(record_criterion, 5, ok, f"median={med:.4f} target=[0.45,0.65] time={elapsed:.0f}s")
    assert ok


def test_criterion_06_biased_exponent(record_criterion):
    start = time.perf_counter()
    main = run_ensemble(BiasProfile.alpha_delta(0.25, 0.5), 10**7, range(50))
    medians = {a: run_ensemble(BiasProfile.alpha_delta(a, 0.5), 10**7, range(50)).median for a in (0.4, 0.3, 0.2)}
    elapsed = time.perf_counter() - start
    in_band = 0.65 <= main.median <= 0.85
    ordered = medians[0.4] <= medians[0.3] + 0.02 and medians[0.3] <= medians[0.2] + 0.02
    ok = in_band and ordered and elapsed < 30 * 60
    order = " ".join(f"a={a}:{m:.4f}" for a, m in medians.items())
    report(
        record_criterion,
        6,
        ok,
        f"median={main.median:.4f} target=[0.65,0.85] in_band={in_band} ordered={ordered} ({order}) time={elapsed:.0f}s",
    )
    assert ok


def test_criterion_07_critical_point(record_criterion):
    start = time.perf_counter()
    cuts = geometric_cutoffs(10**4, 10**7, CRITICAL_CUTOFF_RATIO)
    rep = critical_point_convergence(0.25, 0.0, range(20), cuts)
    mu = critical_point_convergence(0.25, 0.0, [0], cuts, profile=BiasProfile.mobius())
    elapsed = time.perf_counter() - start
    frac = rep.fraction_converging
    ok = frac >= 0.7 and not rep.failures and 0 in mu.reports and elapsed < 20 * 60
    report(
        record_criterion,
        7,
        ok,
        f"converging={frac:.0%} mobius_verdict={mu.reports[0].verdict if mu.reports else None} time={elapsed:.0f}s",
    )
    assert ok


def _random_pair(rng, p_max):
    primes = sieve_primes(p_max)
    pick = lambda: rng.choice(np.array([-1, 1], np.int8), len(primes))  # noqa: E731
    return PrimeSignVector(p_max, primes, pick()), PrimeSignVector(p_max, primes, pick())


def test_criterion_08_coupled_distance(record_criterion):
    start = time.perf_counter()
    P, sigma = 10**7, 0.8
    cuts = geometric_cutoffs(10**3, P, 2.0)
    verdicts = []
    for seed in range(10):
        om = sample_omega(seed, P)
        w = realize(om, BiasProfile.unbiased())
        f = realize(om, BiasProfile.alpha_delta(0.3, 1.0))
        vals = [v.squared_value for v in d_sigma_at_cutoffs(w, f, sigma, cuts)]
        verdicts.append(tail_diagnostic(cuts, vals).verdict)
    n_conv = verdicts.count("converging")

    rng = np.random.default_rng(8)
    invariant_failures = 0
    for _ in range(100):
        g, h = _random_pair(rng, 5000)
        s_lo, s_hi = sorted(rng.uniform(0.51, 1.0, 2))
        p1, p2 = sorted(int(v) for v in rng.integers(2, 5001, 2))
        invariant_failures += not d_sigma(g, h, s_hi, p2).squared_value <= d_sigma(g, h, s_lo, p2).squared_value
        invariant_failures += not d_sigma(g, h, s_lo, p1).squared_value <= d_sigma(g, h, s_lo, p2).squared_value
        invariant_failures += d_sigma(g, h, s_lo, p2) != d_sigma(h, g, s_lo, p2)
    elapsed = time.perf_counter() - start
    ok = n_conv >= 9 and invariant_failures == 0 and elapsed < 5 * 60
    report(
        record_criterion,
        8,
        ok,
        f"converging={n_conv}/10 invariant_failures={invariant_failures} time={elapsed:.0f}s",
    )
    assert ok


SUBCOMMANDS = [
    ["mertens", "--limit", "20000"],
    ["msum", "--preset", "alpha(0.3)", "--seeds", "3", "--limit", "20000"],
    ["exponent", "--preset", "unbiased", "--seeds", "4", "--limit", "50000"],
    ["distance", "--f", "unbiased", "--g", "alpha(0.3)", "--sigma", "0.8", "--pmax", "50000", "--seed", "3"],
    ["scan", "--preset", "unbiased", "--sigma", "0.75", "--tmax", "200", "--points", "20", "--cutoff", "5000"],
    ["critical", "--alpha", "0.25", "--cutoffs", "100:20000", "--seeds", "4"],
    ["identity", "--preset", "strong(0.5,0.8)", "--s", "2,1", "--pmax", "1000", "--seeds", "3"],
    ["polo", "--a-grid", "0.1,0.05,0.01"],
]


def _payload(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if not p.name.endswith(".manifest.json")}


def test_criterion_09_determinism(record_criterion, tmp_path):
    bad = []
    for argv in SUBCOMMANDS:
        outs = []
        for tag, workers in (("a", 1), ("b", 1), ("c", 8), ("d", 8)):
            d = tmp_path / f"{argv[0]}-{tag}"
            code = cli_main([*argv, "--out", str(d), "--workers", str(workers)])
            outs.append(_payload(d) if code == 0 else None)
        if outs[0] is None or not outs[0] or any(o != outs[0] for o in outs[1:]):
            bad.append(argv[0])
    ok = not bad
    report(record_criterion, 9, ok, f"subcommands={len(SUBCOMMANDS)} nondeterministic={bad or 'none'}")
    assert ok


def test_criterion_10_vertical_envelope(record_criterion):
    start = time.perf_counter()
    prof, N = BiasProfile.unbiased(), 10**6
    growth = []
    for seed in range(10):
        d = vertical_scan(realize(sample_omega(seed, N), prof), prof, 0.75, 1e4, 200, N)
        growth.append(d.window_growth)
    elapsed = time.perf_counter() - start
    n_ok = sum(g < 3 for g in growth)
    ok = n_ok >= 8 and elapsed < 10 * 60
    report(
        record_criterion,
        10,
        ok,
        f"seeds_below_3x={n_ok}/10 growth=[{min(growth):.2f},{max(growth):.2f}] time={elapsed:.0f}s",
    )
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
