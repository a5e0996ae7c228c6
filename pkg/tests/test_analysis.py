import math

import numpy as np
import pytest

from bmf.analysis import (
    critical_point_convergence,
    envelope,
    fit_growth_exponent,
    identity_suite,
    map_seeds,
    polo_check,
    run_ensemble,
    series_from_checkpoints,
    vertical_scan,
)
from bmf.dirichlet import zeta
from bmf.distance import geometric_cutoffs
from bmf.errors import DomainError, InsufficientDataError, PreconditionError
from bmf.sampling import BiasProfile, omega_from_values, realize, sample_omega
from bmf.sieve import MultiplicativeTable, geometric_grid, mertens


def synthetic(fn, limit=10**6):
    grid = geometric_grid(limit, 1.05)
    return series_from_checkpoints(grid, [int(round(fn(float(x)))) for x in grid])


class TestGrowthFit:
    def test_power_law(self):
        fit = fit_growth_exponent(synthetic(lambda x: x**0.75), 0.5)
        assert abs(fit.exponent - 0.75) < 0.01
        assert fit.r_squared > 0.99 and fit.stderr >= 0 and not fit.flagged

    def test_constant(self):
        fit = fit_growth_exponent(synthetic(lambda x: 5.0), 0.5)
        assert abs(fit.exponent) < 0.01

    @pytest.mark.parametrize("theta", [0.3, 0.5, 0.75])
    def test_wobbly_power_law(self, theta):
        fit = fit_growth_exponent(synthetic(lambda x: x**theta * (1 + 0.1 * math.sin(math.log(x))), 10**7))
        assert abs(fit.exponent - theta) < 0.03

    def test_mertens(self):
        fit = fit_growth_exponent(mertens(10**7), 0.5)
        assert 0.3 <= fit.exponent <= 0.7

    def test_window(self):
        fit = fit_growth_exponent(synthetic(lambda x: x**0.5), 0.5)
        assert fit.fit_window[1] == 10**6
        assert fit.fit_window[0] >= 1000

    def test_too_few_checkpoints(self):
        with pytest.raises(InsufficientDataError):
            fit_growth_exponent(series_from_checkpoints(np.arange(10, 20), np.ones(10)))

    def test_too_few_in_window(self):
        with pytest.raises(InsufficientDataError):
            fit_growth_exponent(synthetic(lambda x: x**0.5), 0.01)

    def test_window_range(self):
        with pytest.raises(DomainError):
            fit_growth_exponent(synthetic(lambda x: x), 0.0)


class TestEnsemble:
    def test_mobius_fits_identical(self):
        e = run_ensemble(BiasProfile.mobius(), 10**5, [0, 1, 2])
        assert len({f.exponent for f in e.fits}) == 1

    def test_deterministic_across_workers(self):
        a = run_ensemble(BiasProfile.alpha_delta(0.3, 1.0), 10**5, range(4), workers=1)
        b = run_ensemble(BiasProfile.alpha_delta(0.3, 1.0), 10**5, range(4), workers=3)
        assert a.to_json() == b.to_json()
        q = a.quantiles
        assert q["q10"] <= q["q50"] <= q["q90"]

    def test_needs_two_seeds(self):
        with pytest.raises(InsufficientDataError):
            run_ensemble(BiasProfile.unbiased(), 1000, [0])

    def test_failures_recorded(self):
        def task(seed):
            if seed == 2:
                raise DomainError("boom")
            return seed * 10

        out = map_seeds(task, [1, 2, 3])
        assert [r[0] for r in out] == [1, 2, 3]
        assert out[0][1] == 10 and out[1][2].startswith("DomainError")

    def test_all_seeds_failing(self, tmp_path):
        path = tmp_path / "a.json"
        path.write_text('{"2": 0.9}')
        prof = BiasProfile("custom", custom_table_path=str(path))
        with pytest.raises(InsufficientDataError):
            run_ensemble(prof, 1000, [0, 1])


class TestVerticalScan:
    def signs(self, seed=0, N=10**4):
        return realize(sample_omega(seed, N), BiasProfile.unbiased())

    def test_shape(self):
        d = vertical_scan(self.signs(), BiasProfile.unbiased(), 0.75, 100, 3, 10**4)
        assert len(d.t) == len(d.values) == 3
        assert np.all(np.diff(d.t) > 0) and np.all(d.values >= 0)

    def test_envelope_guard(self):
        e = envelope([2.0], 0.75)[0]
        assert math.isfinite(e) and e > 0

    def test_windows_are_dyadic(self):
        d = vertical_scan(self.signs(), BiasProfile.unbiased(), 0.8, 1000, 50, 10**4)
        for lo, hi, r in d.windows:
            assert hi == 2 * lo and r >= 0
        assert d.windows[0][0] == 2.0

    def test_theta_mode(self):
        prof = BiasProfile.alpha_delta(0.3, 1.0)
        d = vertical_scan(realize(sample_omega(1, 10**4), prof), prof, 0.9, 50, 5, 10**4, mode="theta")
        assert np.all(d.values > 0)

    def test_domain(self):
        with pytest.raises(DomainError):
            vertical_scan(self.signs(), BiasProfile.unbiased(), 0.5, 100, 3, 10**4)
        with pytest.raises(DomainError):
            vertical_scan(self.signs(), BiasProfile.unbiased(), 0.7, 1, 3, 10**4)


class TestCritical:
    def test_short_run(self):
        cuts = geometric_cutoffs(100, 10**4, 10**0.25)
        r = critical_point_convergence(0.25, 0.0, [0, 1], cuts)
        assert set(r.reports) == {0, 1}
        assert 0.0 <= r.fraction_converging <= 1.0

    def test_mobius_signs_report(self):
        cuts = geometric_cutoffs(100, 10**4, 10**0.25)
        r = critical_point_convergence(0.25, 0.0, [0], cuts, profile=BiasProfile.mobius())
        assert r.reports[0].verdict in ("converging", "inconclusive", "diverging")

    def test_three_cutoffs(self):
        with pytest.raises(InsufficientDataError):
            critical_point_convergence(0.25, 0.0, [0], [100, 1000, 10000])

    def test_alpha_range(self):
        with pytest.raises(DomainError):
            critical_point_convergence(0.5, 0.0, [0], [10, 100, 1000, 10000])


class TestPolo:
    def test_zeta_example(self):
        rep = polo_check(1.0, [0.01])
        assert rep.ratios[0] == pytest.approx(abs(zeta(1.01) - zeta(1.0101)), rel=1e-12)
        assert rep.ratios[0] == pytest.approx(0.99, abs=0.005)

    def test_zero_coefficients(self):
        vals = np.zeros(1001, np.int8)
        vals[1] = 1
        assert polo_check(MultiplicativeTable(1000, vals), [0.1, 0.01]).max_ratio == 0
        assert polo_check(0.0, [0.1]).max_ratio == 0

    def test_bounded(self):
        assert polo_check(1.0, [0.2, 0.1, 0.05, 0.02, 0.01]).max_ratio < 2

    def test_domain(self):
        with pytest.raises(DomainError):
            polo_check(1.0, [0.6])
        with pytest.raises(DomainError):
            polo_check(1.5, [0.1])


class TestIdentity:
    def test_single_prime(self):
        prof = BiasProfile("custom", custom_table={2: 0.75})
        rep = identity_suite(omega_from_values({2: 0.9}), prof, 2, 2)
        assert rep.lhs == pytest.approx(5 / 3, abs=1e-15)
        assert rep.rhs == pytest.approx(5 / 3, abs=1e-15)
        assert rep.passed

    def test_unbiased_rejected(self):
        with pytest.raises(PreconditionError):
            identity_suite(sample_omega(0, 100), BiasProfile.unbiased(), 2, 100)

    def test_q_above_half_rejected(self):
        prof = BiasProfile("custom", custom_table={2: 0.3, 3: 0.9})
        with pytest.raises(PreconditionError):
            identity_suite(omega_from_values({2: 0.5, 3: 0.5}), prof, 2, 3)

    def test_half_plane(self):
        with pytest.raises(DomainError):
            identity_suite(sample_omega(0, 100), BiasProfile.strong(0.5, 0.8), 1.0, 100)

    def test_many_combinations(self):
        rng = np.random.default_rng(11)
        profiles = [BiasProfile.strong(0.5, 0.8), BiasProfile.strong(0.3, 0.5), BiasProfile.alpha_delta(0.3, 1.0)]
        failures = 0
        for i in range(100):
            P = int(rng.integers(2, 3000))
            s = complex(rng.uniform(1.05, 4), rng.uniform(-30, 30))
            rep = identity_suite(sample_omega(i, P), profiles[i % 3], s, P)
            failures += not rep.passed
        assert failures == 0
