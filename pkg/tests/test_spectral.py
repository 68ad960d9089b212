import math

import numpy as np
import pytest

from gaussmarkov.errors import (
    BudgetExceededError,
    InvalidInputError,
    InvalidMeasureError,
)
from gaussmarkov.kernels import psd_check
from gaussmarkov.spectral import (
    SpectralMeasure,
    WeierstrassConfig,
    WitnessIndices,
    cluster_witnesses,
    counterexample_measure,
    f_witness,
    fourier_decay_rate,
    kernel_from_spectral,
    measure_from_windows,
    piecewise_f,
    weierstrass_gamma,
    weierstrass_indices,
)


def two_point():
    return SpectralMeasure(atoms=((0.5, 1.0),))


class TestSpectralMeasure:
    def test_mass_validation(self):
        with pytest.raises(InvalidMeasureError):
            SpectralMeasure(atoms=((0.5, 1.0), (0.5, 2.0)))  # effective mass 2
        with pytest.raises(InvalidMeasureError):
            SpectralMeasure(atoms=((-0.5, 1.0), (1.0, 0.0)))

    def test_serialization_round_trip(self):
        mu = SpectralMeasure(atoms=((0.25, 1.0), (0.5, 0.0)))
        again = SpectralMeasure.from_list(mu.to_list())
        assert again.atoms == mu.atoms


class TestKernelFromSpectral:
    def test_two_point_gives_cosine(self):
        kern = kernel_from_spectral(two_point())
        for h in (0.0, 0.5, 2.0, -1.3):
            assert kern.eval(0.0, h) == pytest.approx(math.cos(h), abs=1e-15)

    def test_point_mass_at_zero_gives_constant(self):
        kern = kernel_from_spectral(SpectralMeasure(atoms=((1.0, 0.0),)))
        assert kern.eval(0.0, 7.3) == 1.0

    def test_weierstrass_profile(self):
        cfg = WeierstrassConfig()
        mu = weierstrass_gamma(cfg)
        kern = kernel_from_spectral(mu)
        assert kern.eval(0.0, 0.0) == pytest.approx(1.0, abs=1e-15)
        # direct lacunary cosine sum as the oracle
        for h in (0.05, 0.3, 1.7):
            direct = sum(
                2.0 * 0.5**k * math.cos(h * 3.0**k) for k in range(2, cfg.k_cut + 1)
            )
            direct += 2.0 * 0.5**cfg.k_cut  # truncated tail at frequency zero
            assert kern.eval(0.0, h) == pytest.approx(direct, abs=1e-12)

    def test_psd_on_random_grids(self):
        kern = kernel_from_spectral(two_point())
        rng = np.random.default_rng(19)
        for _ in range(50):
            pts = np.sort(rng.uniform(-5, 5, size=int(rng.integers(2, 9))))
            if np.any(np.diff(pts) <= 0):
                continue
            assert psd_check(kern, pts).passed


class TestFourierDecayRate:
    def test_point_mass_at_zero(self):
        mu = SpectralMeasure(atoms=((1.0, 0.0),))
        assert fourier_decay_rate(mu, 0.37) == 0.0

    def test_two_point_small_lag(self):
        val = fourier_decay_rate(two_point(), 0.01)
        assert val == pytest.approx((1 - math.cos(0.01)) / 0.01, rel=1e-12)
        assert val == pytest.approx(0.005, rel=1e-4)

    def test_weierstrass_rate_increases(self):
        mu = weierstrass_gamma()
        vals = [fourier_decay_rate(mu, 1.0 / x) for x in (10.0, 100.0, 1000.0)]
        assert vals[0] < vals[1] < vals[2]

    def test_nonnegative_and_continuous(self):
        mu = weierstrass_gamma()
        rng = np.random.default_rng(4)
        for _ in range(100):
            t = float(rng.uniform(1e-4, 5.0))
            r = fourier_decay_rate(mu, t)
            assert r >= 0.0
            assert abs(fourier_decay_rate(mu, t + 1e-9) - r) < 1e-4 * (1 + r)

    def test_rejects_nonpositive_lag(self):
        with pytest.raises(InvalidInputError):
            fourier_decay_rate(two_point(), 0.0)


class TestWitnessIndices:
    def test_first_indices(self, partial_witness):
        n = partial_witness.indices
        assert n[0] == 2
        # brute-force oracle for n_1: first n > 2 with f_2(n-1) > 0
        cfg = partial_witness.config
        candidates = [m for m in range(3, 10) if f_witness(cfg, 2, m - 1) > 0]
        assert n[1] == candidates[0] == 3
        assert n[2] == 4  # threshold 1/0 reads as +inf

    def test_minimality_of_search(self, partial_witness):
        cfg = partial_witness.config
        n = partial_witness.indices
        # n_3 = inf{n > n_2 : f_{n_2}(n-1) > 1}
        assert f_witness(cfg, n[2], n[3] - 1) > 1
        assert all(f_witness(cfg, n[2], m - 1) <= 1 for m in range(n[2] + 1, n[3]))

    def test_witness_inequalities_on_completed_depths(self, partial_witness):
        cfg = partial_witness.config
        n = partial_witness.indices
        witness = WitnessIndices(
            indices=tuple(n), windows=tuple(partial_witness.windows),
            complete=False, config=cfg,
        )
        depth = (len(n) - 1) // 2
        for i in range(depth):
            assert piecewise_f(cfg, witness, n[2 * i + 1] - 1) > i
            if i >= 1 and 2 * (i + 1) < len(n):
                assert piecewise_f(cfg, witness, n[2 * (i + 1)] - 1) < 1.0 / i

    def test_shallow_search_completes(self):
        result = weierstrass_indices(WeierstrassConfig(i_max=2))
        assert result.complete
        assert result.indices == (2, 3, 4, 9, 14, 8701, 253744)

    def test_deep_search_exceeds_budget(self, partial_witness):
        assert isinstance(partial_witness, BudgetExceededError)
        assert len(partial_witness.indices) == 7  # n_0 .. n_6

    def test_location_map(self, partial_witness):
        witness = WitnessIndices(
            indices=tuple(partial_witness.indices),
            windows=tuple(partial_witness.windows),
            complete=False,
            config=partial_witness.config,
        )
        y = witness.y_map()
        assert y[2] == 9.0 and y[3] == 0.0
        assert y[4] == 81.0 and y[8] == 3.0**8 and y[9] == 0.0
        assert y[14] == 3.0**14


class TestCounterexampleMeasure:
    def test_total_mass_one(self, partial_witness):
        assert partial_witness.partial_measure.total_mass == pytest.approx(1.0, abs=1e-15)

    def test_shallow_measure_construction(self):
        mu = counterexample_measure(WeierstrassConfig(i_max=1))
        assert mu.total_mass == pytest.approx(1.0, abs=1e-15)
        locs = sorted(y for _, y in mu.atoms if y > 0)
        assert locs == [3.0**k for k in (2, 4, 5, 6, 7, 8)]

    def test_rate_explodes_along_odd_witnesses(self, partial_witness):
        mu = partial_witness.partial_measure
        n = partial_witness.indices
        tail_tol = 1e-6
        for i in (1, 2):
            s_i = 1.0 / (n[2 * i + 1] - 1)
            assert fourier_decay_rate(mu, s_i) > i - tail_tol

    def test_rate_dies_along_even_witnesses(self, partial_witness):
        # the decay rate is twice the window functional, so the honest
        # bound along the even witnesses is 2/i plus the truncation slack
        mu = partial_witness.partial_measure
        n = partial_witness.indices
        tail_tol = 1e-6
        for i in (1, 2):
            t_i = 1.0 / (n[2 * (i + 1)] - 1)
            assert fourier_decay_rate(mu, t_i) < 2.0 / i + tail_tol

    def test_truncation_tail_bound(self):
        # doubling the cutoff moves any decay-rate value by less than
        # x * 2^(1 - k_cut)
        cfg60 = WeierstrassConfig(i_max=1, k_cut=60)
        cfg80 = WeierstrassConfig(i_max=1, k_cut=80)
        mu60 = counterexample_measure(cfg60)
        mu80 = counterexample_measure(cfg80)
        for x in (2.0, 8.0, 13.0, 100.0):
            bound = x * 2.0 ** (1 - 60)
            diff = abs(
                fourier_decay_rate(mu60, 1.0 / x) - fourier_decay_rate(mu80, 1.0 / x)
            )
            assert diff <= bound + 1e-15


class TestClusterWitnesses:
    def test_targets_found(self, partial_witness):
        mu = partial_witness.partial_measure
        results = cluster_witnesses(mu, [0.25, 1.0, 4.0])
        for target, res in results.items():
            assert res.found, res.message
            assert abs(res.rate - target) <= 1e-3 * (1 + target)

    def test_target_zero_reachable_at_tiny_lag(self, partial_witness):
        mu = partial_witness.partial_measure
        grid = np.geomspace(1e-45, 10.0, 3000)
        results = cluster_witnesses(mu, [0.0], search_grid=grid)
        assert results[0.0].found
        assert results[0.0].rate <= 1e-3

    def test_unreachable_target_reported_not_fatal(self, partial_witness):
        mu = partial_witness.partial_measure
        results = cluster_witnesses(
            mu, [1e9], search_grid=np.geomspace(0.5, 5.0, 50)
        )
        assert not results[1e9].found
        assert results[1e9].message

    def test_bisection_tightens_bracket(self):
        mu = two_point()  # rate (1 - cos t)/t, increasing near 0
        results = cluster_witnesses(mu, [0.05], search_grid=np.geomspace(1e-3, 1.0, 8))
        res = results[0.05]
        assert res.found
        assert abs(res.rate - 0.05) <= 1e-3 * 1.05
