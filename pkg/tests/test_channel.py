"""Tests for the fading-channel module: bin construction, transition chain,
cost model, and the coverage quantile."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtbsim.channel import (
    DegenerateBinError,
    FadingProfile,
    FsmcLink,
    NoFiniteQuantileError,
    UnreachableNeighborError,
    ber_for_state,
    channel_table_rows,
    coverage_cdf,
    db_to_linear,
    expected_retransmissions,
    linear_to_db,
    make_equal_probability_bins,
    packet_success_probability,
    quantized_snr,
    rayleigh_profile,
    semi_reliable_quantile,
    steady_state_probability,
    transition_matrix,
    transition_step,
)

# Published threshold sequence for K=8 bins at 0 dB mean SNR (interior
# thresholds 3..8 in dB).
PUBLISHED_DB = [-5.41, -3.28, -1.59, -0.08, 1.42, 3.18]


class TestEqualProbabilityBins:
    def test_published_thresholds_0db(self):
        thresholds = make_equal_probability_bins(8, 1.0)
        got_db = [linear_to_db(t) for t in thresholds[2:8]]
        for got, want in zip(got_db, PUBLISHED_DB):
            assert abs(got - want) < 0.01

    def test_first_interior_threshold_is_minus_8_74(self):
        # The widely printed value -8.47 dB looks like a digit transposition:
        # the construction gives 10*log10(ln(8/7)) = -8.74 dB.
        thresholds = make_equal_probability_bins(8, 1.0)
        got = linear_to_db(thresholds[1])
        assert abs(got - 10.0 * math.log10(math.log(8.0 / 7.0))) < 1e-12
        assert abs(got - (-8.74)) < 0.01
        assert abs(got - (-8.47)) > 0.2  # distinctly not the printed value

    def test_boundaries(self):
        thresholds = make_equal_probability_bins(8, 1.0)
        assert thresholds[0] == 0.0
        assert math.isinf(thresholds[-1])

    @given(
        num_bins=st.integers(min_value=1, max_value=32),
        mean_snr=st.floats(min_value=1e-3, max_value=1e4),
    )
    @settings(max_examples=1000, deadline=None)
    def test_equal_mass_property(self, num_bins, mean_snr):
        thresholds = make_equal_probability_bins(num_bins, mean_snr)
        assert len(thresholds) == num_bins + 1
        for lo, hi in zip(thresholds, thresholds[1:]):
            assert lo < hi
            mass = (0.0 if math.isinf(hi) else -math.exp(-hi / mean_snr)) + math.exp(
                -lo / mean_snr
            )
            assert abs(mass - 1.0 / num_bins) < 1e-10

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            make_equal_probability_bins(0, 1.0)
        with pytest.raises(ValueError):
            make_equal_probability_bins(8, 0.0)


class TestProfile:
    def test_bin_mass_normalization(self):
        prof = rayleigh_profile(8, 1.0, 0.05)
        total = sum(steady_state_probability(prof, k) for k in range(1, 9))
        assert abs(total - 1.0) < 1e-12

    def test_quantized_snr_monotone(self):
        prof = rayleigh_profile(8, db_to_linear(15.0), 0.05)
        snrs = [quantized_snr(prof, k) for k in range(1, 9)]
        assert all(a < b for a, b in zip(snrs, snrs[1:]))

    def test_ber_monotone_decreasing(self):
        prof = rayleigh_profile(8, db_to_linear(15.0), 0.05)
        bers = [ber_for_state(prof, k) for k in range(1, 9)]
        assert all(a > b for a, b in zip(bers, bers[1:]))

    def test_quantized_snr_inside_bin(self):
        prof = rayleigh_profile(8, 3.0, 0.05)
        for k in range(1, 9):
            assert prof.thresholds[k - 1] <= prof.quantized_snr[k - 1]
            assert prof.quantized_snr[k - 1] < prof.thresholds[k]

    def test_bin_ber_quadrature_oracle(self):
        # Cross-check the closed-form bin-averaged BER against numeric
        # quadrature of 0.2*exp(-1.6 x) * exp(-x/mean)/mean over each bin.
        from scipy.integrate import quad

        mean = db_to_linear(10.0)
        prof = rayleigh_profile(8, mean, 0.05)
        for k in range(1, 9):
            lo, hi = prof.thresholds[k - 1], prof.thresholds[k]
            hi_eff = mean * 60 if math.isinf(hi) else hi
            numer, _ = quad(
                lambda x: 0.2 * math.exp(-1.6 * x) * math.exp(-x / mean) / mean,
                lo,
                hi_eff,
                epsabs=1e-14,
                limit=200,
            )
            mass = prof.bin_probability(k)
            assert abs(prof.state_ber[k - 1] - numer / mass) < 1e-10

    def test_bin_mean_snr_quadrature_oracle(self):
        from scipy.integrate import quad

        mean = 2.5
        prof = rayleigh_profile(6, mean, 0.1)
        for k in range(1, 7):
            lo, hi = prof.thresholds[k - 1], prof.thresholds[k]
            hi_eff = mean * 80 if math.isinf(hi) else hi
            numer, _ = quad(
                lambda x: x * math.exp(-x / mean) / mean,
                lo,
                hi_eff,
                epsabs=1e-13,
                limit=200,
            )
            assert abs(prof.quantized_snr[k - 1] - numer / prof.bin_probability(k)) < 1e-8

    @given(
        num_bins=st.integers(min_value=2, max_value=16),
        mean_db=st.floats(min_value=-10.0, max_value=40.0),
        sigma=st.floats(min_value=0.0, max_value=0.5),
    )
    @settings(max_examples=1000, deadline=None)
    def test_profile_invariants_property(self, num_bins, mean_db, sigma):
        prof = rayleigh_profile(num_bins, db_to_linear(mean_db), sigma)
        total = sum(prof.bin_probability(k) for k in range(1, num_bins + 1))
        assert abs(total - 1.0) < 1e-12
        for k in range(1, num_bins + 1):
            assert abs(prof.bin_probability(k) - 1.0 / num_bins) < 1e-10
        # decreasing, modulo floating-point underflow to zero at high SNR
        assert all(
            a > b or (a == 0.0 and b == 0.0)
            for a, b in zip(prof.state_ber, prof.state_ber[1:])
        )

    def test_degenerate_profile_rejected(self):
        with pytest.raises(ValueError):
            FadingProfile(
                mean_snr=1.0,
                num_bins=2,
                thresholds=(0.0, 1.0, 2.0),  # finite last threshold
                sigma=0.05,
                quantized_snr=(0.5, 1.5),
                state_ber=(0.1, 0.05),
            )

    def test_bad_bin_index(self):
        prof = rayleigh_profile(4, 1.0, 0.05)
        with pytest.raises(IndexError):
            steady_state_probability(prof, 0)
        with pytest.raises(IndexError):
            quantized_snr(prof, 5)
        with pytest.raises(IndexError):
            ber_for_state(prof, -1)


class TestTransitions:
    def test_matrix_rows_sum_to_one(self):
        prof = rayleigh_profile(8, 1.0, 0.05)
        p = transition_matrix(prof)
        assert np.allclose(p.sum(axis=1), 1.0)
        assert np.all(np.diag(p) == 1.0 - 2 * 0.05)

    def test_circulant_structure(self):
        prof = rayleigh_profile(4, 1.0, 0.1)
        p = transition_matrix(prof)
        for i in range(4):
            assert p[i, (i + 1) % 4] == pytest.approx(0.1)
            assert p[i, (i - 1) % 4] == pytest.approx(0.1)

    def test_single_bin_matrix(self):
        prof = rayleigh_profile(1, 1.0, 0.05)
        assert transition_matrix(prof) == pytest.approx(np.array([[1.0]]))

    def test_empirical_transition_frequencies(self):
        # Long-run per-state transition frequencies match the matrix within
        # three standard errors.
        prof = rayleigh_profile(8, 1.0, 0.05)
        link = FsmcLink(prof, state=1)
        rng = np.random.default_rng(1234)
        steps = 1_000_000
        counts = np.zeros((8, 8))
        prev = link.state
        for _ in range(steps):
            nxt = transition_step(link, rng)
            counts[prev - 1, nxt - 1] += 1
            prev = nxt
        p = transition_matrix(prof)
        row_totals = counts.sum(axis=1)
        for i in range(8):
            for j in range(8):
                if p[i, j] == 0.0:
                    assert counts[i, j] == 0
                    continue
                freq = counts[i, j] / row_totals[i]
                se = math.sqrt(p[i, j] * (1 - p[i, j]) / row_totals[i])
                assert abs(freq - p[i, j]) <= 3.0 * se

    def test_sigma_zero_freezes(self):
        prof = rayleigh_profile(8, 1.0, 0.0)
        link = FsmcLink(prof, state=5)
        rng = np.random.default_rng(0)
        for _ in range(100):
            assert transition_step(link, rng) == 5

    @given(
        sigma=st.floats(min_value=0.0, max_value=0.5),
        num_bins=st.integers(min_value=1, max_value=16),
        data=st.data(),
    )
    @settings(max_examples=1000, deadline=None)
    def test_transition_stays_in_range_property(self, sigma, num_bins, data):
        prof = rayleigh_profile(num_bins, 1.0, sigma)
        start = data.draw(st.integers(min_value=1, max_value=num_bins))
        link = FsmcLink(prof, state=start)
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        for _ in range(5):
            nxt = transition_step(link, rng)
            assert 1 <= nxt <= num_bins


class TestPacketSuccess:
    def test_zero_ber(self):
        assert packet_success_probability(0.0, 4096) == 1.0

    def test_known_value(self):
        assert packet_success_probability(0.5, 2) == pytest.approx(0.25)

    def test_invalid(self):
        with pytest.raises(ValueError):
            packet_success_probability(-0.1, 10)
        with pytest.raises(ValueError):
            packet_success_probability(0.1, 0)


class TestExpectedRetransmissions:
    def test_all_perfect(self):
        assert expected_retransmissions([1.0, 1.0, 1.0]) == 1.0

    def test_single_half(self):
        assert expected_retransmissions([0.5]) == 2.0

    def test_two_neighbors(self):
        assert expected_retransmissions([0.5, 0.25]) == pytest.approx(5.0)

    def test_zero_probability_raises(self):
        with pytest.raises(UnreachableNeighborError):
            expected_retransmissions([0.5, 0.0])

    def test_above_one_raises(self):
        with pytest.raises(ValueError):
            expected_retransmissions([1.2])

    def test_monte_carlo_oracle(self):
        # The cost model assumes independent geometric completion per
        # neighbor with total count 1 + sum of extra trials; simulate that
        # model directly and compare at 2%.
        rng = np.random.default_rng(99)
        for _ in range(20):
            m = rng.integers(1, 7)
            probs = rng.uniform(0.1, 1.0, size=m)
            trials = 1_000_000
            # geometric(p) counts trials to first success (>= 1); extras are
            # geometric - 1 per neighbor
            extra = sum(rng.geometric(p, size=trials) - 1 for p in probs)
            mc_mean = 1.0 + extra.mean()
            model = expected_retransmissions(probs)
            assert abs(mc_mean - model) / model < 0.02

    @given(
        probs=st.lists(
            st.floats(min_value=1e-3, max_value=1.0), min_size=1, max_size=10
        )
    )
    @settings(max_examples=1000, deadline=None)
    def test_at_least_one_property(self, probs):
        assert expected_retransmissions(probs) >= 1.0


class TestSemiReliableQuantile:
    def test_perfect_link(self):
        assert semi_reliable_quantile([1.0], 0.9) == 1

    def test_single_half_delta_09(self):
        # F(3) = 0.875 < 0.9 <= F(4) = 0.9375
        assert semi_reliable_quantile([0.5], 0.9) == 4

    def test_two_halves_delta_05(self):
        # F(1) = 0.25, F(2) = 0.5625
        assert semi_reliable_quantile([0.5, 0.5], 0.5) == 2

    def test_zero_probability_raises(self):
        with pytest.raises(UnreachableNeighborError):
            semi_reliable_quantile([0.0], 0.5)

    def test_delta_one_raises(self):
        with pytest.raises(NoFiniteQuantileError):
            semi_reliable_quantile([0.5], 1.0)

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            m = int(rng.integers(1, 8))
            probs = rng.uniform(0.05, 1.0, size=m)
            delta = float(rng.uniform(0.05, 0.99))
            got = semi_reliable_quantile(probs, delta)
            # brute-force scan of the CDF
            c = 1
            while coverage_cdf(probs, c) < delta:
                c += 1
                assert c < 100000
            assert got == c
            assert coverage_cdf(probs, got) >= delta
            if got > 1:
                assert coverage_cdf(probs, got - 1) < delta

    @given(
        probs=st.lists(
            st.floats(min_value=0.05, max_value=1.0), min_size=1, max_size=8
        ),
        delta=st.floats(min_value=0.01, max_value=0.99),
    )
    @settings(max_examples=1000, deadline=None)
    def test_quantile_minimality_property(self, probs, delta):
        c = semi_reliable_quantile(probs, delta)
        assert c >= 1
        assert coverage_cdf(probs, c) >= delta
        if c > 1:
            assert coverage_cdf(probs, c - 1) < delta

    @given(
        probs=st.lists(
            st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=8
        ),
        c=st.integers(min_value=1, max_value=50),
    )
    @settings(max_examples=1000, deadline=None)
    def test_coverage_monotone_in_attempts_property(self, probs, c):
        lo = coverage_cdf(probs, c)
        hi = coverage_cdf(probs, c + 1)
        assert 0.0 <= lo <= hi <= 1.0


class TestChannelTable:
    def test_rows_shape(self):
        prof = rayleigh_profile(8, 1.0, 0.05)
        rows = channel_table_rows(prof)
        assert len(rows) == 8
        assert list(rows[0]) == [
            "bin",
            "gamma_low_db",
            "gamma_high_db",
            "v_k",
            "gamma_bar_db",
            "ber",
        ]
        assert rows[0]["gamma_low_db"] == -math.inf
        assert rows[-1]["gamma_high_db"] == math.inf
        for row in rows:
            assert row["v_k"] == pytest.approx(0.125, abs=1e-10)

    def test_interior_thresholds_in_table(self):
        prof = rayleigh_profile(8, 1.0, 0.05)
        rows = channel_table_rows(prof)
        lows = [rows[k]["gamma_low_db"] for k in range(2, 8)]
        for got, want in zip(lows, PUBLISHED_DB):
            assert abs(got - want) < 0.01
