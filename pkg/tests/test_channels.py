import math

import numpy as np
import pytest

from polarfec.channels import (
    ERASED,
    ChannelOutput,
    awgn_transmit,
    bec_transmit,
    bi_awgn_capacity,
    ebn0_db_to_sigma,
    sigma_for_capacity,
)


class TestBec:
    def test_zero_eps_no_erasures(self):
        x = np.ones(100, dtype=np.int8)
        y = bec_transmit(x, 0.0, seed=1)
        assert not y.erasure_mask().any()
        assert np.array_equal(y.data, x)

    def test_full_erasure(self):
        y = bec_transmit(np.zeros(50, dtype=np.int8), 1.0, seed=1)
        assert y.erasure_mask().all()

    def test_surviving_bits_intact(self):
        rng = np.random.default_rng(0)
        x = rng.integers(0, 2, size=1000).astype(np.int8)
        y = bec_transmit(x, 0.4, seed=7)
        keep = ~y.erasure_mask()
        assert np.array_equal(y.data[keep], x[keep])

    def test_empirical_rate_binomial_concentration(self):
        n, eps = 100_000, 0.3
        y = bec_transmit(np.zeros(n, dtype=np.int8), eps, seed=3)
        frac = y.erasure_mask().mean()
        assert abs(frac - eps) < 3 * math.sqrt(eps * (1 - eps) / n)

    def test_determinism(self):
        x = np.zeros(200, dtype=np.int8)
        assert np.array_equal(bec_transmit(x, 0.5, seed=9).data,
                              bec_transmit(x, 0.5, seed=9).data)

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            bec_transmit(np.zeros(4, dtype=np.int8), -0.1)


class TestAwgn:
    def test_vanishing_noise_recovers_signs(self):
        rng = np.random.default_rng(2)
        x = rng.integers(0, 2, size=500).astype(np.int8)
        y = awgn_transmit(x, 1e-3, seed=4)
        assert np.array_equal((y.data < 0).astype(np.int8), x)

    def test_llr_mean_matches_gaussian_moments(self):
        n, sigma = 200_000, 0.8
        y = awgn_transmit(np.zeros(n, dtype=np.int8), sigma, seed=5)
        mean, want = y.data.mean(), 2.0 / sigma ** 2
        std_err = (2.0 / sigma) / math.sqrt(n)
        assert abs(mean - want) < 4 * std_err

    def test_symmetry_between_bits(self):
        n, sigma = 100_000, 0.7
        y0 = awgn_transmit(np.zeros(n, dtype=np.int8), sigma, seed=6)
        y1 = awgn_transmit(np.ones(n, dtype=np.int8), sigma, seed=7)
        assert abs(y0.data.mean() + y1.data.mean()) < 6 * (2 / sigma) / math.sqrt(n)
        assert abs(y0.data.std() - y1.data.std()) / y0.data.std() < 0.02

    def test_llr_finite(self):
        y = awgn_transmit(np.zeros(100, dtype=np.int8), 0.01, seed=8)
        assert np.all(np.isfinite(y.data))

    def test_determinism(self):
        x = np.zeros(64, dtype=np.int8)
        assert np.array_equal(awgn_transmit(x, 0.9, seed=1).data,
                              awgn_transmit(x, 0.9, seed=1).data)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            awgn_transmit(np.zeros(4, dtype=np.int8), 0.0)


class TestEbn0:
    def test_known_value(self):
        # R_eff = 0.5, 0 dB: sigma^2 = 1/(2*0.5*1) = 1
        assert ebn0_db_to_sigma(0.0, 0.5) == pytest.approx(1.0)

    def test_higher_snr_less_noise(self):
        assert ebn0_db_to_sigma(6.0, 0.93) < ebn0_db_to_sigma(3.0, 0.93)

    def test_effective_rate_matters(self):
        assert ebn0_db_to_sigma(4.0, 0.93) < ebn0_db_to_sigma(4.0, 0.5)


class TestCapacity:
    def test_monotone_in_sigma(self):
        caps = [bi_awgn_capacity(s) for s in (0.3, 0.6, 1.0, 2.0)]
        assert caps == sorted(caps, reverse=True)

    def test_limits(self):
        assert bi_awgn_capacity(0.05) > 0.999
        assert bi_awgn_capacity(10.0) < 0.02

    def test_inverse_round_trip(self):
        for c in (0.5, 0.93, 0.979):
            assert bi_awgn_capacity(sigma_for_capacity(c)) == pytest.approx(c, abs=1e-4)


class TestChannelOutput:
    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            ChannelOutput(kind="fancy", data=np.zeros(2), param=0.0)

    def test_erasure_mask_guard(self):
        y = ChannelOutput(kind="llr", data=np.zeros(4), param=1.0)
        with pytest.raises(ValueError):
            y.erasure_mask()

    def test_erased_symbol_value(self):
        assert ERASED == 2
