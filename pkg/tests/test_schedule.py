"""Noise schedule tables, noising maps, timestep selection."""

import numpy as np
import pytest

from mrdiff import build_schedule, complex_noise, forward_noise, lownoise_kspace, select_timesteps, synth_coils
from mrdiff.errors import ConfigError, ContractError
from mrdiff.physics import fft2c


class TestBuildSchedule:
    def test_single_step(self):
        s = build_schedule(T=1)
        assert s.beta.tolist() == [1e-4]
        assert s.alpha_bar.tolist() == [0.9999]

    def test_default_tables(self):
        s = build_schedule()
        assert s.alpha_bar[0] == pytest.approx(0.9999, abs=1e-15)
        assert (np.diff(s.alpha_bar) < 0).all()
        assert s.alpha_bar[-1] < 5e-5
        for table in (s.beta, s.alpha, s.alpha_bar):
            assert ((table > 0) & (table < 1)).all()

    def test_sigma_definition(self):
        s = build_schedule(T=50)
        assert s.sigma[0] == 0.0
        prev = np.concatenate(([1.0], s.alpha_bar[:-1]))
        ref = np.sqrt((1 - prev) / (1 - s.alpha_bar) * s.beta)
        assert np.abs(s.sigma - ref).max() < 1e-15

    def test_invalid_bounds(self):
        with pytest.raises(ConfigError):
            build_schedule(T=0)
        with pytest.raises(ConfigError):
            build_schedule(beta_start=0.02, beta_end=1e-4)
        with pytest.raises(ConfigError):
            build_schedule(beta_start=0.0)


class TestForwardNoise:
    def test_deterministic_part(self, rng):
        s = build_schedule(T=100)
        x = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        out = forward_noise(x, 40, np.zeros_like(x), s)
        assert np.abs(out - np.sqrt(s.a_bar(40)) * x).max() < 1e-15

    def test_pure_noise_part(self, rng):
        s = build_schedule(T=100)
        eps = complex_noise(rng, (6, 6))
        out = forward_noise(np.zeros((6, 6), dtype=complex), 70, eps, s)
        assert np.abs(out - np.sqrt(1 - s.a_bar(70)) * eps).max() < 1e-15

    def test_out_of_range_timestep(self):
        s = build_schedule(T=10)
        with pytest.raises(ContractError):
            forward_noise(np.zeros((4, 4)), 11, np.zeros((4, 4)), s)
        with pytest.raises(ContractError):
            forward_noise(np.zeros((4, 4)), 0, np.zeros((4, 4)), s)

    def test_linearity(self, rng):
        s = build_schedule(T=100)
        x = complex_noise(rng, (5, 5))
        eps = complex_noise(rng, (5, 5))
        a = forward_noise(2 * x, 30, 3 * eps, s)
        b = 2 * forward_noise(x, 30, np.zeros_like(eps), s) + 3 * forward_noise(np.zeros_like(x), 30, eps, s)
        assert np.abs(a - b).max() < 1e-12

    def test_marginal_variance(self):
        s = build_schedule()
        t = 600
        rng = np.random.default_rng(0)
        draws = complex_noise(rng, (10_000, 4, 4))
        x_t = forward_noise(np.zeros((4, 4), dtype=complex), t, draws, s)
        var = x_t.real.var(axis=0).mean()
        assert abs(var - (1 - s.a_bar(t))) / (1 - s.a_bar(t)) < 0.05


class TestLowNoise:
    def test_noiseless_limit(self, rng):
        s = build_schedule(T=100)
        x = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        coils = synth_coils(8, 8, 2, seed=1)
        y = lownoise_kspace(x, 1, np.zeros_like(x), s, coils)
        ref = fft2c(coils * (np.sqrt(s.a_bar(1)) * x)[None])
        assert np.abs(y - ref).max() < 1e-12

    def test_draw_variance(self):
        rng = np.random.default_rng(3)
        draws = complex_noise(rng, 100_000, var=0.1)
        assert abs(draws.real.var() - 0.1) / 0.1 < 0.05
        assert abs(draws.imag.var() - 0.1) / 0.1 < 0.05


class TestSelectTimesteps:
    def test_five_of_thousand(self):
        assert select_timesteps(1000, 5) == [1000, 750, 500, 251, 1]

    def test_single(self):
        assert select_timesteps(1000, 1) == [1000]

    def test_all(self):
        assert select_timesteps(8, 8) == [8, 7, 6, 5, 4, 3, 2, 1]

    def test_descending_unique(self):
        for S in (2, 3, 7, 50):
            ts = select_timesteps(1000, S)
            assert len(ts) == S
            assert all(a > b for a, b in zip(ts, ts[1:]))
            assert ts[0] == 1000 and ts[-1] == 1

    def test_invalid(self):
        with pytest.raises(ConfigError):
            select_timesteps(10, 11)
        with pytest.raises(ConfigError):
            select_timesteps(10, 0)
