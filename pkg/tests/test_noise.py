import io
import math

import numpy as np
import pytest
from scipy import integrate, stats

from spdestep.noise import (OuPath, RngStream, WienerPath, dump_path, expint,
                            joint_transition, load_path, sample_joint_linear,
                            sample_ou_path, sample_wiener_path, subsample,
                            transition_variance)
from spdestep.spectral import TimeGrid

LAM1 = 4 * math.pi ** 2


def ou_batch(n_paths, grid, n_modes, seed=11):
    """Stack of independent paths, shape (paths, M+1, N+1)."""
    return np.stack([sample_ou_path(grid, n_modes, RngStream(seed, i)).samples
                     for i in range(n_paths)])


def within_4se(samples, target):
    samples = np.asarray(samples, dtype=np.float64)
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    return abs(samples.mean() - target) <= 4 * se


class TestRngStream:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            RngStream(-1)
        with pytest.raises(ValueError):
            RngStream(0, 2 ** 64)

    def test_mode_streams_independent_of_truncation(self):
        a = RngStream(5, 3).normals(4, (10, 2))
        b = RngStream(5, 3).normals(9, (10, 2))
        np.testing.assert_array_equal(a, b[..., :5])

    def test_streams_differ(self):
        a = RngStream(5, 0).normals(2, (4,))
        b = RngStream(5, 1).normals(2, (4,))
        assert not np.array_equal(a, b)


class TestOuPath:
    grid = TimeGrid(1.0, 64)

    def test_starts_at_zero(self):
        p = sample_ou_path(self.grid, 8, RngStream(1))
        assert np.all(p.samples[0] == 0)
        assert np.all(p.samples[:, 0].imag == 0)

    def test_deterministic(self):
        a = sample_ou_path(self.grid, 8, RngStream(1, 4))
        b = sample_ou_path(self.grid, 8, RngStream(1, 4))
        assert a == b
        assert a != sample_ou_path(self.grid, 8, RngStream(1, 5))

    def test_projection_is_truncated_path(self):
        big = sample_ou_path(self.grid, 16, RngStream(2, 1))
        small = sample_ou_path(self.grid, 8, RngStream(2, 1))
        assert big.project(8) == small

    def test_read_only(self):
        p = sample_ou_path(self.grid, 2, RngStream(1))
        with pytest.raises(ValueError):
            p.samples[1, 1] = 0

    def test_stationary_variance_mode1(self):
        x = ou_batch(10_000, TimeGrid(1.0, 1), 1)[:, 1, 1]
        target = 1 / (8 * math.pi ** 2)
        assert target == pytest.approx(0.0126651, abs=1e-7)
        q, _ = integrate.quad(lambda s: math.exp(-2 * LAM1 * s), 0, 1, epsrel=1e-13)
        assert q == pytest.approx(target, rel=1e-9)
        assert within_4se(np.abs(x) ** 2, q)

    def test_mode0_is_brownian(self):
        x = ou_batch(10_000, TimeGrid(1.0, 4), 0)[:, :, 0].real
        for k, t in enumerate([0.25, 0.5, 0.75, 1.0], start=1):
            assert within_4se(x[:, k] ** 2, t)

    def test_marginal_law_goodness_of_fit(self):
        grid = TimeGrid(0.5, 8)
        x = ou_batch(10_000, grid, 2, seed=3)
        for n in range(3):
            for k in (1, 4, 8):
                var = float(expint(-2 * LAM1 * n * n, grid.times[k]))
                # real part has variance var / 2 (var for the real mean mode)
                sd = math.sqrt(var if n == 0 else var / 2)
                z = x[:, k, n].real / sd
                assert stats.kstest(z, "norm").pvalue > 1e-4, (n, k)
                assert within_4se(np.abs(x[:, k, n]) ** 2, var)

    def test_innovations_uncorrelated(self):
        p = sample_ou_path(TimeGrid(1.0, 8192), 4, RngStream(8))
        eta = p.innovations()
        z = eta / np.sqrt(transition_variance(4, p.grid.h))
        r = z.real
        lim = 4 / math.sqrt(r.shape[0])
        for n in range(5):
            assert abs(np.corrcoef(r[:-1, n], r[1:, n])[0, 1]) < lim
        for n in range(4):
            assert abs(np.corrcoef(r[:, n], r[:, n + 1])[0, 1]) < lim

    def test_innovation_variance(self):
        p = sample_ou_path(TimeGrid(1.0, 4096), 3, RngStream(9))
        var = transition_variance(3, p.grid.h)
        eta = p.innovations()
        for n in range(4):
            assert within_4se(np.abs(eta[:, n]) ** 2, var[n])


class TestSubsample:
    def test_factor_one(self):
        p = sample_ou_path(TimeGrid(1.0, 8), 2, RngStream(1))
        assert subsample(p, 1) is p

    def test_composition(self):
        p = sample_ou_path(TimeGrid(1.0, 16), 3, RngStream(1))
        assert subsample(subsample(p, 2), 2) == subsample(p, 4)

    def test_non_divisor(self):
        p = sample_ou_path(TimeGrid(1.0, 16), 3, RngStream(1))
        with pytest.raises(ValueError):
            subsample(p, 3)

    def test_coarse_innovation_variance(self):
        h = 1.0 / 8192
        p = subsample(sample_ou_path(TimeGrid(1.0, 8192), 3, RngStream(4)), 2)
        lam = LAM1 * np.arange(4) ** 2
        s_h = transition_variance(3, h)
        # sigma^2(2h) = exp(-2 lambda h) sigma^2(h) + sigma^2(h)
        s_2h = np.exp(-2 * lam * h) * s_h + s_h
        np.testing.assert_allclose(s_2h, transition_variance(3, 2 * h), rtol=1e-13)
        eta = p.innovations()
        for n in range(4):
            assert within_4se(np.abs(eta[:, n]) ** 2, s_2h[n])

    def test_coupling_consistency(self):
        fine = np.stack([subsample(sample_ou_path(TimeGrid(1.0, 16), 2, RngStream(6, i)), 2)
                         .samples for i in range(4000)])
        direct = ou_batch(4000, TimeGrid(1.0, 8), 2, seed=7)
        for n in range(3):
            for k in (1, 4, 8):
                a, b = np.abs(fine[:, k, n]) ** 2, np.abs(direct[:, k, n]) ** 2
                se = math.hypot(a.std(), b.std()) / math.sqrt(4000)
                assert abs(a.mean() - b.mean()) < 4 * se
                ra, rb = fine[:, k, n].real, direct[:, k, n].real
                assert abs(ra.mean() - rb.mean()) < 4 * math.hypot(ra.std(), rb.std()) / math.sqrt(4000)


class TestWiener:
    def test_terminal_variance(self):
        p = sample_wiener_path(TimeGrid(2.0, 16), 2000, RngStream(3))
        w = p.samples[-1, 1:]
        assert within_4se(np.abs(w) ** 2, 2.0)

    def test_increments_uncorrelated(self):
        p = sample_wiener_path(TimeGrid(1.0, 4096), 2, RngStream(3))
        d = p.increments().real
        lim = 4 / math.sqrt(d.shape[0])
        for n in range(3):
            assert abs(np.corrcoef(d[:-1, n], d[1:, n])[0, 1]) < lim

    def test_deterministic(self):
        g = TimeGrid(1.0, 8)
        assert sample_wiener_path(g, 3, RngStream(1, 2)) == sample_wiener_path(g, 3, RngStream(1, 2))

    def test_kind_is_distinct(self):
        g = TimeGrid(1.0, 8)
        w = sample_wiener_path(g, 3, RngStream(1))
        o = sample_ou_path(g, 3, RngStream(1))
        assert isinstance(w, WienerPath) and isinstance(o, OuPath)
        assert not np.array_equal(w.samples, o.samples)


class TestJointLinear:
    def test_zero_drift_matches_ou(self):
        exact, ou = sample_joint_linear(TimeGrid(1.0, 16), 12, 0.0, RngStream(2))
        assert np.array_equal(exact.states, ou.samples)

    def test_ou_marginal_is_exact(self):
        g = TimeGrid(1.0, 2)
        x = np.stack([sample_joint_linear(g, 1, 1.0, RngStream(5, i))[1].samples
                      for i in range(5000)])
        assert within_4se(np.abs(x[:, 2, 1]) ** 2, float(expint(-2 * LAM1, 1.0)))

    def test_marginal_variance_floor(self):
        _, _, var_u, _, _ = joint_transition(200, 1.0, 1.0)
        n = np.arange(1, 201)
        assert np.all(var_u[1:] >= 1 / (8 * math.e * math.pi ** 2 * n ** 2))

    @pytest.mark.parametrize("h", [1 / 16, 0.5])
    @pytest.mark.parametrize("c", [0.0, 1.0, -2.5])
    def test_innovation_covariance_quadrature(self, c, h):
        _, _, vu, cov, vo = joint_transition(6, c, h)
        for n in range(7):
            lam = LAM1 * n * n

            def q(fn):
                return integrate.quad(fn, 0, h, epsabs=0, epsrel=1e-13, limit=200)[0]

            assert vu[n] == pytest.approx(q(lambda s: math.exp(2 * (c - lam) * s)), rel=1e-9)
            assert cov[n] == pytest.approx(
                q(lambda s: math.exp((c - lam) * s - lam * s)), rel=1e-9)
            assert vo[n] == pytest.approx(q(lambda s: math.exp(-2 * lam * s)), rel=1e-9)

    def test_exact_solution_variance(self):
        g = TimeGrid(1.0, 4)
        u = np.stack([sample_joint_linear(g, 1, 1.0, RngStream(6, i))[0].states[-1]
                      for i in range(5000)])
        assert within_4se(u[:, 0].real ** 2, math.expm1(2.0) / 2)
        assert within_4se(np.abs(u[:, 1]) ** 2, float(expint(2 * (1 - LAM1), 1.0)))


class TestDump:
    def test_round_trip(self):
        for sampler in (sample_ou_path, sample_wiener_path):
            p = sampler(TimeGrid(0.5, 12), 5, RngStream(77, 3))
            buf = io.BytesIO()
            dump_path(p, buf)
            assert len(buf.getvalue()) == 8 + 2 + 2 + 4 + 4 + 8 + 8 + 8 + 16 * 13 * 6
            buf.seek(0)
            q = load_path(buf)
            assert type(q) is type(p) and q == p

    def test_bad_magic(self):
        p = sample_ou_path(TimeGrid(1.0, 2), 1, RngStream(1))
        buf = io.BytesIO()
        dump_path(p, buf)
        raw = bytearray(buf.getvalue())
        raw[0:1] = b"X"
        with pytest.raises(ValueError, match="magic"):
            load_path(io.BytesIO(bytes(raw)))
        with pytest.raises(ValueError, match="truncated"):
            load_path(io.BytesIO(buf.getvalue()[:-8]))


def test_expint_limits():
    assert expint(0.0, 0.3) == 0.3
    assert expint(1e-14, 2.0) == pytest.approx(2.0, rel=1e-13)
    assert expint(-4.0, 1.0) == pytest.approx((1 - math.exp(-4)) / 4, rel=1e-15)
