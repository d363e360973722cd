"""Acceptance criteria at full desk scale, one test per criterion.

The tolerances below are the contract values and must not be relaxed.
Run alone with ``pytest tests/test_acceptance.py -v``; the measured
numbers are printed in an "acceptance criteria" summary section.
"""

import functools
import math

import numpy as np
import pytest
from scipy import integrate

from spdestep import cli
from spdestep import spectral as sp
from spdestep.analysis import (HOLDER_MINUS_HALF, block_range, convergence_study,
                               holder_exponent, rho)
from spdestep.config import ExperimentConfig
from spdestep.lowerbound import lower_bound_total, mode_conditional_variance, mode_covariances
from spdestep.noise import RngStream, joint_transition, sample_ou_path, subsample
from spdestep.nonlinearity import allen_cahn, bounded_sin, flow, g_h, linear, zero
from spdestep.schemes import SchemeConfig, run_exponential_euler, run_splitting
from spdestep.spectral import SpectralField, TimeGrid

pytestmark = pytest.mark.slow

LADDER = [2 ** k for k in range(10)]
UPPER_HALF = LADDER[5:]


def bundled(name):
    return ExperimentConfig.load(cli.resolve_config(name))


@functools.cache
def temporal_report(config_name):
    cfg = bundled(config_name)
    e, t = cfg.experiment, cfg.temporal
    assert t.N == 2 ** 9 - 1 and t.M_ladder == LADDER and t.M_finest == 2 ** 11
    assert e.samples == 100 and e.u0 == "zero" and e.T == 1.0
    return convergence_study(cfg.scheme_config(t.N, 1), e.scheme, "temporal", LADDER,
                             t.M_finest, e.samples, e.base_seed, norm_kind=e.norm,
                             fit_window=UPPER_HALF)


def test_criterion_1_allen_cahn_splitting_rate(record_criterion):
    rep = temporal_report("allen_cahn_desk")
    assert rep.scheme == "splitting" and rep.norm_kind == "L2"
    ok = -2.3 <= rep.slope <= -1.6
    record_criterion(1, ok, f"mean squared error slope {rep.slope:.4f} (band [-2.3, -1.6])")
    assert ok


def test_criterion_2_exponential_euler_rate(record_criterion):
    rep = temporal_report("exp_euler_sin")
    assert rep.scheme == "exp_euler" and rep.norm_kind == "Linf"
    ok = -1.15 <= rep.rms_slope <= -0.80
    record_criterion(2, ok, f"rms slope {rep.rms_slope:.4f} (band [-1.15, -0.80])")
    assert ok


def test_criterion_3_wiener_baseline_barrier(record_criterion):
    rep = temporal_report("wiener_sin")
    ref = temporal_report("exp_euler_sin")
    assert rep.scheme == "wiener_baseline" and rep.norm_kind == "Linf"
    gap = rep.rms_slope - ref.rms_slope
    ok = -0.40 <= rep.rms_slope <= -0.15 and gap >= 0.4
    record_criterion(3, ok, f"rms slope {rep.rms_slope:.4f} (band [-0.40, -0.15]), "
                            f"gap to exp_euler {gap:.4f} (need >= 0.4)")
    assert ok


def test_criterion_4_spatial_rate(record_criterion):
    cfg = bundled("allen_cahn_desk")
    s = cfg.spatial
    ladder = [2 ** k - 1 for k in range(3, 9)]
    assert s.M == 2 ** 10 and s.N_ladder == ladder and s.N_finest == 2 ** 10 - 1
    e = cfg.experiment
    rep = convergence_study(cfg.scheme_config(ladder[0], s.M), "splitting", "spatial",
                            ladder, s.N_finest, e.samples, e.base_seed, norm_kind="L2",
                            fit_window=ladder)
    ok = -0.65 <= rep.rms_slope <= -0.35
    record_criterion(4, ok, f"rms L2 slope {rep.rms_slope:.4f} (band [-0.65, -0.35])")
    assert ok


def test_criterion_5_lower_bound_law(record_criterion):
    values = [2 ** k for k in range(3, 9)]
    results = [lower_bound_total(M, N) for M in values for N in values]
    worst = min(r.total / r.bound for r in results)
    floor_ok = worst >= 1.0
    r0 = mode_conditional_variance(0, 256)
    ratio = r0 / (256 ** -2 / 12)
    near_ok = abs(ratio - 1) <= 0.2
    record_criterion(5, floor_ok and near_ok,
                     f"min total/floor {worst:.3f} (need >= 1); mode-0 residual / "
                     f"(M^-2/12) at M=256 = {ratio:.4f} (need within 0.8..1.2)")
    assert floor_ok
    assert near_ok


def test_criterion_6_ou_regularity(record_criterion):
    N, M, n_paths = 2 ** 9 - 1, 2 ** 12, 20
    paths = cli.ou_paths(N, M, 1.0, n_paths, ExperimentConfig().experiment.base_seed)
    linf = holder_exponent(paths, "Linf")
    besov = holder_exponent(paths, HOLDER_MINUS_HALF)
    ok_linf = 0.20 <= linf <= 0.30
    ok_besov = 0.40 <= besov <= 0.60
    record_criterion(6, ok_linf and ok_besov,
                     f"Linf exponent {linf:.4f} (band [0.20, 0.30]); C^-1/2 exponent "
                     f"{besov:.4f} (band [0.40, 0.60])")
    assert ok_linf
    assert ok_besov


def _quad(fn, b):
    return integrate.quad(fn, 0, b, epsabs=0, epsrel=1e-13, limit=200)[0]


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_7_exactness_oracles(record_criterion):
    problems = []
    # f = 0: coupled error exactly zero for both schemes
    grid = TimeGrid(1.0, 2048)
    for i in range(3):
        fine = sample_ou_path(grid, 63, RngStream(20240101, i))
        for M in (16, 256):
            coarse = subsample(fine, 2048 // M)
            for runner in (run_exponential_euler, run_splitting):
                a = runner(SchemeConfig(63, M, nonlinearity=zero()), coarse).states
                b = runner(SchemeConfig(63, 2048, nonlinearity=zero()), fine).states
                if not (np.array_equal(a, coarse.samples)
                        and np.array_equal(a, b[:: 2048 // M])):
                    problems.append(f"f=0 not exact ({runner.__name__}, M={M})")

    # Allen-Cahn closed-form flow vs adaptive ODE oracle
    zs = np.arange(-5.0, 5.0 + 1 / 32, 1 / 16)
    worst = 0.0
    for h in [2.0 ** -k for k in range(0, 21, 2)] + [0.3, 0.77]:
        ours = flow(allen_cahn(), h, zs)
        for z, v in zip(zs, ours):
            sol = integrate.solve_ivp(lambda _, y: y - y ** 3, (0.0, h), [z],
                                      method="DOP853", rtol=1e-13, atol=1e-15)
            worst = max(worst, abs(sol.y[0, -1] - v))
    if worst > 1e-10:
        problems.append(f"flow oracle {worst:.2e}")
    flow_err = worst

    # closed-form covariance entries vs quadrature
    worst = 0.0
    for n in (0, 1, 4):
        lam = 4 * math.pi ** 2 * n * n
        var_u, cross, sigma = mode_covariances(n, 8, 1.0)
        t = np.arange(1, 9) / 8
        worst = max(worst, _rel(var_u, _quad(lambda s: math.exp(2 * (1 - lam) * (1 - s)), 1)))
        for j in range(8):
            tj = t[j]
            worst = max(worst, _rel(cross[j], _quad(
                lambda s: math.exp((1 - lam) * (1 - s) - lam * (tj - s)), tj)))
            for k in range(8):
                tk = t[k]
                worst = max(worst, _rel(sigma[j, k], _quad(
                    lambda s: math.exp(-lam * (tj + tk - 2 * s)), min(tj, tk))))
    for c in (0.0, 1.0, -2.5):
        for h in (1 / 16, 0.5):
            _, _, vu, cov, vo = joint_transition(6, c, h)
            for n in range(7):
                lam = 4 * math.pi ** 2 * n * n
                worst = max(worst, _rel(vu[n], _quad(lambda s: math.exp(2 * (c - lam) * s), h)),
                            _rel(cov[n], _quad(lambda s: math.exp((c - 2 * lam) * s), h)),
                            _rel(vo[n], _quad(lambda s: math.exp(-2 * lam * s), h)))
    if worst > 1e-9:
        problems.append(f"covariance quadrature {worst:.2e}")
    cov_err = worst

    # linear f: field recursion vs scalar recursion
    N, M, c = 31, 64, 0.7
    path = sample_ou_path(TimeGrid(1.0, M), N, RngStream(3, 1))
    states = run_exponential_euler(SchemeConfig(N, M, nonlinearity=linear(c)), path).states
    lam = sp.eigenvalues(N)
    h = 1 / M
    worst = 0.0
    for n in range(N + 1):
        p = math.exp(-lam[n] * h)
        a = h if n == 0 else -math.expm1(-lam[n] * h) / lam[n]
        o, v = path.samples[:, n], 0j
        for k in range(M):
            v = p * v + a * c * v + o[k + 1] - p * o[k]
            worst = max(worst, abs(v - states[k + 1, n]))
    if worst > 1e-12:
        problems.append(f"linear recursion {worst:.2e}")

    record_criterion(7, not problems,
                     f"flow {flow_err:.1e}, covariance {cov_err:.1e}, linear {worst:.1e}"
                     + (f"; failures: {problems}" if problems else ""))
    assert not problems


def _random_field(n, rng):
    c = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
    c[0] = c[0].real
    return SpectralField(c)


def _stability_ratio():
    N, finest, samples = 63, 2 ** 10, 200
    Ms = [2 ** k for k in range(4, 11)]
    peak = dict.fromkeys(Ms, 0.0)
    for i in range(samples):
        fine = sample_ou_path(TimeGrid(1.0, finest), N, RngStream(20240101, i))
        for M in Ms:
            traj = run_splitting(SchemeConfig(N, M, nonlinearity=allen_cahn()),
                                 subsample(fine, finest // M))
            peak[M] = max(peak[M], float(np.max(sp.norm_coeffs(traj.states, "Linf"))))
    return max(peak.values()) / min(peak.values())


def test_criterion_8_property_suites(record_criterion, tmp_path):
    rng = np.random.default_rng(8)
    problems = []

    worst = 0.0
    for n in (1, 7, 40, 255):
        u = _random_field(n, rng)
        vals = sp.to_physical(u, sp.fast_size(2 * n + 1)).values
        worst = max(worst, _rel(math.sqrt(np.mean(vals ** 2)), sp.norm(u, "L2")))
    if worst > 1e-10:
        problems.append(f"Parseval {worst:.2e}")

    worst = 0.0
    for _ in range(50):
        u = _random_field(16, rng)
        s, t = rng.uniform(0, 1, 2)
        a = sp.apply_heat(sp.apply_heat(u, s), t).coeffs
        b = sp.apply_heat(u, s + t).coeffs
        worst = max(worst, float(sp.l2_norm_coeffs(a - b) / sp.l2_norm_coeffs(b)))
    if worst > 1e-13:
        problems.append(f"semigroup {worst:.2e}")

    k = np.arange(20000)
    pou = float(np.max(np.abs(sum(rho(j, k) for j in block_range(19999)) - 1)))
    if pou > 1e-12:
        problems.append(f"partition of unity {pou:.2e}")

    lattice = np.arange(-5.0, 5.0 + 1 / 128, 1 / 64)
    for nl in (allen_cahn(), bounded_sin(1.0)):
        X, Y = np.meshgrid(lattice[::4], lattice[::4])
        for j in range(13):
            h = 2.0 ** -j
            Kh = math.expm1(nl.one_sided_K * h) / h
            lhs = (g_h(nl, h, X) - g_h(nl, h, Y)) * (X - Y)
            if not np.all(lhs <= Kh * (X - Y) ** 2 + 1e-12):
                problems.append(f"g_h one-sided ({nl.tag}, h={h})")
        z = lattice[np.abs(lattice) <= 3]
        weight = 1 + np.abs(z) ** (4 * nl.growth_m + 2)
        C = [float(np.max(np.abs(g_h(nl, 2.0 ** -j, z) - nl.eval(z)) / (2.0 ** -j * weight)))
             for j in range(4, 13)]
        if not max(C) <= 1.01 * C[-1]:
            problems.append(f"|g_h - f| / h not bounded ({nl.tag})")

    ratio = _stability_ratio()
    if not ratio < 2:
        problems.append(f"stability ratio {ratio:.3f}")

    outputs = {}
    for threads in (1, 8):
        base = tmp_path / f"t{threads}"
        for cmd in ("temporal-rate", "spatial-rate", "regularity", "lower-bound",
                    "sample-path"):
            assert cli.main([cmd, "--config", "quick", "--threads", str(threads),
                             "--out", str(base)]) == 0
        outputs[threads] = {p.name: p.read_bytes() for p in sorted(base.glob("*.csv"))}
    same = len(outputs[1]) == 7 and outputs[1] == outputs[8]
    if not same:
        problems.append("CSV bytes differ between 1 and 8 threads")

    record_criterion(8, not problems,
                     f"stability ratio {ratio:.3f}, partition {pou:.1e}, CSV identical {same}"
                     + (f"; failures: {problems}" if problems else ""))
    assert not problems
