"""Oracle-backed self checks run by ``spdestep selftest``.

Each check compares a closed form or a scheme against an independent
computation (adaptive quadrature, a high-order ODE solver, a scalar
recursion) and returns ``(name, passed, detail)``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from . import spectral as sp
from .lowerbound import mode_covariances
from .noise import RngStream, sample_ou_path
from .nonlinearity import allen_cahn, bounded_sin, flow, linear, zero
from .schemes import SchemeConfig, run_exponential_euler, run_splitting


def _quad(fn, a, b):
    val, _ = integrate.quad(fn, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def check_covariance_quadrature(M: int = 8, modes=(0, 1, 4), c: float = 1.0):
    worst = 0.0
    t = np.arange(1, M + 1) / M
    for n in modes:
        lam = 4 * math.pi ** 2 * n * n
        var_u, cross, sigma = mode_covariances(n, M, c, 1.0)
        ref_u = _quad(lambda s: math.exp(2 * (c - lam) * (1 - s)), 0, 1)
        worst = max(worst, abs(var_u - ref_u) / ref_u)
        for j in range(M):
            tj = t[j]
            ref = _quad(lambda s: math.exp((c - lam) * (1 - s) - lam * (tj - s)), 0, tj)
            worst = max(worst, abs(cross[j] - ref) / abs(ref))
            for k in range(j, M):
                tk = t[k]
                ref = _quad(lambda s: math.exp(-lam * (tj - s) - lam * (tk - s)), 0, tj)
                worst = max(worst, abs(sigma[j, k] - ref) / abs(ref))
    return "covariance entries vs quadrature", worst <= 1e-9, f"max rel err {worst:.2e}"


def check_flow_oracle(n_z: int = 41, hs=(1e-6, 1e-3, 0.1, 0.5, 1.0)):
    nl = allen_cahn()
    zs = np.linspace(-5.0, 5.0, n_z)
    worst = 0.0
    for h in hs:
        exact = flow(nl, h, zs)
        for z, e in zip(zs, exact):
            sol = integrate.solve_ivp(lambda _, y: y - y ** 3, (0.0, h), [z],
                                      method="DOP853", rtol=1e-13, atol=1e-14)
            worst = max(worst, abs(sol.y[0, -1] - e))
    return "Allen-Cahn flow vs DOP853", worst <= 1e-10, f"max abs err {worst:.2e}"


def check_zero_exactness(N: int = 31, M: int = 64, seed: int = 7):
    path = sample_ou_path(sp.TimeGrid(1.0, M), N, RngStream(seed, 0))
    cfg = SchemeConfig(N=N, M=M, nonlinearity=zero())
    ok = True
    for runner in (run_exponential_euler, run_splitting):
        ok &= bool(np.array_equal(runner(cfg, path).states, path.samples))
    return "f = 0 reproduces the noise exactly", ok, "bit-exact" if ok else "mismatch"


def check_linear_recursion(N: int = 15, M: int = 32, c: float = 0.7, seed: int = 3):
    path = sample_ou_path(sp.TimeGrid(1.0, M), N, RngStream(seed, 1))
    cfg = SchemeConfig(N=N, M=M, nonlinearity=linear(c))
    states = run_exponential_euler(cfg, path).states
    h = 1.0 / M
    lam = sp.eigenvalues(N)
    worst = 0.0
    for n in range(N + 1):
        p = math.exp(-lam[n] * h)
        a = h if n == 0 else -math.expm1(-lam[n] * h) / lam[n]
        o = path.samples[:, n]
        v = 0.0j
        for k in range(M):
            v = p * v + a * c * v + o[k + 1] - p * o[k]
            worst = max(worst, abs(v - states[k + 1, n]))
    return "linear f: field vs scalar recursion", worst <= 1e-12, f"max abs err {worst:.2e}"


def check_parseval(N: int = 40, seed: int = 11):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(N + 1) + 1j * rng.standard_normal(N + 1)
    c[0] = c[0].real
    n_x = sp.fast_size(2 * N + 1)
    u = sp.synthesize(c, n_x)
    lhs = math.sqrt(np.mean(u ** 2))
    rhs = float(sp.l2_norm_coeffs(c))
    err = abs(lhs - rhs) / rhs
    return "Parseval", err <= 1e-10, f"rel err {err:.2e}"


def check_splitting_forms(N: int = 31, M: int = 32, seed: int = 5):
    path = sample_ou_path(sp.TimeGrid(1.0, M), N, RngStream(seed, 2))
    worst = 0.0
    for nl in (allen_cahn(), bounded_sin(1.0)):
        cfg = SchemeConfig(N=N, M=M, nonlinearity=nl)
        a = run_splitting(cfg, path, form="flow").states
        b = run_splitting(cfg, path, form="g_h").states
        worst = max(worst, float(np.max(np.abs(a - b))))
    return "splitting: flow form vs g_h form", worst <= 1e-12, f"max abs diff {worst:.2e}"


CHECKS = (
    check_covariance_quadrature,
    check_flow_oracle,
    check_zero_exactness,
    check_linear_recursion,
    check_parseval,
    check_splitting_forms,
)


def run_all():
    out = []
    for chk in CHECKS:
        name, ok, detail = chk()
        out.append((name, bool(ok), detail))
    return out
