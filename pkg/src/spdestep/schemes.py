"""Time-stepping drivers sharing one pre-sampled noise path.

All three schemes advance Fourier coefficients ``|k| <= N`` on the grid
``t_k = k T / M``:

* exponential Euler (noise = stochastic-convolution samples)::

      V_{k+1} = P_h V_k + Delta^{-1}(P_h - Id) Pi_N f(V_k) + O_{k+1} - P_h O_k

* splitting (exact nonlinear flow, then the exact linear stochastic step)::

      Y_k = Pi_N Phi_h(X_k),   X_{k+1} = P_h Y_k + O_{k+1} - P_h O_k

* Wiener-increment exponential Euler (baseline)::

      V_{k+1} = P_h (V_k + h Pi_N f(V_k) + W_{k+1} - W_k)

The noise term is evaluated as ``O_{k+1} + P_h (V_k - O_k)``, which is the
same expression regrouped; with ``f = 0`` it reproduces the noise path
bit-for-bit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import spectral as sp
from .errors import BlowUpError, NonFiniteError
from .nonlinearity import Nonlinearity, flow, g_h, zero
from .spectral import SpectralField, TimeGrid

SCHEMES = ("exp_euler", "splitting", "wiener_baseline")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States of a run at the grid points ``0, r, 2r, ..., M`` with
    ``r = record_every``."""

    grid: TimeGrid
    states: np.ndarray
    scheme: str = ""
    nonlinearity: str = ""
    record_every: int = 1

    def __post_init__(self):
        s = np.asarray(self.states, dtype=np.complex128)
        if self.grid.steps % self.record_every:
            raise ValueError("record_every must divide the number of steps")
        if s.ndim != 2 or s.shape[0] != self.grid.steps // self.record_every + 1:
            raise ValueError(f"unexpected state array shape {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    @property
    def n_modes(self) -> int:
        return self.states.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return self.grid.times[:: self.record_every]

    @property
    def recorded_grid(self) -> TimeGrid:
        return self.grid.coarsen(self.record_every)

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.states[i])

    @property
    def final(self) -> SpectralField:
        return self.field(-1)


def half_cosine(n_modes: int) -> SpectralField:
    """``u0(x) = cos(2 pi x) / 2``, a smooth built-in initial condition."""
    c = np.zeros(n_modes + 1, dtype=np.complex128)
    if n_modes >= 1:
        c[1] = 0.25
    return SpectralField(c)


@dataclass(frozen=True)
class SchemeConfig:
    N: int
    M: int
    T: float = 1.0
    nonlinearity: Nonlinearity = field(default_factory=zero)
    u0: SpectralField | None = None
    oversample: int = sp.DEFAULT_OVERSAMPLE

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.oversample < 2:
            raise ValueError("oversample must be >= 2")
        TimeGrid(self.T, self.M)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.M)

    @property
    def h(self) -> float:
        return self.T / self.M

    def initial_coeffs(self) -> np.ndarray:
        if self.u0 is None:
            return np.zeros(self.N + 1, dtype=np.complex128)
        return sp.pad_modes(self.u0.coeffs, self.N).astype(np.complex128)

    def replace(self, **changes) -> "SchemeConfig":
        return dataclasses.replace(self, **changes)

    @property
    def grid_size(self) -> int:
        return sp.nonlinear_grid_size(self.N, self.oversample, self.nonlinearity.degree)


def _noise_samples(cfg: SchemeConfig, path) -> np.ndarray:
    if path.grid != cfg.grid:
        raise ValueError(f"noise grid {path.grid} does not match scheme grid {cfg.grid}")
    if path.n_modes < cfg.N:
        raise ValueError(f"noise has {path.n_modes} modes, scheme needs {cfg.N}")
    return path.samples[:, : cfg.N + 1]


def _march(cfg: SchemeConfig, noise: np.ndarray, step, scheme: str,
           record_every: int) -> Trajectory:
    M = cfg.M
    if record_every < 1 or M % record_every:
        raise ValueError(f"record_every={record_every} must divide M={M}")
    v = cfg.initial_coeffs()
    states = np.empty((M // record_every + 1, cfg.N + 1), dtype=np.complex128)
    states[0] = v
    for k in range(M):
        try:
            v = step(v, noise[k], noise[k + 1])
        except NonFiniteError as exc:
            raise BlowUpError(f"{scheme}: {exc} in step {k + 1}", step=k + 1) from exc
        if not np.all(np.isfinite(v)):
            raise BlowUpError(f"{scheme}: state is not finite after step {k + 1}",
                              step=k + 1)
        if (k + 1) % record_every == 0:
            states[(k + 1) // record_every] = v
    return Trajectory(cfg.grid, states, scheme, cfg.nonlinearity.tag, record_every)


def run_exponential_euler(cfg: SchemeConfig, noise, record_every: int = 1) -> Trajectory:
    """Accelerated exponential Euler driven by stochastic-convolution samples."""
    from .noise import OuPath

    if not isinstance(noise, OuPath):
        raise TypeError("exponential Euler needs an OuPath")
    samples = _noise_samples(cfg, noise)
    P = sp.heat_multiplier(cfg.N, cfg.h)
    A = sp.accel_multiplier(cfg.N, cfg.h)
    f = cfg.nonlinearity.eval
    n_x = cfg.grid_size

    def step(v, o0, o1):
        return o1 + P * (v - o0) + A * sp.apply_pointwise(v, f, n_x)

    return _march(cfg, samples, step, "exp_euler", record_every)


def run_splitting(cfg: SchemeConfig, noise, record_every: int = 1,
                  form: str = "flow") -> Trajectory:
    """Splitting scheme: pointwise flow ``Phi_h`` then the exact linear step.

    ``form="g_h"`` evaluates the same update as the Euler scheme
    ``X + h Pi_N g_h(X)`` with the averaged drift; the two agree up to
    rounding and serve as a cross-check.
    """
    from .noise import OuPath

    if not isinstance(noise, OuPath):
        raise TypeError("the splitting scheme needs an OuPath")
    if form not in ("flow", "g_h"):
        raise ValueError(f"unknown form {form!r}")
    samples = _noise_samples(cfg, noise)
    P = sp.heat_multiplier(cfg.N, cfg.h)
    nl, h, N = cfg.nonlinearity, cfg.h, cfg.N
    n_x = cfg.grid_size

    def step(v, o0, o1):
        u = sp.synthesize(v, n_x)
        if form == "flow":
            # Pi_N Phi_h(X) = X + Pi_N(Phi_h(X) - X) since Pi_N X = X
            inc = sp.analyze(flow(nl, h, u) - u, N)
        else:
            inc = h * sp.analyze(g_h(nl, h, u), N)
        return o1 + P * (v + inc - o0)

    return _march(cfg, samples, step, "splitting", record_every)


def run_wiener_baseline(cfg: SchemeConfig, noise, record_every: int = 1) -> Trajectory:
    """Exponential Euler driven by Wiener increments (order-1/4 baseline)."""
    from .noise import WienerPath

    if not isinstance(noise, WienerPath):
        raise TypeError("the Wiener baseline needs a WienerPath")
    samples = _noise_samples(cfg, noise)
    P = sp.heat_multiplier(cfg.N, cfg.h)
    f = cfg.nonlinearity.eval
    h = cfg.h
    n_x = cfg.grid_size

    def step(v, w0, w1):
        return P * (v + h * sp.apply_pointwise(v, f, n_x) + (w1 - w0))

    return _march(cfg, samples, step, "wiener_baseline", record_every)


RUNNERS = {
    "exp_euler": run_exponential_euler,
    "splitting": run_splitting,
    "wiener_baseline": run_wiener_baseline,
}


def run(scheme: str, cfg: SchemeConfig, noise, record_every: int = 1) -> Trajectory:
    try:
        runner = RUNNERS[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}") from None
    return runner(cfg, noise, record_every=record_every)


def noise_kind(scheme: str) -> str:
    return "wiener" if scheme == "wiener_baseline" else "ou"
