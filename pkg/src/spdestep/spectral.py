"""Fourier representation of real periodic fields on the unit torus.

A real field ``u`` on T = R/Z is stored by its coefficients
``u_hat(k) = int_T u(x) exp(-2 pi i k x) dx`` for ``k = 0..N``; negative
modes are implicit, ``u_hat(-k) = conj(u_hat(k))``, so that

    u(x) = sum_{|k| <= N} u_hat(k) exp(2 pi i k x).

With this normalisation Parseval reads ``||u||_2^2 = sum_{|k|<=N} |u_hat(k)|^2``.

The public operations take and return immutable :class:`SpectralField`
objects.  The underscore-free array helpers (``heat_multiplier``,
``synthesize``, ``analyze``, ...) work on raw coefficient arrays with any
number of leading batch axes and are what the time-stepping loops use.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.fft

from .errors import NonFiniteError

FOUR_PI2 = 4.0 * np.pi ** 2

#: default physical oversampling factor for pointwise nonlinearities
DEFAULT_OVERSAMPLE = 4
#: default oversampling factor for sup-norm evaluation
LINF_OVERSAMPLE = 8


def _frozen(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real field with Fourier modes ``|k| <= n_modes``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128, copy=True).reshape(-1)
        if c.size < 1:
            raise ValueError("a field needs at least the mean mode")
        c[0] = c[0].real
        object.__setattr__(self, "coeffs", _frozen(c))

    @property
    def n_modes(self) -> int:
        return self.coeffs.size - 1

    @classmethod
    def zeros(cls, n_modes: int) -> "SpectralField":
        return cls(np.zeros(n_modes + 1, dtype=np.complex128))

    @classmethod
    def mode(cls, k: int, n_modes: int, value: complex = 1.0) -> "SpectralField":
        """Field whose only nonzero coefficients are ``value`` at ``k``
        (and ``conj(value)`` at ``-k``)."""
        c = np.zeros(n_modes + 1, dtype=np.complex128)
        c[k] = value
        return cls(c)

    def __add__(self, other):
        a, b = _pad_pair(self.coeffs, other.coeffs)
        return SpectralField(a + b)

    def __sub__(self, other):
        a, b = _pad_pair(self.coeffs, other.coeffs)
        return SpectralField(a - b)

    def __mul__(self, scalar):
        return SpectralField(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(-self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(
            np.array_equal(self.coeffs, other.coeffs))

    __hash__ = None

    def __repr__(self):
        return f"SpectralField(n_modes={self.n_modes})"


@dataclass(frozen=True, eq=False)
class RealGridField:
    """Samples ``values[j] = u(j / n_points)`` of a real field."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n_points(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_points) / self.n_points


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k T / M``, ``k = 0..M``."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def h(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.h

    def coarsen(self, factor: int) -> "TimeGrid":
        if factor < 1 or self.steps % factor:
            raise ValueError(f"factor {factor} does not divide {self.steps} steps")
        return TimeGrid(self.horizon, self.steps // factor)


# -- array helpers ---------------------------------------------------------

def eigenvalues(n_modes: int) -> np.ndarray:
    """Decay rates ``lambda_k = 4 pi^2 k^2`` for ``k = 0..n_modes``."""
    k = np.arange(n_modes + 1, dtype=np.float64)
    return FOUR_PI2 * k * k


def heat_multiplier(n_modes: int, t: float) -> np.ndarray:
    return np.exp(-eigenvalues(n_modes) * t)


def accel_multiplier(n_modes: int, h: float) -> np.ndarray:
    """``int_0^h exp(-lambda_k s) ds``; equals ``h`` on the mean mode."""
    lam = eigenvalues(n_modes)
    out = np.empty_like(lam)
    out[0] = h
    out[1:] = -np.expm1(-lam[1:] * h) / lam[1:]
    return out


def fast_size(n: int) -> int:
    return scipy.fft.next_fast_len(int(n), real=True)


def min_points(n_modes: int) -> int:
    return 2 * n_modes + 1


def synthesize(coeffs: np.ndarray, n_x: int) -> np.ndarray:
    """Physical values on ``x_j = j / n_x`` from coefficients ``k = 0..N``
    (last axis)."""
    n_modes = coeffs.shape[-1] - 1
    if n_x < min_points(n_modes):
        raise ValueError(f"{n_x} points cannot represent {n_modes} modes "
                         f"(need >= {min_points(n_modes)})")
    return scipy.fft.irfft(coeffs, n=n_x, axis=-1) * n_x


def analyze(values: np.ndarray, n_modes: int) -> np.ndarray:
    """Coefficients ``k = 0..n_modes`` of physical samples (last axis)."""
    n_x = values.shape[-1]
    if n_x < min_points(n_modes):
        raise ValueError(f"{n_x} points cannot resolve {n_modes} modes "
                         f"(need >= {min_points(n_modes)})")
    c = scipy.fft.rfft(values, axis=-1)[..., : n_modes + 1] / n_x
    c[..., 0] = c[..., 0].real
    return c


def pad_modes(coeffs: np.ndarray, n_modes: int) -> np.ndarray:
    """Zero-extend or truncate the last axis to ``n_modes + 1`` entries."""
    have = coeffs.shape[-1] - 1
    if have >= n_modes:
        return coeffs[..., : n_modes + 1]
    out = np.zeros(coeffs.shape[:-1] + (n_modes + 1,), dtype=np.complex128)
    out[..., : have + 1] = coeffs
    return out


def _pad_pair(a, b):
    n = max(a.size, b.size) - 1
    return pad_modes(a, n), pad_modes(b, n)


def nonlinear_grid_size(n_modes: int, oversample: int = DEFAULT_OVERSAMPLE,
                        degree: int | None = None) -> int:
    """Physical grid size used to evaluate pointwise nonlinearities.

    For a polynomial of degree ``d`` at least ``(d + 1) N + 1`` points are
    used, which makes the truncated spectrum of ``fn(u)`` alias-free.
    """
    if oversample < 2:
        raise ValueError(f"oversample must be >= 2, got {oversample}")
    n = oversample * min_points(n_modes)
    if degree is not None:
        n = max(n, (degree + 1) * n_modes + 1)
    return fast_size(n)


def linf_grid_size(n_modes: int) -> int:
    return fast_size(LINF_OVERSAMPLE * min_points(n_modes))


def check_finite(values: np.ndarray, what: str = "nonlinearity"):
    if not np.all(np.isfinite(values)):
        bad = np.flatnonzero(~np.isfinite(values.reshape(-1)))[0]
        idx = np.unravel_index(bad, values.shape)
        raise NonFiniteError(f"{what} produced a non-finite value at grid "
                             f"index {tuple(int(i) for i in idx)}",
                             index=tuple(int(i) for i in idx))


def apply_pointwise(coeffs: np.ndarray, fn: Callable[[np.ndarray], np.ndarray],
                    n_x: int) -> np.ndarray:
    """``Pi_N fn(u)`` evaluated on an ``n_x``-point grid, same N as input."""
    n_modes = coeffs.shape[-1] - 1
    u = synthesize(coeffs, n_x)
    with np.errstate(over="ignore", invalid="ignore"):
        v = fn(u)
    check_finite(v)
    return analyze(v, n_modes)


# -- public operations ---------------------------------------------------

def project(field: SpectralField, n_target: int) -> SpectralField:
    """Orthogonal projection onto modes ``|k| <= n_target``."""
    if n_target < 0:
        raise ValueError("n_target must be non-negative")
    if n_target >= field.n_modes:
        return field
    return SpectralField(field.coeffs[: n_target + 1])


def apply_heat(field: SpectralField, t: float) -> SpectralField:
    """Heat semigroup ``P_t``: mode k is multiplied by ``exp(-4 pi^2 k^2 t)``."""
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got {t}")
    return SpectralField(field.coeffs * heat_multiplier(field.n_modes, t))


def apply_accel(field: SpectralField, h: float) -> SpectralField:
    """Drift weight ``Delta_N^{-1}(P_h - Id)`` with the mean mode mapped to
    ``h`` times itself."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    return SpectralField(field.coeffs * accel_multiplier(field.n_modes, h))


def to_physical(field: SpectralField, n_x: int) -> RealGridField:
    return RealGridField(synthesize(field.coeffs, n_x))


def from_physical(grid: RealGridField, n_modes: int) -> SpectralField:
    return SpectralField(analyze(grid.values, n_modes))


def nonlinear_apply(field: SpectralField, fn: Callable[[np.ndarray], np.ndarray],
                    oversample: int = DEFAULT_OVERSAMPLE,
                    degree: int | None = None) -> SpectralField:
    """``Pi_N fn(u)`` via an oversampled physical grid.

    Exact whenever ``fn`` is a polynomial of degree ``degree`` (the grid is
    enlarged automatically); otherwise aliasing error decays with
    ``oversample``.  Raises :class:`NonFiniteError` if ``fn`` produces a
    non-finite value.
    """
    n_x = nonlinear_grid_size(field.n_modes, oversample, degree)
    return SpectralField(apply_pointwise(field.coeffs, fn, n_x))


def l2_norm_coeffs(coeffs: np.ndarray) -> np.ndarray:
    a2 = np.abs(coeffs) ** 2
    return np.sqrt(a2[..., 0] + 2.0 * a2[..., 1:].sum(axis=-1))


def linf_norm_coeffs(coeffs: np.ndarray, eval_resolution: int | None = None):
    n_modes = coeffs.shape[-1] - 1
    n_x = linf_grid_size(n_modes) if eval_resolution is None else eval_resolution
    return np.abs(synthesize(coeffs, n_x)).max(axis=-1)


def norm(field: SpectralField, kind: str = "L2",
         eval_resolution: int | None = None) -> float:
    """L2 (Parseval) or sup norm.

    The sup norm is the maximum over ``eval_resolution`` equispaced points,
    default ``8 (2N + 1)`` rounded up to a fast FFT size; it never exceeds
    the true supremum.
    """
    kind = kind.upper()
    if kind == "L2":
        return float(l2_norm_coeffs(field.coeffs))
    if kind in ("LINF", "L_INF", "INF"):
        return float(linf_norm_coeffs(field.coeffs, eval_resolution))
    raise ValueError(f"unknown norm kind {kind!r}")


def norm_coeffs(coeffs: np.ndarray, kind: str = "L2",
                eval_resolution: int | None = None) -> np.ndarray:
    """Batched version of :func:`norm` over leading axes."""
    kind = kind.upper()
    if kind == "L2":
        return l2_norm_coeffs(coeffs)
    if kind in ("LINF", "L_INF", "INF"):
        return linf_norm_coeffs(coeffs, eval_resolution)
    raise ValueError(f"unknown norm kind {kind!r}")
