"""Optimal error of any approximation built from stochastic-convolution
samples, for the linear equation ``du = (Delta + c) u dt + dW``, ``u_0 = 0``.

Modes are independent, so the optimal (conditional-expectation) error
splits over ``n``: for ``|n| <= N`` it is the residual variance of
``u_T(n)`` given ``{O_{t_k}(n)}_k``; modes ``|n| > N`` are unobserved and
contribute their full variance.  Every covariance entry is an exponential
integral with drift ``c - lambda_n`` for ``u`` and ``-lambda_n`` for ``O``.

Real and imaginary parts of a complex mode are independent copies with half
the variance each, so conditioning them separately and adding equals the
formula below evaluated with the complex-mode (unit) covariances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import ConditioningError
from .noise import expint
from .spectral import FOUR_PI2

REGULARIZER = 1e-14


def mode_covariances(n: int, M: int, c: float = 1.0, T: float = 1.0):
    """``(var_u, cross, Sigma)`` for mode ``n`` observed at ``t_1..t_M``.

    ``var_u = E|u_T(n)|^2``, ``cross[k] = E[u_T(n) conj O_{t_k}(n)]``,
    ``Sigma[j, k] = E[O_{t_j}(n) conj O_{t_k}(n)]``.  The observation at
    ``t_0 = 0`` is identically zero and carries no information, so it is left
    out.
    """
    lam = FOUR_PI2 * n * n
    a, b = c - lam, -lam
    t = np.arange(1, M + 1) * (T / M)
    var_u = float(expint(2 * a, T))
    cross = np.exp(a * (T - t)) * expint(a + b, t)
    lo = np.minimum.outer(t, t)
    gap = np.abs(np.subtract.outer(t, t))
    sigma = np.exp(b * gap) * expint(2 * b, lo)
    return var_u, cross, sigma


@lru_cache(maxsize=4096)
def mode_conditional_variance(n: int, M: int, c: float = 1.0, T: float = 1.0) -> float:
    """``E|u_T(n) - E(u_T(n) | O_{t_k}(n), k <= M)|^2``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    var_u, cross, sigma = mode_covariances(abs(n), M, c, T)
    scale = float(np.max(np.diag(sigma)))
    reg = sigma + REGULARIZER * scale * np.eye(M)
    try:
        factor = scipy.linalg.cho_factor(reg, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"covariance of mode {n} at M={M} is not "
                                f"positive definite") from exc
    x = scipy.linalg.cho_solve(factor, cross)
    resid = np.linalg.norm(sigma @ x - cross)
    if resid > 1e-8 * max(np.linalg.norm(cross), 1e-300):
        raise ConditioningError(f"conditioning of mode {n} at M={M} is inaccurate "
                                f"(residual {resid:.3g})")
    res = var_u - float(cross @ x)
    if res < -1e-10 * var_u:
        raise ConditioningError(f"negative residual variance {res:.3g} for mode {n}")
    return max(res, 0.0)


def marginal_variance(n, c: float = 1.0, T: float = 1.0):
    """``E|u_T(n)|^2`` (vectorised over ``n``)."""
    lam = FOUR_PI2 * np.asarray(n, dtype=np.float64) ** 2
    return expint(2 * (c - lam), T)


def floor_bound(M: int, N: int) -> float:
    """The floor (1/M + N^{-1/2}) / 30 on the optimal error."""
    return (1.0 / M + N ** -0.5) / 30.0


@dataclass(frozen=True)
class ConditioningResult:
    M: int
    N: int
    resvar: np.ndarray
    tail: float
    tail_interval: tuple
    total: float
    total_interval: tuple
    bound: float

    @property
    def margin(self) -> float:
        """Conservative excess over the floor (lower end of the total)."""
        return self.total_interval[0] - self.bound

    @property
    def holds(self) -> bool:
        return self.margin >= 0

    def to_csv(self, header=()) -> str:
        lines = [f"# {h}" for h in header]
        lines.append(f"# M={self.M} N={self.N}")
        lines.append("n,resvar")
        lines += [f"{n},{v!r}" for n, v in enumerate(self.resvar)]
        lines.append(f"total,{self.total!r}")
        lines.append(f"bound,{self.bound!r}")
        lines.append(f"margin,{self.margin!r}")
        return "\n".join(lines) + "\n"


def lower_bound_total(M: int, N: int, N_tail: int | None = None,
                      c: float = 1.0, T: float = 1.0) -> ConditioningResult:
    """Exact optimal ``L^2(Omega; L^2(T))`` error of ``u_T`` given the
    observations ``O_{t_k}(n)``, ``k <= M``, ``|n| <= N``.

    Unobserved modes are summed explicitly up to ``N_tail``
    (default ``max(4N, 1024)``); the rest is bracketed analytically, so the
    total comes with an interval.
    """
    if N_tail is None:
        N_tail = max(4 * N, 1024)
    if N_tail <= N:
        raise ValueError("N_tail must exceed N")
    resvar = np.array([mode_conditional_variance(n, M, c, T) for n in range(N + 1)])
    observed = resvar[0] + 2.0 * resvar[1:].sum()
    explicit = 2.0 * float(np.sum(marginal_variance(np.arange(N + 1, N_tail + 1), c, T)))
    # remainder 2 sum_{n > A} var_u(n), var_u(n) ~ 1 / (2 (lambda_n - c))
    A = N_tail
    lam_next = FOUR_PI2 * (A + 1) ** 2
    rem_lo = (-math.expm1(-2 * (lam_next - c) * T)) / (FOUR_PI2 * (A + 1))
    rem_hi = 1.0 / (FOUR_PI2 * A * (1.0 - c / (FOUR_PI2 * A * A)))
    tail_lo, tail_hi = explicit + rem_lo, explicit + rem_hi
    tot_lo = math.sqrt(observed + tail_lo)
    tot_hi = math.sqrt(observed + tail_hi)
    tail = 0.5 * (tail_lo + tail_hi)
    return ConditioningResult(M, N, resvar, tail, (tail_lo, tail_hi),
                              math.sqrt(observed + tail), (tot_lo, tot_hi),
                              floor_bound(M, N))
