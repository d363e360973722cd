"""Pointwise nonlinearities, their ODE flows and the averaged drift ``g_h``.

``flow(nl, h, z)`` is the time-``h`` map of ``dPhi/dt = f(Phi)``,
``Phi_0 = z``; ``g_h(z) = (Phi_h(z) - z) / h`` with ``g_0 = f`` turns the
splitting scheme into an explicit Euler scheme with drift ``g_h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteError

Array = np.ndarray
FlowFn = Callable[[float, Array], Array]


@dataclass(frozen=True)
class Nonlinearity:
    """A reaction term ``f`` with the constants used in the error analysis.

    ``one_sided_K`` bounds ``f'`` from above; ``growth_m`` is the exponent in
    ``|f(x)| <= K (1 + |x|^(2m+1))``.  ``degree`` is the polynomial degree
    when ``f`` is a polynomial (used for alias-free evaluation).
    """

    kind: str
    eval: Callable[[Array], Array]
    deriv: Callable[[Array], Array]
    one_sided_K: float
    growth_m: int
    exact_flow: Optional[FlowFn] = None
    degree: Optional[int] = None
    param: Optional[float] = None

    @property
    def tag(self) -> str:
        if self.param is None:
            return self.kind
        return f"{self.kind}({self.param:g})"

    @property
    def is_zero(self) -> bool:
        return self.kind == "linear" and self.param == 0.0

    def __call__(self, x):
        return self.eval(x)


def _allen_cahn_flow(t, z):
    # sgn(z) e^t / sqrt(z^-2 - 1 + e^{2t}) multiplied through by |z| e^{-t};
    # the z*z - 1 factor keeps the equilibria 0, +-1 exact
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        out = z / np.sqrt(1.0 - (z * z - 1.0) * np.expm1(-2.0 * t))
    # |z| -> inf limit, where z * z overflows
    return np.where(np.abs(z) > 1e150, np.sign(z) / np.sqrt(-np.expm1(-2.0 * t)), out)


def allen_cahn() -> Nonlinearity:
    """``f(x) = x - x^3``."""
    return Nonlinearity(
        kind="allen_cahn",
        eval=lambda x: x - x ** 3,
        deriv=lambda x: 1.0 - 3.0 * x ** 2,
        one_sided_K=1.0,
        growth_m=1,
        exact_flow=_allen_cahn_flow,
        degree=3,
    )


def linear(c: float) -> Nonlinearity:
    """``f(x) = c x``; ``linear(0)`` is the zero nonlinearity."""
    c = float(c)
    return Nonlinearity(
        kind="linear",
        eval=lambda x: c * x,
        deriv=lambda x: np.full_like(np.asarray(x, dtype=np.float64), c),
        one_sided_K=c,
        growth_m=0,
        exact_flow=lambda t, z: np.exp(c * t) * np.asarray(z, dtype=np.float64),
        degree=1,
        param=c,
    )


def zero() -> Nonlinearity:
    return linear(0.0)


def bounded_sin(K: float = 1.0) -> Nonlinearity:
    """``f(x) = K sin(x)``: bounded with bounded derivatives of all orders."""
    K = float(K)

    def _flow(t, z):
        # tan(Phi/2) = tan(z/2) e^{K t} on the branch containing z
        z = np.asarray(z, dtype=np.float64)
        shift = 2.0 * np.pi * np.round(z / (2.0 * np.pi))
        w = z - shift
        return shift + 2.0 * np.arctan(np.tan(0.5 * w) * np.exp(K * t))

    return Nonlinearity(
        kind="bounded_sin",
        eval=lambda x: K * np.sin(x),
        deriv=lambda x: K * np.cos(x),
        one_sided_K=abs(K),
        growth_m=0,
        exact_flow=_flow,
        param=K,
    )


def custom(f, df, K: float, m: int, degree: int | None = None,
           exact_flow: FlowFn | None = None) -> Nonlinearity:
    """User-supplied nonlinearity; without ``exact_flow`` the splitting flow
    is integrated numerically."""
    return Nonlinearity("custom", f, df, float(K), int(m), exact_flow, degree)


BUILTIN = {
    "allen_cahn": lambda p=None: allen_cahn(),
    "linear": lambda p=1.0: linear(1.0 if p is None else p),
    "bounded_sin": lambda p=1.0: bounded_sin(1.0 if p is None else p),
    "zero": lambda p=None: zero(),
}


def by_name(name: str, param: float | None = None) -> Nonlinearity:
    try:
        return BUILTIN[name](param)
    except KeyError:
        raise ValueError(f"unknown nonlinearity {name!r}; "
                         f"choose from {sorted(BUILTIN)}") from None


# -- numeric flow ------------------------------------------------------------

# Dormand-Prince 5(4) tableau (autonomous, so the nodes are not needed)
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4


def numeric_flow(f: Callable[[Array], Array], h: float, z, tol: float = 1e-12,
                 max_steps: int = 100_000) -> Array:
    """Integrate ``y' = f(y)`` to time ``h`` for every entry of ``z``.

    Each entry carries its own adaptive step (Dormand-Prince 5(4), local
    error ``<= tol * (1 + |y|)``).  Raises :class:`NonFiniteError` if an
    intermediate value is not finite.
    """
    y = np.array(z, dtype=np.float64, copy=True)
    shape = y.shape
    y = y.reshape(-1)
    if h == 0 or y.size == 0:
        return y.reshape(shape)
    t = np.zeros_like(y)
    rate = np.abs(f(y)) / (1.0 + np.abs(y))
    dt = np.minimum(h, 0.01 / np.maximum(rate, 1e-12))
    active = np.arange(y.size)
    for _ in range(max_steps):
        if active.size == 0:
            return y.reshape(shape)
        ya, ta, da = y[active], t[active], dt[active]
        da = np.minimum(da, h - ta)
        ks = [f(ya)]
        for i in range(1, 7):
            yi = ya + da * sum(a * kk for a, kk in zip(_A[i], ks))
            ks.append(f(yi))
        y5 = ya + da * sum(b * kk for b, kk in zip(_B5, ks) if b)
        err = np.abs(da * sum(e * kk for e, kk in zip(_E, ks))) / (1.0 + np.abs(ya))
        if not np.all(np.isfinite(y5)):
            bad = active[~np.isfinite(y5)][0]
            raise NonFiniteError(f"numeric flow diverged for z={np.ravel(z)[bad]!r}",
                                 index=int(bad), value=float(np.ravel(z)[bad]))
        if np.any(da < 1e-14 * h):
            bad = active[da < 1e-14 * h][0]
            raise NonFiniteError(f"numeric flow step size underflow for "
                                 f"z={np.ravel(z)[bad]!r} (finite-time blow-up?)",
                                 index=int(bad), value=float(np.ravel(z)[bad]))
        ok = err <= tol
        acc = active[ok]
        y[acc] = y5[ok]
        t[acc] = ta[ok] + da[ok]
        fac = 0.9 * (tol / np.maximum(err, 1e-300)) ** 0.2
        dt[active] = da * np.clip(fac, 0.2, 5.0)
        done = np.zeros(y.size, dtype=bool)
        done[acc] = t[acc] >= h * (1 - 1e-15)
        t[done] = h
        active = active[~done[active]]
    raise NonFiniteError("numeric flow did not reach the end time "
                         f"within {max_steps} steps")


def flow(nl: Nonlinearity, h: float, z) -> Array:
    """``Phi_h(z)``; closed form when the nonlinearity provides one."""
    if h < 0:
        raise ValueError(f"flow time must be >= 0, got {h}")
    z = np.asarray(z, dtype=np.float64)
    if h == 0:
        return z.copy()
    if nl.exact_flow is not None:
        out = nl.exact_flow(h, z)
    else:
        out = numeric_flow(nl.eval, h, z)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"flow of {nl.tag} is not finite at h={h}")
    return out


def g_h(nl: Nonlinearity, h: float, z) -> Array:
    """Averaged drift ``(Phi_h(z) - z) / h``, ``f(z)`` at ``h = 0``.

    Below ``h = 1e-8`` the two-term expansion ``f + (h/2) f' f`` replaces the
    difference quotient, which would lose all digits.
    """
    if h < 0:
        raise ValueError(f"h must be >= 0, got {h}")
    z = np.asarray(z, dtype=np.float64)
    if h == 0:
        return nl.eval(z)
    if h < 1e-8:
        fz = nl.eval(z)
        return fz + 0.5 * h * nl.deriv(z) * fz
    return (flow(nl, h, z) - z) / h
