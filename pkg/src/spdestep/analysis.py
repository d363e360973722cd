"""Strong-error measurement, Monte-Carlo rate studies and regularity
diagnostics.

A convergence study runs, per Monte-Carlo stream, one fine noise path, a
reference solution on it and every coarse resolution on the restricted
(subsampled or projected) path, so all error samples are coupled.  The
reported error of a run is the discrete sup over time of the spatial norm
of the difference; the study aggregates its square over streams.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import spectral as sp
from .errors import BlowUpError
from .noise import RngStream, sample_joint_linear, sample_ou_path, sample_wiener_path, subsample
from .schemes import SchemeConfig, Trajectory, noise_kind, run
from .spectral import SpectralField


# -- pathwise errors ------------------------------------------------------

def _aligned_states(a: Trajectory, b: Trajectory):
    if not math.isclose(a.grid.horizon, b.grid.horizon, rel_tol=1e-12):
        raise ValueError("trajectories have different horizons")
    if b.grid.steps % a.grid.steps:
        raise ValueError(f"grid with {b.grid.steps} steps does not refine "
                         f"{a.grid.steps} steps")
    factor = b.grid.steps // a.grid.steps
    idx = np.arange(0, a.grid.steps + 1, a.record_every) * factor
    if np.any(idx % b.record_every):
        raise ValueError("reference trajectory was not recorded at every "
                         "grid point of the coarse trajectory")
    return a.states, b.states[idx // b.record_every]


def error_profile(a: Trajectory, b: Trajectory, norm_kind: str = "L2",
                  eval_resolution: int | None = None,
                  project: bool = False) -> np.ndarray:
    """Spatial norm of ``a - b`` at each recorded grid point of ``a``.

    ``b`` must live on a grid refining ``a``'s.  With different mode counts
    the difference is taken between the full fields (the smaller one
    zero-extended); ``project=True`` instead truncates both to the smaller
    mode count.
    """
    sa, sb = _aligned_states(a, b)
    na, nb = sa.shape[1] - 1, sb.shape[1] - 1
    n = min(na, nb) if project else max(na, nb)
    diff = sp.pad_modes(sa, n) - sp.pad_modes(sb, n)
    return sp.norm_coeffs(diff, norm_kind, eval_resolution)


def error_between(a: Trajectory, b: Trajectory, norm_kind: str = "L2",
                  eval_resolution: int | None = None, project: bool = False) -> float:
    """Discrete sup-in-time strong error ``max_k ||a(t_k) - b(t_k)||``."""
    return float(error_profile(a, b, norm_kind, eval_resolution, project).max())


# -- rate fitting ---------------------------------------------------------

def fit_rate(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares line through ``(log2 x, log2 y)``.

    Returns ``(slope, intercept, residual)`` with ``residual`` the sum of
    squared log2 residuals.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("need at least two (x, y) points")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("rate fitting needs positive finite values")
    x, y = np.log2(pts[:, 0]), np.log2(pts[:, 1])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sum((y - A @ np.array([slope, intercept])) ** 2))
    return float(slope), float(intercept), resid


@dataclass(frozen=True)
class RatePoint:
    resolution: int
    n_samples: int
    mean_sq_error: float
    std_err: float

    @property
    def rms_error(self) -> float:
        return math.sqrt(self.mean_sq_error)


@dataclass(frozen=True)
class RateReport:
    """Mean squared strong errors along a resolution ladder with a fitted
    log2-log2 slope of the mean squared error (``nan`` when undefined)."""

    axis: str
    points: tuple
    slope: float
    intercept: float
    residual: float
    fit_window: tuple
    scheme: str = ""
    norm_kind: str = "L2"
    sample_errors: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def rms_slope(self) -> float:
        return 0.5 * self.slope

    @property
    def resolutions(self):
        return [p.resolution for p in self.points]

    @property
    def mean_sq_errors(self) -> np.ndarray:
        return np.array([p.mean_sq_error for p in self.points])

    def rescaled(self, factor: float) -> "RateReport":
        """The report for all errors multiplied by ``factor > 0``."""
        pts = tuple(RatePoint(p.resolution, p.n_samples, p.mean_sq_error * factor ** 2,
                              p.std_err * factor ** 2) for p in self.points)
        return _finish_report(self.axis, pts, self.fit_window, self.scheme, self.norm_kind)

    def to_csv(self, header: Sequence[str] = ()) -> str:
        lines = [f"# {h}" for h in header]
        slope = "undefined" if math.isnan(self.slope) else repr(self.slope)
        lines.append(f"# axis={self.axis} scheme={self.scheme} norm={self.norm_kind}")
        lines.append("# fit_window=" + " ".join(str(r) for r in self.fit_window))
        lines.append(f"# slope_mean_sq_error={slope}")
        lines.append("# slope_rms_error=" + ("undefined" if math.isnan(self.slope)
                                              else repr(self.rms_slope)))
        lines.append("resolution,n_samples,mean_sq_error,std_err,rms_error")
        for p in self.points:
            lines.append(f"{p.resolution},{p.n_samples},{p.mean_sq_error!r},"
                         f"{p.std_err!r},{p.rms_error!r}")
        return "\n".join(lines) + "\n"


def default_fit_window(resolutions: Sequence[int]) -> tuple:
    r = sorted(resolutions)
    return tuple(r[len(r) // 2:])


def _finish_report(axis, points, window, scheme, norm_kind, sample_errors=None):
    by_res = {p.resolution: p for p in points}
    sel = [(r, by_res[r].mean_sq_error) for r in window]
    if len(sel) >= 2 and all(v > 0 for _, v in sel):
        slope, intercept, resid = fit_rate(sel)
    else:
        slope = intercept = resid = float("nan")
    return RateReport(axis, tuple(points), slope, intercept, resid, tuple(window),
                      scheme, norm_kind, sample_errors)


def _sample_noise(kind: str, grid, n_modes: int, rng: RngStream):
    if kind == "wiener":
        return sample_wiener_path(grid, n_modes, rng)
    return sample_ou_path(grid, n_modes, rng)


def _stream_errors(stream_id, base_cfg, scheme, axis, resolutions, finest, base_seed,
                   norm_kind, reference, eval_resolution):
    rng = RngStream(base_seed, stream_id)
    kind = noise_kind(scheme)
    try:
        if axis == "temporal":
            fine_cfg = base_cfg.replace(M=finest)
            stride = math.gcd(*[finest // M for M in resolutions])
            if reference == "exact":
                nl = base_cfg.nonlinearity
                if nl.kind != "linear" or kind != "ou":
                    raise ValueError("the exact reference needs f(u)=c*u and OU noise")
                ref, path = sample_joint_linear(fine_cfg.grid, base_cfg.N, nl.param, rng,
                                                u0=base_cfg.u0)
            else:
                path = _sample_noise(kind, fine_cfg.grid, base_cfg.N, rng)
                ref = run(scheme, fine_cfg, path, record_every=stride)
            out = []
            for M in resolutions:
                coarse = run(scheme, base_cfg.replace(M=M), subsample(path, finest // M))
                out.append(error_between(coarse, ref, norm_kind, eval_resolution))
            return out
        if reference != "fine":
            raise ValueError("spatial studies use the finest-N run as reference")
        fine_cfg = base_cfg.replace(N=finest)
        path = _sample_noise(kind, fine_cfg.grid, finest, rng)
        ref = run(scheme, fine_cfg, path)
        out = []
        for N in resolutions:
            coarse = run(scheme, base_cfg.replace(N=N), path.project(N))
            out.append(error_between(coarse, ref, norm_kind, eval_resolution))
        return out
    except BlowUpError as exc:
        exc.stream_id = stream_id
        raise BlowUpError(f"stream {stream_id}: {exc}", exc.step, stream_id) from exc


def convergence_study(base_cfg: SchemeConfig, scheme: str, axis: str,
                      resolutions: Sequence[int], finest: int, n_samples: int,
                      base_seed: int, *, norm_kind: str = "L2", reference: str = "fine",
                      fit_window: Sequence[int] | None = None, threads: int = 1,
                      eval_resolution: int | None = None) -> RateReport:
    """Coupled-noise Monte-Carlo strong-error study.

    ``axis="temporal"``: resolutions are step counts ``M`` dividing
    ``finest``, the spatial ``N`` is ``base_cfg.N``.  ``axis="spatial"``:
    resolutions are mode counts ``N < finest`` at fixed ``base_cfg.M``.
    ``reference="exact"`` (temporal, linear ``f``, OU-driven schemes) compares
    against the exactly sampled Galerkin solution instead of a fine run.

    Stream ``i`` uses ``RngStream(base_seed, i)``; results do not depend on
    ``threads``.  A blow-up is re-raised with the stream id attached.
    """
    if axis not in ("temporal", "spatial"):
        raise ValueError(f"axis must be 'temporal' or 'spatial', got {axis!r}")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    resolutions = sorted(int(r) for r in resolutions)
    if axis == "temporal":
        bad = [M for M in resolutions if finest % M]
        if bad:
            raise ValueError(f"resolutions {bad} do not divide finest M={finest}")
    else:
        bad = [N for N in resolutions if N > finest or N < 1]
        if bad:
            raise ValueError(f"resolutions {bad} exceed finest N={finest}")
    window = tuple(sorted(fit_window)) if fit_window else default_fit_window(resolutions)
    if not set(window) <= set(resolutions):
        raise ValueError("fit window must be a subset of the resolutions")

    args = (base_cfg, scheme, axis, resolutions, finest, base_seed, norm_kind,
            reference, eval_resolution)
    ids = range(n_samples)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda i: _stream_errors(i, *args), ids))
    else:
        rows = [_stream_errors(i, *args) for i in ids]
    errs = np.array(rows, dtype=np.float64)
    sq = errs ** 2
    mean = np.zeros(len(resolutions))
    for row in sq:  # ordered reduction by stream id
        mean += row
    mean /= n_samples
    if n_samples > 1:
        se = np.std(sq, axis=0, ddof=1) / math.sqrt(n_samples)
    else:
        se = np.zeros(len(resolutions))
    points = tuple(RatePoint(r, n_samples, float(m), float(s))
                   for r, m, s in zip(resolutions, mean, se))
    return _finish_report(axis, points, window, scheme, norm_kind, errs)


# -- Littlewood-Paley blocks and Besov norms -----------------------------

def _smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, dtype=np.float64), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def _bump(r):
    """1 on [0, 3/8], smoothly down to 0 at 1/2."""
    return 1.0 - _smooth_step((np.abs(r) - 0.375) / 0.125)


def rho(j: int, k) -> np.ndarray:
    """Dyadic partition of unity evaluated at wavenumbers ``k``."""
    k = np.abs(np.asarray(k, dtype=np.float64))
    if j < -1:
        raise ValueError("blocks start at j = -1")
    if j == -1:
        return _bump(k)
    x = k / 2.0 ** j
    return _bump(x / 2.0) - _bump(x)


def block_range(n_modes: int) -> range:
    """Blocks ``j`` whose support meets ``|k| <= n_modes``."""
    J = -1
    while 0.375 * 2.0 ** (J + 1) < n_modes:
        J += 1
    return range(-1, J + 1)


@dataclass(frozen=True)
class BesovSpec:
    """Besov norm ``B^theta_{p,q}``; ``p``/``q`` may be ``math.inf``."""

    theta: float
    p: float = math.inf
    q: float = math.inf

    def __post_init__(self):
        for name in ("p", "q"):
            if not getattr(self, name) >= 1:
                raise ValueError(f"{name} must be in [1, inf]")


HOLDER_MINUS_HALF = BesovSpec(-0.5)


def block_support(j: int, n_modes: int) -> int:
    """Largest wavenumber ``<= n_modes`` where block ``j`` can be nonzero."""
    return 0 if j == -1 else min(n_modes, 2 ** j)


def littlewood_paley_block(field: SpectralField, j: int,
                           spec: BesovSpec | None = None) -> SpectralField:
    """``Delta_j u``: mode ``k`` multiplied by ``rho_j(k)``."""
    return SpectralField(field.coeffs * rho(j, np.arange(field.n_modes + 1)))


def _lp_norm(coeffs, p):
    n_modes = coeffs.shape[-1] - 1
    n_x = sp.linf_grid_size(n_modes)
    v = np.abs(sp.synthesize(coeffs, n_x))
    if math.isinf(p):
        return v.max(axis=-1)
    return np.mean(v ** p, axis=-1) ** (1.0 / p)


def block_norms(coeffs: np.ndarray, spec: BesovSpec) -> np.ndarray:
    """``2^{max(j,0) theta} ||Delta_j u||_{L^p}`` per block, batched over
    leading axes; shape ``(..., n_blocks)``."""
    n_modes = coeffs.shape[-1] - 1
    k = np.arange(n_modes + 1)
    out = []
    for j in block_range(n_modes):
        K = block_support(j, n_modes)
        blk = coeffs[..., : K + 1] * rho(j, k[: K + 1])
        # the low-frequency block carries weight 1 (2^{j theta} from j = 0 on)
        out.append(2.0 ** (max(j, 0) * spec.theta) * _lp_norm(blk, spec.p))
    return np.stack(out, axis=-1)


def besov_norm_coeffs(coeffs: np.ndarray, spec: BesovSpec) -> np.ndarray:
    b = block_norms(coeffs, spec)
    if math.isinf(spec.q):
        return b.max(axis=-1)
    return np.sum(b ** spec.q, axis=-1) ** (1.0 / spec.q)


def besov_norm(field: SpectralField, spec: BesovSpec) -> float:
    """``|| (2^{j theta} ||Delta_j u||_{L^p})_j ||_{l^q}``; ``L^p`` norms are
    evaluated on an 8x oversampled grid (a lower estimate for ``p = inf``)."""
    return float(besov_norm_coeffs(field.coeffs, spec))


# -- temporal regularity --------------------------------------------------

def _space_norm(coeffs, space_norm):
    if isinstance(space_norm, BesovSpec):
        return besov_norm_coeffs(coeffs, space_norm)
    return sp.norm_coeffs(coeffs, space_norm)


def default_lags(steps: int) -> list[int]:
    """Index lags ``M / 2^l`` for ``l = 2 .. log2(M) - 2``."""
    lags = []
    top = int(math.log2(steps)) - 2
    for level in range(2, top + 1):
        if steps % 2 ** level == 0:
            lags.append(steps // 2 ** level)
    return lags


def increment_profile(paths, space_norm="Linf", lags: Sequence[int] | None = None,
                      max_starts: int = 256):
    """Median over start times of ``||X(t + delta) - X(t)||`` per lag.

    ``paths`` is one path/trajectory or a list of them on a common grid;
    increments from all paths are pooled.  At most ``max_starts`` evenly
    spaced start indices are used per lag.  Returns ``(deltas, medians)``.
    """
    if not isinstance(paths, (list, tuple)):
        paths = [paths]
    grids = {(_grid_of(p).steps, _grid_of(p).horizon) for p in paths}
    if len(grids) != 1:
        raise ValueError("paths must share one time grid")
    (steps, horizon), = grids
    lags = default_lags(steps) if lags is None else list(lags)
    if len(lags) < 2:
        raise ValueError(f"a grid of {steps} steps gives fewer than two dyadic lags")
    meds = []
    for lag in lags:
        starts = np.unique(np.linspace(0, steps - lag, min(max_starts, steps - lag + 1))
                           .round().astype(int))
        vals = []
        for p in paths:
            s = p.states
            vals.append(_space_norm(s[starts + lag] - s[starts], space_norm))
        meds.append(float(np.median(np.concatenate(vals))))
    meds = np.array(meds)
    if not np.all(meds > 0):
        raise ValueError("path increments vanish; the exponent is undefined")
    deltas = np.array(lags, dtype=np.float64) * horizon / steps
    return deltas, meds


def _grid_of(p):
    if isinstance(p, Trajectory):
        return p.recorded_grid
    return p.grid


def holder_exponent(paths, space_norm="Linf", lags: Sequence[int] | None = None,
                    max_starts: int = 256) -> float:
    """Empirical temporal Hoelder exponent: log-log slope of the median
    increment size against the lag."""
    deltas, meds = increment_profile(paths, space_norm, lags, max_starts)
    slope, _, _ = fit_rate(list(zip(deltas, meds)))
    return slope
