"""Exact samplers for the Galerkin-truncated noise functionals.

Space-time white noise is represented spectrally as ``sum_k e_k d beta_k``
with ``beta_{-k} = conj(beta_k)``, ``E|beta_k(t)|^2 = t`` and ``beta_0``
real.  Each Fourier mode of the stochastic convolution is then an
Ornstein-Uhlenbeck process with rate ``lambda_k = 4 pi^2 k^2`` started
from 0, whose grid transition is Gaussian with

    O(t + h) = exp(-lambda h) O(t) + eta,
    E|eta|^2 = (1 - exp(-2 lambda h)) / (2 lambda)   (= h for k = 0),

so sampling on a grid is exact.

Random numbers are drawn from a Philox generator keyed by
``(base_seed, stream_id, mode, sampler)``; within a mode the step index is
the position in that counter stream.  A path is therefore a pure function
of its arguments, the modes can be filled in any order, and a path at
``N`` modes is exactly the projection of a path at ``N' > N`` modes drawn
from the same stream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .spectral import SpectralField, TimeGrid, eigenvalues

_OU, _WIENER, _JOINT = 0, 1, 2


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream for one Monte-Carlo sample."""

    base_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("base_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2 ** 64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer")
            object.__setattr__(self, name, int(v))

    def generator(self, mode: int, sampler: int = _OU) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.base_seed,
                                     spawn_key=(self.stream_id, int(mode), sampler))
        return np.random.Generator(np.random.Philox(seq))

    def normals(self, n_modes: int, shape: tuple, sampler: int = _OU) -> np.ndarray:
        """Standard normals of shape ``shape + (n_modes + 1,) `` -- mode on the
        last axis, each mode from its own keyed stream."""
        out = np.empty(tuple(shape) + (n_modes + 1,))
        for n in range(n_modes + 1):
            out[..., n] = self.generator(n, sampler).standard_normal(shape)
        return out


@dataclass(frozen=True, eq=False)
class _GridPath:
    grid: TimeGrid
    samples: np.ndarray
    seed: tuple = (0, 0)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.ndim != 2 or s.shape[0] != self.grid.steps + 1:
            raise ValueError(f"samples must have shape (M+1, N+1), got {s.shape}")
        s = s.copy()
        s[:, 0] = s[:, 0].real
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "seed", tuple(int(v) for v in self.seed))

    @property
    def n_modes(self) -> int:
        return self.samples.shape[1] - 1

    @property
    def states(self) -> np.ndarray:
        return self.samples

    def field(self, k: int) -> SpectralField:
        return SpectralField(self.samples[k])

    def project(self, n_modes: int):
        """The same path restricted to modes ``|k| <= n_modes``."""
        if n_modes > self.n_modes:
            raise ValueError(f"path has only {self.n_modes} modes")
        return type(self)(self.grid, self.samples[:, : n_modes + 1], self.seed)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (self.grid == other.grid and self.seed == other.seed
                and np.array_equal(self.samples, other.samples))

    __hash__ = None


class OuPath(_GridPath):
    """Samples of the truncated stochastic convolution on a time grid."""

    def innovations(self) -> np.ndarray:
        """``O(t_{k+1}) - exp(-lambda h) O(t_k)``, shape ``(M, N+1)``."""
        decay = np.exp(-eigenvalues(self.n_modes) * self.grid.h)
        return self.samples[1:] - decay * self.samples[:-1]


class WienerPath(_GridPath):
    """Samples of the Galerkin-truncated cylindrical Wiener process."""

    def increments(self) -> np.ndarray:
        return np.diff(self.samples, axis=0)


def transition_variance(n_modes: int, h: float) -> np.ndarray:
    """``E|eta|^2`` of the OU grid transition for modes ``0..n_modes``."""
    return expint(-2.0 * eigenvalues(n_modes), h)


def expint(rate, h):
    """``int_0^h exp(rate s) ds`` evaluated without cancellation; equals h at
    rate 0."""
    rate = np.asarray(rate, dtype=np.float64)
    x = rate * h
    small = np.abs(x) < 1e-10
    safe = np.where(small, 1.0, rate)
    return np.where(small, h * (1.0 + 0.5 * x), np.expm1(x) / safe)


def _complex_normals(z, var):
    """Complex Gaussians with ``E|.|^2 = var`` from normals ``z[..., 2, N+1]``;
    the mean mode is real with variance ``var[0]``."""
    out = np.sqrt(0.5 * var) * (z[..., 0, :] + 1j * z[..., 1, :])
    out[..., 0] = np.sqrt(var[0]) * z[..., 0, 0]
    return out


def sample_ou_path(grid: TimeGrid, n_modes: int, rng: RngStream) -> OuPath:
    """Exact grid samples of the truncated stochastic convolution, O(0) = 0."""
    z = rng.normals(n_modes, (grid.steps, 2), _OU)
    eta = _complex_normals(z, transition_variance(n_modes, grid.h))
    decay = np.exp(-eigenvalues(n_modes) * grid.h)
    samples = np.zeros((grid.steps + 1, n_modes + 1), dtype=np.complex128)
    for k in range(grid.steps):
        samples[k + 1] = decay * samples[k] + eta[k]
    return OuPath(grid, samples, (rng.base_seed, rng.stream_id))


def sample_wiener_path(grid: TimeGrid, n_modes: int, rng: RngStream) -> WienerPath:
    """Per-mode complex Brownian motions with ``E|W_t(n)|^2 = t``."""
    z = rng.normals(n_modes, (grid.steps, 2), _WIENER)
    dw = _complex_normals(z, np.full(n_modes + 1, grid.h))
    samples = np.zeros((grid.steps + 1, n_modes + 1), dtype=np.complex128)
    np.cumsum(dw, axis=0, out=samples[1:])
    return WienerPath(grid, samples, (rng.base_seed, rng.stream_id))


def subsample(path, factor: int):
    """Restriction of a path to every ``factor``-th grid point.

    The restriction of an exact OU (or Wiener) grid path is an exact path on
    the coarse grid.
    """
    if int(factor) != factor or factor < 1 or path.grid.steps % factor:
        raise ValueError(f"factor {factor} does not divide {path.grid.steps} steps")
    if factor == 1:
        return path
    return type(path)(path.grid.coarsen(factor), path.samples[::factor], path.seed)


def joint_transition(n_modes: int, c: float, h: float):
    """One-step law of ``(u, O)`` per mode for the linear equation
    ``du = (c - lambda) u dt + d beta``, ``dO = -lambda O dt + d beta``.

    Returns ``(prop_u, prop_o, var_u, cov, var_o)``, arrays over modes; the
    covariances refer to the complex mode, ``E[I_u conj(I_o)]`` etc.
    """
    lam = eigenvalues(n_modes)
    a = c - lam
    b = -lam
    return (np.exp(a * h), np.exp(b * h), expint(2 * a, h), expint(a + b, h),
            expint(2 * b, h))


def sample_joint_linear(grid: TimeGrid, n_modes: int, c: float, rng: RngStream,
                        u0: SpectralField | None = None):
    """Exact joint grid samples of the Galerkin solution for ``f(u) = c u``
    and of the noise path driving it.

    Returns ``(exact, ou)`` where ``exact`` is a :class:`~spdestep.schemes.Trajectory`
    and ``ou`` the matching :class:`OuPath`.  The pair is what a scheme sees
    (``ou``) and what it should have produced (``exact``), free of any
    reference-grid bias.
    """
    from .schemes import Trajectory

    prop_u, prop_o, vu, cov, vo = joint_transition(n_modes, c, grid.h)
    # 2x2 Cholesky per mode for the (I_u, I_o) innovation pair; the Schur
    # complement is written so that c = 0 (vu == cov == vo) gives exactly 0
    l22 = np.sqrt(np.maximum((vo * vu - cov * cov) / vu, 0.0))
    z = rng.normals(n_modes, (grid.steps, 2, 2), _JOINT)
    z_u = z[:, 0]
    z_o = z[:, 1]
    i_u = _complex_normals(z_u, vu)
    # I_o = (cov / vu) I_u + l22 * independent part, built from the same
    # complex structure so mode 0 stays real
    i_perp = _complex_normals(z_o, np.ones(n_modes + 1))
    i_o = (cov / vu) * i_u + l22 * i_perp

    u = np.zeros((grid.steps + 1, n_modes + 1), dtype=np.complex128)
    o = np.zeros_like(u)
    if u0 is not None:
        u[0, : min(u0.n_modes, n_modes) + 1] = u0.coeffs[: n_modes + 1]
    for k in range(grid.steps):
        u[k + 1] = prop_u * u[k] + i_u[k]
        o[k + 1] = prop_o * o[k] + i_o[k]
    seed = (rng.base_seed, rng.stream_id)
    exact = Trajectory(grid, u, scheme="exact_linear", nonlinearity=f"linear({c:g})")
    return exact, OuPath(grid, o, seed)


# -- binary dump ----------------------------------------------------------

MAGIC = b"SPDEPATH"
VERSION = 1
_HEADER = struct.Struct("<8sHHIIdQQ")
_KINDS = {OuPath: 0, WienerPath: 1}


def dump_path(path, fh):
    """Write a path: header (magic, version, kind, N, M, T, base_seed,
    stream_id) then little-endian float64 ``(re, im)`` pairs, mode-major."""
    kind = _KINDS[type(path)]
    fh.write(_HEADER.pack(MAGIC, VERSION, kind, path.n_modes, path.grid.steps,
                          path.grid.horizon, *path.seed))
    payload = np.ascontiguousarray(path.samples.T).view(np.float64)
    fh.write(payload.astype("<f8", copy=False).tobytes())


def load_path(fh):
    head = fh.read(_HEADER.size)
    magic, version, kind, n_modes, steps, horizon, base, stream = _HEADER.unpack(head)
    if magic != MAGIC:
        raise ValueError("not a path dump (bad magic)")
    if version != VERSION:
        raise ValueError(f"unsupported path dump version {version}")
    count = 2 * (n_modes + 1) * (steps + 1)
    data = np.frombuffer(fh.read(8 * count), dtype="<f8")
    if data.size != count:
        raise ValueError("truncated path dump")
    samples = data.astype(np.float64).view(np.complex128).reshape(n_modes + 1, steps + 1).T
    cls = {v: k for k, v in _KINDS.items()}[kind]
    return cls(TimeGrid(horizon, steps), samples, (base, stream))
