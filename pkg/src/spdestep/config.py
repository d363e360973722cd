"""Experiment configuration read from TOML files.

Schema (every key optional, defaults shown by ``ExperimentConfig()``)::

    [experiment]
    scheme = "splitting"          # exp_euler | splitting | wiener_baseline
    nonlinearity = "allen_cahn"   # allen_cahn | bounded_sin | linear | zero
    nonlinearity_param = 1.0      # K for bounded_sin, c for linear
    T = 1.0
    samples = 100
    base_seed = 20240101
    norm = "L2"                   # L2 | Linf
    u0 = "zero"                   # zero | half_cosine
    oversample = 4
    threads = 1
    out = "out"

    [temporal]   N, M_ladder, M_finest, reference ("fine" | "exact"), fit_window
    [spatial]    M, N_ladder, N_finest, fit_window
    [regularity] N, M, paths, max_starts
    [lower_bound] M_values, N_values, c
    [sample_path] N, M, record_every
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .nonlinearity import BUILTIN, Nonlinearity, by_name
from .schemes import SCHEMES, SchemeConfig, half_cosine


def _pow2(lo, hi):
    return [2 ** k for k in range(lo, hi + 1)]


@dataclass(frozen=True)
class Experiment:
    scheme: str = "splitting"
    nonlinearity: str = "allen_cahn"
    nonlinearity_param: float | None = None
    T: float = 1.0
    samples: int = 100            # Figure 1: 150
    base_seed: int = 20240101
    norm: str = "L2"
    u0: str = "zero"
    oversample: int = 4
    threads: int = 1
    out: str = "out"


@dataclass(frozen=True)
class Temporal:
    N: int = 2 ** 9 - 1           # Figure 1: 2^14 - 1
    M_ladder: list = field(default_factory=lambda: _pow2(0, 9))  # Figure 1: 2^0 .. 2^12
    M_finest: int = 2 ** 11       # Figure 1: 2^13
    reference: str = "fine"
    fit_window: list = field(default_factory=list)  # empty: upper half of the ladder


@dataclass(frozen=True)
class Spatial:
    M: int = 2 ** 10
    N_ladder: list = field(default_factory=lambda: [2 ** k - 1 for k in range(3, 9)])
    N_finest: int = 2 ** 10 - 1
    fit_window: list = field(default_factory=list)


@dataclass(frozen=True)
class Regularity:
    N: int = 2 ** 9 - 1
    M: int = 2 ** 12
    paths: int = 20
    max_starts: int = 256


@dataclass(frozen=True)
class LowerBound:
    M_values: list = field(default_factory=lambda: _pow2(3, 8))
    N_values: list = field(default_factory=lambda: _pow2(3, 8))
    c: float = 1.0


@dataclass(frozen=True)
class SamplePath:
    N: int = 63
    M: int = 256
    record_every: int = 1


_SECTIONS = {
    "experiment": Experiment,
    "temporal": Temporal,
    "spatial": Spatial,
    "regularity": Regularity,
    "lower_bound": LowerBound,
    "sample_path": SamplePath,
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment = field(default_factory=Experiment)
    temporal: Temporal = field(default_factory=Temporal)
    spatial: Spatial = field(default_factory=Spatial)
    regularity: Regularity = field(default_factory=Regularity)
    lower_bound: LowerBound = field(default_factory=LowerBound)
    sample_path: SamplePath = field(default_factory=SamplePath)

    def __post_init__(self):
        _validate(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        parts = {}
        for name, kind in _SECTIONS.items():
            sec = data.get(name, {})
            if not isinstance(sec, dict):
                raise ConfigError(f"[{name}] must be a table")
            names = {f.name for f in dataclasses.fields(kind)}
            bad = set(sec) - names
            if bad:
                raise ConfigError(f"unknown key(s) in [{name}]: {sorted(bad)}")
            try:
                parts[name] = kind(**sec)
            except TypeError as exc:
                raise ConfigError(f"[{name}]: {exc}") from None
        return cls(**parts)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        return cls.from_dict(data)

    def replace_experiment(self, **changes) -> "ExperimentConfig":
        exp = dataclasses.replace(self.experiment, **changes)
        return dataclasses.replace(self, experiment=exp)

    def digest(self) -> str:
        """Hash of everything that affects numbers (threads and out excluded)."""
        d = dataclasses.asdict(self)
        d["experiment"].pop("threads")
        d["experiment"].pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def nonlinearity(self) -> Nonlinearity:
        e = self.experiment
        return by_name(e.nonlinearity, e.nonlinearity_param)

    def scheme_config(self, N: int, M: int) -> SchemeConfig:
        e = self.experiment
        u0 = half_cosine(N) if e.u0 == "half_cosine" else None
        return SchemeConfig(N=N, M=M, T=e.T, nonlinearity=self.nonlinearity(), u0=u0,
                            oversample=e.oversample)


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _ints(name, xs, lo=1):
    _check(isinstance(xs, list) and all(isinstance(x, int) and x >= lo for x in xs),
           f"{name} must be a list of integers >= {lo}")


def _validate(cfg: ExperimentConfig):
    e, t, s = cfg.experiment, cfg.temporal, cfg.spatial
    _check(e.scheme in SCHEMES, f"scheme must be one of {SCHEMES}, got {e.scheme!r}")
    _check(e.nonlinearity in BUILTIN, f"nonlinearity must be one of {sorted(BUILTIN)}")
    _check(isinstance(e.samples, int) and e.samples >= 1, "samples must be >= 1")
    _check(isinstance(e.base_seed, int) and 0 <= e.base_seed < 2 ** 64,
           "base_seed must be an unsigned 64-bit integer")
    _check(e.norm in ("L2", "Linf"), "norm must be L2 or Linf")
    _check(e.u0 in ("zero", "half_cosine"), "u0 must be zero or half_cosine")
    _check(isinstance(e.oversample, int) and e.oversample >= 2, "oversample must be >= 2")
    _check(isinstance(e.threads, int) and e.threads >= 1, "threads must be >= 1")
    _check(isinstance(e.T, (int, float)) and e.T > 0, "T must be positive")
    _ints("temporal.M_ladder", t.M_ladder)
    _check(t.M_ladder, "temporal.M_ladder is empty")
    _check(t.N >= 1 and t.M_finest >= 1, "temporal N and M_finest must be >= 1")
    bad = [M for M in t.M_ladder if t.M_finest % M]
    _check(not bad, f"temporal.M_ladder entries {bad} do not divide M_finest={t.M_finest}")
    _check(t.reference in ("fine", "exact"), "temporal.reference must be fine or exact")
    _ints("temporal.fit_window", t.fit_window)
    _check(set(t.fit_window) <= set(t.M_ladder), "temporal.fit_window not in the ladder")
    _ints("spatial.N_ladder", s.N_ladder)
    _check(s.N_ladder, "spatial.N_ladder is empty")
    _check(all(N <= s.N_finest for N in s.N_ladder),
           f"spatial.N_ladder entries must not exceed N_finest={s.N_finest}")
    _check(s.M >= 1, "spatial.M must be >= 1")
    _ints("spatial.fit_window", s.fit_window)
    _check(set(s.fit_window) <= set(s.N_ladder), "spatial.fit_window not in the ladder")
    r = cfg.regularity
    _check(r.N >= 1 and r.M >= 16 and r.paths >= 1, "regularity needs N >= 1, M >= 16, "
           "paths >= 1")
    lb = cfg.lower_bound
    _ints("lower_bound.M_values", lb.M_values)
    _ints("lower_bound.N_values", lb.N_values)
    p = cfg.sample_path
    _check(p.N >= 1 and p.M >= 1 and p.record_every >= 1 and p.M % p.record_every == 0,
           "sample_path: record_every must divide M")
