"""Command-line front end.

Exit codes: 0 success, 1 failed invariant, 2 configuration error,
3 numeric failure (blow-up, non-finite flow, conditioning).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import spectral as sp
from .analysis import HOLDER_MINUS_HALF, convergence_study, fit_rate, increment_profile
from .config import ExperimentConfig
from .errors import BlowUpError, ConditioningError, ConfigError, NonFiniteError
from .lowerbound import lower_bound_total
from .noise import RngStream, sample_ou_path, sample_wiener_path
from .schemes import noise_kind, run

log = logging.getLogger("spdestep")

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _header(cfg: ExperimentConfig, command: str) -> list[str]:
    return [f"spdestep {__version__}", f"command={command}",
            f"config_hash={cfg.digest()}", f"base_seed={cfg.experiment.base_seed}"]


def _write(path: Path, text: str):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _table(header, columns, rows) -> str:
    lines = [f"# {h}" for h in header]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else repr(v) for v in row))
    return "\n".join(lines) + "\n"


def _rate_study(cfg, out: Path, axis: str, stem: str) -> int:
    from .plotting import plot_rates

    e = cfg.experiment
    if axis == "temporal":
        t = cfg.temporal
        base = cfg.scheme_config(t.N, t.M_ladder[0])
        ladder, finest, window, ref = t.M_ladder, t.M_finest, t.fit_window, t.reference
    else:
        s = cfg.spatial
        base = cfg.scheme_config(s.N_ladder[0], s.M)
        ladder, finest, window, ref = s.N_ladder, s.N_finest, s.fit_window, "fine"
    report = convergence_study(base, e.scheme, axis, ladder, finest, e.samples,
                               e.base_seed, norm_kind=e.norm, reference=ref,
                               fit_window=window or None, threads=e.threads)
    header = _header(cfg, f"{axis}-rate") + [
        f"nonlinearity={base.nonlinearity.tag} T={e.T:g} u0={e.u0} "
        f"{'N' if axis == 'temporal' else 'M'}="
        f"{base.N if axis == 'temporal' else base.M} finest={finest}"]
    _write(out / f"{stem}.csv", report.to_csv(header))
    plot_rates(report, out / f"{stem}.svg", header=header)
    if math.isnan(report.slope):
        print(f"{axis} rate: slope undefined (errors vanish)")
    else:
        print(f"{axis} rate: mean squared error slope {report.slope:.4f}, "
              f"rms slope {report.rms_slope:.4f}")
    return EXIT_OK


def cmd_temporal(cfg, out):
    return _rate_study(cfg, out, "temporal", "rates")


def cmd_spatial(cfg, out):
    return _rate_study(cfg, out, "spatial", "spatial_rates")


def ou_paths(N: int, M: int, T: float, n_paths: int, base_seed: int, threads: int = 1):
    grid = sp.TimeGrid(T, M)
    make = lambda i: sample_ou_path(grid, N, RngStream(base_seed, i))  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(make, range(n_paths)))
    return [make(i) for i in range(n_paths)]


def cmd_regularity(cfg, out):
    from .plotting import plot_increment_profiles

    r, e = cfg.regularity, cfg.experiment
    paths = ou_paths(r.N, r.M, e.T, r.paths, e.base_seed, e.threads)
    profiles = {}
    for name, norm in (("Linf", "Linf"), ("C^-1/2", HOLDER_MINUS_HALF)):
        d, m = increment_profile(paths, norm, max_starts=r.max_starts)
        slope, _, _ = fit_rate(list(zip(d, m)))
        profiles[name] = (d, m, slope)
    header = _header(cfg, "regularity") + [f"N={r.N} M={r.M} paths={r.paths}"]
    _write(out / "regularity.csv",
           _table(header, ["norm", "exponent"],
                  [(k, v[2]) for k, v in profiles.items()]))
    rows = [(k, float(dd), float(mm)) for k, (d, m, _) in profiles.items()
            for dd, mm in zip(d, m)]
    _write(out / "regularity_profile.csv",
           _table(header, ["norm", "lag", "median_increment"], rows))
    plot_increment_profiles(profiles, out / "regularity.svg", header=header)
    for k, v in profiles.items():
        print(f"Hoelder exponent ({k}): {v[2]:.4f}")
    return EXIT_OK


def cmd_lower_bound(cfg, out):
    from .plotting import plot_lower_bound

    lb = cfg.lower_bound
    results = [lower_bound_total(M, N, c=lb.c) for M in lb.M_values for N in lb.N_values]
    header = _header(cfg, "lower-bound") + [f"c={lb.c:g} T=1"]
    cols = ["M", "N", "total", "total_lo", "total_hi", "tail_lo", "tail_hi", "bound",
            "margin", "holds"]
    rows = [(r.M, r.N, r.total, r.total_interval[0], r.total_interval[1],
             r.tail_interval[0], r.tail_interval[1], r.bound, r.margin,
             "yes" if r.holds else "no") for r in results]
    _write(out / "lower_bound.csv", _table(header, cols, rows))
    last = max(results, key=lambda r: (r.M, r.N))
    _write(out / "lower_bound_modes.csv", last.to_csv(header))
    plot_lower_bound(results, out / "lower_bound.svg", header=header)
    failed = [r for r in results if not r.holds]
    worst = min(r.total_interval[0] / r.bound for r in results)
    print(f"lower bound: {len(results) - len(failed)}/{len(results)} grid points above "
          f"the floor, smallest ratio {worst:.3f}")
    if failed:
        for r in failed:
            print(f"floor violated at M={r.M} N={r.N}: total {r.total:.6g} "
                  f"< {r.bound:.6g}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_sample_path(cfg, out):
    from .plotting import plot_sample_path

    p, e = cfg.sample_path, cfg.experiment
    scfg = cfg.scheme_config(p.N, p.M)
    rng = RngStream(e.base_seed, 0)
    if noise_kind(e.scheme) == "wiener":
        path = sample_wiener_path(scfg.grid, p.N, rng)
    else:
        path = sample_ou_path(scfg.grid, p.N, rng)
    traj = run(e.scheme, scfg, path, record_every=p.record_every)
    n_x = sp.fast_size(2 * p.N + 2)
    vals = sp.synthesize(traj.states, n_x)
    x = np.arange(n_x) / n_x
    rows = [(float(t), float(xx), float(v)) for t, row in zip(traj.times, vals)
            for xx, v in zip(x, row)]
    header = _header(cfg, "sample-path") + [
        f"scheme={e.scheme} nonlinearity={scfg.nonlinearity.tag} N={p.N} M={p.M}"]
    _write(out / "sample_path.csv", _table(header, ["t", "x", "u"], rows))
    plot_sample_path(traj, out / "sample_path.svg", header=header)
    print(f"sample path: {len(traj.times)} times x {n_x} points")
    return EXIT_OK


def cmd_selftest(cfg, out):
    from .selftest import run_all

    results = run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    failed = sum(not ok for _, ok, _ in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_INVARIANT if failed else EXIT_OK


COMMANDS = {
    "temporal-rate": (cmd_temporal, "coupled strong-error study along M"),
    "spatial-rate": (cmd_spatial, "coupled strong-error study along N"),
    "regularity": (cmd_regularity, "temporal Hoelder exponents of the noise path"),
    "lower-bound": (cmd_lower_bound, "optimal-error table over an (M, N) grid"),
    "sample-path": (cmd_sample_path, "dump one trajectory as CSV"),
    "selftest": (cmd_selftest, "oracle-backed self checks"),
}


def bundled_configs() -> list[str]:
    root = resources.files("spdestep") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".toml"))


def resolve_config(name: str | None):
    if name is None:
        return None
    p = Path(name)
    if p.exists():
        return p
    root = resources.files("spdestep") / "configs"
    for cand in (name, f"{name}.toml"):
        if (root / cand).is_file():
            return root / cand
    raise ConfigError(f"config {name!r} not found (bundled: {', '.join(bundled_configs())})")


def _u64(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spdestep", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"spdestep {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="TOML file or name of a bundled config")
        p.add_argument("--seed", type=_u64, help="override experiment.base_seed")
        p.add_argument("--threads", type=int, help="worker threads")
        p.add_argument("--out", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        path = resolve_config(args.config)
        cfg = ExperimentConfig.load(path) if path else ExperimentConfig()
        over = {}
        if args.seed is not None:
            over["base_seed"] = args.seed
        if args.threads is not None:
            over["threads"] = args.threads
        if args.out is not None:
            over["out"] = args.out
        if over:
            cfg = cfg.replace_experiment(**over)
        out = Path(cfg.experiment.out)
        if args.command != "selftest":
            out.mkdir(parents=True, exist_ok=True)
        fn = COMMANDS[args.command][0]
        return fn(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConditioningError, NonFiniteError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
