"""Static figures written next to the CSV reports."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import spectral as sp  # noqa: E402

_RC = {
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "spdestep",
    "svg.fonttype": "path",
}


def _save(fig, path, header=()):
    """Save with a fixed hash salt and no date so SVG output is byte-stable;
    ``header`` lines go into an XML comment after the declaration."""
    fmt = str(path).rsplit(".", 1)[-1]
    meta = {"Date": None} if fmt == "svg" else {}
    fig.savefig(path, format=fmt, metadata=meta, bbox_inches="tight")
    plt.close(fig)
    if fmt == "svg" and header:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        note = "<!-- " + " | ".join(h.replace("--", "- -") for h in header) + " -->\n"
        first, rest = text.split("\n", 1)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(first + "\n" + note + rest)


def plot_rates(report, path, title: str | None = None, header=()):
    """log2(resolution) against log2(mean squared error), with the fitted line
    over the fit window and its slope in the legend."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4))
        res = np.array(report.resolutions, dtype=float)
        ms = report.mean_sq_errors
        pos = ms > 0
        x = np.log2(res[pos])
        y = np.log2(ms[pos])
        ax.plot(x, y, "ko-", ms=4, label="mean squared error")
        if pos.any():
            se = np.array([p.std_err for p in report.points])[pos]
            lo = np.log2(np.maximum(ms[pos] - 2 * se, ms[pos] * 1e-3))
            hi = np.log2(ms[pos] + 2 * se)
            ax.fill_between(x, lo, hi, color="0.8", alpha=0.6, lw=0, label="±2 SE")
        if not math.isnan(report.slope):
            xw = np.log2(np.array(report.fit_window, dtype=float))
            ax.plot(xw, report.intercept + report.slope * xw, "r--",
                    label=f"fit: slope {report.slope:.3f}")
        label = "M" if report.axis == "temporal" else "N"
        ax.set_xlabel(f"log2 {label}")
        ax.set_ylabel("log2 E sup_k ||error||^2")
        ax.set_title(title or f"{report.scheme}, {report.axis} ({report.norm_kind})")
        ax.legend(loc="best", fontsize=8)
        _save(fig, path, header)


def plot_increment_profiles(profiles: dict, path, header=()):
    """``profiles`` maps a norm label to ``(deltas, medians, exponent)``."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4))
        for (name, (d, m, e)), mk in zip(profiles.items(), "os^v"):
            ax.plot(np.log2(d), np.log2(m), mk + "-", ms=4,
                    label=f"{name}: exponent {e:.3f}")
        ax.set_xlabel("log2 lag")
        ax.set_ylabel("log2 median increment")
        ax.set_title("temporal regularity of the stochastic convolution")
        ax.legend(loc="best", fontsize=8)
        _save(fig, path, header)


def plot_lower_bound(results, path, header=()):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4))
        Ns = sorted({r.N for r in results})
        for N in Ns:
            rs = sorted((r for r in results if r.N == N), key=lambda r: r.M)
            M = np.array([r.M for r in rs], dtype=float)
            ax.loglog(M, [r.total for r in rs], "o-", ms=3, label=f"N={N}")
            ax.loglog(M, [r.bound for r in rs], "k:", lw=0.8)
        ax.set_xlabel("M")
        ax.set_ylabel("optimal error (dotted: floor)")
        ax.legend(loc="best", fontsize=7, ncol=2)
        _save(fig, path, header)


def plot_sample_path(traj, path, n_x: int | None = None, header=()):
    n_x = n_x or sp.fast_size(4 * (2 * traj.n_modes + 1))
    vals = sp.synthesize(traj.states, n_x)
    with plt.rc_context(_RC | {"axes.grid": False}):
        fig, ax = plt.subplots(figsize=(6, 4))
        im = ax.imshow(vals.T, origin="lower", aspect="auto", cmap="RdBu_r",
                       extent=(0.0, traj.grid.horizon, 0.0, 1.0))
        fig.colorbar(im, ax=ax, label="u")
        ax.set_xlabel("t")
        ax.set_ylabel("x")
        ax.set_title(f"{traj.scheme}, {traj.nonlinearity}")
        _save(fig, path, header)
