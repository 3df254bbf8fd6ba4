"""PNG figures written next to CLI outputs (needs the ``plot`` extra)."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise RuntimeError("--plot needs matplotlib; install the 'plot' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({"font.size": 11, "axes.grid": True, "grid.alpha": 0.3})
    return plt


def png_path(out) -> Path:
    return Path(out).with_suffix(".png")


def _finish(plt, fig, ax, path):
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_trajectory(traj, path, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(traj.times, traj.purity, label="R")
    ax.plot(traj.times, traj.r, label="r")
    n = traj.snapshots[0].n
    for q, neg in traj.negativities.items():
        ax.plot(traj.times, neg, "--", label=f"negativity ({q},{n - q})")
    ax.set_xlabel("t")
    ax.set_title(title)
    return _finish(plt, fig, ax, path)


def plot_times(rows, path, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    qs = [r["q_bipartition"] for r in rows]
    ax.plot(qs, [r["t_npt"] for r in rows], "o-", label="t_npt")
    ax.axhline(rows[0]["t_p"], color="C1", ls="--", label="t_p")
    ax.axhline(rows[0]["t_rmax"], color="C2", ls=":", label="t_rmax")
    ax.set_xlabel("q")
    ax.set_ylabel("time")
    ax.set_title(title)
    return _finish(plt, fig, ax, path)


def plot_scan(rows, path):
    """One line per (state, rates, quantity, q): value against t, or against n if untimed."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    series: dict = {}
    timed = any(r.get("t") is not None and r.get("quantity") in ("R", "r", "negativity") for r in rows)
    for r in rows:
        if r.get("error") or r.get("value") is None:
            continue
        key = (r["state"], r["gx"], r["gy"], r["gz"], r["quantity"], r.get("q"))
        if timed:
            key = key + (r["n"],)
        x = r["t"] if timed else r["n"]
        series.setdefault(key, []).append((x, float(r["value"])))
    for key, pts in series.items():
        pts.sort()
        xs, ys = zip(*pts)
        label = f"{key[0]} {key[4]}" + (f" q={key[5]}" if key[5] is not None else "")
        if timed:
            label += f" n={key[6]}"
        ax.plot(xs, ys, "o-", ms=3, label=label)
    ax.set_xlabel("t" if timed else "n")
    if not timed:
        ax.set_xscale("log")
        ax.set_yscale("log")
    return _finish(plt, fig, ax, path)


def plot_fits(fits, rows, path, xkey="n", shift=0.0):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, fit in enumerate(fits):
        members = [r for r in rows if not r.get("error")
                   and all(r.get(k) == v for k, v in fit.group.items())]
        x = np.array([float(r[xkey]) + shift for r in members])
        y = np.array([float(r["value"]) for r in members])
        ax.plot(x, y, "o", color=f"C{i}", label=" ".join(str(v) for v in fit.group.values()))
        xx = np.linspace(x.min(), x.max(), 200)
        ax.plot(xx, fit.predict(xx), "-", color=f"C{i}", alpha=0.7)
    ax.set_xlabel(xkey if not shift else f"{xkey} + {shift:g}")
    return _finish(plt, fig, ax, path)


def plot_state(psi, path, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(np.arange(psi.n + 1), np.abs(psi.d) ** 2)
    ax.set_xlabel("k")
    ax.set_ylabel("|d_k|^2")
    ax.set_title(title)
    return _finish(plt, fig, ax, path)
