"""PNG figures written next to the CSV outputs when ``--plot`` is given."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

DPI = 150
STYLES = {
    "phi_exact": dict(color="k", lw=1.5),
    "phi_projection": dict(color="tab:blue", ls="--"),
    "phi_galerkin": dict(color="tab:red", ls=":"),
    "phi_vms": dict(color="tab:green"),
    "err_galerkin": dict(color="tab:red", marker="s"),
    "err_projection": dict(color="tab:blue", marker="o"),
    "err_vms": dict(color="tab:green", marker="^"),
    "err_vms_vs_projection": dict(color="tab:purple", marker="v"),
    "err_fine_scales": dict(color="tab:orange", marker="d"),
}


def _save(fig, path: Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def plot_solution(path: Path, coords, cols: dict, spec) -> None:
    if spec.dim == 1:
        x = coords[0]
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
        for name in ("phi_exact", "phi_projection", "phi_galerkin", "phi_vms"):
            ax0.plot(x, cols[name], label=name, **STYLES[name])
        ax1.plot(x, cols["phi_prime_exact"], "k", label="phi_prime_exact")
        ax1.plot(x, cols["phi_prime_computed"], "tab:green", ls="--", label="phi_prime_computed")
        for ax in (ax0, ax1):
            ax.set_xlabel("x")
            ax.legend(fontsize=8)
        ax0.set_title(spec.describe(), fontsize=9)
    else:
        X, Y = coords
        names = ("phi_exact", "phi_projection", "phi_galerkin", "phi_vms", "phi_prime_exact", "phi_prime_computed")
        fig, axes = plt.subplots(2, 3, figsize=(12, 7.5))
        for ax, name in zip(axes.ravel(), names):
            im = ax.pcolormesh(X, Y, cols[name], shading="auto", cmap="viridis")
            fig.colorbar(im, ax=ax)
            ax.set_title(name, fontsize=9)
            ax.set_aspect("equal")
    _save(fig, path)


def plot_convergence(path: Path, record) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    x = np.array(record.values, dtype=float)
    for name, style in STYLES.items():
        if not name.startswith("err_"):
            continue
        y = record.column(name)
        ok = np.isfinite(y) & (y > 0)
        if ok.any():
            rate = record.rates[name]
            label = f"{name} ({rate:.2f})" if np.isfinite(rate) else name
            ax.plot(x[ok], y[ok], label=label, **style)
    ax.set_yscale("log")
    if record.axis == "h":
        ax.set_xscale("log")
        ax.set_xlabel("N")
    else:
        ax.set_xlabel(record.axis)
        ax.xaxis.set_major_locator(MaxNLocator(integer=True))
    ax.set_ylabel("error")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_greens(path: Path, coords, results) -> None:
    n = len(results)
    if len(coords) == 1:
        fig, ax = plt.subplots(figsize=(6, 4.5))
        for s, gh, ge in results:
            (line,) = ax.plot(coords[0], ge, lw=1.0)
            ax.plot(coords[0], gh, ls="--", color=line.get_color(), label=f"s = {s[0]:.3g}")
        ax.set_xlabel("x")
        ax.legend(fontsize=8)
    else:
        X, Y = coords
        fig, axes = plt.subplots(2, n, figsize=(4 * n, 7), squeeze=False)
        for j, (s, gh, ge) in enumerate(results):
            for i, (val, tag) in enumerate(((ge, "exact"), (gh, "discrete"))):
                im = axes[i, j].pcolormesh(X, Y, val, shading="auto", cmap="viridis")
                fig.colorbar(im, ax=axes[i, j])
                axes[i, j].set_title(f"{tag}, s = ({s[0]:.3g}, {s[1]:.3g})", fontsize=9)
                axes[i, j].set_aspect("equal")
    _save(fig, path)


def plot_ortho(path: Path, tables) -> None:
    fig, axes = plt.subplots(1, len(tables), figsize=(5 * len(tables), 4), squeeze=False)
    for ax, t in zip(axes[0], tables):
        mag = np.log10(np.maximum(np.abs(t.values), 1e-300))
        im = ax.imshow(mag, cmap="magma", vmin=-17, vmax=-10)
        ax.set_xticks(range(len(t.k_values)), [f"k={k}" for k in t.k_values])
        ax.set_yticks(range(len(t.p_values)), [f"p={p}" for p in t.p_values])
        ax.set_title(f"log10 |{t.family}|", fontsize=9)
        fig.colorbar(im, ax=ax)
    _save(fig, path)
