"""SVG figures drawn from experiment tables.

The Agg backend is forced and SVG ids are salted with a constant so a
rerun produces the same file byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import Table, medians_by  # noqa: E402

STYLE = {
    "svg.hashsalt": "unfairedge",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_exp1(table: Table, path: str | Path) -> None:
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.2), sharey=False)
        for ax, panel, label in zip(axes, ("RE", "GJ"), (r"$\theta_{R\to E}$", r"$\theta_{G\to J}$")):
            rows = [r for r in table.rows if r[0] == panel]
            for other in sorted({r[1] for r in rows}):
                pts = sorted((r[2], r[3], r[4]) for r in rows if r[1] == other)
                x = [p[0] for p in pts]
                line, = ax.plot(x, [p[2] for p in pts], marker="o", ms=3, label=f"|C|, {label}={other:g}")
                ax.plot(x, [p[1] for p in pts], ls="--", color=line.get_color(), label=f"C^upper, {label}={other:g}")
            ax.set_xlabel(r"$\theta_{R\to J}$")
            ax.set_ylabel("R=0, J=1")
            ax.legend(fontsize=6)
        _save(fig, path)


def plot_exp2(table: Table, path: str | Path) -> None:
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
        for ax, col, label in zip(axes, ("d_l", "d_nl"), ("D_L(m)", "D_NL(m)")):
            ms = np.array(table.column("m"), dtype=float)
            vals = np.array(table.column(col), dtype=float)
            ax.scatter(ms, vals, s=8, alpha=0.5)
            med = medians_by(table, "m", col)
            ax.plot(sorted(med), [med[k] for k in sorted(med)], color="k", label="median")
            ax.set_xscale("log")
            ax.set_xlabel("samples m")
            ax.set_ylabel(label)
            ax.legend()
        _save(fig, path)


def plot_edge_property(table: Table, path: str | Path) -> None:
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
        for edge in sorted(set(table.column("edge"))):
            rows = [r for r in table.rows if r[0] == edge]
            axes[0].scatter([r[1] for r in rows], [r[3] for r in rows], s=8, label=edge)
            axes[1].scatter([r[1] for r in rows], [r[5] for r in rows], s=8, label=edge)
        axes[0].set_ylabel("linear weight w*")
        axes[1].set_ylabel("mlp edge unfairness")
        for ax in axes:
            ax.set_xlabel(r"$\theta_e$")
            ax.legend()
        _save(fig, path)


def plot_model_compare(table: Table, path: str | Path) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        lin = np.array(table.column("mse_linear"), dtype=float)
        mlp = np.array(table.column("mse_mlp"), dtype=float)
        lo = max(min(lin.min(), mlp.min()), 1e-8)
        bins = np.logspace(np.log10(lo), np.log10(max(lin.max(), mlp.max())), 30)
        ax.hist(lin, bins=bins, color="tab:red", alpha=0.6, label="linear")
        ax.hist(mlp, bins=bins, color="tab:blue", alpha=0.6, label="mlp")
        ax.set_xscale("log")
        ax.set_xlabel("MSE of J's CPT fit")
        ax.set_ylabel("models")
        ax.legend()
        _save(fig, path)


def plot_priority(ranking, path: str | Path) -> None:
    with plt.rc_context(STYLE):
        labels = [f"{a}->{b}" for a, b in (r.edge for r in ranking.rows)]
        fig, ax = plt.subplots(figsize=(5, 0.4 * len(labels) + 1.2))
        y = np.arange(len(labels))[::-1]
        ax.barh(y, [r.priority for r in ranking.rows], color="tab:gray")
        ax.set_yticks(y, labels)
        ax.set_xlabel(f"priority (w_u={ranking.w_u:g}, w_p={ranking.w_p:g})")
        _save(fig, path)


PLOTTERS = {
    "exp1": plot_exp1,
    "exp2": plot_exp2,
    "edge-property": plot_edge_property,
    "model-compare": plot_model_compare,
}
