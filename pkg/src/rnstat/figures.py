"""Rendering of precision tables to PNG files next to the delimited output.

The report path draws the classic relative-precision panels: one line per
design, a dashed unit line marking parity with SRS, and either the gamma or
the zeta grid on the x axis, whichever the table actually varies.
"""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _style():
    return {
        "figure.figsize": (7.0, 4.4),
        "axes.grid": True,
        "grid.alpha": 0.3,
        "legend.fontsize": 8,
        "axes.labelsize": 10,
        "axes.titlesize": 10,
    }


def _x_field(rows) -> str:
    zetas = {r.zeta for r in rows}
    gammas = {r.gamma for r in rows}
    return "zeta" if len(zetas) >= len(gammas) else "gamma"


def plot_precision(rows, path, title: str = "") -> None:
    """One panel of rp curves, grouped by design descriptor."""
    if not rows:
        raise ValueError("nothing to plot")
    x_field = _x_field(rows)
    group_field = "gamma" if x_field == "zeta" else "design"
    groups = defaultdict(list)
    for r in rows:
        key = getattr(r, group_field)
        if group_field == "gamma" and len({row.design for row in rows}) > 1:
            key = f"{r.design}, gamma={r.gamma:g}"
        groups[key].append(r)
    with plt.rc_context(_style()):
        fig, ax = plt.subplots()
        for key in sorted(groups, key=str):
            pts = sorted(groups[key], key=lambda r: getattr(r, x_field))
            xs = [getattr(p, x_field) for p in pts]
            ys = [p.rp for p in pts]
            label = key if isinstance(key, str) else f"gamma={key:g}"
            ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2,
                    label=label)
        ax.axhline(1.0, color="k", linestyle="--", linewidth=0.8)
        ax.set_xlabel("proportion of maxima" if x_field == "zeta"
                      else "parameter value")
        ax.set_ylabel("relative precision (MSE ratio vs SRS)")
        if title:
            ax.set_title(title)
        ax.legend(loc="best", ncol=2)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)


def plot_case_study(rows, path, title: str = "") -> None:
    """Two panels, perfect vs imperfect ranking, rp against the true zeta."""
    if not rows:
        raise ValueError("nothing to plot")
    modes = ["perfect", "imperfect"]
    present = [m for m in modes if any(r.ranking_mode == m for r in rows)]
    with plt.rc_context(_style()):
        fig, axes = plt.subplots(1, len(present), sharey=True,
                                 figsize=(4.0 * len(present), 4.0))
        if len(present) == 1:
            axes = [axes]
        for ax, mode in zip(axes, present):
            sub = [r for r in rows if r.ranking_mode == mode]
            groups = defaultdict(list)
            for r in sub:
                groups[(r.design, r.zeta_init, r.rho_init)].append(r)
            for key in sorted(groups, key=str):
                pts = sorted(groups[key], key=lambda r: r.zeta)
                label = key[0].removeprefix("case-study/")
                if len({g[1:] for g in groups}) > 1:
                    label += f", init z0={key[1]:g}"
                ax.plot([p.zeta for p in pts], [p.rp for p in pts],
                        marker="o", markersize=3, linewidth=1.2, label=label)
            ax.axhline(1.0, color="k", linestyle="--", linewidth=0.8)
            ax.set_title(f"{mode} ranking")
            ax.set_xlabel("true proportion of maxima")
            ax.legend(loc="best")
        axes[0].set_ylabel("relative precision (MSE ratio vs SRS)")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
