"""Figure rendering for the report-emitting CLI paths.

Each renderer takes the same rows the CSV writer sees and draws the
corresponding chart next to the table: mean one-point score against
dimension for the synthetic grids, and attack fraction / holdout loss /
variance explained against the retained dimension for the defense runs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_synth_figure(cells, path) -> None:
    """Mean optimal one-point score vs dimension, one line per (family, m)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    series: dict[tuple, list] = {}
    for c in cells:
        series.setdefault((c.family, c.m), []).append(c)
    for (family, m), pts in sorted(series.items()):
        pts = sorted(pts, key=lambda c: c.d)
        ax.errorbar(
            [c.d for c in pts],
            [c.mean_score for c in pts],
            yerr=[c.sem for c in pts],
            marker="o",
            capsize=3,
            label=f"{family}, m={m}",
        )
    ax.set_xscale("log", base=2)
    ax.set_xlabel("dimension d")
    ax.set_ylabel("mean best one-point score")
    ax.set_title("Attack effectiveness vs dimension")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_defense_figure(rows, path) -> None:
    """Attack fraction per budget, holdout loss, and variance explained vs d'."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 4.2))

    by_budget: dict[int, list] = {}
    for r in rows:
        by_budget.setdefault(r.budget, []).append(r)
    for budget, pts in sorted(by_budget.items()):
        pts = sorted(pts, key=lambda r: r.d_prime)
        ax1.plot(
            [r.d_prime for r in pts],
            [r.score_fraction for r in pts],
            marker="o",
            label=f"attack fraction, b={budget}",
        )
    ax1.set_xscale("log", base=2)
    ax1.set_xlabel("retained dimension d'")
    ax1.set_ylabel("attacker score fraction")
    ax1.set_ylim(-0.02, 1.02)
    ax1.grid(True, alpha=0.3)
    ax1.legend(fontsize=8)
    ax1.set_title("Attack strength under projection")

    seen = {}
    for r in rows:
        seen[r.d_prime] = (r.loss, r.explained_variance)
    dps = sorted(seen)
    ax2.plot(dps, [seen[d][0] for d in dps], marker="s", color="tab:red", label="holdout loss")
    ax2.plot(dps, [seen[d][1] for d in dps], marker="^", color="tab:green", label="variance explained")
    ax2.set_xscale("log", base=2)
    ax2.set_xlabel("retained dimension d'")
    ax2.set_ylim(-0.02, 1.02)
    ax2.grid(True, alpha=0.3)
    ax2.legend(fontsize=8)
    ax2.set_title("Learner cost of the defense")

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
