"""Figures for the CLI reports. Rendered off-screen with the Agg backend."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .ledger import MarketReport  # noqa: E402
from .strategy import ComparisonRow, SweepReport, VerifyReport  # noqa: E402

plt.rcParams.update({"font.size": 9, "axes.spines.top": False, "axes.spines.right": False})


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps repeated renders byte-identical
    metadata = {"Software": None} if path.suffix.lower() == ".png" else None
    fig.savefig(path, dpi=120, metadata=metadata)
    plt.close(fig)
    return path


def plot_sweep(report: SweepReport, path) -> Path:
    """Deviator's utility against the reported-cost multiplier."""
    pts = sorted(report.points, key=lambda p: p.multiplier_bp)
    x = [p.multiplier_bp / 100 for p in pts]
    y = [p.utility / 100 for p in pts]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(x, y, color="0.3", lw=1)
    ax.scatter(x, y, c=["#1f77b4" if p.won else "#bbbbbb" for p in pts], zorder=3, s=22)
    ax.axvline(100, ls="--", lw=0.8, color="#d62728")
    ax.axhline(report.truthful_utility / 100, ls=":", lw=0.8, color="#d62728")
    ax.set_xlabel("reported / true cost (%)")
    ax.set_ylabel("utility")
    ax.set_title(f"{report.provider_id} under {report.mechanism}: max gain {report.max_gain / 100:.2f}")
    return _save(fig, path)


def plot_comparison(rows: list[ComparisonRow], path) -> Path:
    labels = [str(r.mechanism) for r in rows]
    totals = [(r.consumer_total or 0) / 100 for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    bars = ax.bar(labels, totals, color=["#1f77b4" if r.status.ok else "#bbbbbb" for r in rows])
    social = next((r.social_cost_true for r in rows if r.social_cost_true is not None), None)
    if social is not None:
        ax.axhline(social / 100, ls="--", lw=0.8, color="0.2", label="true social cost")
        ax.legend(frameon=False)
    for bar, r in zip(bars, rows):
        ax.annotate(str(r.status), (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                    ha="center", va="bottom", fontsize=7)
    ax.set_ylabel("consumer total")
    return _save(fig, path)


def plot_verify(report: VerifyReport, path) -> Path:
    seeds = [row["seed"] for row in report.scenarios]
    gains = [row["max_gain_cents"] / 100 for row in report.scenarios]
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.bar(seeds, gains, width=0.8, color=["#d62728" if g > 0 else "#1f77b4" for g in gains])
    ax.axhline(0, lw=0.8, color="0.2")
    ax.set_xlabel("seed")
    ax.set_ylabel("max deviation gain")
    ax.set_title(f"{report.mechanism}: {report.verdict} over {report.scenarios_examined} scenarios")
    return _save(fig, path)


def plot_revenue(report: MarketReport, path) -> Path:
    providers = list(report.provider_revenue)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.barh(providers, [v / 100 for v in report.provider_revenue.values()], color="#1f77b4")
    ax.invert_yaxis()
    ax.set_xlabel("cumulative revenue")
    ax.set_title(f"total spend {report.total_spend / 100:.2f}")
    return _save(fig, path)
