"""Report rendering: corpus statistics and rating aggregates as delimited
files with matplotlib figures alongside, for the CLI report path.
"""
from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .lint import CorpusStats  # noqa: E402
from .model import ENERGY_TYPES  # noqa: E402

logger = logging.getLogger(__name__)

LIKERT_LABELS = {
    "aesthetics": "Aesthetics",
    "representativeness_image": "Repr. (image)",
    "representativeness_mechanics": "Repr. (mechanics)",
}


def write_stats_report(stats: CorpusStats, out_dir: Path) -> list[Path]:
    """CSV tables plus one figure per table. Returns every path written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    # hp by type
    hp_csv = out_dir / "hp_by_type.csv"
    with hp_csv.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["type", "mean", "stddev", "min", "max"])
        for card_type in ENERGY_TYPES:
            entry = stats.hp_by_type.get(card_type)
            if entry:
                writer.writerow([card_type, f"{entry.mean:.2f}", f"{entry.stddev:.2f}",
                                 int(entry.min), int(entry.max)])
    written.append(hp_csv)

    types = [t for t in ENERGY_TYPES if t in stats.hp_by_type]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    means = [stats.hp_by_type[t].mean for t in types]
    errs = [stats.hp_by_type[t].stddev for t in types]
    ax.bar(range(len(types)), means, yerr=errs, capsize=3, color="#4a7fb5")
    ax.set_xticks(range(len(types)))
    ax.set_xticklabels(types, rotation=45, ha="right")
    ax.set_ylabel("hit points")
    ax.set_title("Corpus hit points by type (mean ± sd)")
    fig.tight_layout()
    hp_png = out_dir / "hp_by_type.png"
    fig.savefig(hp_png, dpi=120)
    plt.close(fig)
    written.append(hp_png)

    # damage per cost
    dmg_csv = out_dir / "damage_per_cost.csv"
    costs = sorted(stats.damage_per_cost)
    with dmg_csv.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["total_cost", "mean", "stddev"])
        for cost in costs:
            entry = stats.damage_per_cost[cost]
            writer.writerow([cost, f"{entry.mean:.2f}", f"{entry.stddev:.2f}"])
    written.append(dmg_csv)

    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    means = [stats.damage_per_cost[c].mean for c in costs]
    sds = [stats.damage_per_cost[c].stddev for c in costs]
    ax.errorbar(costs, means, yerr=sds, marker="o", capsize=3, color="#b5584a")
    ax.set_xlabel("total energy cost")
    ax.set_ylabel("attack damage")
    ax.set_title("Corpus damage per energy cost (mean ± sd)")
    ax.set_xticks(costs)
    fig.tight_layout()
    dmg_png = out_dir / "damage_per_cost.png"
    fig.savefig(dmg_png, dpi=120)
    plt.close(fig)
    written.append(dmg_png)

    # retreat histogram
    retreat_csv = out_dir / "retreat_distribution.csv"
    retreats = sorted(stats.retreat_distribution)
    with retreat_csv.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["retreat_cost", "cards"])
        for r in retreats:
            writer.writerow([r, stats.retreat_distribution[r]])
    written.append(retreat_csv)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(retreats, [stats.retreat_distribution[r] for r in retreats], color="#5a9b6e")
    ax.set_xlabel("retreat cost")
    ax.set_ylabel("cards")
    ax.set_title("Corpus retreat cost distribution")
    ax.set_xticks(retreats)
    fig.tight_layout()
    retreat_png = out_dir / "retreat_distribution.png"
    fig.savefig(retreat_png, dpi=120)
    plt.close(fig)
    written.append(retreat_png)

    return written


def write_ratings_report(aggregate: dict[str, Any], out_dir: Path) -> list[Path]:
    """Rating means/SDs as CSV plus a bar figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    csv_path = out_dir / "ratings.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["measure", "mean", "stddev", "count"])
        for key, label in LIKERT_LABELS.items():
            entry = aggregate.get(key) or {}
            writer.writerow([label, entry.get("mean"), entry.get("stddev"),
                             entry.get("count", 0)])
    written.append(csv_path)

    labels, means, sds = [], [], []
    for key, label in LIKERT_LABELS.items():
        entry = aggregate.get(key) or {}
        if entry.get("mean") is not None:
            labels.append(label)
            means.append(entry["mean"])
            sds.append(entry.get("stddev") or 0.0)
    if labels:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.bar(range(len(labels)), means, yerr=sds, capsize=4,
               color=["#4a7fb5", "#5a9b6e", "#b5584a"][: len(labels)])
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels)
        ax.set_ylim(0, 5.5)
        ax.set_ylabel("mean rating (1-5)")
        ax.set_title("Rating aggregates")
        fig.tight_layout()
        png_path = out_dir / "ratings.png"
        fig.savefig(png_path, dpi=120)
        plt.close(fig)
        written.append(png_path)

    return written
