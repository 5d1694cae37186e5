"""Report rendering: delimited output plus figures.

Writes report.json (canonical bytes, reproducible from the seed) and
report.csv next to each other; any figure series attached to the report
is rendered to a PNG alongside.  PNGs are presentation artifacts and are
not part of the reproducibility contract.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .stats import StatsReport  # noqa: E402


def write_report(report: StatsReport, outdir: str) -> dict:
    os.makedirs(outdir, exist_ok=True)
    paths = {"json": os.path.join(outdir, "report.json"),
             "csv": os.path.join(outdir, "report.csv")}
    with open(paths["json"], "wb") as f:
        f.write(report.canonical_json())
    with open(paths["csv"], "w") as f:
        f.write(report.csv_text())
    figures = render_figures(report, outdir)
    if figures:
        paths["figures"] = figures
    return paths


def render_figures(report: StatsReport, outdir: str) -> list[str]:
    out = []
    for name, values in sorted(report.figures.items()):
        if not values:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.hist(values, bins=min(30, max(3, len(set(values)))),
                color="#4477aa", edgecolor="black", linewidth=0.5)
        ax.set_title(f"{report.experiment}: {name}")
        ax.set_xlabel(name.replace("_", " "))
        ax.set_ylabel("trials")
        fig.tight_layout()
        path = os.path.join(outdir, f"{report.experiment}-{name}.png")
        fig.savefig(path, dpi=110)
        plt.close(fig)
        out.append(path)
    return out
