"""Figure rendering: one PNG per panel, next to the delimited tables."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_panel(panel: dict, name: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    x = panel["x"]
    numeric_x = all(isinstance(v, (int, float)) for v in x)
    positions = x if numeric_x else range(len(x))
    for series_name, values in panel["series"].items():
        ax.errorbar(
            positions,
            values["mean"],
            yerr=values["sd"],
            marker="o",
            capsize=3,
            label=series_name,
        )
    if not numeric_x:
        ax.set_xticks(list(positions))
        ax.set_xticklabels([str(v) for v in x], rotation=30, ha="right")
    ax.set_xlabel(panel["x_label"])
    ax.set_ylabel("prediction accuracy")
    ax.set_title(name)
    ax.grid(True, alpha=0.3)
    if panel["series"]:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_figures(document: dict, out_dir: str | Path) -> list[Path]:
    """Render every panel of a result document to `<panel>.png`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, panel in document["panels"].items():
        path = out_dir / f"{name}.png"
        render_panel(panel, name, path)
        written.append(path)
    return written
