"""Report rows, tables, and the cluster scatter plot."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .lda import format_hierarchy
from .topics import TopicModel

REPORT_COLUMNS = (
    "Topic Category",
    "Name",
    "c-TF-IDF Keyword Representation",
    "Phi-3-Mini-4K-Instruct Semantic Meaning",
    "Topic Hierarchy / Thematic Analysis",
)

# Tableau-20 style palette; outliers are drawn in OUTLIER_COLOR.
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#bcbd22",
    "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2",
    "#dbdb8d", "#9edae5", "#393b79", "#637939",
)
OUTLIER_COLOR = "#b0b0b0"


def report_row(topic: TopicModel, hierarchy: Mapping[str, Sequence[str]] | None = None) -> dict[str, str]:
    return {
        "Topic Category": topic.category.title() if topic.category else "",
        "Name": topic.name,
        "c-TF-IDF Keyword Representation": repr(list(topic.words)),
        "Phi-3-Mini-4K-Instruct Semantic Meaning": topic.semantic_label or "",
        "Topic Hierarchy / Thematic Analysis": format_hierarchy(hierarchy or {}),
    }


def write_report_csv(rows: Sequence[Mapping[str, str]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def dump_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=True) + "\n", encoding="utf-8")


def scatter_svg(points: np.ndarray, labels: np.ndarray, title: str = "", size: int = 800, radius: float = 2.2) -> str:
    """Static SVG scatter of 2-D points, one colour per cluster, outliers grey."""
    pts = np.asarray(points, dtype=np.float64)[:, :2]
    margin = 20.0
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    xy = margin + (pts - lo) / span * (size - 2 * margin)
    xy[:, 1] = size - xy[:, 1]  # y axis points up
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{margin}" y="{margin - 5}" font-family="sans-serif" font-size="12">{title}</text>')
    # outliers first so clusters are drawn on top
    for idx in np.argsort(labels >= 0, kind="stable"):
        label = int(labels[idx])
        color = OUTLIER_COLOR if label < 0 else PALETTE[label % len(PALETTE)]
        out.append(f'<circle cx="{xy[idx, 0]:.2f}" cy="{xy[idx, 1]:.2f}" r="{radius}" fill="{color}" fill-opacity="0.8"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
