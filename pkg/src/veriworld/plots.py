"""Figure rendering for crosstab reports.

Every report path can also emit PNG figures next to the delimited output:
accuracy by truth label, by slot value, and by template.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _bar_figure(title, labels, values, counts, path, horizontal=False):
    fig, ax = plt.subplots(figsize=(7, max(2.2, 0.32 * len(labels)) if horizontal else 4))
    if horizontal:
        ax.barh(range(len(labels)), values, color="#4878d0")
        ax.set_yticks(range(len(labels)))
        ax.set_yticklabels(labels, fontsize=7)
        ax.set_xlim(0, 1.0)
        ax.set_xlabel("accuracy")
        ax.invert_yaxis()
    else:
        ax.bar(range(len(labels)), values, color="#4878d0")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylim(0, 1.0)
        ax.set_ylabel("accuracy")
    for i, (v, n) in enumerate(zip(values, counts)):
        if horizontal:
            ax.text(min(v + 0.01, 0.93), i, f"n={n}", va="center", fontsize=6)
        else:
            ax.text(i, v + 0.01, f"n={n}", ha="center", fontsize=7)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def report_figures(report, outdir) -> list:
    """Render the report's accuracy tables as PNG files; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    acc = report.accuracy
    written = []

    labels = ["true", "false"]
    path = outdir / "accuracy_by_label.png"
    _bar_figure(f"{report.env_id}: accuracy by truth label", labels,
                [acc(report.by_label[k]) for k in labels],
                [report.by_label[k][1] for k in labels], path)
    written.append(path)

    if report.by_element:
        keys = sorted(report.by_element)
        path = outdir / "accuracy_by_element.png"
        _bar_figure(f"{report.env_id}: accuracy by element", keys,
                    [acc(report.by_element[k]) for k in keys],
                    [report.by_element[k][1] for k in keys], path)
        written.append(path)

    if report.by_template:
        keys = sorted(report.by_template)
        path = outdir / "accuracy_by_template.png"
        _bar_figure(f"{report.env_id}: accuracy by template", keys,
                    [acc(report.by_template[k]) for k in keys],
                    [report.by_template[k][1] for k in keys], path, horizontal=True)
        written.append(path)
    return written
