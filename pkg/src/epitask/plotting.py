"""Bar charts of a score table, one PNG per split."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import SCOPE_LABELS, SCOPES, ScoreTable  # noqa: E402


def plot_score_table(table: ScoreTable, out_dir: str | Path) -> list[Path]:
    """Render Avg with SE error bars per model and scope; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    models = table.models()
    for split in table.splits():
        fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
        width = 0.8 / len(SCOPES)
        for ax, measure in zip(axes, ("functional", "literal")):
            for j, scope in enumerate(SCOPES):
                xs, ys, errs = [], [], []
                for i, model in enumerate(models):
                    row = table.row(model, split, scope)
                    if row is None:
                        continue
                    cell = getattr(row, measure)
                    xs.append(i + (j - 1) * width)
                    ys.append(100 * cell.avg)
                    errs.append(100 * cell.se)
                if xs:
                    ax.bar(xs, ys, width, yerr=errs, capsize=2, label=SCOPE_LABELS[scope])
            ax.set_title(f"{measure} ({split})")
            ax.set_xticks(range(len(models)))
            ax.set_xticklabels(models, rotation=30, ha="right")
            ax.set_ylim(0, 100)
        axes[0].set_ylabel("Avg pass rate (%)")
        axes[1].legend(loc="upper right", fontsize="small")
        fig.tight_layout()
        path = out / f"scores_{split}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
