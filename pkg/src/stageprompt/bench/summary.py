"""Aggregate journaled runs into per-method alignment tables.

The statistic per (dataset, method): each prompt's scores are averaged over
the seeds that produced one, scaled by 20, then averaged over prompts. A
prompt whose cells are all null drops out of the average; how many cells and
prompts dropped is carried alongside the score rather than hidden.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from ..errors import SummaryError
from .journal import RunResult

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SummaryRow:
    dataset_id: str
    method: str
    alignment: float  # in [20, 100]
    prompts_scored: int
    prompts_excluded: int
    null_cells: int


@dataclass(frozen=True)
class SummaryTable:
    rows: tuple[SummaryRow, ...]

    def value(self, dataset_id: str, method: str) -> float:
        for row in self.rows:
            if row.dataset_id == dataset_id and row.method == method:
                return row.alignment
        raise SummaryError(f"no summary row for ({dataset_id!r}, {method!r})")

    def render_text(self) -> str:
        """Aligned fixed-width table for terminals and logs."""
        headers = ("dataset", "method", "alignment", "prompts", "excluded", "null cells")
        cells = [
            (r.dataset_id, r.method, f"{r.alignment:.2f}", str(r.prompts_scored),
             str(r.prompts_excluded), str(r.null_cells))
            for r in self.rows
        ]
        widths = [
            max(len(headers[i]), *(len(c[i]) for c in cells)) if cells else len(headers[i])
            for i in range(len(headers))
        ]
        def fmt(row: tuple[str, ...]) -> str:
            return "  ".join(col.ljust(widths[i]) for i, col in enumerate(row)).rstrip()
        lines = [fmt(headers), fmt(tuple("-" * w for w in widths))]
        lines.extend(fmt(c) for c in cells)
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["dataset_id,method,alignment,prompts_scored,prompts_excluded,null_cells"]
        for r in self.rows:
            method = f'"{r.method}"' if "," in r.method else r.method
            lines.append(
                f"{r.dataset_id},{method},{r.alignment:.6f},"
                f"{r.prompts_scored},{r.prompts_excluded},{r.null_cells}"
            )
        return "\n".join(lines) + "\n"


def summarize(result: RunResult) -> SummaryTable:
    """Collapse a run into one row per (dataset, method).

    Raises SummaryError when a method has no scored cell at all; a score of
    zero information is not a score of zero.
    """
    by_method: dict[str, dict[int, list[int | None]]] = {m: {} for m in result.header.methods}
    for row in result.rows:
        by_method.setdefault(row.method, {}).setdefault(row.prompt_id, []).append(row.score)

    summary_rows: list[SummaryRow] = []
    dead_methods: list[str] = []
    for method in result.header.methods:
        prompts = by_method.get(method, {})
        prompt_means: list[float] = []
        null_cells = 0
        excluded = 0
        for prompt_id in sorted(prompts):
            scores = [s for s in prompts[prompt_id] if s is not None]
            null_cells += sum(1 for s in prompts[prompt_id] if s is None)
            if not scores:
                excluded += 1
                continue
            prompt_means.append(sum(scores) / len(scores) * 20.0)
        if not prompt_means:
            dead_methods.append(method)
            continue
        summary_rows.append(SummaryRow(
            dataset_id=result.header.dataset_id,
            method=method,
            alignment=sum(prompt_means) / len(prompt_means),
            prompts_scored=len(prompt_means),
            prompts_excluded=excluded,
            null_cells=null_cells,
        ))
    if dead_methods:
        raise SummaryError(
            f"method(s) {dead_methods} have no scored cells; nothing to summarize"
        )
    return SummaryTable(rows=tuple(summary_rows))


def render_summary_figure(table: SummaryTable, path: Path) -> Path:
    """Bar chart of per-method alignment, one group per dataset."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    datasets = sorted({r.dataset_id for r in table.rows})
    fig, axes = plt.subplots(
        1, len(datasets), figsize=(max(4.0, 2.2 * len(table.rows)), 4.0), squeeze=False
    )
    for ax, dataset_id in zip(axes[0], datasets):
        rows = [r for r in table.rows if r.dataset_id == dataset_id]
        labels = [r.method for r in rows]
        values = [r.alignment for r in rows]
        bars = ax.bar(range(len(rows)), values, color="#4878cf")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels(labels, rotation=20, ha="right")
        ax.set_ylim(0, 100)
        ax.set_ylabel("alignment (20-100)")
        ax.set_title(dataset_id)
        for bar, value in zip(bars, values):
            ax.annotate(f"{value:.1f}", (bar.get_x() + bar.get_width() / 2, value),
                        ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_summary(table: SummaryTable, out_dir: Path, *, figure: bool = True) -> dict[str, Path]:
    """Write the delimited table (and its chart) next to each other.

    Returns the written paths keyed by kind: ``csv`` and optionally ``figure``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    csv_path = out_dir / "summary.csv"
    csv_path.write_text(table.to_csv(), encoding="utf-8")
    paths["csv"] = csv_path
    if figure:
        paths["figure"] = render_summary_figure(table, out_dir / "summary.png")
    return paths
