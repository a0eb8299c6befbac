"""Plain-text and CSV rendering of evaluation results."""

from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

from .metrics import EvalReport, percent


def _format_table(header: Sequence[str], rows: list[Sequence[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = []
    for row in [header] + rows:
        cells = [str(c).ljust(widths[i]) if i == 0 else str(c).rjust(widths[i])
                 for i, c in enumerate(row)]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def _csv_text(header: Sequence[str], rows: list[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def sort_leaderboard(entries: Iterable[tuple[str, EvalReport]]) -> list[tuple[str, EvalReport]]:
    """Rows ordered by J&F descending; ties fall back to name order."""
    return sorted(entries, key=lambda e: (-e[1].aggregate_jf, e[0]))


def _leaderboard_rows(entries: Iterable[tuple[str, EvalReport]]) -> list[Sequence[str]]:
    return [
        (name, f"{percent(r.aggregate_jf):.2f}", f"{percent(r.aggregate_j):.2f}",
         f"{percent(r.aggregate_f):.2f}")
        for name, r in sort_leaderboard(entries)
    ]


def render_leaderboard(entries: Iterable[tuple[str, EvalReport]]) -> str:
    return _format_table(("Team", "J&F", "J", "F"), _leaderboard_rows(entries))


def leaderboard_csv(entries: Iterable[tuple[str, EvalReport]]) -> str:
    return _csv_text(("Team", "J&F", "J", "F"), _leaderboard_rows(entries))


def _ablation_rows(rows: Iterable[tuple[bool, str, int, EvalReport]]) -> list[Sequence[str]]:
    return [
        ("on" if vlc else "off", strategy, str(number), f"{percent(r.aggregate_jf):.2f}")
        for vlc, strategy, number, r in rows
    ]


def render_ablation(rows: Iterable[tuple[bool, str, int, EvalReport]]) -> str:
    """Ablation grid table with one row per (VLC, strategy, budget) cell."""
    return _format_table(("VLC", "KFS", "Number", "J&F"), _ablation_rows(rows))


def ablation_csv(rows: Iterable[tuple[bool, str, int, EvalReport]]) -> str:
    return _csv_text(("VLC", "KFS", "Number", "J&F"), _ablation_rows(rows))


def render_report(report: EvalReport) -> str:
    """Three-line aggregate summary of one evaluation."""
    return (
        f"J&F: {percent(report.aggregate_jf):.2f}\n"
        f"J:   {percent(report.aggregate_j):.2f}\n"
        f"F:   {percent(report.aggregate_f):.2f}\n"
    )
