"""Mean-opinion-score aggregation from the ratings log."""

from __future__ import annotations

import sys
from pathlib import Path

from graysr.metrics import mos
from graysr.reports import DISPLAY_NAMES, order_methods


def read_ratings_log(path):
    """Parse the append-only log; returns (rows, skipped_count).

    Resubmitted ratings overwrite: only the last entry per
    (session_id, item_id) counts. Corrupt lines are skipped.
    """
    path = Path(path)
    latest: dict = {}
    skipped = 0
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    for i, line in enumerate(lines):
        if not line.strip() or (i == 0 and line.startswith("timestamp")):
            continue
        parts = line.split(",")
        try:
            if len(parts) != 5:
                raise ValueError("wrong field count")
            _, session_id, item_id, method, score_s = parts
            score = int(score_s)
            if not 1 <= score <= 5:
                raise ValueError("score out of range")
        except ValueError:
            skipped += 1
            continue
        latest[(session_id, item_id)] = (method, score)
    return list(latest.values()), skipped


def mos_report(path):
    """Per-method MOS over the deduplicated log; returns (rows, skipped)."""
    rows, skipped = read_ratings_log(path)
    by_method: dict = {}
    for method, score in rows:
        by_method.setdefault(method, []).append(score)
    ordered = [m for m in ("lr", "hr") if m in by_method]
    ordered += order_methods([m for m in by_method if m not in ("lr", "hr")])
    table = [(m, mos(by_method[m]), len(by_method[m])) for m in ordered]
    return table, skipped


def render_mos_table(table) -> str:
    if not table:
        return "(no ratings)"
    name_w = max(len(DISPLAY_NAMES.get(m, m)) for m, _, _ in table)
    lines = [f"{'Method'.ljust(name_w)}   MOS    n"]
    for method, value, n in table:
        lines.append(f"{DISPLAY_NAMES.get(method, method).ljust(name_w)}  {value:4.2f}  {n:3d}")
    return "\n".join(lines)


def print_report(path, out=None):
    table, skipped = mos_report(path)
    if skipped:
        print(f"warning: skipped {skipped} corrupt log line(s)", file=sys.stderr)
    if not table:
        print("warning: ratings log is empty", file=sys.stderr)
    print(render_mos_table(table), file=out or sys.stdout)
    return table
