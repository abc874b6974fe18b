"""Report tables and their CSV / JSONL / Markdown renderings.

Rates print as percentages with one decimal, correlations with three
decimals and citation geometric means with two.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .metrics import CountryRate, FieldReport, Summary, summarize_fields
from .queryexpr import Strategy

__all__ = [
    "FORMATS",
    "Table",
    "correlation_table",
    "country_table",
    "emit_report",
    "render_table",
    "strategy_table",
]

FORMATS = {"csv": "csv", "jsonl": "jsonl", "markdown": "md"}
AGGREGATE_LABELS = ("Min.", "Max.", "Med.", "Mean")


def _fmt(kind: str, value, missing: str) -> str:
    if value is None:
        return missing
    if kind == "pct":
        return f"{100 * value:.1f}%"
    if kind == "corr":
        return f"{value:.3f}"
    if kind == "num2":
        return f"{value:.2f}"
    if kind == "int":
        return str(int(value))
    if kind == "count":
        # whole counts print as integers, fractional averages with one decimal
        return str(int(value)) if float(value).is_integer() else f"{value:.1f}"
    if kind == "diff":
        diff, pct = value
        if diff is None:
            return missing
        return f"{diff:.2f} ({pct:.1f}%)" if pct is not None else f"{diff:.2f}"
    return str(value)


def _raw(kind: str, value):
    if value is None:
        return None
    if kind == "diff":
        diff, pct = value
        return {"difference": None if diff is None else round(diff, 6),
                "percent": None if pct is None else round(pct, 6)}
    if isinstance(value, float):
        return round(value, 6)
    return value


@dataclass
class Table:
    name: str
    columns: list[str]
    kinds: list[str]
    rows: list[list] = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"{self.name}: expected {len(self.columns)} values")
        self.rows.append(list(values))


def render_table(table: Table, format: str) -> str:
    if format == "jsonl":
        return "".join(
            json.dumps({c: _raw(k, v) for c, k, v in zip(table.columns, table.kinds, row)},
                       ensure_ascii=False) + "\n"
            for row in table.rows)
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_fmt(k, v, "") for k, v in zip(table.kinds, row)])
        return buf.getvalue()
    if format == "markdown":
        lines = ["| " + " | ".join(table.columns) + " |",
                 "|" + "|".join("---" if k == "text" else "---:" for k in table.kinds) + "|"]
        for row in table.rows:
            cells = [_fmt(k, v, "n/a").replace("|", "\\|") for k, v in zip(table.kinds, row)]
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def emit_report(tables: Sequence[Table], out_dir: str | Path, format: str) -> list[Path]:
    """Write each table to ``<out_dir>/<table.name>.<ext>``."""
    if format not in FORMATS:
        raise ValueError(f"unknown report format {format!r}")
    if not tables:
        raise ValueError("no tables to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for table in tables:
        path = out / f"{table.name}.{FORMATS[format]}"
        path.write_text(render_table(table, format), encoding="utf-8")
        paths.append(path)
    return paths


def _summary_or_none(values) -> Summary | None:
    try:
        return summarize_fields(values)
    except ValueError:
        return None


def _aggregate_rows(table: Table, columns: list[list]) -> None:
    summaries = [None if kind == "text" else _summary_or_none(col)
                 for col, kind in zip(columns, table.kinds)]
    for label, attr in zip(AGGREGATE_LABELS, ("min", "max", "median", "mean")):
        table.add(label, *[None if s is None else getattr(s, attr) for s in summaries[1:]])


def strategy_table(
    name: str,
    reports: Sequence[FieldReport],
    strategies: Sequence[Strategy],
    key: Callable[[FieldReport], dict] = lambda r: r.strategies,
) -> Table:
    """Per-field recall/precision pairs for each strategy plus aggregate rows."""
    columns = ["Field", "Articles"]
    kinds = ["text", "count"]
    for s in strategies:
        columns += [f"{s.label} Recall", f"{s.label} Prec."]
        kinds += ["pct", "pct"]
    table = Table(name, columns, kinds)
    for r in reports:
        row = [r.field_code, r.n_articles]
        for s in strategies:
            stats = key(r).get(s.value)
            row += [stats.recall if stats else None, stats.precision if stats else None]
        table.add(*row)
    if reports:
        _aggregate_rows(table, [list(c) for c in zip(*table.rows)])
    return table


def correlation_table(reports: Sequence[FieldReport]) -> Table:
    table = Table(
        "correlations",
        ["Field", "Articles", "Scopus citations geomean", "Index citations geomean",
         "Difference (% of index)", "Spearman correlation"],
        ["text", "count", "num2", "num2", "diff", "corr"],
    )
    for r in reports:
        table.add(r.field_code, r.n_correlated, r.scopus_geomean, r.index_geomean,
                  (r.geomean_difference, r.geomean_difference_pct), r.spearman)
    if reports:
        n = [r.n_correlated for r in reports]
        sg = [r.scopus_geomean for r in reports]
        ig = [r.index_geomean for r in reports]
        diffs = [r.geomean_difference for r in reports]
        pcts = [r.geomean_difference_pct for r in reports]
        rho = [r.spearman for r in reports]
        summaries = [_summary_or_none(c) for c in (n, sg, ig, diffs, pcts, rho)]
        for label, attr in zip(("Min", "Max", "Median", "Average"),
                               ("min", "max", "median", "mean")):
            vals = [None if s is None else getattr(s, attr) for s in summaries]
            table.add(label, vals[0], vals[1], vals[2], (vals[3], vals[4]), vals[5])
    return table


def country_table(rates: Sequence[CountryRate]) -> Table:
    table = Table("country_rates", ["Country", "Articles", "Matches", "Percentage matches"],
                  ["text", "int", "int", "pct"])
    for r in rates:
        table.add(r.country, r.articles, r.matches, r.rate)
    return table
