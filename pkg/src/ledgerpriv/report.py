"""Per-figure tables and plots from a sweep's ``results.csv``."""
from __future__ import annotations

import csv
import io
from pathlib import Path

from .harness import SweepResult

AXES = ("max_delay_s", "devices_per_ledger", "packets_per_transaction")


def _views(points):
    """Slices of the grid that vary one parameter, optionally with a series."""
    delays = sorted({p[0] for p in points})
    ks = sorted({p[1] for p in points})
    ns = sorted({p[2] for p in points})
    d0, k0, n0 = delays[0], ks[0], ns[0]
    n_multi = ns[-1]
    return [
        # name, x axis, series axis, filter
        ("delay", 0, None, lambda p: p[1] == k0 and p[2] == n0),
        ("ledger", 1, None, lambda p: p[0] == d0 and p[2] == n0),
        ("multipacket", 2, None, lambda p: p[0] == d0 and p[1] == k0),
        ("ledger_multipacket", 1, 2, lambda p: p[0] == d0),
        ("delay_multipacket", 0, 2, lambda p: p[1] == k0),
        ("combined", 1, 0, lambda p: p[2] == n_multi and n_multi != n0),
    ]


def figure_tables(result: SweepResult) -> dict[str, dict]:
    """``name -> {"x": axis, "series": axis|None, "rows": [...]}`` for every view
    with at least two x values (and two series values when it has a series)."""
    summary = result.summary()
    points = sorted({key[:3] for key in summary})
    if not points:
        return {}
    tables = {}
    for name, x_ax, s_ax, keep in _views(points):
        chosen = [p for p in points if keep(p)]
        if len({p[x_ax] for p in chosen}) < 2:
            continue
        if s_ax is not None and len({p[s_ax] for p in chosen}) < 2:
            continue
        rows = []
        for (d, k, n, scenario), rep in sorted(summary.items(), key=lambda kv: (kv[0][3], kv[0][:3])):
            p = (d, k, n)
            if p not in chosen:
                continue
            rows.append({"scenario": scenario,
                         "series": None if s_ax is None else p[s_ax],
                         "x": p[x_ax],
                         "mean_accuracy": rep.mean_accuracy,
                         "max_accuracy": rep.max_accuracy,
                         "variance": rep.variance,
                         "trials": len(rep.accuracies)})
        tables[name] = {"x": AXES[x_ax], "series": None if s_ax is None else AXES[s_ax],
                        "rows": rows}
    return tables


def table_csv(table: dict) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    series = table["series"]
    header = ["scenario"] + ([series] if series else []) + [table["x"], "mean_accuracy",
                                                             "max_accuracy", "variance", "trials"]
    writer.writerow(header)
    for r in table["rows"]:
        writer.writerow([r["scenario"]] + ([r["series"]] if series else [])
                        + [r["x"], f"{r['mean_accuracy']:.6f}", f"{r['max_accuracy']:.6f}",
                           f"{r['variance']:.6f}", r["trials"]])
    return out.getvalue()


def text_table(name: str, table: dict) -> str:
    lines = [f"== {name}: accuracy vs {table['x']}"
             + (f" by {table['series']}" if table["series"] else "")]
    for r in table["rows"]:
        series = "" if r["series"] is None else f"{table['series']}={r['series']:<6} "
        lines.append(f"  {r['scenario']:<9} {series}{table['x']}={r['x']:<6} "
                     f"mean={r['mean_accuracy']:.3f} max={r['max_accuracy']:.3f} "
                     f"var={r['variance']:.4f}")
    return "\n".join(lines)


def write_report(result: SweepResult, out_dir, figures: bool = True) -> list[Path]:
    """Write ``report_<view>.csv`` (and ``report_<view>.png``) for every view."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in figure_tables(result).items():
        path = out / f"report_{name}.csv"
        path.write_text(table_csv(table), encoding="utf-8")
        written.append(path)
        if figures:
            from .plotting import accuracy_figure, save

            panels: dict[str, dict] = {}
            for r in table["rows"]:
                series = panels.setdefault(r["scenario"], {}).setdefault(r["series"], [])
                series.append((r["x"], r["mean_accuracy"], r["max_accuracy"]))
            fig = accuracy_figure(panels, table["x"], table["series"],
                                  title=name.replace("_", " "))
            png = out / f"report_{name}.png"
            save(fig, png)
            written.append(png)
    return written
