"""Threat report emission and aggregation.

Canonical threat CSV columns, in order:
    input_id, metric, threat, attr_class, attr_source_id, style, severity, weight

The first five are the per-evaluation record (attribution blank when the
threat is zero or the metric is an lp baseline). style/severity carry the
corruption provenance of the perturbed file when known, and weight is the
relative class distance W(y, attributed class) for the weighted metric;
these trailing columns are blank otherwise.

Aggregation consumes one or more such CSVs and produces:
    avg         mean threat per (style, severity, metric)
    quadrants   low/high assignment per (style, severity) against a pd
                threshold and an l-inf or external-metric threshold
    heatmap     mean threat per (metric, category, severity)
    pdw_curve   mean relative weighted threat bucketed by W(y, c)

Floats are rendered with repr so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict

import numpy as np

from .corruptions import STYLE_CATEGORY
from .errors import InvariantViolation

THREAT_COLUMNS = (
    "input_id", "metric", "threat", "attr_class", "attr_source_id",
    "style", "severity", "weight",
)

DEFAULT_THRESHOLDS = {"pd": 1.0, "linf": 0.5, "ext": 0.25}

PDW_BUCKETS = 10


def _fmt(v):
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_threat_csv(path, records, style="", severity=""):
    """Write ThreatRecords with optional corruption provenance."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(THREAT_COLUMNS)
        for r in records:
            attr_c = r.attribution.source_class if r.attribution else ""
            attr_i = r.attribution.source_id if r.attribution else ""
            w.writerow([
                r.input_id, r.metric, _fmt(float(r.threat)), attr_c, attr_i,
                style, severity, _fmt(r.weight),
            ])


def write_threat_json(path, records, style="", severity=""):
    rows = []
    for r in records:
        rows.append({
            "input_id": r.input_id,
            "metric": r.metric,
            "threat": float(r.threat),
            "attr_class": r.attribution.source_class if r.attribution else None,
            "attr_source_id": r.attribution.source_id if r.attribution else None,
            "style": style or None,
            "severity": severity if severity != "" else None,
            "weight": r.weight,
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")


def read_threat_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "threat" not in reader.fieldnames:
            raise InvariantViolation(f"{path} is not a threat CSV")
        rows = []
        for lineno, row in enumerate(reader, 2):
            try:
                rows.append({
                    "input_id": int(row["input_id"]),
                    "metric": row["metric"],
                    "threat": float(row["threat"]),
                    "attr_class": int(row["attr_class"]) if row.get("attr_class") else None,
                    "attr_source_id": int(row["attr_source_id"]) if row.get("attr_source_id") else None,
                    "style": row.get("style", "") or "",
                    "severity": int(row["severity"]) if row.get("severity") else "",
                    "weight": float(row["weight"]) if row.get("weight") else None,
                })
            except (KeyError, TypeError, ValueError) as exc:
                raise InvariantViolation(f"{path}:{lineno}: bad threat row: {exc}") from exc
        return rows


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def avg_table(rows):
    """Mean threat per (style, severity, metric), input-order independent."""
    groups = defaultdict(list)
    for r in rows:
        groups[(r["style"], r["severity"], r["metric"])].append(r["threat"])
    out = []
    for (style, severity, metric) in sorted(groups, key=lambda k: (str(k[0]), str(k[1]), k[2])):
        vals = groups[(style, severity, metric)]
        out.append({
            "style": style,
            "severity": severity,
            "metric": metric,
            "avg_threat": float(np.mean(vals)),
            "n": len(vals),
        })
    return out


def _quadrant(pd_high, other_high):
    if pd_high and other_high:
        return "II"
    if pd_high:
        return "III"
    if other_high:
        return "I"
    return "IV"


def quadrant_table(avg_rows, thresholds=None):
    """Quadrant of each (style, severity) pair: pd vs linf, and pd vs ext
    when external-metric averages are present.

    Quadrant I: low pd, high other; II: high/high; III: high pd, low other;
    IV: low/low.
    """
    thr = dict(DEFAULT_THRESHOLDS)
    if thresholds:
        thr.update(thresholds)
    by_key = {}
    for r in avg_rows:
        by_key[(r["style"], r["severity"], r["metric"])] = r["avg_threat"]
    out = []
    keys = sorted({(r["style"], r["severity"]) for r in avg_rows},
                  key=lambda k: (str(k[0]), str(k[1])))
    for style, severity in keys:
        pd_avg = by_key.get((style, severity, "pd"))
        if pd_avg is None:
            continue
        for other in ("linf", "ext"):
            other_avg = by_key.get((style, severity, other))
            if other_avg is None:
                continue
            out.append({
                "style": style,
                "severity": severity,
                "pd_avg": pd_avg,
                "other_metric": other,
                "other_avg": other_avg,
                "quadrant": _quadrant(pd_avg > thr["pd"], other_avg > thr[other]),
            })
    return out


def heatmap_table(avg_rows):
    """Mean of per-style averages per (metric, category, severity)."""
    groups = defaultdict(list)
    for r in avg_rows:
        cat = STYLE_CATEGORY.get(r["style"], r["style"] or "uncategorized")
        groups[(r["metric"], cat, r["severity"])].append(r["avg_threat"])
    out = []
    for (metric, cat, severity) in sorted(groups, key=lambda k: (k[0], str(k[1]), str(k[2]))):
        out.append({
            "metric": metric,
            "category": cat,
            "severity": severity,
            "mean_threat": float(np.mean(groups[(metric, cat, severity)])),
        })
    return out


def pdw_curve_table(rows, buckets=PDW_BUCKETS):
    """Weighted-threat rows bucketed by the relative class distance of the
    attributed direction; threats are reported relative to the maximum
    observed value."""
    wrows = [r for r in rows if r["metric"] == "pdw" and r["weight"] is not None]
    if not wrows:
        return []
    top = max(r["threat"] for r in wrows)
    if top <= 0.0:
        top = 1.0
    edges = np.linspace(0.0, 1.0, buckets + 1)
    out = []
    for b in range(buckets):
        lo, hi = float(edges[b]), float(edges[b + 1])
        if b == buckets - 1:
            sel = [r for r in wrows if lo <= r["weight"] <= hi]
        else:
            sel = [r for r in wrows if lo <= r["weight"] < hi]
        if not sel:
            continue
        out.append({
            "w_lo": lo,
            "w_hi": hi,
            "mean_relative_threat": float(np.mean([r["threat"] for r in sel])) / top,
            "n": len(sel),
        })
    return out


def _write_csv(path, rows, columns):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def write_report(out_path, rows, thresholds=None, fmt="csv"):
    """Compute all four report sections from threat rows.

    CSV mode writes <out> (avg table) plus .quadrants/.heatmap/.pdw_curve
    siblings; JSON mode writes a single document. Returns written paths.
    """
    avg_rows = avg_table(rows)
    quad_rows = quadrant_table(avg_rows, thresholds)
    heat_rows = heatmap_table(avg_rows)
    pdw_rows = pdw_curve_table(rows)
    if fmt == "json":
        doc = {
            "avg": avg_rows,
            "quadrants": quad_rows,
            "heatmap": heat_rows,
            "pdw_curve": pdw_rows,
            "thresholds": {**DEFAULT_THRESHOLDS, **(thresholds or {})},
        }
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        return [str(out_path)]
    base = str(out_path)
    stem = base[:-4] if base.endswith(".csv") else base
    paths = []
    _write_csv(base, avg_rows, ("style", "severity", "metric", "avg_threat", "n"))
    paths.append(base)
    _write_csv(f"{stem}.quadrants.csv", quad_rows,
               ("style", "severity", "pd_avg", "other_metric", "other_avg", "quadrant"))
    paths.append(f"{stem}.quadrants.csv")
    _write_csv(f"{stem}.heatmap.csv", heat_rows,
               ("metric", "category", "severity", "mean_threat"))
    paths.append(f"{stem}.heatmap.csv")
    _write_csv(f"{stem}.pdw_curve.csv", pdw_rows,
               ("w_lo", "w_hi", "mean_relative_threat", "n"))
    paths.append(f"{stem}.pdw_curve.csv")
    return paths
