"""Organizer-facing reports built from pipeline artifact bundles.

A report is six sections in fixed order: the summary table, take rate
over time, survey perception vs measured reality, the airport and surge
comparisons, and pay per mile by distance. Takeaway sentences come from
versioned templates; significance phrasing appears only when a
comparison clears p < 0.05. Sections whose inputs are missing become
explicit insufficient-data blocks, never silently vanish.

Rendering is fully deterministic: rebuilding from the same bundle gives
byte-identical JSON, HTML and text, and the HTML is self-contained
(inline SVG, no external references).
"""

from __future__ import annotations

import csv
import hashlib
import html
import importlib.resources
import io
import json
from pathlib import Path
from typing import Any

from .analytics.pipeline import summary_csv
from .domain import canonical_json

REPORT_VERSION = "1.0"

SECTION_ORDER = (
    ("summary", "Summary statistics"),
    ("take_rate_over_time", "Take rate over time"),
    ("perception_vs_actual", "Driver perception vs measured take rate"),
    ("airport_comparison", "Airport vs non-airport rides"),
    ("surge_comparison", "Surge vs non-surge rides"),
    ("rate_per_mile", "Driver pay per mile by trip distance"),
)


def load_takeaway_templates() -> dict[str, str]:
    ref = importlib.resources.files("fareaudit") / "templates" / "takeaways.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.2f}".rstrip("0").rstrip(".") if value != int(value) else str(int(value))
    return str(value)


def _insufficient(section_id: str, title: str, templates: dict[str, str]) -> dict[str, Any]:
    return {
        "section_id": section_id,
        "title": title,
        "insufficient_data": True,
        "figure_series": None,
        "takeaway_text": templates["insufficient"],
    }


def _summary_section(bundle: dict[str, Any], templates: dict[str, str]) -> dict[str, Any]:
    summaries = bundle.get("summaries") or {}
    if "all" not in summaries:
        return _insufficient("summary", SECTION_ORDER[0][1], templates)
    allrow = summaries["all"]
    takeaway = templates["summary"].format(
        n_rides=allrow["n_rides"],
        n_drivers=allrow["n_drivers"],
        take_rate=_fmt(allrow["take_rate_ratio_of_means_pct"]),
    )
    return {
        "section_id": "summary",
        "title": SECTION_ORDER[0][1],
        "insufficient_data": False,
        "figure_series": {"rows": [summaries[k] for k in sorted(summaries)]},
        "takeaway_text": takeaway,
    }


def _series_section(bundle: dict[str, Any], templates: dict[str, str]) -> dict[str, Any]:
    series = bundle.get("weekly_series") or []
    if not series:
        return _insufficient("take_rate_over_time", SECTION_ORDER[1][1], templates)
    rates = [p["mean_take_rate_pct"] for p in series]
    peak = max(series, key=lambda p: p["mean_take_rate_pct"])
    takeaway = templates["time_series"].format(
        min_rate=_fmt(min(rates)), max_rate=_fmt(max(rates)), peak_week=peak["iso_week"]
    )
    return {
        "section_id": "take_rate_over_time",
        "title": SECTION_ORDER[1][1],
        "insufficient_data": False,
        "figure_series": {"points": series},
        "takeaway_text": takeaway,
    }


def _perception_section(bundle: dict[str, Any], templates: dict[str, str]) -> dict[str, Any]:
    p = bundle.get("perception") or {}
    if not p or not p.get("n_respondents"):
        return _insufficient("perception_vs_actual", SECTION_ORDER[2][1], templates)
    takeaway = templates["perception"].format(
        estimated=_fmt(p["mean_estimated_pct"]),
        fair=_fmt(p["mean_fair_pct"]),
        actual=_fmt(p["actual_pct"]),
    )
    if p["mean_estimated_pct"] > p["actual_pct"]:
        takeaway += templates["perception_overestimate"]
    if p["actual_pct"] > p["mean_fair_pct"]:
        takeaway += templates["perception_exceeds_fair"]
    return {
        "section_id": "perception_vs_actual",
        "title": SECTION_ORDER[2][1],
        "insufficient_data": False,
        "figure_series": {
            "bars": [
                {"label": "estimated", "value_pct": p["mean_estimated_pct"]},
                {"label": "fair", "value_pct": p["mean_fair_pct"]},
                {"label": "actual", "value_pct": p["actual_pct"]},
            ],
            "n_respondents": p["n_respondents"],
        },
        "takeaway_text": takeaway,
    }


def _comparison_section(
    bundle: dict[str, Any], key: str, section_id: str, title: str, templates: dict[str, str]
) -> dict[str, Any]:
    comp = (bundle.get("comparisons") or {}).get(key)
    if not comp or not comp.get("n_a") or not comp.get("n_b") or comp.get("p_value") is None:
        return _insufficient(section_id, title, templates)
    template_key = (
        "comparison_significant" if comp["significant_at_05"] else "comparison_not_significant"
    )
    takeaway = templates[template_key].format(
        label_a=comp["label_a"].replace("_", "-"),
        label_b=comp["label_b"].replace("_", "-"),
        mode_a=_fmt(comp["mode_a_pct"]),
        mode_b=_fmt(comp["mode_b_pct"]),
    )
    series = {k: v for k, v in comp.items() if k not in ("values_a", "values_b")}
    series["histogram_a"] = _histogram(comp.get("values_a") or [], comp["bin_width_pct"])
    series["histogram_b"] = _histogram(comp.get("values_b") or [], comp["bin_width_pct"])
    return {
        "section_id": section_id,
        "title": title,
        "insufficient_data": False,
        "figure_series": series,
        "takeaway_text": takeaway,
    }


def _rate_section(bundle: dict[str, Any], templates: dict[str, str]) -> dict[str, Any]:
    bins = bundle.get("rate_per_mile") or []
    if not bins:
        return _insufficient("rate_per_mile", SECTION_ORDER[5][1], templates)
    rates = [b["mean_rate_usd_per_mile"] for b in bins]
    takeaway = templates["rate_per_mile"].format(
        min_rate=_fmt(min(rates)), max_rate=_fmt(max(rates))
    )
    return {
        "section_id": "rate_per_mile",
        "title": SECTION_ORDER[5][1],
        "insufficient_data": False,
        "figure_series": {"bins": bins},
        "takeaway_text": takeaway,
    }


def _histogram(values: list[float], bin_width: float) -> list[dict[str, float]]:
    if not values:
        return []
    counts: dict[int, int] = {}
    for v in values:
        k = int(v // bin_width)
        counts[k] = counts.get(k, 0) + 1
    total = len(values)
    return [
        {
            "bin_center_pct": round((k + 0.5) * bin_width, 4),
            "count": counts[k],
            "share": round(counts[k] / total, 6),
        }
        for k in sorted(counts)
    ]


def build_report(bundle_data: dict[str, Any]) -> dict[str, Any]:
    """Assemble the report document (JSON-ready) from a bundle's sections."""
    templates = load_takeaway_templates()
    manifest = bundle_data.get("manifest") or {}
    pipeline_digest = manifest.get("digest", "")
    sections = [
        _summary_section(bundle_data, templates),
        _series_section(bundle_data, templates),
        _perception_section(bundle_data, templates),
        _comparison_section(
            bundle_data, "airport", "airport_comparison", SECTION_ORDER[3][1], templates
        ),
        _comparison_section(
            bundle_data, "surge", "surge_comparison", SECTION_ORDER[4][1], templates
        ),
        _rate_section(bundle_data, templates),
    ]
    report_id = "rpt-" + hashlib.sha256(
        f"{pipeline_digest}|{REPORT_VERSION}".encode()
    ).hexdigest()[:16]
    return {
        "report_id": report_id,
        "report_version": REPORT_VERSION,
        "generated_at": manifest.get("created_at", ""),
        "filter": manifest.get("filter", {}),
        "pipeline_digest": pipeline_digest,
        "sections": sections,
    }


# -- rendering ----------------------------------------------------------------


def _svg_line(points: list[dict[str, Any]]) -> str:
    if not points:
        return ""
    w, h, pad = 640, 200, 30
    ys = [p["mean_take_rate_pct"] for p in points]
    lo, hi = min(ys), max(ys)
    if hi == lo:
        hi = lo + 1
    n = len(points)
    coords = []
    for i, p in enumerate(points):
        x = pad + (w - 2 * pad) * (i / max(n - 1, 1))
        y = h - pad - (h - 2 * pad) * ((p["mean_take_rate_pct"] - lo) / (hi - lo))
        coords.append(f"{x:.1f},{y:.1f}")
    labels = (
        f'<text x="{pad}" y="{h - 6}" font-size="10">{html.escape(points[0]["iso_week"])}</text>'
        f'<text x="{w - pad}" y="{h - 6}" font-size="10" text-anchor="end">'
        f'{html.escape(points[-1]["iso_week"])}</text>'
        f'<text x="4" y="{pad}" font-size="10">{hi:.1f}%</text>'
        f'<text x="4" y="{h - pad}" font-size="10">{lo:.1f}%</text>'
    )
    return (
        f'<svg viewBox="0 0 {w} {h}" width="{w}" height="{h}" role="img">'
        f'<polyline fill="none" stroke="#2a6f97" stroke-width="1.5" '
        f'points="{" ".join(coords)}"/>{labels}</svg>'
    )


def _svg_bars(bars: list[tuple[str, float]], unit: str = "%") -> str:
    if not bars:
        return ""
    w, h, pad = 480, 180, 30
    hi = max(v for _, v in bars) or 1
    bw = (w - 2 * pad) / len(bars)
    parts = []
    for i, (label, value) in enumerate(bars):
        bh = (h - 2 * pad) * (value / hi)
        x = pad + i * bw
        y = h - pad - bh
        parts.append(
            f'<rect x="{x + 4:.1f}" y="{y:.1f}" width="{bw - 8:.1f}" height="{bh:.1f}" '
            f'fill="#2a6f97"/>'
            f'<text x="{x + bw / 2:.1f}" y="{h - pad + 12}" font-size="10" '
            f'text-anchor="middle">{html.escape(label)}</text>'
            f'<text x="{x + bw / 2:.1f}" y="{y - 4:.1f}" font-size="10" '
            f'text-anchor="middle">{value:.2f}{unit}</text>'
        )
    return (
        f'<svg viewBox="0 0 {w} {h}" width="{w}" height="{h}" role="img">'
        + "".join(parts)
        + "</svg>"
    )


def _svg_histograms(section: dict[str, Any]) -> str:
    fig = section["figure_series"]
    w, h, pad = 640, 200, 30
    hists = [(fig["histogram_a"], "#2a6f97"), (fig["histogram_b"], "#bc4749")]
    xs = [b["bin_center_pct"] for hist, _ in hists for b in hist]
    ys = [b["share"] for hist, _ in hists for b in hist]
    if not xs:
        return ""
    lo_x, hi_x = min(xs), max(xs)
    hi_y = max(ys) or 1
    if hi_x == lo_x:
        hi_x = lo_x + 1
    parts = []
    for hist, color in hists:
        coords = []
        for b in hist:
            x = pad + (w - 2 * pad) * ((b["bin_center_pct"] - lo_x) / (hi_x - lo_x))
            y = h - pad - (h - 2 * pad) * (b["share"] / hi_y)
            coords.append(f"{x:.1f},{y:.1f}")
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{" ".join(coords)}"/>'
        )
    legend = (
        f'<text x="{pad}" y="14" font-size="10" fill="#2a6f97">{html.escape(fig["label_a"])}</text>'
        f'<text x="{pad + 90}" y="14" font-size="10" fill="#bc4749">{html.escape(fig["label_b"])}</text>'
        f'<text x="4" y="{h - pad}" font-size="10">{lo_x:.0f}%</text>'
        f'<text x="{w - pad}" y="{h - pad}" font-size="10" text-anchor="end">{hi_x:.0f}%</text>'
    )
    return (
        f'<svg viewBox="0 0 {w} {h}" width="{w}" height="{h}" role="img">'
        + "".join(parts)
        + legend
        + "</svg>"
    )


def _summary_table_html(rows: list[dict[str, Any]]) -> str:
    cols = [
        ("group", "Type"),
        ("n_drivers", "Drivers"),
        ("n_rides", "Rides"),
        ("distance_miles_mean", "Distance (miles)"),
        ("duration_minutes_mean", "Duration (minutes)"),
        ("rider_price_mean_usd", "Ride Price ($)"),
        ("fees_mean_usd", "Fees ($)"),
        ("base_pay_mean_usd", "Base Pay ($)"),
        ("tips_mean_usd", "Tips ($)"),
        ("take_rate_mean_of_ratios_pct", "Take Rate (Average) (%)"),
        ("take_rate_ratio_of_means_pct", "Take Rate (Ratio of Means) (%)"),
    ]
    head = "".join(f"<th>{html.escape(label)}</th>" for _, label in cols)
    body = []
    for row in rows:
        cells = "".join(f"<td>{html.escape(str(row[key]))}</td>" for key, _ in cols)
        body.append(f"<tr>{cells}</tr>")
    return f'<table><thead><tr>{head}</tr></thead><tbody>{"".join(body)}</tbody></table>'


def render_html(report: dict[str, Any]) -> str:
    """Self-contained HTML document; inline styles and SVG only."""
    parts = [
        "<!DOCTYPE html>",
        '<html lang="en"><head><meta charset="utf-8">',
        f'<title>Take-rate report {html.escape(report["report_id"])}</title>',
        "<style>body{font-family:sans-serif;max-width:760px;margin:2em auto;padding:0 1em;}"
        "table{border-collapse:collapse;font-size:13px;}td,th{border:1px solid #999;"
        "padding:4px 8px;text-align:right;}th{background:#eee;}h2{margin-top:2em;}"
        ".takeaway{background:#f5f1e6;padding:0.8em 1em;border-left:4px solid #2a6f97;}"
        ".meta{color:#555;font-size:12px;}</style></head><body>",
        "<h1>Take-rate report</h1>",
        f'<p class="meta">Report {html.escape(report["report_id"])} &middot; '
        f'generated {html.escape(report["generated_at"])} &middot; pipeline digest '
        f'{html.escape(report["pipeline_digest"][:16])}&hellip;</p>',
    ]
    for section in report["sections"]:
        parts.append(f'<h2>{html.escape(section["title"])}</h2>')
        if section["insufficient_data"]:
            parts.append(f'<p class="takeaway">{html.escape(section["takeaway_text"])}</p>')
            continue
        fig = section["figure_series"]
        sid = section["section_id"]
        if sid == "summary":
            parts.append(_summary_table_html(fig["rows"]))
        elif sid == "take_rate_over_time":
            parts.append(_svg_line(fig["points"]))
        elif sid == "perception_vs_actual":
            parts.append(
                _svg_bars([(b["label"], b["value_pct"]) for b in fig["bars"]])
            )
        elif sid in ("airport_comparison", "surge_comparison"):
            parts.append(_svg_histograms(section))
            badge = "significant (p &lt; 0.05)" if fig["significant_at_05"] else "not significant"
            pv = fig["p_value"]
            parts.append(
                f'<p class="meta">{fig["test_name"]}: p = {pv:.4g} &middot; {badge}</p>'
            )
        elif sid == "rate_per_mile":
            parts.append(
                _svg_bars(
                    [
                        (
                            f"{b['lo_miles']:g}-{b['hi_miles']:g} mi",
                            b["mean_rate_usd_per_mile"],
                        )
                        for b in fig["bins"]
                    ],
                    unit="",
                )
            )
        parts.append(f'<p class="takeaway">{html.escape(section["takeaway_text"])}</p>')
    parts.append("</body></html>")
    return "\n".join(parts) + "\n"


def render_text(report: dict[str, Any]) -> str:
    lines = [
        f"TAKE-RATE REPORT {report['report_id']}",
        f"generated: {report['generated_at']}",
        f"pipeline digest: {report['pipeline_digest']}",
        "",
    ]
    for section in report["sections"]:
        lines.append(section["title"].upper())
        lines.append("-" * len(section["title"]))
        lines.append(section["takeaway_text"])
        lines.append("")
    return "\n".join(lines)


# -- CSV exports ------------------------------------------------------------------


def export_csv(bundle_data: dict[str, Any]) -> dict[str, str]:
    """Per-section CSV files keyed by filename."""
    out: dict[str, str] = {}
    out["summary.csv"] = summary_csv(bundle_data.get("summaries") or {})

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ISO Week", "Mean Take Rate (%)", "Rides"])
    for p in bundle_data.get("weekly_series") or []:
        w.writerow([p["iso_week"], p["mean_take_rate_pct"], p["n_rides"]])
    out["weekly_series.csv"] = buf.getvalue()

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        [
            "Comparison",
            "Side A",
            "Side B",
            "Rides A",
            "Rides B",
            "Mean A (%)",
            "Mean B (%)",
            "Mode A (%)",
            "Mode B (%)",
            "Bin Width (pp)",
            "p-value",
            "Significant at 0.05",
        ]
    )
    for key in sorted(bundle_data.get("comparisons") or {}):
        c = bundle_data["comparisons"][key]
        w.writerow(
            [
                key,
                c["label_a"],
                c["label_b"],
                c["n_a"],
                c["n_b"],
                c["mean_a_pct"],
                c["mean_b_pct"],
                c["mode_a_pct"],
                c["mode_b_pct"],
                c["bin_width_pct"],
                c["p_value"],
                c["significant_at_05"],
            ]
        )
    out["comparisons.csv"] = buf.getvalue()

    perception = bundle_data.get("perception") or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Mean Estimated (%)", "Mean Fair (%)", "Actual (%)", "Respondents"])
    if perception.get("n_respondents"):
        w.writerow(
            [
                perception["mean_estimated_pct"],
                perception["mean_fair_pct"],
                perception["actual_pct"],
                perception["n_respondents"],
            ]
        )
    out["perception.csv"] = buf.getvalue()

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Distance Lo (miles)", "Distance Hi (miles)", "Mean Rate (USD/mile)", "Rides"])
    for b in bundle_data.get("rate_per_mile") or []:
        w.writerow([b["lo_miles"], b["hi_miles"], b["mean_rate_usd_per_mile"], b["n_rides"]])
    out["rate_per_mile.csv"] = buf.getvalue()
    return out


def write_report(bundle_data: dict[str, Any], out_dir: str | Path) -> Path:
    """report.json + report.html + report.txt + csv/ + manifest of digests."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = build_report(bundle_data)
    report_json = json.dumps(report, indent=2, sort_keys=True) + "\n"
    html_doc = render_html(report)
    text_doc = render_text(report)
    (out_dir / "report.json").write_text(report_json, encoding="utf-8")
    (out_dir / "report.html").write_text(html_doc, encoding="utf-8")
    (out_dir / "report.txt").write_text(text_doc, encoding="utf-8")
    csv_dir = out_dir / "csv"
    csv_dir.mkdir(exist_ok=True)
    csv_files = export_csv(bundle_data)
    for name, content in sorted(csv_files.items()):
        (csv_dir / name).write_text(content, encoding="utf-8")
    manifest = {
        "report_id": report["report_id"],
        "pipeline_digest": report["pipeline_digest"],
        "digests": {
            "report.json": hashlib.sha256(report_json.encode()).hexdigest(),
            "report.html": hashlib.sha256(html_doc.encode()).hexdigest(),
            "report.txt": hashlib.sha256(text_doc.encode()).hexdigest(),
            **{
                f"csv/{name}": hashlib.sha256(content.encode()).hexdigest()
                for name, content in sorted(csv_files.items())
            },
        },
    }
    (out_dir / "manifest.json").write_text(
        canonical_json(manifest) + "\n", encoding="utf-8"
    )
    return out_dir
