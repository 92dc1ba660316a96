"""Dataset analytics: density, per-class pixels, pre-annotation curves,
MTS occurrence distribution, and report rendering.

Reports are emitted both as machine-readable key-value text and as an
aligned human table; charts are written as small hand-rolled SVGs so
re-running a stage yields byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .annotator import AnnotationRun, Visit
from .labeling import CLASS_UNLABELED, ClassDef, LabelStore, Provenance, classify_patch
from .patches import MtsIndex, Patch


@dataclass
class CorpusReport:
    total_pixels: int
    non_sentinel_pixels: int
    annotation_density: float
    per_class_pixels: dict[int, int]
    mts_covered_fraction: float
    rule_covered_fraction: float
    rule_count: int
    presented_frame_count: int
    click_count: int


def density_report(
    patches_by_frame: dict[int, list[Patch]],
    store: LabelStore,
    visits: list[Visit],
    width: int,
    height: int,
) -> CorpusReport:
    """Exact full-corpus recount of coverage, split by provenance."""
    non_sentinel = 0
    labeled = 0
    explicit_area = 0
    rule_area = 0
    per_class: dict[int, int] = {}
    for patches in patches_by_frame.values():
        for patch in patches:
            non_sentinel += patch.area
            class_id, provenance, _ = classify_patch(store, patch.key)
            if class_id == CLASS_UNLABELED:
                continue
            labeled += patch.area
            per_class[class_id] = per_class.get(class_id, 0) + patch.area
            if provenance is Provenance.EXPLICIT:
                explicit_area += patch.area
            else:
                rule_area += patch.area
    return CorpusReport(
        total_pixels=width * height * len(patches_by_frame),
        non_sentinel_pixels=non_sentinel,
        annotation_density=labeled / non_sentinel if non_sentinel else 1.0,
        per_class_pixels=dict(sorted(per_class.items())),
        mts_covered_fraction=explicit_area / non_sentinel if non_sentinel else 0.0,
        rule_covered_fraction=rule_area / non_sentinel if non_sentinel else 0.0,
        rule_count=len(store.rules),
        presented_frame_count=sum(1 for v in visits if v.presented),
        click_count=len(store.click_log),
    )


@dataclass
class PreAnnotationCurve:
    per_frame: list[tuple[int, float]]  # (frame, fraction) in visit order
    sorted_variant: list[float]  # same fractions, descending


def preannotation_curve(run: AnnotationRun) -> PreAnnotationCurve:
    per_frame = [(v.frame_index, v.covered_fraction) for v in run.visits]
    return PreAnnotationCurve(
        per_frame, sorted((f for _, f in per_frame), reverse=True)
    )


@dataclass
class MtsDistribution:
    single_frame_fraction: float
    median_occurrences: int
    histogram: dict[int, int]  # occurrence count -> number of MTS keys


def mts_distribution_report(index: MtsIndex) -> MtsDistribution:
    """Occurrence statistics over the corpus index (lower median)."""
    counts = sorted(len(v) for v in index.by_mts.values())
    if not counts:
        return MtsDistribution(0.0, 0, {})
    histogram: dict[int, int] = {}
    for c in counts:
        histogram[c] = histogram.get(c, 0) + 1
    return MtsDistribution(
        single_frame_fraction=histogram.get(1, 0) / len(counts),
        median_occurrences=counts[(len(counts) - 1) // 2],
        histogram=dict(sorted(histogram.items())),
    )


# --- rendering ---------------------------------------------------------------

def render_report_kv(
    report: CorpusReport, distribution: MtsDistribution | None = None
) -> str:
    lines = [
        f"total_pixels {report.total_pixels}",
        f"non_sentinel_pixels {report.non_sentinel_pixels}",
        f"annotation_density {report.annotation_density!r}",
        f"mts_covered_fraction {report.mts_covered_fraction!r}",
        f"rule_covered_fraction {report.rule_covered_fraction!r}",
        f"rule_count {report.rule_count}",
        f"presented_frame_count {report.presented_frame_count}",
        f"click_count {report.click_count}",
    ]
    for class_id, pixels in report.per_class_pixels.items():
        lines.append(f"class_pixels.{class_id} {pixels}")
    if distribution is not None:
        lines.append(f"mts_single_frame_fraction {distribution.single_frame_fraction!r}")
        lines.append(f"mts_median_occurrences {distribution.median_occurrences}")
        for occ, n in distribution.histogram.items():
            lines.append(f"mts_histogram.{occ} {n}")
    return "\n".join(lines) + "\n"


def render_report_text(
    report: CorpusReport,
    classes: tuple[ClassDef, ...],
    frame_count: int,
) -> str:
    """Human-readable summary with a dataset-comparison style table."""
    columns = ["#pixels", "density [%]", "clicks", "clicks/frame"]
    row = [
        f"{report.non_sentinel_pixels}",
        f"{100 * report.annotation_density:.1f}",
        f"{report.click_count}",
        f"{report.click_count / frame_count:.2f}" if frame_count else "n/a",
    ]
    widths = [max(len(c), len(v)) for c, v in zip(columns, row)]
    header = " | ".join(c.rjust(w) for c, w in zip(columns, widths))
    values = " | ".join(v.rjust(w) for v, w in zip(row, widths))
    lines = [
        "corpus annotation report",
        "",
        header,
        "-" * len(header),
        values,
        "",
        f"explicit-MTS coverage: {100 * report.mts_covered_fraction:.1f}%",
        f"rule coverage:         {100 * report.rule_covered_fraction:.1f}%",
        f"association rules:     {report.rule_count}",
        f"presented frames:      {report.presented_frame_count} / {frame_count}",
        "",
        "annotated pixels per class:",
    ]
    by_id = {c.id: c for c in classes}
    name_w = max((len(by_id[i].name) for i in report.per_class_pixels if i in by_id), default=4)
    for class_id, pixels in report.per_class_pixels.items():
        name = by_id[class_id].name if class_id in by_id else f"class{class_id}"
        lines.append(f"  {name.ljust(name_w)} {pixels}")
    return "\n".join(lines) + "\n"


# --- SVG charts --------------------------------------------------------------

_SVG_W, _SVG_H, _MARGIN = 640, 320, 40


def _svg(body: list[str], width: int = _SVG_W, height: int = _SVG_H) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    frame = (
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>'
    )
    return "\n".join([head, frame, *body, "</svg>"]) + "\n"


def _polyline(values: list[float], x_off: int, width: int, height: int, color: str) -> str:
    if not values:
        return ""
    n = max(len(values) - 1, 1)
    pts = []
    for i, v in enumerate(values):
        x = x_off + _MARGIN + (width - 2 * _MARGIN) * (i / n)
        y = height - _MARGIN - (height - 2 * _MARGIN) * v
        pts.append(f"{x:.2f},{y:.2f}")
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
        f'points="{" ".join(pts)}"/>'
    )


def _axes(x_off: int, width: int, height: int) -> list[str]:
    x0, y0, x1, y1 = x_off + _MARGIN, height - _MARGIN, x_off + width - _MARGIN, _MARGIN
    return [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]


def svg_fraction_curves(processed: list[float], sorted_desc: list[float], title: str) -> str:
    """Two side-by-side unit-interval line plots (visit order, sorted)."""
    half = _SVG_W // 2
    body = [f'<text x="{_MARGIN}" y="{_MARGIN - 16}" font-size="13">{title}</text>']
    body += _axes(0, half, _SVG_H) + [_polyline(processed, 0, half, _SVG_H, "#1f77b4")]
    body += _axes(half, half, _SVG_H) + [_polyline(sorted_desc, half, half, _SVG_H, "#d62728")]
    return _svg(body)


def svg_bar_chart(
    labels: list[str], values: list[float], title: str, log_scale: bool = False
) -> str:
    if not values:
        return _svg([f'<text x="{_MARGIN}" y="{_MARGIN}" font-size="13">{title} (empty)</text>'])
    heights = [math.log10(v + 1) for v in values] if log_scale else list(values)
    top = max(heights) or 1.0
    n = len(values)
    span = _SVG_W - 2 * _MARGIN
    bar_w = span / n * 0.8
    body = [f'<text x="{_MARGIN}" y="{_MARGIN - 16}" font-size="13">{title}</text>']
    body += _axes(0, _SVG_W, _SVG_H)
    for i, (label, h) in enumerate(zip(labels, heights)):
        x = _MARGIN + span * (i + 0.1) / n
        bh = (_SVG_H - 2 * _MARGIN) * (h / top)
        y = _SVG_H - _MARGIN - bh
        body.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" height="{bh:.2f}" '
            f'fill="#1f77b4"/>'
        )
        body.append(
            f'<text x="{x + bar_w / 2:.2f}" y="{_SVG_H - _MARGIN + 14}" font-size="9" '
            f'text-anchor="middle">{label}</text>'
        )
    return _svg(body)
