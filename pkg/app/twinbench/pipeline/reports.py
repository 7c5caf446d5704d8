"""
Batch report files.

report.csv is the canonical output; apart from the trailing ``time_*``
columns it is a deterministic function of the config and seed. The SVG
charts are plain bar-chart markup.
"""
import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

logger = logging.getLogger(__name__)

HISTOGRAM_EDGES = np.linspace(-1.0, 1.0, 41)
TIMED_STAGES = ("load", "ses", "rig", "render_gt", "reconstruct", "align", "render_recon", "score")

REPORT_COLUMNS = [
    "model", "variant", "frame_count", "width", "height", "background", "vertex_noise_sigma",
    "reconstruction", "status", "global_ssim", "unweighted_ssim", "frames_used", "failed_frames",
    "rough_rms", "icp_rms", "icp_iterations", "icp_failed", "scale", "matched_poses",
    "dropped_poses", "error",
] + [f"time_{stage}" for stage in TIMED_STAGES]
FRAME_COLUMNS = ["model", "variant", "frame_index", "weighted_ssim", "unweighted_ssim",
                 "foreground_px", "flags"]

_BAR_COLORS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_row(record) -> Dict[str, str]:
    variant = record.variant
    row = {
        "model": record.model,
        "variant": variant.label,
        "frame_count": variant.frame_count,
        "width": variant.resolution[0],
        "height": variant.resolution[1],
        "background": record.config.get("background"),
        "vertex_noise_sigma": variant.vertex_noise_sigma,
        "reconstruction": record.config.get("reconstruction"),
        "status": record.status,
        "error": record.error,
        "dropped_poses": record.dropped,
    }
    if record.ssim is not None:
        row.update({
            "global_ssim": record.ssim.global_score,
            "unweighted_ssim": record.ssim.unweighted_score,
            "frames_used": record.ssim.frames_used,
            "failed_frames": " ".join(str(i) for i in record.ssim.failed_frames),
        })
    if record.alignment is not None:
        row.update(record.alignment.as_row())
    for stage, seconds in record.timings.items():
        row[f"time_{stage}"] = seconds
    return {column: _cell(row.get(column)) for column in REPORT_COLUMNS}


def _write_csv(path: Path, columns: Sequence[str], rows: Iterable[Dict[str, str]]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def write_report_csv(records: Sequence, path) -> Path:
    return _write_csv(Path(path), REPORT_COLUMNS, (report_row(r) for r in records))


def frame_rows(records: Sequence) -> List[Dict[str, str]]:
    rows = []
    for record in records:
        if record.ssim is None:
            continue
        scored = [(s.index, s, "") for s in record.ssim.per_frame]
        failed = [(index, None, "no_foreground") for index in record.ssim.failed_frames]
        for index, score, flags in sorted(scored + failed, key=lambda item: item[0]):
            rows.append({
                "model": record.model,
                "variant": record.variant.label,
                "frame_index": str(index),
                "weighted_ssim": _cell(score.weighted_ssim if score else None),
                "unweighted_ssim": _cell(score.unweighted_ssim if score else None),
                "foreground_px": _cell(score.foreground_px if score else 0),
                "flags": flags,
            })
    return rows


def write_frames_csv(records: Sequence, path) -> Path:
    return _write_csv(Path(path), FRAME_COLUMNS, frame_rows(records))


def histogram(scores: Sequence[float]) -> List[Tuple[float, float, int]]:
    """Counts of global scores in 0.05-wide bins over [-1, 1]."""
    counts, edges = np.histogram(np.asarray(scores, dtype=np.float64), bins=HISTOGRAM_EDGES)
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(len(counts))]


def write_histogram_csv(bins, path) -> Path:
    rows = ({"bin_start": f"{lo:.2f}", "bin_end": f"{hi:.2f}", "count": str(n)} for lo, hi, n in bins)
    return _write_csv(Path(path), ["bin_start", "bin_end", "count"], rows)


def _svg_document(width: int, height: int, body: List[str]) -> str:
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        *body,
        "</svg>",
        "",
    ])


def histogram_svg(bins, title: str = "Distribution of weighted SSIM") -> str:
    width, height, margin = 720, 320, 40
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    peak = max((n for _, _, n in bins), default=0) or 1
    bar_w = plot_w / len(bins)
    body = [f'<text x="{width / 2}" y="20" text-anchor="middle">{escape(title)}</text>']
    for i, (lo, hi, count) in enumerate(bins):
        bar_h = plot_h * count / peak
        x = margin + i * bar_w
        y = margin + plot_h - bar_h
        body.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w - 1:.2f}" height="{bar_h:.2f}" '
                    f'fill="#4c72b0"><title>[{lo:.2f}, {hi:.2f}): {count}</title></rect>')
    for tick in (-1.0, -0.5, 0.0, 0.5, 1.0):
        x = margin + (tick + 1.0) / 2.0 * plot_w
        body.append(f'<text x="{x:.2f}" y="{height - margin + 16}" text-anchor="middle">{tick:.1f}</text>')
    body.append(f'<line x1="{margin}" y1="{margin + plot_h}" x2="{margin + plot_w}" '
                f'y2="{margin + plot_h}" stroke="black"/>')
    return _svg_document(width, height, body)


def sweep_rows(records: Sequence) -> List[Dict[str, str]]:
    return [
        {"model": r.model, "variant": r.variant.label, "status": r.status,
         "global_ssim": _cell(r.global_score)}
        for r in records
    ]


def sweep_svg(records: Sequence, title: str = "Weighted SSIM per model and variant") -> str:
    """Grouped bars: one group per model, one bar per variant."""
    models = list(dict.fromkeys(r.model for r in records))
    variants = list(dict.fromkeys(r.variant.label for r in records))
    scores = {(r.model, r.variant.label): r.global_score for r in records}
    width = max(360, 80 + len(models) * (len(variants) * 18 + 30))
    height, margin, legend = 340, 40, 16 * len(variants)
    plot_h = height - 2 * margin
    body = [f'<text x="{width / 2}" y="20" text-anchor="middle">{escape(title)}</text>']
    x = margin
    for model in models:
        for k, variant in enumerate(variants):
            score = scores.get((model, variant))
            bar_h = 0.0 if score is None else plot_h * max(score, 0.0)
            color = _BAR_COLORS[k % len(_BAR_COLORS)]
            body.append(f'<rect x="{x:.1f}" y="{margin + plot_h - bar_h:.2f}" width="16" '
                        f'height="{bar_h:.2f}" fill="{color}"><title>{escape(model)} '
                        f'{escape(variant)}: {_cell(score) or "failed"}</title></rect>')
            x += 18
        body.append(f'<text x="{x - len(variants) * 9:.1f}" y="{height - margin + 16}" '
                    f'text-anchor="middle">{escape(model)}</text>')
        x += 30
    for k, variant in enumerate(variants):
        color = _BAR_COLORS[k % len(_BAR_COLORS)]
        body.append(f'<rect x="{width - 220}" y="{margin + 16 * k}" width="10" height="10" fill="{color}"/>')
        body.append(f'<text x="{width - 205}" y="{margin + 16 * k + 9}">{escape(variant)}</text>')
    return _svg_document(width, height + legend, body)


def write_batch_reports(records: Sequence, output_dir) -> Dict[str, Path]:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    scores = [r.global_score for r in records if r.global_score is not None]
    bins = histogram(scores)
    paths = {
        "report": write_report_csv(records, output_dir / "report.csv"),
        "frames": write_frames_csv(records, output_dir / "frames.csv"),
        "histogram": write_histogram_csv(bins, output_dir / "histogram.csv"),
        "sweep": _write_csv(output_dir / "sweep.csv", ["model", "variant", "status", "global_ssim"],
                            sweep_rows(records)),
    }
    (output_dir / "histogram.svg").write_text(histogram_svg(bins), encoding="utf-8")
    (output_dir / "sweep.svg").write_text(sweep_svg(records), encoding="utf-8")
    paths["histogram_svg"] = output_dir / "histogram.svg"
    paths["sweep_svg"] = output_dir / "sweep.svg"
    logger.info("reports written to %s", output_dir)
    return paths
