"""Render measurement overlays: mask outlines, landmark markers, and the
two measurement lines per site.

Marker colors are fixed and pure so they can be counted back out of the
PNG: yellow bone-crest points, green CEJ points, red apices. Lines and
outlines use colors that never collide with the markers.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .domain import CaseRecord, ImageRecord
from .maskproc import boundary_mask
from .pipeline import AnalysisConfig, CaseAnalysis

__all__ = ["COLORS", "render_overlay", "write_overlays"]

COLORS = {
    "bone_point": (255, 255, 0),
    "cej_point": (0, 255, 0),
    "apex_point": (255, 0, 0),
    "line1": (0, 255, 255),
    "line2": (255, 0, 255),
    "bone_outline": (90, 90, 200),
    "tooth_outline": (200, 200, 200),
    "cej_curve": (200, 140, 0),
}
MARKER_HALF = 1  # 3x3 px squares


def _draw_marker(arr: np.ndarray, point, color) -> None:
    h, w = arr.shape[:2]
    x = int(round(point[0] - 0.5))
    y = int(round(point[1] - 0.5))
    x0, x1 = max(x - MARKER_HALF, 0), min(x + MARKER_HALF + 1, w)
    y0, y1 = max(y - MARKER_HALF, 0), min(y + MARKER_HALF + 1, h)
    arr[y0:y1, x0:x1] = color


def render_overlay(record: ImageRecord, assessments) -> Image.Image:
    """One RGB overlay for a record and its tooth assessments."""
    h, w = record.bone_mask.shape
    arr = np.zeros((h, w, 3), np.uint8)
    arr[boundary_mask(record.bone_mask)] = COLORS["bone_outline"]
    arr[boundary_mask(record.tooth_mask != 0)] = COLORS["tooth_outline"]
    arr[np.asarray(record.cej_mask, bool)] = COLORS["cej_curve"]

    img = Image.fromarray(arr)
    draw = ImageDraw.Draw(img)
    sites = [s for a in assessments for s in a.sites]
    for site in sites:
        if site.cej_point and site.bone_point:
            draw.line([site.cej_point, site.bone_point], fill=COLORS["line1"], width=1)
        if site.cej_point and site.apex_point:
            draw.line([site.cej_point, site.apex_point], fill=COLORS["line2"], width=1)
    arr = np.asarray(img).copy()
    for site in sites:
        if site.apex_point:
            _draw_marker(arr, site.apex_point, COLORS["apex_point"])
    for site in sites:
        if site.bone_point:
            _draw_marker(arr, site.bone_point, COLORS["bone_point"])
    for site in sites:
        if site.cej_point:
            _draw_marker(arr, site.cej_point, COLORS["cej_point"])
    return Image.fromarray(arr)


def write_overlays(case: CaseRecord, analysis: CaseAnalysis, out_dir) -> dict:
    """Write one overlay PNG per image; returns the warnings sidecar content."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_id = {r.image_id: r for r in case.records}
    sidecar = {"case_id": case.case_id, "images": []}
    for image_analysis in analysis.images:
        record = by_id[image_analysis.image_id]
        img = render_overlay(record, image_analysis.assessments)
        img.save(out_dir / f"{image_analysis.image_id}_overlay.png")
        unmeasured = [
            a.tooth_fdi for a in image_analysis.assessments if a.tooth_rbl_percent is None
        ]
        sidecar["images"].append(
            {
                "image_id": image_analysis.image_id,
                "unmeasured_teeth": unmeasured,
                "warnings": sorted(image_analysis.warnings),
            }
        )
    return sidecar
