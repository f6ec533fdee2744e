"""Per-tooth landmark location and bone-level measurement.

For each tooth the engine finds where the bone crest and the CEJ curve
cross the tooth outline on each side of the tooth axis, locates the root
apices, and measures two lines per site along the axis: CEJ to bone crest
(len1) and CEJ to apex (len2). RBL% for the tooth is the larger site
ratio times 100.

All coordinates are sub-pixel (x, y) pairs; candidate pixels enter as
their centers. Lengths are along-axis components, so they are invariant
under image rotation and under uniform spacing rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import (
    InputError,
    PixelSpacing,
    Reasons,
    SiteMeasurement,
    px_vector_to_mm,
    quadrant_of_fdi,
)
from .maskproc import boundary_mask, dilate, mask_and

__all__ = [
    "GeometryError",
    "AxisUndefinedError",
    "ToothAxis",
    "ToothMeasurement",
    "tooth_axis",
    "bone_intersections",
    "cej_intersections",
    "locate_root_apices",
    "measure_site",
    "rbl_percent",
    "measure_tooth",
    "MIN_TOOTH_PIXELS",
    "AXIS_EIGENRATIO_MIN",
    "INTERSECTION_BAND_PX",
]

MIN_TOOTH_PIXELS = 50
AXIS_EIGENRATIO_MIN = 1.05
INTERSECTION_BAND_PX = 1  # dilation bridging raster gaps between curve and outline


class GeometryError(Exception):
    """Measurement failed for a stated reason code."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class AxisUndefinedError(GeometryError):
    def __init__(self, detail: str = ""):
        super().__init__(Reasons.AXIS_UNDEFINED, detail)


@dataclass(frozen=True)
class ToothAxis:
    """Principal axis of a tooth region, oriented crown -> apex."""

    centroid: tuple[float, float]
    direction: tuple[float, float]  # unit vector
    coronal_end: float  # smallest along-axis coordinate over the region
    apical_end: float  # largest

    def along(self, xy) -> np.ndarray:
        xy = np.asarray(xy, float)
        return (xy[..., 0] - self.centroid[0]) * self.direction[0] + (
            xy[..., 1] - self.centroid[1]
        ) * self.direction[1]

    def cross(self, xy) -> np.ndarray:
        nx, ny = -self.direction[1], self.direction[0]
        xy = np.asarray(xy, float)
        return (xy[..., 0] - self.centroid[0]) * nx + (xy[..., 1] - self.centroid[1]) * ny


def _pixel_centers(mask: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(np.asarray(mask, bool))
    return np.column_stack([xs + 0.5, ys + 0.5])


def tooth_axis(tooth_region: np.ndarray, cej_points: np.ndarray) -> ToothAxis:
    """Principal covariance axis of the region, oriented away from the CEJ.

    cej_points is an (N, 2) array of CEJ candidate coordinates; they pin
    down which end of the axis is coronal. Raises AxisUndefinedError when
    the region is too round for a stable axis (eigenvalue ratio < 1.05).
    """
    pts = _pixel_centers(tooth_region)
    if pts.shape[0] < MIN_TOOTH_PIXELS:
        raise GeometryError(Reasons.TOOTH_TOO_SMALL, f"{pts.shape[0]} px")
    cej_points = np.asarray(cej_points, float)
    if cej_points.size == 0:
        raise GeometryError(Reasons.NO_CEJ, "no CEJ points to orient the axis")

    centroid = pts.mean(axis=0)
    cov = np.cov((pts - centroid).T)
    evals, evecs = np.linalg.eigh(cov)  # ascending
    lo, hi = float(evals[0]), float(evals[1])
    if hi < AXIS_EIGENRATIO_MIN * lo:
        raise AxisUndefinedError(f"eigenvalue ratio {hi / lo if lo else np.inf:.4f}")
    d = evecs[:, 1]
    # canonical sign first (eigh signs are arbitrary), then CEJ orientation
    if d[1] < 0 or (d[1] == 0 and d[0] < 0):
        d = -d
    mean_proj = float(np.mean((cej_points - centroid) @ d))
    if mean_proj > 0:
        d = -d
    t = (pts - centroid) @ d
    return ToothAxis(
        centroid=(float(centroid[0]), float(centroid[1])),
        direction=(float(d[0]), float(d[1])),
        coronal_end=float(t.min()),
        apical_end=float(t.max()),
    )


def _cluster_centroid(pts: np.ndarray, best: np.ndarray) -> np.ndarray:
    """Centroid of the candidates in the little blob around the chosen pixel.

    Candidate bands are one-pixel dilations, so the pixels near a crossing
    form a small cluster; averaging it centers the landmark on the true
    crossing instead of the cluster's extreme corner.
    """
    near = np.max(np.abs(pts - best), axis=1) <= 2.0
    return pts[near].mean(axis=0)


def _most_coronal_per_side(
    candidates: np.ndarray, axis: ToothAxis
) -> dict[str, Optional[tuple[float, float]]]:
    """Split candidate points by cross-track sign; keep the most coronal each side.

    Ties on the along-axis coordinate break toward smaller cross-track
    magnitude, then smaller x, then smaller y. Points exactly on the axis
    belong to neither side. The returned point is the centroid of the
    cluster around the winning pixel.
    """
    out: dict[str, Optional[tuple[float, float]]] = {"neg": None, "pos": None}
    if candidates.size == 0:
        return out
    t = axis.along(candidates)
    u = axis.cross(candidates)
    for name, sel in (("neg", u < 0), ("pos", u > 0)):
        if not sel.any():
            continue
        pts, ts, us = candidates[sel], t[sel], u[sel]
        order = np.lexsort((pts[:, 1], pts[:, 0], np.abs(us), ts))
        best = pts[order[0]]
        coronal = pts[ts <= ts[order[0]] + 2.0]
        point = _cluster_centroid(coronal, best)
        out[name] = (float(point[0]), float(point[1]))
    return out


def bone_intersections(
    bone_contour_mask: np.ndarray, tooth_region: np.ndarray, axis: ToothAxis
) -> dict[str, Optional[tuple[float, float]]]:
    """Where the bone-area contour crosses the tooth outline, per side.

    Both curves are dilated by one pixel so rasterized lines that run next
    to each other still intersect. A side with no candidate maps to None.
    """
    band = mask_and(
        dilate(bone_contour_mask, INTERSECTION_BAND_PX),
        dilate(boundary_mask(tooth_region), INTERSECTION_BAND_PX),
    )
    return _most_coronal_per_side(_pixel_centers(band), axis)


def cej_intersections(
    cej_mask: np.ndarray, tooth_region: np.ndarray, axis: ToothAxis
) -> dict[str, Optional[tuple[float, float]]]:
    """Where the CEJ curve crosses the tooth outline, per side."""
    band = mask_and(
        dilate(cej_mask, INTERSECTION_BAND_PX),
        dilate(boundary_mask(tooth_region), INTERSECTION_BAND_PX),
    )
    return _most_coronal_per_side(_pixel_centers(band), axis)


def locate_root_apices(
    tooth_region: np.ndarray, axis: ToothAxis
) -> tuple[dict[str, Optional[tuple[float, float]]], list[str]]:
    """The most apical tooth pixel on each side of the axis.

    Ties break toward the axis, then smaller x, then smaller y. A side with
    no pixels apical of the centroid borrows the other side's apex
    (single-root fallback) and the measurement is flagged. Apices on the
    image border are flagged too (the root may be cut off).
    """
    flags: list[str] = []
    pts = _pixel_centers(tooth_region)
    t = axis.along(pts)
    u = axis.cross(pts)
    h, w = np.asarray(tooth_region).shape

    chosen: dict[str, Optional[tuple[float, float]]] = {"neg": None, "pos": None}
    extremes: list[np.ndarray] = []
    for name, sel in (("neg", (u < 0) & (t > 0)), ("pos", (u > 0) & (t > 0))):
        if not sel.any():
            continue
        cand, ts, us = pts[sel], t[sel], np.abs(u[sel])
        order = np.lexsort((cand[:, 1], cand[:, 0], us, -ts))
        best = cand[order[0]]
        extremes.append(best)
        apical = cand[ts >= ts[order[0]] - 1.0]
        point = _cluster_centroid(apical, best)
        chosen[name] = (float(point[0]), float(point[1]))
    for a, b in (("neg", "pos"), ("pos", "neg")):
        if chosen[a] is None and chosen[b] is not None:
            chosen[a] = chosen[b]
            flags.append(Reasons.SINGLE_ROOT_FALLBACK)
    for best in extremes:
        i, j = int(best[0] - 0.5), int(best[1] - 0.5)
        if i in (0, w - 1) or j in (0, h - 1):
            if Reasons.APEX_AT_BORDER not in flags:
                flags.append(Reasons.APEX_AT_BORDER)
    return chosen, flags


def measure_site(
    side: str,
    cej_point: tuple[float, float],
    bone_point: tuple[float, float],
    apex_point: tuple[float, float],
    axis: ToothAxis,
    spacing: Optional[PixelSpacing],
    extra_reasons: tuple[str, ...] = (),
) -> SiteMeasurement:
    """Measure one site: along-axis CEJ->bone (len1) and CEJ->apex (len2).

    Lengths are clamped at zero. len1 > len2 (bone apical of the apex) is
    anatomically impossible, so the site comes back unreliable with no RBL%.
    Without spacing the mm fields stay None and the ratio uses pixels.
    """
    t_c = float(axis.along(np.asarray(cej_point)))
    t_b = float(axis.along(np.asarray(bone_point)))
    t_a = float(axis.along(np.asarray(apex_point)))
    len1_px = max(t_b - t_c, 0.0)
    len2_px = max(t_a - t_c, 0.0)

    reasons = list(extra_reasons)
    rbl: Optional[float] = None
    if len2_px == 0.0:
        reasons.append(Reasons.ZERO_ROOT)
    elif len1_px > len2_px:
        reasons.append(Reasons.BONE_BELOW_APEX)
    else:
        rbl = min(100.0 * len1_px / len2_px, 100.0)

    len1_mm = len2_mm = None
    if spacing is not None:
        dx, dy = axis.direction
        len1_mm = px_vector_to_mm(len1_px * dx, len1_px * dy, spacing)
        len2_mm = px_vector_to_mm(len2_px * dx, len2_px * dy, spacing)
    else:
        reasons.append(Reasons.NO_SPACING)

    return SiteMeasurement(
        side=side,
        cej_point=tuple(map(float, cej_point)),
        bone_point=tuple(map(float, bone_point)),
        apex_point=tuple(map(float, apex_point)),
        len1_px=len1_px,
        len2_px=len2_px,
        len1_mm=len1_mm,
        len2_mm=len2_mm,
        rbl_percent=rbl,
        reliable=not reasons,
        reasons=tuple(reasons),
    )


def rbl_percent(sites: list[SiteMeasurement]) -> Optional[float]:
    """Tooth-level RBL%: the max over sites that produced a ratio."""
    vals = [s.rbl_percent for s in sites if s.rbl_percent is not None]
    return max(vals) if vals else None


@dataclass(frozen=True)
class ToothMeasurement:
    """Raw geometry output for one tooth, before staging."""

    tooth_fdi: int
    axis: Optional[ToothAxis]
    sites: tuple[SiteMeasurement, ...]
    tooth_rbl_percent: Optional[float]
    flags: tuple[str, ...]  # tooth-level reason codes


def _side_names(axis: ToothAxis, tooth_fdi: Optional[int]) -> dict[str, str]:
    """Map the two cross-track signs to site names.

    With a known tooth number (and the standard patient-right-on-image-left
    display), quadrants 1 and 4 have the midline toward image right, so the
    more-rightward side is mesial; quadrants 2 and 3 mirror that. Without a
    usable mapping the sides stay left/right-unmapped.
    """
    nx = -axis.direction[1]  # x component of the u > 0 normal
    if nx == 0 or tooth_fdi is None:
        return {"neg": "left-unmapped", "pos": "right-unmapped"}
    pos_is_right = nx > 0
    quadrant = quadrant_of_fdi(tooth_fdi)
    if quadrant not in (1, 2, 3, 4):
        return {"neg": "left-unmapped", "pos": "right-unmapped"}
    mesial_is_right = quadrant in (1, 4)
    if pos_is_right == mesial_is_right:
        return {"neg": "distal", "pos": "mesial"}
    return {"neg": "mesial", "pos": "distal"}


def measure_tooth(
    tooth_region: np.ndarray,
    bone_contour_mask: np.ndarray,
    cej_mask: np.ndarray,
    spacing: Optional[PixelSpacing],
    tooth_fdi: int,
    crown_margin_as_cej: bool = False,
) -> ToothMeasurement:
    """Run the full landmark/measurement sequence for one cleaned tooth region."""
    tooth_flags: list[str] = []
    if crown_margin_as_cej:
        tooth_flags.append(Reasons.CROWN_MARGIN)

    region = np.asarray(tooth_region, bool)
    if int(region.sum()) < MIN_TOOTH_PIXELS:
        return ToothMeasurement(
            tooth_fdi=tooth_fdi,
            axis=None,
            sites=(),
            tooth_rbl_percent=None,
            flags=tuple(tooth_flags + [Reasons.TOOTH_TOO_SMALL]),
        )

    band = mask_and(
        dilate(cej_mask, INTERSECTION_BAND_PX),
        dilate(boundary_mask(region), INTERSECTION_BAND_PX),
    )
    cej_candidates = _pixel_centers(band)
    if cej_candidates.size == 0:
        return ToothMeasurement(
            tooth_fdi=tooth_fdi,
            axis=None,
            sites=(),
            tooth_rbl_percent=None,
            flags=tuple(tooth_flags + [Reasons.NO_CEJ]),
        )

    try:
        axis = tooth_axis(region, cej_candidates)
    except GeometryError as exc:
        return ToothMeasurement(
            tooth_fdi=tooth_fdi,
            axis=None,
            sites=(),
            tooth_rbl_percent=None,
            flags=tuple(tooth_flags + [exc.reason]),
        )

    cej_pts = _most_coronal_per_side(cej_candidates, axis)
    bone_pts = bone_intersections(bone_contour_mask, region, axis)
    apex_pts, apex_flags = locate_root_apices(region, axis)
    names = _side_names(axis, tooth_fdi)

    site_extra = tuple(tooth_flags)
    sites: list[SiteMeasurement] = []
    for key in ("neg", "pos"):
        name = names[key]
        missing = []
        if cej_pts[key] is None:
            missing.append(Reasons.NO_CEJ)
        if bone_pts[key] is None:
            missing.append(Reasons.NO_BONE)
        if apex_pts[key] is None:
            missing.append(Reasons.ZERO_ROOT)
        if missing:
            sites.append(
                SiteMeasurement(side=name, reliable=False,
                                reasons=tuple(site_extra) + tuple(missing))
            )
            continue
        sites.append(
            measure_site(
                name,
                cej_pts[key],
                bone_pts[key],
                apex_pts[key],
                axis,
                spacing,
                extra_reasons=site_extra + tuple(apex_flags),
            )
        )

    order = {"mesial": 0, "distal": 1, "left-unmapped": 0, "right-unmapped": 1}
    sites.sort(key=lambda s: order[s.side])
    return ToothMeasurement(
        tooth_fdi=tooth_fdi,
        axis=axis,
        sites=tuple(sites),
        tooth_rbl_percent=rbl_percent(sites),
        flags=tuple(tooth_flags),
    )
